#include "app.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vggsvm/binary_io.hpp"
#include "vggsvm/dataset.hpp"
#include "vggsvm/error.hpp"
#include "vggsvm/featstore.hpp"

namespace vggsvm::cli {

namespace fs = std::filesystem;

namespace {

fs::path artifact(const PipelineConfig& c, std::string_view name) { return c.out_dir / std::string(name); }

std::string fmt(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void require_root(const PipelineConfig& c)
{
    if (c.dataset_root.empty()) throw PreconditionError("--root is required for this command");
}

struct Split
{
    dataset::DatasetManifest all;
    dataset::DatasetManifest train;
    dataset::DatasetManifest test;
};

Split scan_and_split(const PipelineConfig& c, std::uint64_t seed, double fraction, Streams io)
{
    require_root(c);
    Split s;
    s.all = dataset::scan_directory(c.dataset_root, {c.skip_bad});
    for (const auto& bad : s.all.skipped) io.err << "warning: skipped undecodable image " << bad << "\n";
    auto [train, test] = dataset::split(s.all, {fraction, seed});
    s.train = std::move(train);
    s.test = std::move(test);
    return s;
}

void write_manifests(const PipelineConfig& c, const Split& s)
{
    fs::create_directories(c.out_dir);
    dataset::write_manifest_csv(artifact(c, kManifestFile), s.all);
    dataset::write_manifest_csv(artifact(c, kTrainManifestFile), s.train);
    dataset::write_manifest_csv(artifact(c, kTestManifestFile), s.test);
}

// CNN predictions on a manifest, mapped to +/-1 (class 1 is positive).
metrics::ConfusionMatrix cnn_confusion(const vgg::VggModel& model, const dataset::DatasetManifest& m,
                                       dataset::ImageLoader& loader, std::size_t batch_size)
{
    std::vector<std::int8_t> predicted, actual;
    std::vector<dataset::ImageSample> batch;
    for (std::size_t start = 0; start < m.size(); start += batch_size)
    {
        batch.clear();
        for (std::size_t i = start; i < std::min(m.size(), start + batch_size); ++i)
            batch.push_back(loader.load(m.entries[i]));
        const auto logits = vgg::forward(model, dataset::stack_pixels(batch));
        for (std::size_t i = 0; i < batch.size(); ++i)
        {
            const int cls = logits[i * 2 + 1] > logits[i * 2] ? 1 : 0;
            predicted.push_back(dataset::class_to_sign(cls));
            actual.push_back(dataset::class_to_sign(batch[i].label));
        }
    }
    return metrics::confusion(predicted, actual);
}

std::string margin_name(const svm::SvmModel& m)
{
    return m.train_C == svm::kHardMarginC ? "hard" : "soft";
}

fs::path standardizer_path(const fs::path& model) { return fs::path(model.string() + std::string(kStandardizerSuffix)); }

void save_standardizer(const fs::path& path, const svm::Standardizer& s)
{
    nlohmann::json j;
    j["mean"] = s.mean;
    j["scale"] = s.scale;
    io::write_text_atomic(path, j.dump() + "\n");
}

std::optional<svm::Standardizer> load_standardizer(const fs::path& model)
{
    const auto path = standardizer_path(model);
    if (!fs::exists(path)) return std::nullopt;
    std::ifstream in(path);
    try
    {
        const auto j = nlohmann::json::parse(in);
        return svm::Standardizer{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
    }
    catch (const nlohmann::json::exception& e)
    {
        throw RuntimeFailure("malformed standardizer " + path.string() + ": " + e.what());
    }
}

std::set<std::string> read_ids(const fs::path& path)
{
    std::set<std::string> ids;
    for (const auto& e : dataset::read_manifest_csv(path)) ids.insert(e.source_id);
    return ids;
}

}  // namespace

void check_no_leakage(const fs::path& train_ids, const fs::path& test_ids)
{
    const auto train = read_ids(train_ids);
    for (const auto& id : read_ids(test_ids))
        if (train.count(id)) throw RuntimeFailure("train/test leakage: " + id + " appears in both feature sets");
}

std::optional<double> select_metric(const metrics::MetricsReport& r, std::string_view name)
{
    if (name == "accuracy") return r.accuracy;
    if (name == "precision") return r.precision;
    if (name == "sensitivity" || name == "recall") return r.sensitivity;
    if (name == "f_score" || name == "f1") return r.f_score;
    if (name == "hinge_loss") return r.hinge;
    throw PreconditionError("unknown metric '" + std::string(name) +
                            "'; expected accuracy, precision, sensitivity (or recall), f_score (or f1) or hinge_loss");
}

void cmd_ingest(const PipelineConfig& c, Streams io)
{
    const auto s = scan_and_split(c, c.seed, c.train_fraction, io);
    write_manifests(c, s);
    io.out << "classes: " << s.all.class_names[0] << " (label 0, " << s.all.count(0) << " images), "
           << s.all.class_names[1] << " (label 1, " << s.all.count(1) << " images)\n";
    io.out << "split: " << s.train.size() << " train / " << s.test.size() << " test (seed " << c.seed << ")\n";
    io.out << "manifests written to " << c.out_dir.string() << "\n";
}

void cmd_train_cnn(const PipelineConfig& c, Streams io)
{
    c.validate();
    const auto s = scan_and_split(c, c.seed, c.train_fraction, io);
    write_manifests(c, s);

    auto model = vgg::build(c.vgg_config(), c.seed);
    io.out << "training " << vgg::to_string(c.variant) << " (" << model.parameter_count() << " parameters, side "
           << c.input_side << ", scale " << c.channel_scale << ") on " << s.train.size() << " images for " << c.epochs
           << " epochs\n";

    dataset::ImageLoader loader(c.dataset_root, c.input_side);
    const auto history = vgg::train(model, s.train, s.test, loader, c.train_config(), [&](const vgg::EpochRecord& r) {
        io.out << "epoch " << r.epoch << "/" << c.epochs << " train_acc=" << fmt(r.train_accuracy)
               << " train_loss=" << fmt(r.train_loss) << " test_acc=" << fmt(r.test_accuracy)
               << " test_loss=" << fmt(r.test_loss) << "\n";
    });

    const vgg::CheckpointMeta meta{c.seed, c.train_fraction, s.all.class_names};
    vgg::save_checkpoint(artifact(c, kCheckpointFile), model, meta);
    io::write_text_atomic(artifact(c, kTrainLogFile), vgg::history_to_csv(history));

    // Metrics of the network exactly as saved (float32 weights).
    const auto saved = vgg::load_checkpoint(artifact(c, kCheckpointFile));
    const auto cm = cnn_confusion(saved.model, s.test, loader, c.batch_size);
    const std::vector<metrics::ReportRow> rows{
        {"cnn", std::string(vgg::to_string(c.variant)), "n/a", "n/a", metrics::compute(cm)}};
    io::write_text_atomic(artifact(c, kCnnMetricsFile), metrics::report_csv(rows));

    const auto& last = history.back();
    io.out << "final train_acc=" << fmt(last.train_accuracy) << " test_acc=" << fmt(last.test_accuracy) << "\n";
    io.out << "checkpoint written to " << artifact(c, kCheckpointFile).string() << "\n";
}

void cmd_extract(const PipelineConfig& c, const fs::path& checkpoint, Streams io)
{
    const auto ck = vgg::load_checkpoint(checkpoint);
    if (ck.meta.split_seed != c.seed)
        throw PreconditionError("seed mismatch: checkpoint " + checkpoint.string() + " was trained on the split of seed " +
                                std::to_string(ck.meta.split_seed) + " but seed " + std::to_string(c.seed) +
                                " was requested; refusing to extract (train/test leakage)");
    if (ck.meta.train_fraction != c.train_fraction)
        throw PreconditionError("split fraction mismatch: checkpoint used " + fmt(ck.meta.train_fraction, 6) +
                                ", requested " + fmt(c.train_fraction, 6));

    const auto s = scan_and_split(c, ck.meta.split_seed, ck.meta.train_fraction, io);
    if (s.all.class_names != ck.meta.class_names)
        throw PreconditionError("dataset classes (" + s.all.class_names[0] + ", " + s.all.class_names[1] +
                                ") differ from the checkpoint's (" + ck.meta.class_names[0] + ", " +
                                ck.meta.class_names[1] + ")");

    fs::create_directories(c.out_dir);
    dataset::ImageLoader loader(c.dataset_root, ck.model.config.input_side);
    const auto d = ck.model.config.fc_widths[0];
    auto extract = [&](const dataset::DatasetManifest& m, std::string_view file, std::string_view ids) {
        dataset::LabeledFeatureSet set;
        std::vector<double> values;
        values.reserve(m.size() * d);
        for (const auto& entry : m.entries)
        {
            const auto sample = loader.load(entry);
            const auto f = vgg::extract_features(ck.model, sample.pixels);
            values.insert(values.end(), f.begin(), f.end());
            set.labels.push_back(dataset::class_to_sign(entry.label));
        }
        set.vectors = Tensor({m.size(), d}, std::move(values));
        featstore::write(set, artifact(c, file));
        dataset::write_manifest_csv(artifact(c, ids), m);
        io.out << "wrote " << artifact(c, file).string() << " (" << m.size() << " x " << d << ")\n";
    };
    extract(s.train, kTrainFeaturesFile, kTrainIdsFile);
    extract(s.test, kTestFeaturesFile, kTestIdsFile);
    check_no_leakage(artifact(c, kTrainIdsFile), artifact(c, kTestIdsFile));
}

svm::TrainResult cmd_train_svm(const PipelineConfig& c, const fs::path& train_features, Streams io)
{
    auto data = featstore::read(train_features);
    const auto model_path = artifact(c, kSvmModelFile);
    fs::create_directories(c.out_dir);
    if (c.standardize)
    {
        const auto st = svm::Standardizer::fit(data.vectors);
        data.vectors = st.apply(data.vectors);
        save_standardizer(standardizer_path(model_path), st);
    }
    else
    {
        fs::remove(standardizer_path(model_path));
    }

    auto result = svm::train(data, c.kernel_spec(), c.svm_config());
    svm::save_model(model_path, result.model);
    io.out << "svm: kernel=" << svm::to_string(c.kernel) << " margin=" << svm::to_string(c.margin)
           << " C=" << result.model.train_C << " gamma=" << result.model.kernel.gamma << "\n";
    io.out << "support vectors: " << result.model.size() << " of " << data.size() << "\n";
    if (result.converged)
        io.out << "converged after " << result.iterations << " iterations (" << result.sweeps << " sweeps)\n";
    else
        io.out << "NOT converged after " << result.iterations << " iterations (max KKT violation "
               << result.max_kkt_violation << ")\n";
    for (const auto& w : result.warnings) io.err << "warning: " << w << "\n";
    io.out << "model written to " << model_path.string() << "\n";
    return result;
}

metrics::MetricsReport cmd_evaluate(const PipelineConfig& c, const fs::path& model_path, const fs::path& test_features,
                                    Streams io)
{
    const auto model = svm::load_model(model_path);
    auto data = featstore::read(test_features);
    if (data.feature_dim() != model.feature_dim())
        throw PreconditionError("feature dimension " + std::to_string(data.feature_dim()) + " of " +
                                test_features.string() + " does not match the model's " +
                                std::to_string(model.feature_dim()));
    if (const auto st = load_standardizer(model_path))
    {
        if (st->mean.size() != data.feature_dim()) throw RuntimeFailure("standardizer dimension mismatch");
        data.vectors = st->apply(data.vectors);
    }

    const auto predicted = svm::predict(model, data.vectors);
    const auto cm = metrics::confusion(predicted, data.labels);
    const auto report = metrics::compute(cm, svm::hinge_loss(model, data));

    std::vector<metrics::ReportRow> rows;
    const auto cnn_file = artifact(c, kCnnMetricsFile);
    if (fs::exists(cnn_file))
    {
        std::ifstream in(cnn_file);
        std::string header, line;
        std::getline(in, header);
        std::ostringstream extra;
        while (std::getline(in, line))
            if (!line.empty()) extra << line << "\n";
        const metrics::ReportRow svm_row{"svm", std::string(vgg::to_string(c.variant)),
                                         std::string(svm::to_string(model.kernel.kind)), margin_name(model), report};
        fs::create_directories(c.out_dir);
        io::write_text_atomic(artifact(c, kReportFile), std::string(metrics::kReportHeader) + "\n" + extra.str() +
                                                            metrics::report_row(svm_row) + "\n");
        rows.push_back(svm_row);
    }
    else
    {
        rows.push_back({"svm", std::string(vgg::to_string(c.variant)), std::string(svm::to_string(model.kernel.kind)),
                        margin_name(model), report});
        fs::create_directories(c.out_dir);
        io::write_text_atomic(artifact(c, kReportFile), metrics::report_csv(rows));
    }
    io::write_text_atomic(artifact(c, kConfusionFile), metrics::confusion_csv(cm));

    io.out << metrics::kReportHeader << "\n" << metrics::report_row(rows.back()) << "\n";
    io.out << "confusion: tp=" << cm.tp << " fn=" << cm.fn << " fp=" << cm.fp << " tn=" << cm.tn << "\n";
    return report;
}

void cmd_pipeline(const PipelineConfig& c, Streams io)
{
    c.validate();
    io.out << "== train-cnn\n";
    cmd_train_cnn(c, io);
    io.out << "== extract\n";
    cmd_extract(c, artifact(c, kCheckpointFile), io);
    check_no_leakage(artifact(c, kTrainIdsFile), artifact(c, kTestIdsFile));
    io.out << "== train-svm\n";
    (void)cmd_train_svm(c, artifact(c, kTrainFeaturesFile), io);
    io.out << "== evaluate\n";
    (void)cmd_evaluate(c, artifact(c, kSvmModelFile), artifact(c, kTestFeaturesFile), io);
}

namespace {

struct Overrides
{
    std::string root, out, variant, kernel, margin, config_file;
    std::size_t side = 0, epochs = 0, batch = 0, fc_hidden = 0, max_passes = 0, max_iterations = 0;
    double clip_norm = 0, scale = 0, lr = 0, c = 0, gamma = 0, fraction = 0, momentum = 0, tolerance = 0;
    std::uint64_t seed = 0;
    bool standardize = false, skip_bad = false, desk = false, dump = false;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"VGG feature extraction with SVM classification", "vggsvm"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    Overrides o;
    std::map<std::string, CLI::Option*> opt;
    opt["config"] = app.add_option("--config", o.config_file, "JSON config file (flags override it)");
    opt["root"] = app.add_option("--root", o.root, "dataset root with two class subdirectories");
    opt["out"] = app.add_option("--out", o.out, "output directory");
    opt["variant"] = app.add_option("--variant", o.variant, "vgg11|vgg13|vgg16|vgg19");
    opt["side"] = app.add_option("--side", o.side, "input side in pixels");
    opt["scale"] = app.add_option("--scale", o.scale, "channel width multiplier in (0, 1]");
    opt["fc_hidden"] = app.add_option("--fc-hidden", o.fc_hidden, "hidden FC width (default 4096*scale)");
    opt["seed"] = app.add_option("--seed", o.seed, "seed for split, initialisation, shuffling and SMO");
    opt["fraction"] = app.add_option("--fraction", o.fraction, "train fraction of the split");
    opt["epochs"] = app.add_option("--epochs", o.epochs, "training epochs");
    opt["lr"] = app.add_option("--lr", o.lr, "learning rate");
    opt["batch"] = app.add_option("--batch", o.batch, "training batch size");
    opt["momentum"] = app.add_option("--momentum", o.momentum, "SGD momentum in [0, 1)");
    opt["clip_norm"] = app.add_option("--clip-norm", o.clip_norm, "clip the batch gradient to this L2 norm (0 = off)");
    opt["kernel"] = app.add_option("--kernel", o.kernel, "linear|rbf");
    opt["margin"] = app.add_option("--margin", o.margin, "soft|hard");
    opt["c"] = app.add_option("--c", o.c, "SVM box bound (soft margin)");
    opt["gamma"] = app.add_option("--gamma", o.gamma, "RBF width");
    opt["tolerance"] = app.add_option("--tolerance", o.tolerance, "SMO KKT tolerance");
    opt["max_passes"] = app.add_option("--max-passes", o.max_passes, "clean SMO sweeps required to stop");
    opt["max_iterations"] = app.add_option("--max-iterations", o.max_iterations, "SMO iteration cap");
    opt["standardize"] = app.add_flag("--standardize", o.standardize, "z-score features with train statistics");
    opt["skip_bad"] = app.add_flag("--skip-bad", o.skip_bad, "skip undecodable images instead of failing");
    app.add_flag("--desk-scale", o.desk, "preset: side 32, scale 1/8, 20 epochs, clip norm 5");
    app.add_flag("--dump-config", o.dump, "print the resolved configuration as JSON and exit");

    auto* ingest = app.add_subcommand("ingest", "scan and split the dataset");
    auto* train_cnn = app.add_subcommand("train-cnn", "train the VGG network");
    auto* extract = app.add_subcommand("extract", "extract feature files from a checkpoint");
    auto* train_svm = app.add_subcommand("train-svm", "train the SVM on a feature file");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate an SVM model on a feature file");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage in sequence");
    std::string checkpoint, train_features, model_file, test_features;
    extract->add_option("checkpoint", checkpoint, "checkpoint (default <out>/model.hvgg)");
    train_svm->add_option("features", train_features, "training features (default <out>/train.hfv)");
    evaluate->add_option("model", model_file, "SVM model (default <out>/model.hsvm)");
    evaluate->add_option("features", test_features, "test features (default <out>/test.hfv)");
    std::string metric;
    evaluate->add_option("--metric", metric, "also print this metric alone on the last line (recall = sensitivity)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        out << app.help();
        return 0;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try
    {
        PipelineConfig c;
        if (!o.config_file.empty()) apply_json_file(c, o.config_file);
        if (o.desk) apply_desk_scale(c);
        auto given = [&](const char* name) { return opt.at(name)->count() > 0; };
        if (given("root")) c.dataset_root = o.root;
        if (given("out")) c.out_dir = o.out;
        if (given("variant")) c.variant = vgg::parse_variant(o.variant);
        if (given("side")) c.input_side = o.side;
        if (given("scale")) c.channel_scale = o.scale;
        if (given("fc_hidden")) c.fc_hidden = o.fc_hidden;
        if (given("seed")) c.seed = o.seed;
        if (given("fraction")) c.train_fraction = o.fraction;
        if (given("epochs")) c.epochs = o.epochs;
        if (given("lr")) c.learning_rate = o.lr;
        if (given("batch")) c.batch_size = o.batch;
        if (given("momentum")) c.momentum = o.momentum;
        if (given("clip_norm")) c.clip_norm = o.clip_norm;
        if (given("kernel")) c.kernel = svm::parse_kernel(o.kernel);
        if (given("margin")) c.margin = svm::parse_margin(o.margin);
        if (given("c")) c.C = o.c;
        if (given("gamma")) c.gamma = o.gamma;
        if (given("tolerance")) c.kkt_tolerance = o.tolerance;
        if (given("max_passes")) c.max_passes = o.max_passes;
        if (given("max_iterations")) c.max_iterations = o.max_iterations;
        if (given("standardize")) c.standardize = o.standardize;
        if (given("skip_bad")) c.skip_bad = o.skip_bad;

        if (o.dump)
        {
            out << to_json(c) << "\n";
            return 0;
        }
        c.validate();

        const Streams io{out, err};
        auto or_default = [&](const std::string& given_path, std::string_view name) {
            return given_path.empty() ? artifact(c, name) : fs::path(given_path);
        };
        if (ingest->parsed()) cmd_ingest(c, io);
        else if (train_cnn->parsed()) cmd_train_cnn(c, io);
        else if (extract->parsed()) cmd_extract(c, or_default(checkpoint, kCheckpointFile), io);
        else if (train_svm->parsed()) (void)cmd_train_svm(c, or_default(train_features, kTrainFeaturesFile), io);
        else if (evaluate->parsed())
        {
            if (!metric.empty()) (void)select_metric({}, metric);
            const auto report =
                cmd_evaluate(c, or_default(model_file, kSvmModelFile), or_default(test_features, kTestFeaturesFile), io);
            if (!metric.empty()) out << metric << "=" << metrics::format_value(select_metric(report, metric)) << "\n";
        }
        else if (pipeline->parsed()) cmd_pipeline(c, io);
        else
        {
            err << app.help() << "error: a command is required\n";
            return 2;
        }
        return 0;
    }
    catch (const PreconditionError& e)
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace vggsvm::cli
