// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "fixture.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"
#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"
#include "vggsvm/featstore.hpp"
#include "vggsvm/layers.hpp"
#include "vggsvm/metrics.hpp"
#include "vggsvm/svm.hpp"
#include "vggsvm/vgg.hpp"

namespace fs = std::filesystem;
using namespace vggsvm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome
{
    bool pass = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (pass) detail = why;
        pass = false;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, const char* f = "%.3g")
{
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

double weighted_sum(const Tensor& t, const Tensor& w)
{
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
    return s;
}

// 1 -------------------------------------------------------------------------

Outcome gradients()
{
    Outcome o;
    const auto t0 = Clock::now();
    constexpr double kTol = 1e-4;
    double worst = 0.0;
    auto check = [&](const Tensor& a, const Tensor& n, const char* what, int k) {
        const double e = oracle::relative_error(a, n);
        worst = std::max(worst, e);
        if (!(e < kTol)) o.fail(std::string(what) + " case " + std::to_string(k) + " relative error " + num(e));
    };
    for (int k = 0; k < 20; ++k)
    {
        std::mt19937_64 rng(7000 + k);
        {
            const std::size_t n = 1 + k % 2, ci = 1 + k % 3, co = 1 + (k / 2) % 3, h = 3 + k % 3, w = 2 + k % 4;
            const auto x = oracle::random_tensor(rng, {n, ci, h, w});
            const auto W = oracle::random_tensor(rng, {co, ci, 3, 3});
            const auto b = oracle::random_tensor(rng, {co});
            const auto R = oracle::random_tensor(rng, {n, co, h, w});
            Tensor gx(x.shape()), gw(W.shape()), gb(b.shape());
            nn::conv3x3_backward(x, W, R, &gx, gw, gb);
            check(gx, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::conv3x3_forward(p, W, b), R); }, x), "conv input", k);
            check(gw, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::conv3x3_forward(x, p, b), R); }, W), "conv weight", k);
            check(gb, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::conv3x3_forward(x, W, p), R); }, b), "conv bias", k);
        }
        {
            auto x = oracle::random_tensor(rng, {2, 3, 4});
            for (auto& v : x.data()) v = v >= 0 ? v + 1e-3 : v - 1e-3;
            const auto R = oracle::random_tensor(rng, x.shape());
            check(nn::relu_backward(nn::relu_forward(x), R),
                  oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::relu_forward(p), R); }, x), "relu", k);
        }
        {
            const std::size_t h = 2 * (1 + k % 3), w = 2 * (1 + k % 2);
            Tensor x({2, 2, h, w});
            std::vector<double> levels(x.size());
            for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = 0.01 * static_cast<double>(i);
            std::shuffle(levels.begin(), levels.end(), rng);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = levels[i];
            const auto fwd = nn::maxpool2_forward(x);
            const auto R = oracle::random_tensor(rng, fwd.output.shape());
            check(nn::maxpool2_backward(x.shape(), fwd.argmax, R),
                  oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::maxpool2_forward(p).output, R); }, x), "maxpool", k);
        }
        {
            const std::size_t n = 1 + k % 4, in = 1 + k % 7, out = 1 + k % 5;
            const auto x = oracle::random_tensor(rng, {n, in});
            const auto W = oracle::random_tensor(rng, {out, in});
            const auto b = oracle::random_tensor(rng, {out});
            const auto R = oracle::random_tensor(rng, {n, out});
            Tensor gx(x.shape()), gw(W.shape()), gb(b.shape());
            nn::linear_backward(x, W, R, &gx, gw, gb);
            check(gx, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::linear_forward(p, W, b), R); }, x), "fc input", k);
            check(gw, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::linear_forward(x, p, b), R); }, W), "fc weight", k);
            check(gb, oracle::numeric_gradient([&](const Tensor& p) { return weighted_sum(nn::linear_forward(x, W, p), R); }, b), "fc bias", k);
        }
        {
            const std::size_t n = 1 + k % 5, c = 2 + k % 4;
            const auto logits = oracle::random_tensor(rng, {n, c}, -3, 3);
            std::vector<int> labels(n);
            for (auto& l : labels) l = std::uniform_int_distribution<int>(0, static_cast<int>(c) - 1)(rng);
            check(nn::cross_entropy(logits, labels).grad_logits,
                  oracle::numeric_gradient([&](const Tensor& p) { return nn::cross_entropy(p, labels).loss; }, logits), "softmax-ce", k);
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 30.0) o.fail("took " + num(secs) + " s");
    if (o.pass) o.detail = "5 layer types x 20 cases, worst relative error " + num(worst) + ", " + num(secs) + " s";
    return o;
}

// 2 -------------------------------------------------------------------------

Outcome smo_vs_oracle()
{
    Outcome o;
    const auto t0 = Clock::now();
    const double Cs[] = {0.001, 1.0, 1e6};
    double worst_gap = 0.0, worst_kkt = 0.0;
    for (int k = 0; k < 50; ++k)
    {
        std::mt19937_64 rng(9000 + k);
        const bool rbf = k % 2;
        const double C = Cs[k % 3];
        const std::size_t n = 4 + k % 27, d = 1 + k % 5;
        const auto p = oracle::random_problem(rng, n, d, 0.3, C > 1e3 ? 0.0 : 0.1);
        const double gamma = rbf ? 1.0 / static_cast<double>(d) : 0.0;
        const auto data = oracle::to_feature_set(p);
        const auto kernel = rbf ? svm::KernelSpec::rbf(gamma) : svm::KernelSpec::linear();
        const auto K = oracle::kernel_matrix(rbf, gamma, p.X);
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) y(i) = p.y[i];

        svm::SvmTrainConfig cfg;
        cfg.C = C;
        cfg.seed = static_cast<std::uint64_t>(k);
        const auto run = svm::train(data, kernel, cfg);
        Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(run.alphas.data(), static_cast<Eigen::Index>(n));
        const double kkt = oracle::kkt_violation(K, y, a, run.model.bias, C, 0.0);
        worst_kkt = std::max(worst_kkt, kkt);
        if (!run.converged || !(kkt <= 1e-3))
            o.fail("dataset " + std::to_string(k) + ": KKT violation " + num(kkt));

        // The objective comparison uses a converged-to-round-off SMO run.
        cfg.kkt_tolerance = 1e-8;
        const auto tight = svm::train(data, kernel, cfg);
        const auto ref = oracle::solve_dual(K, y, C);
        const double gap = std::abs(tight.dual_objective - ref.objective);
        worst_gap = std::max(worst_gap, gap);
        if (!(gap <= 1e-5)) o.fail("dataset " + std::to_string(k) + ": objective gap " + num(gap));
    }
    const double secs = seconds_since(t0);
    if (secs >= 60.0) o.fail("took " + num(secs) + " s");
    if (o.pass)
        o.detail = "50 datasets, worst objective gap " + num(worst_gap) + ", worst KKT violation " + num(worst_kkt) +
                   ", " + num(secs) + " s";
    return o;
}

// 3 -------------------------------------------------------------------------

Outcome two_point()
{
    Outcome o;
    dataset::LabeledFeatureSet data;
    data.vectors = Tensor({2, 2}, std::vector<double>{1, 0, -1, 0});
    data.labels = {1, -1};
    svm::SvmTrainConfig cfg;
    cfg.margin = svm::MarginMode::Hard;
    const auto r = svm::train(data, svm::KernelSpec::linear(), cfg);
    const double e = std::max({std::abs(r.alphas[0] - 0.5), std::abs(r.alphas[1] - 0.5), std::abs(r.model.bias)});
    if (!(e <= 1e-6)) o.fail("alpha=(" + num(r.alphas[0], "%.9f") + ", " + num(r.alphas[1], "%.9f") + "), b=" + num(r.model.bias));
    else o.detail = "alpha=(" + num(r.alphas[0], "%.9f") + ", " + num(r.alphas[1], "%.9f") + "), b=" + num(r.model.bias);
    return o;
}

// 4 -------------------------------------------------------------------------

Outcome xor_kernels()
{
    Outcome o;
    dataset::LabeledFeatureSet data;
    data.vectors = Tensor({4, 2}, std::vector<double>{0, 0, 1, 1, 0, 1, 1, 0});
    data.labels = {-1, -1, 1, 1};
    svm::SvmTrainConfig cfg;
    cfg.margin = svm::MarginMode::Hard;
    auto correct = [&](const svm::KernelSpec& k) {
        const auto model = svm::train(data, k, cfg).model;
        const auto pred = svm::predict(model, data.vectors);
        int c = 0;
        for (std::size_t i = 0; i < 4; ++i) c += pred[i] == data.labels[i];
        return c;
    };
    const int rbf = correct(svm::KernelSpec::rbf(1.0));
    const int lin = correct(svm::KernelSpec::linear());
    if (rbf != 4 || lin > 3) o.fail("rbf " + std::to_string(rbf) + "/4, linear " + std::to_string(lin) + "/4");
    else o.detail = "rbf " + std::to_string(rbf) + "/4, linear " + std::to_string(lin) + "/4";
    return o;
}

// 5 -------------------------------------------------------------------------

Outcome metric_formulas()
{
    Outcome o;
    std::mt19937_64 rng(5);
    std::size_t undefined_cases = 0;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    for (int k = 0; k < 1000; ++k)
    {
        // A third of the matrices get zeroed cells so every zero-denominator path is exercised.
        std::uniform_int_distribution<std::size_t> cell(0, k % 3 == 0 ? 2 : 60);
        metrics::ConfusionMatrix cm{cell(rng), cell(rng), cell(rng), cell(rng)};
        if (cm.total() == 0) cm.tn = 1;

        // Rebuild label vectors from the counts and go through the public path.
        std::vector<std::int8_t> pred, act;
        auto add = [&](std::size_t count, int p, int a) {
            for (std::size_t i = 0; i < count; ++i) pred.push_back(static_cast<std::int8_t>(p)), act.push_back(static_cast<std::int8_t>(a));
        };
        add(cm.tp, 1, 1);
        add(cm.tn, -1, -1);
        add(cm.fp, 1, -1);
        add(cm.fn, -1, 1);
        const auto got = metrics::confusion(pred, act);
        if (got.tp != cm.tp || got.tn != cm.tn || got.fp != cm.fp || got.fn != cm.fn)
        {
            o.fail("confusion counts differ at case " + std::to_string(k));
            continue;
        }
        const auto r = metrics::compute(got);
        const double tp = double(cm.tp), tn = double(cm.tn), fp = double(cm.fp), fn = double(cm.fn);

        auto expect = [&](const std::optional<double>& v, double num_, double den, const char* what) {
            if (den == 0.0)
            {
                ++undefined_cases;
                if (v) o.fail(std::string(what) + " should be undefined at case " + std::to_string(k));
            }
            else if (!v || !near(*v, num_ / den))
                o.fail(std::string(what) + " wrong at case " + std::to_string(k));
        };
        expect(r.accuracy, tp + tn, tp + tn + fp + fn, "accuracy");
        expect(r.precision, tp, tp + fp, "precision");
        expect(r.sensitivity, tp, tp + fn, "sensitivity");
        expect(r.f_score, 2 * tp, 2 * tp + fp + fn, "f_score");
        if (r.precision && r.sensitivity && *r.precision > 0 && *r.sensitivity > 0)
        {
            const double hm = 2.0 / (1.0 / *r.precision + 1.0 / *r.sensitivity);
            if (!r.f_score || !near(*r.f_score, hm)) o.fail("harmonic-mean identity fails at case " + std::to_string(k));
        }
        for (const auto* v : {&r.accuracy, &r.precision, &r.sensitivity, &r.f_score})
            if (!*v && metrics::format_value(*v) != "n/a") o.fail("undefined value not rendered as n/a");
    }
    if (undefined_cases == 0) o.fail("no zero-denominator case was generated");
    if (o.pass) o.detail = "1000 matrices, " + std::to_string(undefined_cases) + " undefined metrics reported as n/a";
    return o;
}

// 6 -------------------------------------------------------------------------

struct CliRun
{
    int code;
    std::string out, err;
};

CliRun cli_run(std::vector<std::string> args)
{
    args.insert(args.begin(), "vggsvm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome desk_pipeline()
{
    Outcome o;
    testutil::TempDir dir("acceptance");
    cli::write_blob_fixture(dir / "data", {100, 32, 0});
    const auto t0 = Clock::now();
    std::vector<fs::path> outs{dir / "run1", dir / "run2"};
    for (const auto& out : outs)
    {
        const auto r = cli_run({"pipeline", "--desk-scale", "--root", (dir / "data").string(), "--out", out.string()});
        if (r.code != 0)
        {
            o.fail("pipeline exited " + std::to_string(r.code) + ": " + r.err);
            return o;
        }
    }
    const double secs = seconds_since(t0);

    const auto report = slurp(outs[0] / "report.csv");
    if (report != slurp(outs[1] / "report.csv")) o.fail("report CSVs differ between runs");
    for (const char* f : {"train.hfv", "test.hfv", "model.hvgg", "model.hsvm", "confusion.csv"})
        if (slurp(outs[0] / f) != slurp(outs[1] / f)) o.fail(std::string(f) + " differs between runs");

    double accuracy = -1.0;
    std::istringstream lines(report);
    for (std::string line; std::getline(lines, line);)
        if (line.rfind("svm,", 0) == 0)
        {
            std::istringstream cells(line);
            std::string cell;
            for (int i = 0; i < 5 && std::getline(cells, cell, ','); ++i) {}
            accuracy = std::stod(cell);
        }
    if (!(accuracy >= 0.95)) o.fail("SVM test accuracy " + num(accuracy, "%.4f"));
    if (secs >= 300.0) o.fail("two runs took " + num(secs) + " s");
    if (o.pass)
        o.detail = "SVM test accuracy " + num(accuracy, "%.4f") + ", identical reports, two runs in " + num(secs, "%.1f") + " s";
    return o;
}

// 7 -------------------------------------------------------------------------

Outcome parameter_counts()
{
    Outcome o;
    const auto v16 = vgg::parameter_count(vgg::make_config(vgg::Variant::Vgg16, 1.0, 224, 1000));
    if (v16 != 138'357'544u) o.fail("VGG16 has " + std::to_string(v16));
    const std::pair<vgg::Variant, int> all[] = {
        {vgg::Variant::Vgg11, 11}, {vgg::Variant::Vgg13, 13}, {vgg::Variant::Vgg16, 16}, {vgg::Variant::Vgg19, 19}};
    std::string counts;
    for (const auto& [v, depth] : all)
    {
        const auto cfg = vgg::make_config(v, 1.0, 224, 1000);
        const auto got = vgg::parameter_count(cfg);
        const auto want = oracle::vgg_parameter_count(depth, 4096, 4096, 1000);
        if (got != want) o.fail(std::string(vgg::to_string(v)) + ": " + std::to_string(got) + " vs " + std::to_string(want));
        // The allocated tensors must agree with the closed form too.
        if (allocate_params(cfg).count() != got) o.fail(std::string(vgg::to_string(v)) + ": allocated size differs");
        counts += (counts.empty() ? "" : ", ") + std::string(vgg::to_string(v)) + " " + std::to_string(got);
    }
    if (o.pass) o.detail = counts;
    return o;
}

// 8 -------------------------------------------------------------------------

Outcome feature_files()
{
    Outcome o;
    testutil::TempDir dir("featrt");
    std::mt19937_64 rng(8);
    std::size_t corruptions = 0;
    for (int k = 0; k < 200 && o.pass; ++k)
    {
        const std::size_t n = 1 + rng() % 40, d = 1 + rng() % 64;
        dataset::LabeledFeatureSet set;
        set.vectors = oracle::random_tensor(rng, {n, d}, -1e3, 1e3);
        for (std::size_t i = 0; i < n; ++i) set.labels.push_back(rng() % 2 ? 1 : -1);

        const auto a = dir / "a.hfv", b = dir / "b.hfv";
        featstore::write(set, a);
        const auto back = featstore::read(a);
        featstore::write(back, b);
        const auto bytes = io::read_file(a);
        if (bytes != io::read_file(b)) o.fail("set " + std::to_string(k) + " not byte-identical after write-read-write");
        if (back.labels != set.labels) o.fail("labels changed in set " + std::to_string(k));
        for (std::size_t i = 0; i < set.vectors.size(); ++i)
            if (back.vectors[i] != static_cast<double>(static_cast<float>(set.vectors[i])))
            {
                o.fail("value changed in set " + std::to_string(k));
                break;
            }

        // Every payload byte for the first sets, a random sample afterwards.
        std::vector<std::size_t> offsets;
        if (k < 10)
            for (std::size_t i = featstore::kHeaderSize; i < bytes.size(); ++i) offsets.push_back(i);
        else
            for (int j = 0; j < 16; ++j)
                offsets.push_back(featstore::kHeaderSize + rng() % (bytes.size() - featstore::kHeaderSize));
        for (const auto off : offsets)
        {
            auto bad = bytes;
            bad[off] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
            ++corruptions;
            try
            {
                (void)featstore::decode(bad);
                o.fail("corrupted byte " + std::to_string(off) + " of set " + std::to_string(k) + " went unnoticed");
                break;
            }
            catch (const FormatError&)
            {
            }
        }
    }
    if (o.pass) o.detail = "200 round trips, " + std::to_string(corruptions) + " single-byte corruptions all detected";
    return o;
}

// 9 -------------------------------------------------------------------------

Outcome defaults()
{
    Outcome o;
    const auto r = cli_run({"--dump-config"});
    if (r.code != 0)
    {
        o.fail("dump exited " + std::to_string(r.code));
        return o;
    }
    const auto j = nlohmann::json::parse(r.out);
    auto expect = [&](const char* key, const nlohmann::json& want) {
        if (j.at(key) != want) o.fail(std::string(key) + " = " + j.at(key).dump());
    };
    expect("lr", 0.001);
    expect("epochs", 200);
    expect("batch", 32);
    expect("c", 0.001);
    expect("gamma", 0.001);
    expect("side", 224);
    if (o.pass) o.detail = "lr 0.001, epochs 200, batch 32, C 0.001, gamma 0.001, side 224";
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"layer gradients match central differences", gradients},
        {"SMO matches the dual oracle and satisfies KKT", smo_vs_oracle},
        {"two-point linear hard-margin solution", two_point},
        {"XOR separable by RBF, not by linear", xor_kernels},
        {"metric formulas and undefined cases", metric_formulas},
        {"desk pipeline accuracy, runtime and determinism", desk_pipeline},
        {"VGG parameter counts", parameter_counts},
        {"feature-file round trip and corruption detection", feature_files},
        {"default configuration", defaults},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        Outcome o;
        try
        {
            o = criteria[i].second();
        }
        catch (const std::exception& e)
        {
            o.fail(std::string("exception: ") + e.what());
        }
        failed += !o.pass;
        std::printf("criterion %zu: %s  %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
