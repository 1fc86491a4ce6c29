#include "config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vggsvm/error.hpp"

namespace vggsvm::cli {

using nlohmann::json;

vgg::VggConfig PipelineConfig::vgg_config() const
{
    return vgg::make_config(variant, channel_scale, input_side, 2, fc_hidden);
}

vgg::TrainConfig PipelineConfig::train_config() const
{
    vgg::TrainConfig tc;
    tc.learning_rate = learning_rate;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.momentum = momentum;
    tc.max_grad_norm = clip_norm;
    tc.seed = seed;
    return tc;
}

svm::KernelSpec PipelineConfig::kernel_spec() const
{
    return {kernel, kernel == svm::KernelKind::Rbf ? gamma : 0.0};
}

svm::SvmTrainConfig PipelineConfig::svm_config() const
{
    svm::SvmTrainConfig c;
    c.C = C;
    c.margin = margin;
    c.kkt_tolerance = kkt_tolerance;
    c.max_passes = max_passes;
    c.max_iterations = max_iterations;
    c.seed = seed;
    return c;
}

void PipelineConfig::validate() const
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw PreconditionError("fraction must lie strictly between 0 and 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw PreconditionError("lr must be a finite positive number");
    (void)vgg_config();
    vgg::validate(train_config());
    kernel_spec().validate();
    svm_config().validate();
}

void apply_desk_scale(PipelineConfig& config)
{
    config.input_side = 32;
    config.channel_scale = 1.0 / 8.0;
    config.epochs = 20;
    config.clip_norm = 5.0;
}

std::string to_json(const PipelineConfig& c)
{
    json j;
    j["root"] = c.dataset_root.string();
    j["out"] = c.out_dir.string();
    j["variant"] = std::string(vgg::to_string(c.variant));
    j["scale"] = c.channel_scale;
    j["side"] = c.input_side;
    j["fc_hidden"] = c.fc_hidden;
    j["seed"] = c.seed;
    j["fraction"] = c.train_fraction;
    j["skip_bad"] = c.skip_bad;
    j["lr"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch_size;
    j["momentum"] = c.momentum;
    j["clip_norm"] = c.clip_norm;
    j["kernel"] = std::string(svm::to_string(c.kernel));
    j["gamma"] = c.gamma;
    j["margin"] = std::string(svm::to_string(c.margin));
    j["c"] = c.C;
    j["tolerance"] = c.kkt_tolerance;
    j["max_passes"] = c.max_passes;
    j["max_iterations"] = c.max_iterations;
    j["standardize"] = c.standardize;
    return j.dump(2);
}

namespace {

template <typename T>
T get(const json& value, const std::string& key)
{
    try
    {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
        {
            if (!value.is_number_unsigned()) throw PreconditionError("");
        }
        return value.get<T>();
    }
    catch (const std::exception&)
    {
        throw PreconditionError("config key '" + key + "' has the wrong type");
    }
}

}  // namespace

void apply_json(PipelineConfig& c, const std::string& json_text)
{
    json j;
    try
    {
        j = json::parse(json_text);
    }
    catch (const json::parse_error& e)
    {
        throw PreconditionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw PreconditionError("config must be a JSON object");

    for (const auto& [key, value] : j.items())
    {
        if (key == "root") c.dataset_root = get<std::string>(value, key);
        else if (key == "out") c.out_dir = get<std::string>(value, key);
        else if (key == "variant") c.variant = vgg::parse_variant(get<std::string>(value, key));
        else if (key == "scale") c.channel_scale = get<double>(value, key);
        else if (key == "side") c.input_side = get<std::size_t>(value, key);
        else if (key == "fc_hidden") c.fc_hidden = get<std::size_t>(value, key);
        else if (key == "seed") c.seed = get<std::uint64_t>(value, key);
        else if (key == "fraction") c.train_fraction = get<double>(value, key);
        else if (key == "skip_bad") c.skip_bad = get<bool>(value, key);
        else if (key == "lr") c.learning_rate = get<double>(value, key);
        else if (key == "epochs") c.epochs = get<std::size_t>(value, key);
        else if (key == "batch") c.batch_size = get<std::size_t>(value, key);
        else if (key == "momentum") c.momentum = get<double>(value, key);
        else if (key == "clip_norm") c.clip_norm = get<double>(value, key);
        else if (key == "kernel") c.kernel = svm::parse_kernel(get<std::string>(value, key));
        else if (key == "gamma") c.gamma = get<double>(value, key);
        else if (key == "margin") c.margin = svm::parse_margin(get<std::string>(value, key));
        else if (key == "c") c.C = get<double>(value, key);
        else if (key == "tolerance") c.kkt_tolerance = get<double>(value, key);
        else if (key == "max_passes") c.max_passes = get<std::size_t>(value, key);
        else if (key == "max_iterations") c.max_iterations = get<std::size_t>(value, key);
        else if (key == "standardize") c.standardize = get<bool>(value, key);
        else throw PreconditionError("unknown config key '" + key + "'");
    }
}

void apply_json_file(PipelineConfig& config, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_json(config, text.str());
}

}  // namespace vggsvm::cli
