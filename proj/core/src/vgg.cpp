#include "vggsvm/vgg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

#include "vggsvm/error.hpp"
#include "vggsvm/layers.hpp"

namespace vggsvm::vgg {

std::string_view to_string(Variant v) noexcept
{
    switch (v)
    {
        case Variant::Vgg11: return "vgg11";
        case Variant::Vgg13: return "vgg13";
        case Variant::Vgg16: return "vgg16";
        case Variant::Vgg19: return "vgg19";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto v : {Variant::Vgg11, Variant::Vgg13, Variant::Vgg16, Variant::Vgg19})
        if (lower == to_string(v)) return v;
    throw PreconditionError("unknown VGG variant '" + std::string(name) + "' (expected vgg11|vgg13|vgg16|vgg19)");
}

ConvPlan canonical_plan(Variant v)
{
    constexpr auto M = kMaxPool;
    switch (v)
    {
        case Variant::Vgg11: return {64, M, 128, M, 256, 256, M, 512, 512, M, 512, 512, M};
        case Variant::Vgg13: return {64, 64, M, 128, 128, M, 256, 256, M, 512, 512, M, 512, 512, M};
        case Variant::Vgg16:
            return {64, 64, M, 128, 128, M, 256, 256, 256, M, 512, 512, 512, M, 512, 512, 512, M};
        case Variant::Vgg19:
            return {64, 64, M, 128, 128, M, 256, 256, 256, 256, M, 512, 512, 512, 512, M, 512, 512, 512, 512, M};
    }
    throw PreconditionError("unknown VGG variant");
}

namespace {

std::size_t scaled(std::size_t width, double scale)
{
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(width) * scale)));
}

}  // namespace

VggConfig make_config(Variant variant, double channel_scale, std::size_t input_side, std::size_t num_classes,
                      std::size_t fc_hidden)
{
    if (!(channel_scale > 0.0 && channel_scale <= 1.0))
        throw PreconditionError("channel_scale must lie in (0, 1]");
    VggConfig config;
    config.variant = variant;
    config.channel_scale = channel_scale;
    config.input_side = input_side;
    config.conv_plan = canonical_plan(variant);
    for (auto& token : config.conv_plan)
        if (token != kMaxPool) token = scaled(token, channel_scale);
    const auto hidden = fc_hidden ? fc_hidden : scaled(kCanonicalFcWidth, channel_scale);
    config.fc_widths = {hidden, hidden, num_classes};
    validate(config);
    return config;
}

std::size_t pool_count(const VggConfig& config) noexcept
{
    return static_cast<std::size_t>(std::count(config.conv_plan.begin(), config.conv_plan.end(), kMaxPool));
}

void validate(const VggConfig& config)
{
    if (!(config.channel_scale > 0.0 && config.channel_scale <= 1.0))
        throw PreconditionError("channel_scale must lie in (0, 1]");
    if (config.input_channels == 0) throw PreconditionError("input_channels must be positive");
    if (config.conv_plan.empty() || config.conv_plan.front() == kMaxPool)
        throw PreconditionError("conv plan must start with a convolution");
    if (std::any_of(config.fc_widths.begin(), config.fc_widths.end(), [](auto w) { return w == 0; }))
        throw PreconditionError("fully connected widths must be positive");
    if (config.fc_widths[2] < 2) throw PreconditionError("the classifier needs at least 2 outputs");
    const auto divisor = std::size_t{1} << pool_count(config);
    if (config.input_side == 0 || config.input_side % divisor != 0)
        throw PreconditionError("input_side " + std::to_string(config.input_side) + " is not divisible by " +
                                std::to_string(divisor) + " (2^pool_count)");
}

std::size_t flattened_dim(const VggConfig& config)
{
    validate(config);
    std::size_t channels = 0;
    for (auto token : config.conv_plan)
        if (token != kMaxPool) channels = token;
    const auto side = config.input_side >> pool_count(config);
    return channels * side * side;
}

std::size_t parameter_count(const VggConfig& config)
{
    std::size_t total = 0;
    std::size_t in = config.input_channels;
    for (auto token : config.conv_plan)
    {
        if (token == kMaxPool) continue;
        total += token * in * 9 + token;
        in = token;
    }
    std::size_t fan_in = flattened_dim(config);
    for (auto width : config.fc_widths)
    {
        total += width * fan_in + width;
        fan_in = width;
    }
    return total;
}

std::size_t VggParams::count() const noexcept
{
    std::size_t total = 0;
    for (const auto& c : convs) total += c.weight.size() + c.bias.size();
    for (const auto& f : fcs) total += f.weight.size() + f.bias.size();
    return total;
}

void VggParams::for_each(const std::function<void(Tensor&)>& fn)
{
    for (auto& c : convs)
    {
        fn(c.weight);
        fn(c.bias);
    }
    for (auto& f : fcs)
    {
        fn(f.weight);
        fn(f.bias);
    }
}

void VggParams::for_each(const std::function<void(const Tensor&)>& fn) const
{
    for (const auto& c : convs)
    {
        fn(c.weight);
        fn(c.bias);
    }
    for (const auto& f : fcs)
    {
        fn(f.weight);
        fn(f.bias);
    }
}

void VggParams::zero()
{
    for_each([](Tensor& t) { t.fill(0.0); });
}

VggParams zeros_like(const VggParams& params)
{
    VggParams out;
    for (const auto& c : params.convs) out.convs.push_back({Tensor(c.weight.shape()), Tensor(c.bias.shape())});
    for (std::size_t i = 0; i < 3; ++i)
        out.fcs[i] = {Tensor(params.fcs[i].weight.shape()), Tensor(params.fcs[i].bias.shape())};
    return out;
}

VggParams allocate_params(const VggConfig& config)
{
    VggParams params;
    std::size_t in = config.input_channels;
    for (auto token : config.conv_plan)
    {
        if (token == kMaxPool) continue;
        params.convs.push_back({Tensor({token, in, 3, 3}), Tensor({token})});
        in = token;
    }
    std::size_t fan_in = flattened_dim(config);
    for (std::size_t i = 0; i < 3; ++i)
    {
        params.fcs[i] = {Tensor({config.fc_widths[i], fan_in}), Tensor({config.fc_widths[i]})};
        fan_in = config.fc_widths[i];
    }
    return params;
}

namespace {

void kaiming_uniform(Tensor& weight, std::size_t fan_in, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : weight.data()) w = dist(rng);
}

void require_batch(const VggModel& model, const Tensor& batch)
{
    const auto& c = model.config;
    if (batch.rank() != 4 || batch.dim(1) != c.input_channels || batch.dim(2) != c.input_side ||
        batch.dim(3) != c.input_side)
        throw PreconditionError("expected a batch of shape (n, " + std::to_string(c.input_channels) + ", " +
                                std::to_string(c.input_side) + ", " + std::to_string(c.input_side) + "), got " +
                                shape_to_string(batch.shape()));
    if (batch.dim(0) == 0) throw PreconditionError("empty batch");
}

// Activations retained for the backward pass. acts[0] is the input; acts[i+1]
// is the output of plan step i (post-ReLU for convs).
struct Trace
{
    std::vector<Tensor> acts;
    std::vector<std::vector<std::uint32_t>> argmax;  // per plan step; empty for convs
    Tensor flat;
    Tensor hidden1;  // post-ReLU
    Tensor hidden2;  // post-ReLU
    Tensor logits;
};

Tensor run_convs(const VggModel& model, const Tensor& batch, Trace* trace)
{
    Tensor x = batch;
    std::size_t conv = 0;
    if (trace) trace->acts.push_back(x);
    for (auto token : model.config.conv_plan)
    {
        if (token == kMaxPool)
        {
            auto pooled = nn::maxpool2_forward(x);
            x = std::move(pooled.output);
            if (trace) trace->argmax.push_back(std::move(pooled.argmax));
        }
        else
        {
            const auto& layer = model.params.convs[conv++];
            x = nn::relu_forward(nn::conv3x3_forward(x, layer.weight, layer.bias));
            if (trace) trace->argmax.emplace_back();
        }
        if (trace) trace->acts.push_back(x);
    }
    const auto n = x.dim(0);
    x.reshape({n, x.size() / n});
    return x;
}

Tensor run_forward(const VggModel& model, const Tensor& batch, Trace* trace)
{
    require_batch(model, batch);
    const auto& fc = model.params.fcs;
    Tensor flat = run_convs(model, batch, trace);
    Tensor h1 = nn::relu_forward(nn::linear_forward(flat, fc[0].weight, fc[0].bias));
    Tensor h2 = nn::relu_forward(nn::linear_forward(h1, fc[1].weight, fc[1].bias));
    Tensor logits = nn::linear_forward(h2, fc[2].weight, fc[2].bias);
    if (trace)
    {
        trace->flat = std::move(flat);
        trace->hidden1 = std::move(h1);
        trace->hidden2 = std::move(h2);
        trace->logits = logits;
    }
    return logits;
}

// Backpropagates d loss / d logits; returns d loss / d input when requested.
Tensor run_backward(const VggModel& model, const Trace& trace, const Tensor& grad_logits, VggParams& grads,
                    bool want_input_grad)
{
    const auto& fc = model.params.fcs;
    Tensor g;
    nn::linear_backward(trace.hidden2, fc[2].weight, grad_logits, &g, grads.fcs[2].weight, grads.fcs[2].bias);
    g = nn::relu_backward(trace.hidden2, g);
    Tensor g1;
    nn::linear_backward(trace.hidden1, fc[1].weight, g, &g1, grads.fcs[1].weight, grads.fcs[1].bias);
    g1 = nn::relu_backward(trace.hidden1, g1);
    nn::linear_backward(trace.flat, fc[0].weight, g1, &g, grads.fcs[0].weight, grads.fcs[0].bias);
    g.reshape(trace.acts.back().shape());

    const auto& plan = model.config.conv_plan;
    std::size_t conv = model.params.convs.size();
    for (std::size_t step = plan.size(); step-- > 0;)
    {
        const auto& input = trace.acts[step];
        if (plan[step] == kMaxPool)
        {
            g = nn::maxpool2_backward(input.shape(), trace.argmax[step], g);
            continue;
        }
        --conv;
        g = nn::relu_backward(trace.acts[step + 1], g);
        const bool need_input = step > 0 || want_input_grad;
        Tensor gin;
        nn::conv3x3_backward(input, model.params.convs[conv].weight, g, need_input ? &gin : nullptr,
                             grads.convs[conv].weight, grads.convs[conv].bias);
        g = std::move(gin);
    }
    return g;
}

std::size_t argmax_row(std::span<const double> row)
{
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels)
{
    std::size_t correct = 0;
    for (std::size_t s = 0; s < labels.size(); ++s)
        if (argmax_row(logits.row(s)) == static_cast<std::size_t>(labels[s])) ++correct;
    return correct;
}

std::vector<int> labels_of(const std::vector<dataset::ImageSample>& batch)
{
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto& s : batch) labels.push_back(s.label);
    return labels;
}

}  // namespace

VggModel build(const VggConfig& config, std::uint64_t seed)
{
    validate(config);
    VggModel model{config, allocate_params(config), seed};
    std::uint64_t stream = 0;
    std::size_t in = config.input_channels;
    for (auto& layer : model.params.convs)
    {
        kaiming_uniform(layer.weight, in * 9, dataset::derive_seed(seed, stream++));
        in = layer.weight.dim(0);
    }
    for (auto& layer : model.params.fcs)
        kaiming_uniform(layer.weight, layer.weight.dim(1), dataset::derive_seed(seed, stream++));
    return model;
}

Tensor forward(const VggModel& model, const Tensor& batch)
{
    return run_forward(model, batch, nullptr);
}

Tensor features(const VggModel& model, const Tensor& batch)
{
    require_batch(model, batch);
    const auto& fc = model.params.fcs;
    return nn::relu_forward(nn::linear_forward(run_convs(model, batch, nullptr), fc[0].weight, fc[0].bias));
}

std::vector<double> extract_features(const VggModel& model, const Tensor& sample)
{
    Tensor batch = sample;
    Tensor::Shape shape{1};
    shape.insert(shape.end(), sample.shape().begin(), sample.shape().end());
    batch.reshape(shape);
    return features(model, batch).storage();
}

StepResult compute_gradients(const VggModel& model, const Tensor& batch, std::span<const int> labels,
                             VggParams& grads)
{
    Trace trace;
    run_forward(model, batch, &trace);
    auto loss = nn::cross_entropy(trace.logits, labels);
    StepResult result{loss.loss, count_correct(trace.logits, labels)};
    if (!std::isfinite(loss.loss)) return result;
    run_backward(model, trace, loss.grad_logits, grads, false);
    return result;
}

Tensor input_gradient(const VggModel& model, const Tensor& batch, std::span<const int> labels)
{
    Trace trace;
    run_forward(model, batch, &trace);
    auto loss = nn::cross_entropy(trace.logits, labels);
    auto scratch = zeros_like(model.params);
    return run_backward(model, trace, loss.grad_logits, scratch, true);
}

void validate(const TrainConfig& config)
{
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
        throw PreconditionError("learning rate must be a finite non-negative number");
    if (config.epochs < 1) throw PreconditionError("epochs must be at least 1");
    if (config.batch_size < 1) throw PreconditionError("batch size must be at least 1");
    if (!(config.momentum >= 0.0 && config.momentum < 1.0)) throw PreconditionError("momentum must lie in [0, 1)");
    if (!(config.max_grad_norm >= 0.0) || !std::isfinite(config.max_grad_norm))
        throw PreconditionError("gradient clipping norm must be a finite non-negative number");
}

SgdMomentum::SgdMomentum(const VggModel& model, double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum), velocity_(zeros_like(model.params))
{
}

void SgdMomentum::step(VggModel& model, const VggParams& grads)
{
    std::vector<Tensor*> weights;
    model.params.for_each([&](Tensor& t) { weights.push_back(&t); });
    std::vector<const Tensor*> gradients;
    grads.for_each([&](const Tensor& t) { gradients.push_back(&t); });
    std::vector<Tensor*> velocities;
    velocity_.for_each([&](Tensor& t) { velocities.push_back(&t); });

    for (std::size_t k = 0; k < weights.size(); ++k)
    {
        auto w = weights[k]->data();
        auto g = gradients[k]->data();
        auto v = velocities[k]->data();
        for (std::size_t i = 0; i < w.size(); ++i)
        {
            v[i] = momentum_ * v[i] + g[i];
            w[i] -= lr_ * v[i];
        }
    }
}

Evaluation evaluate(const VggModel& model, const dataset::DatasetManifest& manifest, dataset::ImageLoader& loader,
                    std::size_t batch_size)
{
    if (manifest.entries.empty()) throw PreconditionError("cannot evaluate on an empty manifest");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<dataset::ImageSample> batch;
    for (std::size_t start = 0; start < manifest.size(); start += batch_size)
    {
        batch.clear();
        for (std::size_t i = start; i < std::min(manifest.size(), start + batch_size); ++i)
            batch.push_back(loader.load(manifest.entries[i]));
        const auto labels = labels_of(batch);
        const auto logits = forward(model, dataset::stack_pixels(batch));
        loss_sum += nn::cross_entropy(logits, labels).loss * static_cast<double>(batch.size());
        correct += count_correct(logits, labels);
    }
    const auto n = static_cast<double>(manifest.size());
    return {static_cast<double>(correct) / n, loss_sum / n};
}

namespace {

void clip_global_norm(VggParams& grads, double max_norm)
{
    double sq = 0.0;
    grads.for_each([&](const Tensor& t) {
        for (double v : t.data()) sq += v * v;
    });
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double k = max_norm / norm;
    grads.for_each([&](Tensor& t) {
        for (auto& v : t.data()) v *= k;
    });
}

}  // namespace

TrainHistory train(VggModel& model, const dataset::DatasetManifest& train_set,
                   const dataset::DatasetManifest& test_set, dataset::ImageLoader& loader, const TrainConfig& config,
                   const EpochCallback& on_epoch)
{
    validate(config);
    if (train_set.entries.empty()) throw PreconditionError("training manifest is empty");
    if (loader.side() != model.config.input_side)
        throw PreconditionError("image loader side does not match the model input side");

    SgdMomentum optimizer(model, config.learning_rate, config.momentum);
    auto grads = zeros_like(model.params);
    TrainHistory history;
    std::vector<dataset::ImageSample> batch;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch)
    {
        dataset::BatchStream stream(train_set, loader, config.batch_size, config.seed, epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        while (stream.next(batch))
        {
            ++batch_index;
            grads.zero();
            const auto labels = labels_of(batch);
            const auto step = compute_gradients(model, dataset::stack_pixels(batch), labels, grads);
            if (!std::isfinite(step.loss))
                throw RuntimeFailure("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index));
            if (config.max_grad_norm > 0.0) clip_global_norm(grads, config.max_grad_norm);
            optimizer.step(model, grads);
            loss_sum += step.loss * static_cast<double>(batch.size());
            correct += step.correct;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        record.train_loss = loss_sum / static_cast<double>(train_set.size());
        if (!test_set.entries.empty())
        {
            const auto eval = evaluate(model, test_set, loader, config.batch_size);
            record.test_accuracy = eval.accuracy;
            record.test_loss = eval.loss;
        }
        history.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return history;
}

std::string history_to_csv(const TrainHistory& history)
{
    std::string out = "epoch,train_acc,train_loss,test_acc,test_loss\n";
    char line[160];
    for (const auto& r : history)
    {
        std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_accuracy, r.train_loss,
                      r.test_accuracy, r.test_loss);
        out += line;
    }
    return out;
}

}  // namespace vggsvm::vgg
