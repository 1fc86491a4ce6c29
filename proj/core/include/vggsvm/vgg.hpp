#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vggsvm/dataset.hpp"
#include "vggsvm/tensor.hpp"

namespace vggsvm::vgg {

enum class Variant : std::uint8_t
{
    Vgg11 = 11,
    Vgg13 = 13,
    Vgg16 = 16,
    Vgg19 = 19,
};

[[nodiscard]] std::string_view to_string(Variant v) noexcept;
/// Accepts "vgg11" .. "vgg19" (case-insensitive). Throws PreconditionError otherwise.
[[nodiscard]] Variant parse_variant(std::string_view name);

/// Conv plan tokens: an output channel count, or kMaxPool.
inline constexpr std::size_t kMaxPool = 0;
using ConvPlan = std::vector<std::size_t>;

/// Canonical (unscaled) A/B/D/E layouts.
[[nodiscard]] ConvPlan canonical_plan(Variant v);

inline constexpr std::size_t kCanonicalFcWidth = 4096;

struct VggConfig
{
    Variant variant = Variant::Vgg19;
    ConvPlan conv_plan;
    std::array<std::size_t, 3> fc_widths{kCanonicalFcWidth, kCanonicalFcWidth, 2};
    std::size_t input_side = dataset::kDefaultSide;
    double channel_scale = 1.0;
    std::size_t input_channels = dataset::kImageChannels;

    friend bool operator==(const VggConfig&, const VggConfig&) = default;
};

/// Builds a config from a variant. Conv widths are scaled by `channel_scale`
/// (rounded, at least 1); a zero `fc_hidden` means 4096 * channel_scale.
[[nodiscard]] VggConfig make_config(Variant variant, double channel_scale = 1.0,
                                    std::size_t input_side = dataset::kDefaultSide, std::size_t num_classes = 2,
                                    std::size_t fc_hidden = 0);

/// Throws PreconditionError when the config cannot describe a network.
void validate(const VggConfig& config);

[[nodiscard]] std::size_t pool_count(const VggConfig& config) noexcept;
[[nodiscard]] std::size_t flattened_dim(const VggConfig& config);
/// Weights plus biases, computed from the config alone.
[[nodiscard]] std::size_t parameter_count(const VggConfig& config);

struct ParamPair
{
    Tensor weight;
    Tensor bias;
};

/// Every trainable tensor of a network; also used for gradients and
/// optimizer state, which share the layout.
struct VggParams
{
    std::vector<ParamPair> convs;  ///< one per conv token, in plan order
    std::array<ParamPair, 3> fcs;

    [[nodiscard]] std::size_t count() const noexcept;
    /// Visits weight then bias of every layer, convs first, in a fixed order.
    void for_each(const std::function<void(Tensor&)>& fn);
    void for_each(const std::function<void(const Tensor&)>& fn) const;
    void zero();
};

[[nodiscard]] VggParams zeros_like(const VggParams& params);

/// Zero-filled parameters with the shapes `config` implies.
[[nodiscard]] VggParams allocate_params(const VggConfig& config);

struct VggModel
{
    VggConfig config;
    VggParams params;
    std::uint64_t init_seed = 0;

    [[nodiscard]] std::size_t parameter_count() const noexcept { return params.count(); }
};

/// Seeded Kaiming-uniform initialisation (bound sqrt(6 / fan_in)), zero biases.
[[nodiscard]] VggModel build(const VggConfig& config, std::uint64_t seed);

/// Logits (n, num_classes) for a batch (n, 3, S, S).
[[nodiscard]] Tensor forward(const VggModel& model, const Tensor& batch);

/// Post-ReLU output of the first fully connected layer, (n, fc_widths[0]).
[[nodiscard]] Tensor features(const VggModel& model, const Tensor& batch);

/// Feature vector for one (3, S, S) sample, computed as a batch of one.
[[nodiscard]] std::vector<double> extract_features(const VggModel& model, const Tensor& sample);

struct StepResult
{
    double loss = 0.0;
    std::size_t correct = 0;
};

/// Forward + backward over a batch. Gradients of the mean cross-entropy are
/// accumulated into `grads` (which must share the model's layout).
StepResult compute_gradients(const VggModel& model, const Tensor& batch, std::span<const int> labels,
                             VggParams& grads);

/// Gradient of the mean loss with respect to the input batch (used by checks).
[[nodiscard]] Tensor input_gradient(const VggModel& model, const Tensor& batch, std::span<const int> labels);

struct TrainConfig
{
    double learning_rate = 0.001;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double momentum = 0.9;
    /// Rescale the batch gradient to this global L2 norm when it is larger; 0 disables.
    double max_grad_norm = 0.0;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

/// SGD with momentum: v <- momentum * v + g; w <- w - lr * v.
class SgdMomentum
{
public:
    SgdMomentum(const VggModel& model, double learning_rate, double momentum);
    void step(VggModel& model, const VggParams& grads);

private:
    double lr_;
    double momentum_;
    VggParams velocity_;
};

struct EpochRecord
{
    std::size_t epoch = 0;  ///< 1-based
    double train_accuracy = 0.0;
    double train_loss = 0.0;  ///< mean per-sample loss over the epoch's batches
    double test_accuracy = 0.0;
    double test_loss = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;
using EpochCallback = std::function<void(const EpochRecord&)>;

struct Evaluation
{
    double accuracy = 0.0;
    double loss = 0.0;
};

[[nodiscard]] Evaluation evaluate(const VggModel& model, const dataset::DatasetManifest& manifest,
                                  dataset::ImageLoader& loader, std::size_t batch_size = 32);

/// Trains `model` in place. Throws RuntimeFailure naming the epoch and batch
/// if the loss becomes non-finite.
TrainHistory train(VggModel& model, const dataset::DatasetManifest& train_set,
                   const dataset::DatasetManifest& test_set, dataset::ImageLoader& loader,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

/// CSV `epoch,train_acc,train_loss,test_acc,test_loss`.
[[nodiscard]] std::string history_to_csv(const TrainHistory& history);

// Checkpoint files -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Provenance saved next to the weights so extraction can reproduce the split.
struct CheckpointMeta
{
    std::uint64_t split_seed = 0;
    double train_fraction = 0.7;
    std::array<std::string, 2> class_names;

    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint
{
    VggModel model;
    CheckpointMeta meta;
};

/// Layout: "HVGG", u32 version, config, meta, u32 tensor count, then per
/// tensor a u64 element count and little-endian float32 values, then a u32
/// CRC-32 of every preceding byte.
[[nodiscard]] std::vector<std::uint8_t> encode_checkpoint(const VggModel& model, const CheckpointMeta& meta);
[[nodiscard]] Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const VggModel& model, const CheckpointMeta& meta);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vggsvm::vgg
