#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vggsvm/svm.hpp"
#include "vggsvm/vgg.hpp"

namespace vggsvm::cli {

/// Every knob of a pipeline run. Defaults: VGG19 at 224 px, lr 0.001,
/// 200 epochs, batch 32, RBF soft margin with C 0.001 and gamma 0.001.
struct PipelineConfig
{
    std::filesystem::path dataset_root;
    std::filesystem::path out_dir = "run";

    vgg::Variant variant = vgg::Variant::Vgg19;
    double channel_scale = 1.0;
    std::size_t input_side = dataset::kDefaultSide;
    std::size_t fc_hidden = 0;  ///< 0 = 4096 * channel_scale

    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    bool skip_bad = false;

    double learning_rate = 0.001;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double momentum = 0.9;
    double clip_norm = 0.0;  ///< global gradient-norm clip; 0 = off

    svm::KernelKind kernel = svm::KernelKind::Rbf;
    double gamma = 0.001;
    svm::MarginMode margin = svm::MarginMode::Soft;
    double C = 0.001;
    double kkt_tolerance = 1e-3;
    std::size_t max_passes = 10;
    std::size_t max_iterations = 10'000'000;
    bool standardize = false;

    [[nodiscard]] vgg::VggConfig vgg_config() const;
    [[nodiscard]] vgg::TrainConfig train_config() const;
    [[nodiscard]] svm::KernelSpec kernel_spec() const;
    [[nodiscard]] svm::SvmTrainConfig svm_config() const;

    /// Throws PreconditionError naming the first invalid field.
    void validate() const;
};

/// Side 32, channel scale 1/8, 20 epochs, gradient norm clipped at 5.
void apply_desk_scale(PipelineConfig& config);

/// JSON object with one key per field (the same names as the long flags).
[[nodiscard]] std::string to_json(const PipelineConfig& config);

/// Overlays the keys present in `json_text`; unknown keys are rejected.
void apply_json(PipelineConfig& config, const std::string& json_text);
void apply_json_file(PipelineConfig& config, const std::filesystem::path& path);

}  // namespace vggsvm::cli
