#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vggsvm/dataset.hpp"
#include "vggsvm/tensor.hpp"

namespace vggsvm::svm {

enum class KernelKind : std::uint8_t
{
    Linear = 0,
    Rbf = 1,
};

struct KernelSpec
{
    KernelKind kind = KernelKind::Rbf;
    double gamma = 0.001;  ///< RBF width; ignored for the linear kernel

    [[nodiscard]] static KernelSpec linear() { return {KernelKind::Linear, 0.0}; }
    [[nodiscard]] static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, gamma}; }

    void validate() const;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

[[nodiscard]] std::string_view to_string(KernelKind kind) noexcept;
[[nodiscard]] KernelKind parse_kernel(std::string_view name);

/// Linear: <x, z>.  RBF: exp(-gamma * |x - z|^2).
[[nodiscard]] double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

/// Symmetric (n, n) kernel matrix over the rows of `X`.
[[nodiscard]] Tensor gram_matrix(const KernelSpec& spec, const Tensor& X);

enum class MarginMode : std::uint8_t
{
    Soft,
    Hard,
};

[[nodiscard]] std::string_view to_string(MarginMode mode) noexcept;
[[nodiscard]] MarginMode parse_margin(std::string_view name);

/// Box bound used in hard-margin mode; hard margin is the large-C limit of
/// the soft problem.
inline constexpr double kHardMarginC = 1e6;

/// Above this many samples kernel rows are computed on demand instead of
/// precomputing the Gram matrix.
inline constexpr std::size_t kFullGramLimit = 8192;

struct SvmTrainConfig
{
    double C = 0.001;
    MarginMode margin = MarginMode::Soft;
    double kkt_tolerance = 1e-3;
    std::size_t max_passes = 10;
    std::size_t max_iterations = 10'000'000;
    std::uint64_t seed = 0;
    bool record_objective = false;  ///< keep the dual objective after every accepted pair update

    [[nodiscard]] double effective_c() const noexcept { return margin == MarginMode::Hard ? kHardMarginC : C; }
    void validate() const;
};

/// Trained kernel machine. Only samples with alpha > 0 are kept.
struct SvmModel
{
    Tensor support_vectors;  ///< (m, d)
    std::vector<double> alphas;
    std::vector<std::int8_t> sv_labels;
    double bias = 0.0;
    KernelSpec kernel;
    double train_C = 0.0;  ///< effective box bound used during training

    [[nodiscard]] std::size_t size() const noexcept { return alphas.size(); }
    [[nodiscard]] std::size_t feature_dim() const noexcept
    {
        return support_vectors.rank() == 2 ? support_vectors.dim(1) : 0;
    }
};

struct TrainResult
{
    SvmModel model;
    bool converged = false;
    std::size_t iterations = 0;  ///< examined samples across all sweeps
    std::size_t updates = 0;     ///< accepted pair updates
    std::size_t sweeps = 0;
    double max_kkt_violation = 0.0;
    double dual_objective = 0.0;
    double alpha_label_sum = 0.0;       ///< sum_i alpha_i y_i over the training set
    std::vector<double> alphas;         ///< one per training sample, before pruning
    std::vector<double> objective_trace;  ///< filled when record_objective is set
    std::vector<std::string> warnings;
};

/// Sequential minimal optimisation on the dual
///   max sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
///   s.t. 0 <= a_i <= C_eff, sum_i a_i y_i = 0.
/// Non-convergence is reported through `converged`/`warnings`, not thrown.
[[nodiscard]] TrainResult train(const dataset::LabeledFeatureSet& data, const KernelSpec& kernel,
                                const SvmTrainConfig& config);

/// f(x) = sum_i alpha_i y_i K(sv_i, x) + b
[[nodiscard]] double decision_function(const SvmModel& model, std::span<const double> x);
[[nodiscard]] std::vector<double> decision_values(const SvmModel& model, const Tensor& X);

/// sign(f(x)) with sign(0) = +1.
[[nodiscard]] std::vector<std::int8_t> predict(const SvmModel& model, const Tensor& X);

/// Mean over samples of max(0, 1 - y f(x)).
[[nodiscard]] double hinge_loss(const SvmModel& model, const dataset::LabeledFeatureSet& data);

/// Dual objective of `alphas` on the given training set.
[[nodiscard]] double dual_objective(const KernelSpec& kernel, const dataset::LabeledFeatureSet& data,
                                    std::span<const double> alphas);

/// Per-dimension z-scoring with statistics taken from the training set.
/// Constant dimensions are centred but not scaled.
struct Standardizer
{
    std::vector<double> mean;
    std::vector<double> scale;  ///< multiplier, 1/std

    [[nodiscard]] static Standardizer fit(const Tensor& X);
    [[nodiscard]] Tensor apply(const Tensor& X) const;
};

// Model files -----------------------------------------------------------------

inline constexpr std::uint32_t kModelVersion = 1;

/// "HSVM", u32 version, u8 kernel kind, f64 gamma, f64 C, f64 bias, u64 m,
/// u64 d, then int8 labels, float64 alphas and row-major float64 support
/// vectors; little-endian throughout.
[[nodiscard]] std::vector<std::uint8_t> encode_model(const SvmModel& model);
[[nodiscard]] SvmModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const SvmModel& model);
[[nodiscard]] SvmModel load_model(const std::filesystem::path& path);

}  // namespace vggsvm::svm
