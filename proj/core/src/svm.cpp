#include "vggsvm/svm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"

namespace vggsvm::svm {

namespace {

std::string lowercase(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

void KernelSpec::validate() const
{
    if (kind == KernelKind::Rbf && !(std::isfinite(gamma) && gamma > 0.0))
        throw PreconditionError("RBF gamma must be finite and positive");
}

std::string_view to_string(KernelKind kind) noexcept
{
    return kind == KernelKind::Linear ? "linear" : "rbf";
}

KernelKind parse_kernel(std::string_view name)
{
    const auto lower = lowercase(name);
    if (lower == "linear") return KernelKind::Linear;
    if (lower == "rbf") return KernelKind::Rbf;
    throw PreconditionError("unknown kernel '" + std::string(name) + "' (expected linear|rbf)");
}

std::string_view to_string(MarginMode mode) noexcept
{
    return mode == MarginMode::Hard ? "hard" : "soft";
}

MarginMode parse_margin(std::string_view name)
{
    const auto lower = lowercase(name);
    if (lower == "soft") return MarginMode::Soft;
    if (lower == "hard") return MarginMode::Hard;
    throw PreconditionError("unknown margin mode '" + std::string(name) + "' (expected soft|hard)");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z)
{
    if (x.size() != z.size())
        throw PreconditionError("kernel arguments differ in dimension (" + std::to_string(x.size()) + " vs " +
                                std::to_string(z.size()) + ")");
    if (spec.kind == KernelKind::Linear)
    {
        double dot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * z[i];
        return dot;
    }
    double dist2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double diff = x[i] - z[i];
        dist2 += diff * diff;
    }
    return std::exp(-spec.gamma * dist2);
}

Tensor gram_matrix(const KernelSpec& spec, const Tensor& X)
{
    spec.validate();
    if (X.rank() != 2 || X.dim(0) == 0) throw PreconditionError("gram_matrix expects a non-empty (n, d) tensor");
    if (!X.all_finite()) throw PreconditionError("gram_matrix input contains non-finite values");
    const auto n = X.dim(0);
    Tensor K({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
        {
            const double k = kernel_eval(spec, X.row(i), X.row(j));
            K[i * n + j] = k;
            K[j * n + i] = k;
        }
    return K;
}

void SvmTrainConfig::validate() const
{
    if (!(std::isfinite(C) && C > 0.0)) throw PreconditionError("C must be finite and positive");
    if (!(std::isfinite(kkt_tolerance) && kkt_tolerance > 0.0))
        throw PreconditionError("KKT tolerance must be positive");
    if (max_passes == 0) throw PreconditionError("max_passes must be at least 1");
    if (max_iterations == 0) throw PreconditionError("max_iterations must be at least 1");
}

namespace {

// Kernel rows, either from a precomputed Gram matrix or computed on demand.
class KernelRows
{
public:
    KernelRows(const KernelSpec& spec, const Tensor& X) : spec_(spec), X_(X), n_(X.dim(0))
    {
        if (n_ <= kFullGramLimit) gram_ = gram_matrix(spec, X);
        diag_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) diag_[i] = gram_.empty() ? kernel_eval(spec, X.row(i), X.row(i)) : gram_[i * n_ + i];
    }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const
    {
        if (!gram_.empty()) return gram_[i * n_ + j];
        if (i == j) return diag_[i];
        return kernel_eval(spec_, X_.row(i), X_.row(j));
    }

    /// Row i; the span stays valid until the next call with a different slot.
    std::span<const double> row(std::size_t i, int slot)
    {
        if (!gram_.empty()) return std::span<const double>(gram_.data()).subspan(i * n_, n_);
        auto& buf = scratch_[slot];
        buf.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) buf[j] = (*this)(i, j);
        return buf;
    }

private:
    KernelSpec spec_;
    const Tensor& X_;
    std::size_t n_;
    Tensor gram_;
    std::vector<double> diag_;
    std::vector<double> scratch_[2];
};

// Platt's SMO with a full error cache. Decision values are f_i = g_i + b with
// g_i = sum_j a_j y_j K_ij maintained incrementally.
class SmoSolver
{
public:
    SmoSolver(const dataset::LabeledFeatureSet& data, const KernelSpec& kernel, const SvmTrainConfig& config)
        : n_(data.size()),
          C_(config.effective_c()),
          tol_(config.kkt_tolerance),
          config_(config),
          K_(kernel, data.vectors),
          y_(n_),
          alpha_(n_, 0.0),
          g_(n_, 0.0),
          rng_(config.seed)
    {
        for (std::size_t i = 0; i < n_; ++i) y_[i] = data.labels[i];
    }

    void run(TrainResult& result)
    {
        bool examine_all = true;
        std::size_t quiet_sweeps = 0;
        while (true)
        {
            std::size_t changed = 0;
            for (std::size_t i = 0; i < n_; ++i)
            {
                if (!examine_all && !is_free(i)) continue;
                changed += examine(i);
                if (++result.iterations >= config_.max_iterations) break;
            }
            ++result.sweeps;
            if (result.iterations >= config_.max_iterations)
            {
                capped_ = true;
                break;
            }
            if (examine_all)
            {
                if (changed == 0)
                {
                    if (++quiet_sweeps >= config_.max_passes) break;
                }
                else
                {
                    quiet_sweeps = 0;
                    examine_all = false;
                }
            }
            else if (changed == 0)
            {
                examine_all = true;
            }
        }
        result.updates = updates_;
        result.objective_trace = std::move(trace_);
    }

    [[nodiscard]] bool capped() const noexcept { return capped_; }
    [[nodiscard]] const std::vector<double>& alphas() const noexcept { return alpha_; }
    [[nodiscard]] double bias() const noexcept { return b_; }

    // Recomputes g from scratch (removing incremental drift) and picks the
    // bias minimising the largest KKT violation. Returns whether any sample
    // is strictly inside the box.
    bool finalize()
    {
        std::fill(g_.begin(), g_.end(), 0.0);
        for (std::size_t j = 0; j < n_; ++j)
        {
            if (alpha_[j] == 0.0) continue;
            const auto row = K_.row(j, 0);
            const double coef = alpha_[j] * y_[j];
            for (std::size_t i = 0; i < n_; ++i) g_[i] += coef * row[i];
        }

        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        double free_sum = 0.0;
        std::size_t free_count = 0;
        for (std::size_t i = 0; i < n_; ++i)
        {
            const double target = y_[i] - g_[i];
            if (is_free(i))
            {
                free_sum += target;
                ++free_count;
                lo = std::max(lo, target);
                hi = std::min(hi, target);
            }
            else if ((alpha_[i] == 0.0) == (y_[i] > 0))
                lo = std::max(lo, target);
            else
                hi = std::min(hi, target);
        }

        if (free_count > 0 && lo <= hi)
            b_ = std::clamp(free_sum / static_cast<double>(free_count), lo, hi);
        else if (std::isfinite(lo) && std::isfinite(hi))
            b_ = 0.5 * (lo + hi);
        else if (std::isfinite(lo))
            b_ = lo;
        else if (std::isfinite(hi))
            b_ = hi;
        return free_count > 0;
    }

    [[nodiscard]] double max_violation() const
    {
        double worst = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
        {
            const double m = y_[i] * (g_[i] + b_);
            double v = 0.0;
            if (alpha_[i] == 0.0) v = 1.0 - m;
            else if (alpha_[i] == C_) v = m - 1.0;
            else v = std::abs(m - 1.0);
            worst = std::max(worst, v);
        }
        return worst;
    }

    [[nodiscard]] double objective() const
    {
        double sum = 0.0;
        double quad = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
        {
            sum += alpha_[i];
            quad += alpha_[i] * y_[i] * g_[i];
        }
        return sum - 0.5 * quad;
    }

private:
    [[nodiscard]] bool is_free(std::size_t i) const noexcept { return alpha_[i] > 0.0 && alpha_[i] < C_; }
    [[nodiscard]] double error(std::size_t i) const noexcept { return g_[i] + b_ - y_[i]; }

    // Snaps values within rounding distance of a box edge onto it.
    [[nodiscard]] double snap(double a) const noexcept
    {
        const double eps = 1e-12 * C_;
        if (a < eps) return 0.0;
        if (a > C_ - eps) return C_;
        return a;
    }

    bool take_step(std::size_t i1, std::size_t i2)
    {
        if (i1 == i2) return false;
        const double a1_old = alpha_[i1];
        const double a2_old = alpha_[i2];
        const double y1 = y_[i1];
        const double y2 = y_[i2];
        const double e1 = error(i1);
        const double e2 = error(i2);
        const double s = y1 * y2;

        double lo = 0.0;
        double hi = 0.0;
        if (s < 0)
        {
            lo = std::max(0.0, a2_old - a1_old);
            hi = std::min(C_, C_ + a2_old - a1_old);
        }
        else
        {
            lo = std::max(0.0, a1_old + a2_old - C_);
            hi = std::min(C_, a1_old + a2_old);
        }
        if (!(lo < hi)) return false;

        const double k11 = K_(i1, i1);
        const double k12 = K_(i1, i2);
        const double k22 = K_(i2, i2);
        const double eta = k11 + k22 - 2.0 * k12;

        double a2 = 0.0;
        if (eta > 0.0)
        {
            a2 = std::clamp(a2_old + y2 * (e1 - e2) / eta, lo, hi);
        }
        else
        {
            // Objective along the constraint line is linear (or concave up);
            // take whichever end scores better.
            const double f1 = y1 * (g_[i1] - y1) - a1_old * k11 - s * a2_old * k12;
            const double f2 = y2 * (g_[i2] - y2) - s * a1_old * k12 - a2_old * k22;
            const double l1 = a1_old + s * (a2_old - lo);
            const double h1 = a1_old + s * (a2_old - hi);
            const double lobj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            const double hobj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            const double eps = 1e-12 * (std::abs(lobj) + std::abs(hobj) + 1.0);
            if (lobj < hobj - eps) a2 = lo;
            else if (lobj > hobj + eps) a2 = hi;
            else a2 = a2_old;
        }
        a2 = snap(a2);

        if (std::abs(a2 - a2_old) < kStepEps * (a2 + a2_old + kStepEps * C_)) return false;

        double a1 = snap(a1_old + s * (a2_old - a2));
        // Keep the pair on its constraint line if rounding pushed a1 out of the box.
        if (a1 < 0.0)
        {
            a2 += s * a1;
            a1 = 0.0;
        }
        else if (a1 > C_)
        {
            a2 += s * (a1 - C_);
            a1 = C_;
        }

        const double d1 = y1 * (a1 - a1_old);
        const double d2 = y2 * (a2 - a2_old);
        const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
        const double b2 = b_ - e2 - d1 * k12 - d2 * k22;

        const auto row1 = K_.row(i1, 0);
        const auto row2 = K_.row(i2, 1);
        for (std::size_t k = 0; k < n_; ++k) g_[k] += d1 * row1[k] + d2 * row2[k];
        alpha_[i1] = a1;
        alpha_[i2] = a2;

        if (is_free(i1)) b_ = b1;
        else if (is_free(i2)) b_ = b2;
        else b_ = 0.5 * (b1 + b2);

        ++updates_;
        if (config_.record_objective) trace_.push_back(objective());
        return true;
    }

    std::size_t examine(std::size_t i2)
    {
        const double e2 = error(i2);
        const double r2 = e2 * y_[i2];
        const double a2 = alpha_[i2];
        if (!((r2 < -tol_ && a2 < C_) || (r2 > tol_ && a2 > 0.0))) return 0;

        // Second-choice heuristic: the free sample with the largest |E1 - E2|.
        std::size_t best = n_;
        double best_gap = -1.0;
        std::size_t free_count = 0;
        for (std::size_t i = 0; i < n_; ++i)
        {
            if (!is_free(i)) continue;
            ++free_count;
            const double gap = std::abs(error(i) - e2);
            if (gap > best_gap)
            {
                best_gap = gap;
                best = i;
            }
        }
        if (free_count > 1 && take_step(best, i2)) return 1;

        std::uniform_int_distribution<std::size_t> start_dist(0, n_ - 1);
        const auto start = start_dist(rng_);
        for (std::size_t k = 0; k < n_; ++k)
        {
            const auto i1 = (start + k) % n_;
            if (is_free(i1) && take_step(i1, i2)) return 1;
        }
        const auto start_all = start_dist(rng_);
        for (std::size_t k = 0; k < n_; ++k)
        {
            const auto i1 = (start_all + k) % n_;
            if (take_step(i1, i2)) return 1;
        }
        return 0;
    }

    static constexpr double kStepEps = 1e-12;

    std::size_t n_;
    double C_;
    double tol_;
    const SvmTrainConfig& config_;
    KernelRows K_;
    std::vector<double> y_;
    std::vector<double> alpha_;
    std::vector<double> g_;
    double b_ = 0.0;
    std::mt19937_64 rng_;
    std::size_t updates_ = 0;
    bool capped_ = false;
    std::vector<double> trace_;
};

}  // namespace

TrainResult train(const dataset::LabeledFeatureSet& data, const KernelSpec& kernel, const SvmTrainConfig& config)
{
    data.validate();
    kernel.validate();
    config.validate();
    if (data.size() < 2) throw PreconditionError("SVM training needs at least 2 samples");
    const bool has_pos = std::find(data.labels.begin(), data.labels.end(), 1) != data.labels.end();
    const bool has_neg = std::find(data.labels.begin(), data.labels.end(), -1) != data.labels.end();
    if (!has_pos || !has_neg) throw PreconditionError("SVM training needs samples of both classes");

    TrainResult result;
    SmoSolver solver(data, kernel, config);
    solver.run(result);
    const bool has_free = solver.finalize();

    result.alphas = solver.alphas();
    result.max_kkt_violation = solver.max_violation();
    result.dual_objective = solver.objective();
    result.converged = !solver.capped() && result.max_kkt_violation <= config.kkt_tolerance;
    for (std::size_t i = 0; i < data.size(); ++i) result.alpha_label_sum += result.alphas[i] * data.labels[i];

    if (solver.capped())
        result.warnings.push_back("SMO stopped at the iteration limit (" + std::to_string(config.max_iterations) +
                                  ") before meeting the KKT tolerance");
    else if (!result.converged)
        result.warnings.push_back("SMO stalled with a KKT violation of " + std::to_string(result.max_kkt_violation));
    if (!has_free)
        result.warnings.push_back(
            "degenerate margin: no multiplier lies strictly inside (0, C); the bias is the midpoint of its "
            "feasible interval and decision values are nearly constant");

    auto& model = result.model;
    model.kernel = kernel;
    model.train_C = config.effective_c();
    model.bias = solver.bias();
    const auto d = data.feature_dim();
    std::vector<double> sv;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        if (!(result.alphas[i] > 0.0)) continue;
        model.alphas.push_back(result.alphas[i]);
        model.sv_labels.push_back(data.labels[i]);
        const auto row = data.vectors.row(i);
        sv.insert(sv.end(), row.begin(), row.end());
    }
    model.support_vectors = Tensor({model.alphas.size(), d}, std::move(sv));
    return result;
}

double decision_function(const SvmModel& model, std::span<const double> x)
{
    if (x.size() != model.feature_dim())
        throw PreconditionError("decision_function expects dimension " + std::to_string(model.feature_dim()) +
                                ", got " + std::to_string(x.size()));
    double f = model.bias;
    for (std::size_t i = 0; i < model.size(); ++i)
        f += model.alphas[i] * model.sv_labels[i] * kernel_eval(model.kernel, model.support_vectors.row(i), x);
    return f;
}

std::vector<double> decision_values(const SvmModel& model, const Tensor& X)
{
    if (X.rank() != 2 || X.dim(1) != model.feature_dim())
        throw PreconditionError("expected an (n, " + std::to_string(model.feature_dim()) + ") tensor, got " +
                                shape_to_string(X.shape()));
    std::vector<double> out(X.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decision_function(model, X.row(i));
    return out;
}

std::vector<std::int8_t> predict(const SvmModel& model, const Tensor& X)
{
    const auto f = decision_values(model, X);
    std::vector<std::int8_t> labels(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) labels[i] = f[i] >= 0.0 ? 1 : -1;
    return labels;
}

double hinge_loss(const SvmModel& model, const dataset::LabeledFeatureSet& data)
{
    data.validate();
    const auto f = decision_values(model, data.vectors);
    double total = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) total += std::max(0.0, 1.0 - data.labels[i] * f[i]);
    return total / static_cast<double>(f.size());
}

double dual_objective(const KernelSpec& kernel, const dataset::LabeledFeatureSet& data, std::span<const double> alphas)
{
    if (alphas.size() != data.size()) throw PreconditionError("one multiplier per sample expected");
    double sum = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        sum += alphas[i];
        if (alphas[i] == 0.0) continue;
        for (std::size_t j = 0; j < data.size(); ++j)
        {
            if (alphas[j] == 0.0) continue;
            quad += alphas[i] * alphas[j] * data.labels[i] * data.labels[j] *
                    kernel_eval(kernel, data.vectors.row(i), data.vectors.row(j));
        }
    }
    return sum - 0.5 * quad;
}

Standardizer Standardizer::fit(const Tensor& X)
{
    if (X.rank() != 2 || X.dim(0) == 0) throw PreconditionError("standardizer needs a non-empty (n, d) tensor");
    const auto n = X.dim(0), d = X.dim(1);
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += X[i * d + j];
    for (auto& m : s.mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
        {
            const double diff = X[i * d + j] - s.mean[j];
            var[j] += diff * diff;
        }
    for (std::size_t j = 0; j < d; ++j)
    {
        const double sd = std::sqrt(var[j] / static_cast<double>(n));
        s.scale[j] = sd > 0.0 ? 1.0 / sd : 1.0;
    }
    return s;
}

Tensor Standardizer::apply(const Tensor& X) const
{
    if (X.rank() != 2 || X.dim(1) != mean.size()) throw PreconditionError("standardizer dimension mismatch");
    Tensor out = X;
    const auto d = mean.size();
    for (std::size_t i = 0; i < X.dim(0); ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (X[i * d + j] - mean[j]) * scale[j];
    return out;
}

namespace {

constexpr std::string_view kModelMagic = "HSVM";

}  // namespace

std::vector<std::uint8_t> encode_model(const SvmModel& model)
{
    const auto m = model.size();
    const auto d = model.feature_dim();
    if (model.sv_labels.size() != m || model.support_vectors.size() != m * d)
        throw PreconditionError("inconsistent SVM model");
    io::ByteWriter w;
    w.magic(kModelMagic);
    w.u32(kModelVersion);
    w.u8(static_cast<std::uint8_t>(model.kernel.kind));
    w.f64(model.kernel.gamma);
    w.f64(model.train_C);
    w.f64(model.bias);
    w.u64(m);
    w.u64(d);
    for (auto y : model.sv_labels) w.i8(y);
    for (auto a : model.alphas) w.f64(a);
    for (auto v : model.support_vectors.data()) w.f64(v);
    return w.take();
}

SvmModel decode_model(std::span<const std::uint8_t> bytes)
{
    io::ByteReader r(bytes, "SVM model");
    if (bytes.size() < 4 || r.magic() != kModelMagic)
        throw FormatError(FormatError::Kind::BadMagic, "not an SVM model file (bad magic)");
    const auto version = r.u32();
    if (version != kModelVersion)
        throw FormatError(FormatError::Kind::UnsupportedVersion, "unsupported SVM model version " + std::to_string(version));

    SvmModel model;
    const auto kind = r.u8();
    if (kind > 1) throw FormatError(FormatError::Kind::BadHeader, "SVM model names an unknown kernel");
    model.kernel.kind = static_cast<KernelKind>(kind);
    model.kernel.gamma = r.f64();
    model.train_C = r.f64();
    model.bias = r.f64();
    const auto m = r.u64();
    const auto d = r.u64();
    // Each support vector needs 1 + 8 + 8d bytes.
    if (d == 0 || m > r.remaining() / (9 + 8 * d))
        throw FormatError(FormatError::Kind::Truncated, "SVM model: truncated payload");
    model.sv_labels.resize(m);
    for (auto& y : model.sv_labels)
    {
        y = r.i8();
        if (y != 1 && y != -1) throw FormatError(FormatError::Kind::BadHeader, "SVM model label is not +/-1");
    }
    model.alphas.resize(m);
    for (auto& a : model.alphas) a = r.f64();
    std::vector<double> sv(m * d);
    for (auto& v : sv) v = r.f64();
    model.support_vectors = Tensor({m, d}, std::move(sv));
    if (r.remaining() != 0) throw FormatError(FormatError::Kind::BadHeader, "SVM model has trailing bytes");
    return model;
}

void save_model(const std::filesystem::path& path, const SvmModel& model)
{
    io::write_file_atomic(path, encode_model(model));
}

SvmModel load_model(const std::filesystem::path& path)
{
    return decode_model(io::read_file(path));
}

}  // namespace vggsvm::svm
