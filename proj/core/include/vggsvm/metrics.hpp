#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace vggsvm::metrics {

struct ConfusionMatrix
{
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + tn + fp + fn; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Counts against `positive_class` (+1 or -1). Throws PreconditionError on
/// empty or mismatched inputs and on labels outside {-1, +1}.
[[nodiscard]] ConfusionMatrix confusion(std::span<const std::int8_t> predicted, std::span<const std::int8_t> actual,
                                        int positive_class = 1);

/// A metric with a zero denominator is left empty (reported as "n/a").
struct MetricsReport
{
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> sensitivity;  ///< also called recall
    std::optional<double> f_score;
    std::optional<double> hinge;  ///< only for SVM-stage evaluation
};

[[nodiscard]] MetricsReport compute(const ConfusionMatrix& cm, std::optional<double> hinge = std::nullopt);

/// Fixed-precision rendering, "n/a" for an empty value.
[[nodiscard]] std::string format_value(const std::optional<double>& value);

inline constexpr std::string_view kReportHeader =
    "stage,model,kernel,margin,accuracy,precision,sensitivity,f_score,hinge_loss";

struct ReportRow
{
    std::string stage;
    std::string model;
    std::string kernel;
    std::string margin;
    MetricsReport metrics;
};

/// One CSV line (no trailing newline) in `kReportHeader` column order.
[[nodiscard]] std::string report_row(const ReportRow& row);
/// Header plus rows, LF-terminated.
[[nodiscard]] std::string report_csv(std::span<const ReportRow> rows);

/// 2x2 matrix: rows are the actual class, columns the predicted class,
/// positive first.
[[nodiscard]] std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace vggsvm::metrics
