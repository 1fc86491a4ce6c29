#include "vggsvm/metrics.hpp"

#include <cstdio>

#include "vggsvm/error.hpp"

namespace vggsvm::metrics {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den)
{
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void check_label(int v, std::string_view which, std::size_t index)
{
    if (v != 1 && v != -1)
        throw PreconditionError(std::string(which) + " label at index " + std::to_string(index) + " is " +
                                std::to_string(v) + ", expected -1 or +1");
}

}  // namespace

ConfusionMatrix confusion(std::span<const std::int8_t> predicted, std::span<const std::int8_t> actual,
                          int positive_class)
{
    if (predicted.size() != actual.size())
        throw PreconditionError("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                                std::to_string(actual.size()) + " labels");
    if (predicted.empty()) throw PreconditionError("confusion: no samples");
    check_label(positive_class, "positive class", 0);

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predicted.size(); ++i)
    {
        check_label(predicted[i], "predicted", i);
        check_label(actual[i], "actual", i);
        const bool pred_pos = predicted[i] == positive_class;
        const bool act_pos = actual[i] == positive_class;
        if (pred_pos && act_pos) ++cm.tp;
        else if (pred_pos) ++cm.fp;
        else if (act_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport compute(const ConfusionMatrix& cm, std::optional<double> hinge)
{
    MetricsReport r;
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
    r.f_score = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
    r.hinge = hinge;
    return r;
}

std::string format_value(const std::optional<double>& value)
{
    if (!value) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *value);
    return buf;
}

std::string report_row(const ReportRow& row)
{
    const auto& m = row.metrics;
    std::string out = row.stage + ',' + row.model + ',' + row.kernel + ',' + row.margin;
    for (const auto* v : {&m.accuracy, &m.precision, &m.sensitivity, &m.f_score, &m.hinge})
    {
        out += ',';
        out += format_value(*v);
    }
    return out;
}

std::string report_csv(std::span<const ReportRow> rows)
{
    std::string out(kReportHeader);
    out += '\n';
    for (const auto& row : rows)
    {
        out += report_row(row);
        out += '\n';
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& cm)
{
    return ",pred_pos,pred_neg\nactual_pos," + std::to_string(cm.tp) + ',' + std::to_string(cm.fn) +
           "\nactual_neg," + std::to_string(cm.fp) + ',' + std::to_string(cm.tn) + '\n';
}

}  // namespace vggsvm::metrics
