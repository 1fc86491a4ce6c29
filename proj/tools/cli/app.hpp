#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "config.hpp"
#include "vggsvm/metrics.hpp"
#include "vggsvm/svm.hpp"

namespace vggsvm::cli {

// Artifact names inside the output directory.
inline constexpr std::string_view kManifestFile = "manifest.csv";
inline constexpr std::string_view kTrainManifestFile = "train_manifest.csv";
inline constexpr std::string_view kTestManifestFile = "test_manifest.csv";
inline constexpr std::string_view kCheckpointFile = "model.hvgg";
inline constexpr std::string_view kTrainLogFile = "train_log.csv";
inline constexpr std::string_view kCnnMetricsFile = "cnn_metrics.csv";
inline constexpr std::string_view kTrainFeaturesFile = "train.hfv";
inline constexpr std::string_view kTestFeaturesFile = "test.hfv";
inline constexpr std::string_view kTrainIdsFile = "train.ids.csv";
inline constexpr std::string_view kTestIdsFile = "test.ids.csv";
inline constexpr std::string_view kSvmModelFile = "model.hsvm";
inline constexpr std::string_view kStandardizerSuffix = ".standardize.json";
inline constexpr std::string_view kReportFile = "report.csv";
inline constexpr std::string_view kConfusionFile = "confusion.csv";

struct Streams
{
    std::ostream& out;
    std::ostream& err;
};

/// Scans and splits the dataset, writing the three manifest CSVs.
void cmd_ingest(const PipelineConfig& config, Streams io);

/// Trains the CNN; writes the checkpoint, training log and test-set CNN metrics.
void cmd_train_cnn(const PipelineConfig& config, Streams io);

/// Writes train/test feature files (batch size 1) plus their source-id lists.
/// Refuses a checkpoint whose recorded split differs from the request.
void cmd_extract(const PipelineConfig& config, const std::filesystem::path& checkpoint, Streams io);

svm::TrainResult cmd_train_svm(const PipelineConfig& config, const std::filesystem::path& train_features, Streams io);

metrics::MetricsReport cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& model,
                                    const std::filesystem::path& test_features, Streams io);

/// Looks up one metric by name. "recall" is accepted as a synonym of
/// "sensitivity" and "f1" of "f_score". Throws PreconditionError for other names.
[[nodiscard]] std::optional<double> select_metric(const metrics::MetricsReport& report, std::string_view name);

void cmd_pipeline(const PipelineConfig& config, Streams io);

/// Throws RuntimeFailure if any source id appears in both lists.
void check_no_leakage(const std::filesystem::path& train_ids, const std::filesystem::path& test_ids);

/// Command-line entry point. Returns 0 on success, 2 for usage or
/// precondition errors, 3 for runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vggsvm::cli
