#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vggsvm/image_io.hpp"
#include "vggsvm/tensor.hpp"

namespace vggsvm::dataset {

inline constexpr std::size_t kDefaultSide = 224;
inline constexpr std::size_t kImageChannels = 3;

/// One preprocessed image: pixels are (3, side, side) in [0,1].
struct ImageSample
{
    Tensor pixels;
    int label = 0;
    std::string source_id;
};

struct ManifestEntry
{
    std::string source_id;  ///< path relative to the dataset root, '/' separated
    int label = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Two-class image listing. Entries are kept sorted by source_id.
struct DatasetManifest
{
    std::filesystem::path root;
    std::array<std::string, 2> class_names;
    std::vector<ManifestEntry> entries;
    /// Files that failed to decode and were dropped because skipping was requested.
    std::vector<std::string> skipped;

    [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
    [[nodiscard]] std::size_t count(int label) const noexcept;
};

struct SplitSpec
{
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

struct ScanOptions
{
    bool skip_bad = false;
};

/// Feature vectors with +/-1 labels; the handoff between the CNN and SVM stages.
struct LabeledFeatureSet
{
    Tensor vectors;  ///< (n, d)
    std::vector<std::int8_t> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t feature_dim() const noexcept { return vectors.rank() == 2 ? vectors.dim(1) : 0; }

    /// Throws PreconditionError unless n, d >= 1, shapes agree, labels are
    /// +/-1 and every value is finite.
    void validate() const;
};

/// Class index 0 maps to -1, class index 1 to +1.
[[nodiscard]] constexpr std::int8_t class_to_sign(int label) noexcept { return label == 1 ? 1 : -1; }
[[nodiscard]] constexpr int sign_to_class(int sign) noexcept { return sign > 0 ? 1 : 0; }

/// Lists `root/<class>/<image>`; exactly two class subdirectories are
/// required, sorted lexicographically to assign labels 0 and 1.
[[nodiscard]] DatasetManifest scan_directory(const std::filesystem::path& root, ScanOptions options = {});

/// Bilinear resize (half-pixel centres, edge clamped), grayscale replicated
/// to three channels, intensities scaled by 1/255.
[[nodiscard]] Tensor preprocess(const Raster& raster, std::size_t side = kDefaultSide);

[[nodiscard]] Tensor load_and_preprocess(const std::filesystem::path& file, std::size_t side = kDefaultSide);

/// Inverse of the intensity scaling, rounding to the nearest 8-bit level.
[[nodiscard]] Raster to_raster(const Tensor& pixels);

/// Stratified per-class split; deterministic in (manifest, spec).
[[nodiscard]] std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest,
                                                                const SplitSpec& spec);

/// Number of samples of a class of size `n` that go to the training side.
[[nodiscard]] std::size_t train_count(std::size_t n, double train_fraction);

/// Index plan for one epoch: a seeded permutation of [0, n) cut into
/// consecutive batches; the final partial batch is kept.
[[nodiscard]] std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                                  std::size_t batch_size,
                                                                  std::uint64_t seed,
                                                                  std::uint64_t epoch);

/// Decodes and preprocesses manifest entries, memoising results while the
/// cache stays under its byte budget.
class ImageLoader
{
public:
    ImageLoader(std::filesystem::path root, std::size_t side, std::size_t cache_bytes = std::size_t{1} << 30);

    [[nodiscard]] ImageSample load(const ManifestEntry& entry);
    [[nodiscard]] std::size_t side() const noexcept { return side_; }

private:
    std::filesystem::path root_;
    std::size_t side_;
    std::size_t cache_budget_;
    std::size_t cache_used_ = 0;
    std::unordered_map<std::string, Tensor> cache_;
};

/// Lazily materialises the batches of one epoch.
class BatchStream
{
public:
    BatchStream(const DatasetManifest& manifest, ImageLoader& loader, std::size_t batch_size, std::uint64_t seed,
                std::uint64_t epoch);

    /// Fills `out` with the next batch; returns false once the epoch is exhausted.
    bool next(std::vector<ImageSample>& out);
    [[nodiscard]] std::size_t batch_count() const noexcept { return plan_.size(); }

private:
    const DatasetManifest& manifest_;
    ImageLoader& loader_;
    std::vector<std::vector<std::size_t>> plan_;
    std::size_t cursor_ = 0;
};

/// Stacks samples into an (n, 3, side, side) tensor.
[[nodiscard]] Tensor stack_pixels(const std::vector<ImageSample>& batch);

/// CSV with header `source_id,label`, LF line endings.
[[nodiscard]] std::string manifest_to_csv(const DatasetManifest& manifest);
void write_manifest_csv(const std::filesystem::path& path, const DatasetManifest& manifest);
[[nodiscard]] std::vector<ManifestEntry> read_manifest_csv(const std::filesystem::path& path);

/// splitmix64-style mixing used to derive independent stream seeds.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace vggsvm::dataset
