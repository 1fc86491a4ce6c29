#include "vggsvm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"

namespace vggsvm::dataset {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::size_t DatasetManifest::count(int label) const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [label](const auto& e) { return e.label == label; }));
}

void LabeledFeatureSet::validate() const
{
    if (vectors.rank() != 2) throw PreconditionError("feature set must be a 2-D (n, d) tensor");
    const auto n = vectors.dim(0);
    const auto d = vectors.dim(1);
    if (n == 0 || d == 0) throw PreconditionError("feature set must have n >= 1 and d >= 1");
    if (labels.size() != n)
        throw PreconditionError("feature set has " + std::to_string(n) + " rows but " +
                                std::to_string(labels.size()) + " labels");
    for (auto y : labels)
        if (y != 1 && y != -1) throw PreconditionError("feature labels must be -1 or +1");
    if (!vectors.all_finite()) throw PreconditionError("feature set contains non-finite values");
}

namespace {

bool hidden(const fs::path& p)
{
    const auto name = p.filename().string();
    return !name.empty() && name.front() == '.';
}

}  // namespace

DatasetManifest scan_directory(const fs::path& root, ScanOptions options)
{
    if (!fs::exists(root)) throw PreconditionError("dataset root does not exist: " + root.string());
    if (!fs::is_directory(root)) throw PreconditionError("dataset root is not a directory: " + root.string());

    std::vector<std::string> classes;
    for (const auto& item : fs::directory_iterator(root))
        if (item.is_directory() && !hidden(item.path())) classes.push_back(item.path().filename().string());
    std::sort(classes.begin(), classes.end());
    if (classes.size() != 2)
        throw PreconditionError("need exactly 2 classes under " + root.string() + ", found " +
                                std::to_string(classes.size()));

    DatasetManifest manifest;
    manifest.root = root;
    manifest.class_names = {classes[0], classes[1]};

    for (int label = 0; label < 2; ++label)
    {
        const auto& cls = classes[static_cast<std::size_t>(label)];
        std::vector<std::string> files;
        for (const auto& item : fs::directory_iterator(root / cls))
            if (item.is_regular_file() && !hidden(item.path())) files.push_back(item.path().filename().string());
        std::sort(files.begin(), files.end());

        std::size_t kept = 0;
        for (const auto& file : files)
        {
            const auto source_id = cls + "/" + file;
            try
            {
                auto raster = decode_image(root / cls / file);
                if (raster.width == 0 || raster.height == 0) throw RuntimeFailure("zero-area image");
            }
            catch (const RuntimeFailure& e)
            {
                if (!options.skip_bad)
                    throw RuntimeFailure("undecodable image " + (root / cls / file).string() + ": " + e.what());
                manifest.skipped.push_back(source_id);
                continue;
            }
            manifest.entries.push_back({source_id, label});
            ++kept;
        }
        if (kept == 0) throw PreconditionError("class directory has no decodable images: " + (root / cls).string());
    }

    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const auto& a, const auto& b) { return a.source_id < b.source_id; });
    return manifest;
}

Tensor preprocess(const Raster& raster, std::size_t side)
{
    if (side == 0) throw PreconditionError("resize side must be positive");
    if (raster.width == 0 || raster.height == 0) throw RuntimeFailure("zero-area image");
    if (raster.channels != 1 && raster.channels != 3)
        throw PreconditionError("expected a grayscale or RGB raster");
    if (raster.pixels.size() != raster.width * raster.height * raster.channels)
        throw PreconditionError("raster size mismatch");

    Tensor out({kImageChannels, side, side});
    const double sy = static_cast<double>(raster.height) / static_cast<double>(side);
    const double sx = static_cast<double>(raster.width) / static_cast<double>(side);
    const auto max_y = static_cast<double>(raster.height - 1);
    const auto max_x = static_cast<double>(raster.width - 1);

    for (std::size_t y = 0; y < side; ++y)
    {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const auto y1 = std::min(y0 + 1, raster.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < side; ++x)
        {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const auto x1 = std::min(x0 + 1, raster.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < kImageChannels; ++c)
            {
                const std::size_t src_c = raster.channels == 1 ? 0 : c;
                const double top = (1.0 - wx) * raster.at(y0, x0, src_c) + wx * raster.at(y0, x1, src_c);
                const double bottom = (1.0 - wx) * raster.at(y1, x0, src_c) + wx * raster.at(y1, x1, src_c);
                const double v = (1.0 - wy) * top + wy * bottom;
                out[(c * side + y) * side + x] = std::clamp(v / 255.0, 0.0, 1.0);
            }
        }
    }
    return out;
}

Tensor load_and_preprocess(const fs::path& file, std::size_t side)
{
    return preprocess(decode_image(file), side);
}

Raster to_raster(const Tensor& pixels)
{
    if (pixels.rank() != 3 || pixels.dim(0) != kImageChannels)
        throw PreconditionError("expected a (3, H, W) tensor");
    Raster r;
    r.channels = kImageChannels;
    r.height = pixels.dim(1);
    r.width = pixels.dim(2);
    r.pixels.resize(r.width * r.height * r.channels);
    for (std::size_t c = 0; c < r.channels; ++c)
        for (std::size_t y = 0; y < r.height; ++y)
            for (std::size_t x = 0; x < r.width; ++x)
            {
                const double v = std::clamp(pixels[(c * r.height + y) * r.width + x], 0.0, 1.0);
                r.pixels[(y * r.width + x) * r.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return r;
}

std::size_t train_count(std::size_t n, double train_fraction)
{
    // The epsilon absorbs representation error, e.g. 0.7 * 900 = 629.999...
    return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, const SplitSpec& spec)
{
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw PreconditionError("train fraction must lie strictly between 0 and 1");
    if (manifest.entries.empty()) throw PreconditionError("cannot split an empty manifest");

    DatasetManifest train;
    DatasetManifest test;
    train.root = test.root = manifest.root;
    train.class_names = test.class_names = manifest.class_names;

    for (int label = 0; label < 2; ++label)
    {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i)
            if (manifest.entries[i].label == label) members.push_back(i);
        if (members.size() < 2)
            throw PreconditionError("class '" + manifest.class_names[static_cast<std::size_t>(label)] +
                                    "' has fewer than 2 samples; cannot split");

        std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(label)));
        std::shuffle(members.begin(), members.end(), rng);
        const auto k = train_count(members.size(), spec.train_fraction);
        for (std::size_t j = 0; j < members.size(); ++j)
            (j < k ? train : test).entries.push_back(manifest.entries[members[j]]);
    }

    const auto by_id = [](const auto& a, const auto& b) { return a.source_id < b.source_id; };
    std::sort(train.entries.begin(), train.entries.end(), by_id);
    std::sort(test.entries.begin(), test.entries.end(), by_id);
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch)
{
    if (batch_size == 0) throw PreconditionError("batch size must be at least 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Stream 0/1 are used by split(); epochs start at 1000 to stay disjoint.
    std::mt19937_64 rng(derive_seed(seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t start = 0; start < n; start += batch_size)
    {
        const auto end = std::min(n, start + batch_size);
        plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

ImageLoader::ImageLoader(fs::path root, std::size_t side, std::size_t cache_bytes)
    : root_(std::move(root)), side_(side), cache_budget_(cache_bytes)
{
}

ImageSample ImageLoader::load(const ManifestEntry& entry)
{
    if (auto it = cache_.find(entry.source_id); it != cache_.end()) return {it->second, entry.label, entry.source_id};

    auto pixels = load_and_preprocess(root_ / entry.source_id, side_);
    const auto bytes = pixels.size() * sizeof(double);
    if (cache_used_ + bytes <= cache_budget_)
    {
        cache_used_ += bytes;
        cache_.emplace(entry.source_id, pixels);
    }
    return {std::move(pixels), entry.label, entry.source_id};
}

BatchStream::BatchStream(const DatasetManifest& manifest, ImageLoader& loader, std::size_t batch_size,
                         std::uint64_t seed, std::uint64_t epoch)
    : manifest_(manifest), loader_(loader), plan_(epoch_batches(manifest.size(), batch_size, seed, epoch))
{
}

bool BatchStream::next(std::vector<ImageSample>& out)
{
    if (cursor_ >= plan_.size()) return false;
    out.clear();
    for (auto idx : plan_[cursor_]) out.push_back(loader_.load(manifest_.entries[idx]));
    ++cursor_;
    return true;
}

Tensor stack_pixels(const std::vector<ImageSample>& batch)
{
    if (batch.empty()) throw PreconditionError("cannot stack an empty batch");
    auto shape = batch.front().pixels.shape();
    const auto per = batch.front().pixels.size();
    Tensor::Shape out_shape{batch.size()};
    out_shape.insert(out_shape.end(), shape.begin(), shape.end());
    Tensor out(out_shape);
    for (std::size_t i = 0; i < batch.size(); ++i)
    {
        if (batch[i].pixels.shape() != shape) throw PreconditionError("batch samples differ in shape");
        std::copy(batch[i].pixels.data().begin(), batch[i].pixels.data().end(), out.data().begin() + i * per);
    }
    return out;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s)
    {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i)
    {
        const char c = line[i];
        if (quoted)
        {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
            else if (c == '"') quoted = false;
            else cur += c;
        }
        else if (c == '"') quoted = true;
        else if (c == ',') fields.push_back(std::exchange(cur, {}));
        else cur += c;
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::string manifest_to_csv(const DatasetManifest& manifest)
{
    std::string out = "source_id,label\n";
    for (const auto& e : manifest.entries) out += csv_field(e.source_id) + "," + std::to_string(e.label) + "\n";
    return out;
}

void write_manifest_csv(const fs::path& path, const DatasetManifest& manifest)
{
    io::write_text_atomic(path, manifest_to_csv(manifest));
}

std::vector<ManifestEntry> read_manifest_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "source_id,label")
        throw RuntimeFailure("manifest " + path.string() + " lacks the source_id,label header");
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line))
    {
        if (line.empty()) continue;
        auto fields = parse_csv_line(line);
        if (fields.size() != 2 || (fields[1] != "0" && fields[1] != "1"))
            throw RuntimeFailure("malformed manifest row in " + path.string() + ": " + line);
        entries.push_back({fields[0], fields[1] == "1" ? 1 : 0});
    }
    return entries;
}

}  // namespace vggsvm::dataset
