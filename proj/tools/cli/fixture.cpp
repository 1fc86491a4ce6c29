#include "fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vggsvm/dataset.hpp"
#include "vggsvm/error.hpp"
#include "vggsvm/image_io.hpp"

namespace vggsvm::cli {

void write_blob_fixture(const std::filesystem::path& root, const BlobFixtureSpec& spec)
{
    if (spec.per_class == 0 || spec.side < 4) throw PreconditionError("fixture needs per_class >= 1 and side >= 4");
    const auto side = static_cast<double>(spec.side);
    for (int label = 0; label < 2; ++label)
    {
        const auto dir = root / (label == 0 ? "bright" : "dark");
        std::filesystem::create_directories(dir);
        const double amplitude = label == 0 ? 90.0 : -90.0;
        std::mt19937_64 rng(dataset::derive_seed(spec.seed, static_cast<std::uint64_t>(label)));
        std::uniform_real_distribution<double> centre(0.3 * side, 0.7 * side);
        std::uniform_real_distribution<double> radius(0.12 * side, 0.2 * side);
        std::normal_distribution<double> noise(0.0, 12.0);

        for (std::size_t i = 0; i < spec.per_class; ++i)
        {
            const double cy = centre(rng), cx = centre(rng), r = radius(rng);
            Raster img{spec.side, spec.side, 1, std::vector<std::uint8_t>(spec.side * spec.side)};
            for (std::size_t y = 0; y < spec.side; ++y)
                for (std::size_t x = 0; x < spec.side; ++x)
                {
                    const double dy = static_cast<double>(y) + 0.5 - cy;
                    const double dx = static_cast<double>(x) + 0.5 - cx;
                    const double v = 128.0 + amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * r * r)) + noise(rng);
                    img.pixels[y * spec.side + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                }
            char name[32];
            std::snprintf(name, sizeof name, "img_%04zu.png", i);
            write_png(dir / name, img);
        }
    }
}

}  // namespace vggsvm::cli
