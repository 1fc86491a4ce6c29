#include <iostream>

#include "CLI11.hpp"
#include "fixture.hpp"
#include "vggsvm/error.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Write the synthetic bright/dark blob image set", "vggsvm-fixture"};
    std::string out;
    vggsvm::cli::BlobFixtureSpec spec;
    app.add_option("--out", out, "destination directory")->required();
    app.add_option("--per-class", spec.per_class, "images per class")->capture_default_str();
    app.add_option("--side", spec.side, "image side in pixels")->capture_default_str();
    app.add_option("--seed", spec.seed)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try
    {
        vggsvm::cli::write_blob_fixture(out, spec);
    }
    catch (const vggsvm::PreconditionError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::cout << "wrote " << 2 * spec.per_class << " images to " << out << "\n";
    return 0;
}
