#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "raylink_test_cli";

int run(const std::string& args)
{
    const std::string cmd = std::string(RAYLINK_CLI) + " " + args + " >" + (kRoot / "stdout.txt").string() + " 2>" +
                            (kRoot / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string tiny_flags(const std::string& sub)
{
    const auto dir = kRoot / sub;
    return "--seed 3 --n-scenes 24 --lidar-azimuth-rays 64 --lidar-elevation-rays 8 --gnn-max-points 32 "
           "--gnn-hidden 8 --gnn-hop-layers 2 --detector-epochs 1 --refiner-channels 4 --refiner-epochs 1 "
           "--refiner-batch 4 --snr-db 0,10 --dataset-dir " +
           (dir / "data").string() + " --model-dir " + (dir / "models").string() + " --results-dir " +
           (dir / "results").string();
}

struct Scratch
{
    Scratch()
    {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
    ~Scratch() { fs::remove_all(kRoot); }
};

}  // namespace

TEST_CASE("usage errors exit with status 1")
{
    Scratch s;
    CHECK(run("") == 1);
    CHECK(run("gen --no-such-flag 1") == 1);
    CHECK(run("gen --n-scenes 0") == 1);
    CHECK(slurp(kRoot / "stderr.txt").find("n_scenes") != std::string::npos);
    CHECK(run("gen --los-fraction 2") == 1);
    CHECK(run("train cnn") == 1);
    CHECK(run("gen --config " + (kRoot / "missing.ini").string()) == 1);
}

TEST_CASE("help and version")
{
    Scratch s;
    CHECK(run("--help") == 0);
    CHECK(slurp(kRoot / "stdout.txt").find("gen") != std::string::npos);
    CHECK(run("gen --help") == 0);
    CHECK(slurp(kRoot / "stdout.txt").find("--n-scenes") != std::string::npos);
    CHECK(run("--version") == 0);
    CHECK(slurp(kRoot / "stdout.txt").find("raylink") != std::string::npos);
}

TEST_CASE("runtime errors exit with status 2")
{
    Scratch s;
    CHECK(run("eval " + tiny_flags("empty")) == 2);
    CHECK(run("report " + tiny_flags("empty")) == 2);
}

TEST_CASE("end to end")
{
    Scratch s;
    const auto flags = tiny_flags("a");
    REQUIRE(run("gen " + flags) == 0);
    REQUIRE(run("gen " + tiny_flags("b")) == 0);
    CHECK(slurp(kRoot / "a/data/samples.bin") == slurp(kRoot / "b/data/samples.bin"));

    for (const char* target : {"detector-gnn", "detector-pbgnn", "refiner"}) CHECK(run("train " + std::string(target) + " " + flags) == 0);
    REQUIRE(run("eval " + flags) == 0);
    REQUIRE(run("report " + flags) == 0);
    CHECK(slurp(kRoot / "stdout.txt").find("Refined") != std::string::npos);
    CHECK(fs::exists(kRoot / "a/results/report.csv"));

    // A config file is applied before the command-line overrides.
    {
        std::ofstream ini(kRoot / "run.ini");
        ini << "# test\nseed = 99\nuse_pruned = false\n";
    }
    REQUIRE(run("eval --config " + (kRoot / "run.ini").string() + " " + flags) == 0);
    const auto resolved = slurp(kRoot / "a/results/config.ini");
    CHECK(resolved.find("seed = 3") != std::string::npos);
    CHECK(resolved.find("use_pruned = false") != std::string::npos);

    CHECK(run("gen --export-facets 0 " + flags) == 0);
    CHECK_FALSE(slurp(kRoot / "stdout.txt").empty());
}
