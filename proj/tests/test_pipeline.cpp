#include "raylink/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace raylink;
using namespace raylink::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("raylink_test_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

config::RunConfig tiny(const fs::path& root)
{
    config::RunConfig c;
    c.seed = 5;
    c.n_scenes = 40;
    c.lidar_azimuth_rays = 96;
    c.lidar_elevation_rays = 12;
    c.gnn_max_points = 48;
    c.gnn_hidden = 8;
    c.gnn_hop_layers = 2;
    c.gnn_head_hidden = 4;
    c.detector_epochs = 2;
    c.detector_batch = 8;
    c.refiner_channels = {4};
    c.refiner_epochs = 2;
    c.refiner_batch = 4;
    c.dataset_dir = (root / "data").string();
    c.model_dir = (root / "models").string();
    c.results_dir = (root / "results").string();
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p)
{
    std::ifstream is(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("generation is deterministic and normalized")
{
    const auto root = scratch("gen");
    auto a = tiny(root / "a");
    auto b = tiny(root / "b");
    cmd_gen(a);
    cmd_gen(b);
    CHECK(slurp(fs::path(a.dataset_dir) / "samples.bin") == slurp(fs::path(b.dataset_dir) / "samples.bin"));

    const auto d = dataset::read_dataset(a.dataset_dir);
    auto ja = d.manifest.to_json(), jb = dataset::read_dataset(b.dataset_dir).manifest.to_json();
    CHECK(ja.at("config").at("dataset_dir") != jb.at("config").at("dataset_dir"));
    ja.erase("config");
    jb.erase("config");
    CHECK(ja == jb);
    const auto& m = d.manifest;
    CHECK(d.records.size() == 40);
    CHECK(m.train_count + m.val_count + m.test_count == 40);
    CHECK(m.los_count + m.nlos_count == 40);
    double energy = 0.0;
    std::size_t count = 0;
    for (const auto& r : d.records) {
        CHECK(r.true_channel.rows() == 16);
        CHECK(r.split == dataset::split_for(a.seed, r.scene_id));
        if (r.split != dataset::Split::Train) continue;
        energy += std::pow(r.true_channel.frobenius_norm(), 2);
        ++count;
    }
    const double mean = energy / static_cast<double>(count) / 256.0;
    CHECK(mean >= 0.98);
    CHECK(mean <= 1.02);

    // Estimates and the geometric LoS baseline use the stored normalization.
    const auto& r = d.records.front();
    const auto h = estimate_channel(r.rt_paths, m);
    auto raw = channel::assemble(r.rt_paths, m.antennas.ue_array, m.antennas.bs_array, m.wavelength);
    raw *= m.normalization;
    CHECK(h == raw);
    const auto los = geometric_los_paths(r, m);
    REQUIRE(los.size() == 1);
    CHECK(los.paths[0].is_los);
    CHECK(los.paths[0].length == doctest::Approx(distance(r.ue_position, r.bs_position)));

    // Worker count does not change the output.
    auto t = tiny(root / "t");
    t.threads = 3;
    cmd_gen(t);
    CHECK(slurp(fs::path(t.dataset_dir) / "samples.bin") == slurp(fs::path(a.dataset_dir) / "samples.bin"));

    // A different seed gives a different dataset.
    auto c = tiny(root / "c");
    c.seed = 6;
    cmd_gen(c);
    CHECK(slurp(fs::path(c.dataset_dir) / "samples.bin") != slurp(fs::path(a.dataset_dir) / "samples.bin"));
    fs::remove_all(root);
}

TEST_CASE("train, evaluate and report")
{
    const auto root = scratch("full");
    auto c = tiny(root);
    c.snr_db = {10};
    cmd_gen(c);
    for (auto t : {TrainTarget::DetectorGnn, TrainTarget::DetectorPbgnn, TrainTarget::Refiner}) cmd_train(c, t);
    for (const char* f : {"detector-gnn.ckpt", "detector-pbgnn.ckpt", "refiner.ckpt", "config.ini", "VERSION"})
        CHECK(fs::exists(fs::path(c.model_dir) / f));

    cmd_eval(c, EvalOptions{});
    const fs::path res = c.results_dir;
    const auto det = lines(res / "detection.csv");
    REQUIRE(det.size() == 4);
    CHECK(det[0] == "detector,precision,recall,accuracy,tp,fp,tn,fn,sample_count");
    CHECK(det[1].rfind("RT,", 0) == 0);
    CHECK(det[2].rfind("GNN,", 0) == 0);
    CHECK(det[3].rfind("PBGNN,", 0) == 0);

    // One SNR: every strategy has exactly one rate row per split.
    const auto digital = lines(res / "digital_rate.csv");
    for (const std::string s : {"No CSI", "LoS", "RT", "Refined", "Perfect CSI"})
        for (const std::string split : {"los", "nlos", "all"}) {
            int n = 0;
            for (const auto& l : digital) n += l.rfind(s + ",10," + split + ",rate,", 0) == 0 ? 1 : 0;
            CHECK(n == 1);
        }
    CHECK(fs::exists(res / "analog_rate_ratio.csv"));
    CHECK(fs::exists(res / "summary.json"));

    std::ostringstream table;
    cmd_report(c, table);
    CHECK(fs::exists(res / "report.csv"));
    CHECK(table.str().find("Perfect CSI") != std::string::npos);

    SUBCASE("oracle estimates reach capacity")
    {
        auto o = c;
        o.results_dir = (root / "oracle").string();
        cmd_eval(o, EvalOptions{true, false});
        for (const auto& l : lines(fs::path(o.results_dir) / "digital_rate.csv")) {
            if (l.find(",capacity_ratio,") == std::string::npos || l.rfind("No CSI", 0) == 0 || l.ends_with(",0"))
                continue;
            std::istringstream fields(l);
            std::string cell;
            for (int i = 0; i < 5; ++i) std::getline(fields, cell, ',');
            INFO(l);
            CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    fs::remove_all(root);
}

TEST_CASE("refiner needs NLoS training samples")
{
    const auto root = scratch("los_only");
    auto c = tiny(root);
    c.n_scenes = 12;
    c.los_fraction = 1.0;
    cmd_gen(c);
    CHECK(dataset::read_dataset(c.dataset_dir).manifest.nlos_count == 0);
    CHECK_THROWS(cmd_train(c, TrainTarget::Refiner));
    fs::remove_all(root);
}

TEST_CASE("directory lock is exclusive")
{
    const auto root = scratch("lock");
    {
        DirectoryLock first(root);
        CHECK(fs::exists(root / ".lock"));
        CHECK_THROWS(DirectoryLock{root});
    }
    CHECK_FALSE(fs::exists(root / ".lock"));
    CHECK_NOTHROW(DirectoryLock{root});
    fs::remove_all(root);
}

TEST_CASE("missing inputs")
{
    const auto root = scratch("missing");
    auto c = tiny(root);
    CHECK_THROWS(cmd_train(c, TrainTarget::DetectorGnn));
    CHECK_THROWS(cmd_eval(c, EvalOptions{}));
    CHECK_THROWS(train_target_from_string("cnn"));
    CHECK(to_string(train_target_from_string("refiner")) == "refiner");
    fs::remove_all(root);
}
