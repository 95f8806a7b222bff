#include "support.hpp"

#include "raylink/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace raylink;
using namespace raylink::dataset;

namespace {

Record random_record(std::uint64_t id, Rng& rng)
{
    Record r;
    r.scene_id = id;
    r.split = split_for(3, id);
    r.true_los = rng.uniform() < 0.5;
    for (int i = 0; i < 50; ++i) r.cloud.points.push_back({rng.normal(), rng.normal(), rng.normal()});
    round_to_float(r.cloud);
    r.ue_position = {rng.uniform(-30, 30), rng.uniform(-7, 3), 1.8};
    r.bs_position = {0, 8.5, 6};
    r.true_channel = testing::random_matrix(16, 16, rng);
    r.rt_paths.max_order = 2;
    for (int k = 0; k < 3; ++k) {
        raytrace::Path p;
        p.gain = testing::random_complex(rng);
        p.length = rng.uniform(5, 50);
        p.bounce_count = k;
        p.is_los = k == 0;
        p.aod_azimuth = rng.uniform(0, 1.5);
        p.aoa_elevation = rng.uniform(-3, 3);
        r.rt_paths.paths.push_back(p);
    }
    return r;
}

}  // namespace

TEST_CASE("split assignment")
{
    int counts[3] = {0, 0, 0};
    const int n = 20000;
    for (int id = 0; id < n; ++id) {
        const Split s = split_for(42, id);
        CHECK(s == split_for(42, id));
        ++counts[static_cast<int>(s)];
    }
    CHECK(counts[0] == doctest::Approx(0.8 * n).epsilon(0.02));
    CHECK(counts[1] == doctest::Approx(0.1 * n).epsilon(0.08));
    CHECK(counts[2] == doctest::Approx(0.1 * n).epsilon(0.08));

    int moved = 0;
    for (int id = 0; id < 1000; ++id) moved += split_for(42, id) != split_for(43, id) ? 1 : 0;
    CHECK(moved > 100);
    CHECK(to_string(Split::Val) == "val");
}

TEST_CASE("float rounding is idempotent")
{
    PointCloud c{{{0.1, 1.0 / 3.0, -7.123456789}}};
    round_to_float(c);
    CHECK(c.points[0].x == static_cast<double>(0.1f));
    const PointCloud again = c;
    round_to_float(c);
    CHECK(c == again);
}

TEST_CASE("records round trip bit-exactly")
{
    Rng rng(1);
    std::vector<Record> records;
    for (std::uint64_t id = 0; id < 10; ++id) records.push_back(random_record(id * 7, rng));
    records[3].cloud.points.clear();
    records[4].rt_paths.paths.clear();

    std::stringstream ss;
    write_records(ss, records);
    const auto back = read_records(ss, 16, 16, 2);
    CHECK(back == records);

    std::stringstream truncated(ss.str().substr(0, ss.str().size() - 5));
    CHECK_THROWS(read_records(truncated, 16, 16, 2));
}

TEST_CASE("dataset directory")
{
    Rng rng(2);
    const auto dir = std::filesystem::temp_directory_path() / "raylink_test_dataset";
    std::filesystem::remove_all(dir);

    Dataset d;
    d.manifest.seed = 3;
    d.manifest.tool_version = "test";
    d.manifest.normalization = 1234.5;
    d.manifest.codebook.pruned_indices = {1, 5, 9};
    d.manifest.codebook.counts = {0, 4, 0, 0, 0, 7};
    d.manifest.config = {{"n_scenes", 12}};
    for (std::uint64_t id = 0; id < 12; ++id) d.records.push_back(random_record(id, rng));
    for (const auto& r : d.records) {
        auto& count = r.split == Split::Train ? d.manifest.train_count
                      : r.split == Split::Val ? d.manifest.val_count
                                              : d.manifest.test_count;
        ++count;
    }
    write_dataset(dir, d);

    const Dataset back = read_dataset(dir);
    CHECK(back.records == d.records);
    CHECK(back.manifest.to_json() == d.manifest.to_json());
    CHECK(back.manifest.normalization == 1234.5);
    CHECK(back.manifest.codebook.pruned_indices == d.manifest.codebook.pruned_indices);
    std::size_t train = 0;
    for (auto i : back.indices(Split::Train)) {
        CHECK(back.records[i].split == Split::Train);
        ++train;
    }
    CHECK(train == d.manifest.train_count);

    std::filesystem::remove(dir / "manifest.json");
    CHECK_THROWS(read_dataset(dir));
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest json")
{
    Manifest m;
    m.seed = 99;
    m.discarded = 4;
    m.los_count = 10;
    m.nlos_count = 8;
    const auto j = m.to_json();
    CHECK(j.at("seed") == 99);
    const Manifest back = Manifest::from_json(j);
    CHECK(back.discarded == 4);
    CHECK(back.to_json() == j);
    auto bad = j;
    bad["format_version"] = 999;
    CHECK_THROWS(Manifest::from_json(bad));
}
