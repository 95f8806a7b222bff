#include "raylink/dataset.hpp"

#include "raylink/binary_io.hpp"
#include "raylink/rng.hpp"

#include <fstream>
#include <stdexcept>

namespace raylink::dataset {

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

nlohmann::json array_json(const channel::ArrayConfig& a, const Frame& f)
{
    return {{"n_x", a.n_x},
            {"n_y", a.n_y},
            {"spacing_x", a.spacing_x},
            {"spacing_y", a.spacing_y},
            {"axis_x", vec_json(f.axis_x)},
            {"axis_y", vec_json(f.axis_y)},
            {"broadside", vec_json(f.broadside)}};
}

void array_from(const nlohmann::json& j, channel::ArrayConfig& a, Frame& f)
{
    a.n_x = j.at("n_x");
    a.n_y = j.at("n_y");
    a.spacing_x = j.at("spacing_x");
    a.spacing_y = j.at("spacing_y");
    f.axis_x = vec_from(j.at("axis_x"));
    f.axis_y = vec_from(j.at("axis_y"));
    f.broadside = vec_from(j.at("broadside"));
}

}  // namespace

std::string to_string(Split s)
{
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_for(std::uint64_t seed, std::uint64_t scene_id)
{
    const std::uint64_t bucket = derive_seed(seed, "split", scene_id) % 10;
    if (bucket < 8) return Split::Train;
    return bucket == 8 ? Split::Val : Split::Test;
}

nlohmann::json Manifest::to_json() const
{
    nlohmann::json j;
    j["format_version"] = format_version;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["antennas"] = {{"ue", array_json(antennas.ue_array, antennas.ue_frame)},
                     {"bs", array_json(antennas.bs_array, antennas.bs_frame)},
                     {"transmitter", "ue"}};
    j["wavelength"] = wavelength;
    j["normalization_constant"] = normalization;
    j["estimate_order"] = estimate_order;
    j["truth_order"] = truth_order;
    j["samples"] = {{"train", train_count}, {"val", val_count}, {"test", test_count}};
    j["los_count"] = los_count;
    j["nlos_count"] = nlos_count;
    j["discarded"] = discarded;
    j["codebook"] = {{"b_bits", codebook.b_bits},
                     {"pruned_indices", codebook.pruned_indices},
                     {"counts", codebook.counts},
                     {"fallback", codebook.fallback}};
    j["config"] = config;
    return j;
}

Manifest Manifest::from_json(const nlohmann::json& j)
{
    Manifest m;
    m.format_version = j.at("format_version");
    if (m.format_version != 1)
        throw std::runtime_error("manifest: unsupported format version " + std::to_string(m.format_version));
    m.tool_version = j.value("tool_version", "");
    m.seed = j.at("seed");
    array_from(j.at("antennas").at("ue"), m.antennas.ue_array, m.antennas.ue_frame);
    array_from(j.at("antennas").at("bs"), m.antennas.bs_array, m.antennas.bs_frame);
    m.wavelength = j.at("wavelength");
    m.normalization = j.at("normalization_constant");
    m.estimate_order = j.at("estimate_order");
    m.truth_order = j.at("truth_order");
    m.train_count = j.at("samples").at("train");
    m.val_count = j.at("samples").at("val");
    m.test_count = j.at("samples").at("test");
    m.los_count = j.at("los_count");
    m.nlos_count = j.at("nlos_count");
    m.discarded = j.value("discarded", std::size_t{0});
    const auto& cb = j.at("codebook");
    m.codebook.b_bits = cb.at("b_bits");
    m.codebook.pruned_indices = cb.at("pruned_indices").get<std::vector<std::size_t>>();
    m.codebook.counts = cb.at("counts").get<std::vector<std::uint64_t>>();
    m.codebook.fallback = cb.at("fallback");
    m.config = j.value("config", nlohmann::json::object());
    return m;
}

std::vector<std::size_t> Dataset::indices(Split split) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) out.push_back(i);
    return out;
}

void round_to_float(PointCloud& cloud)
{
    for (auto& p : cloud.points)
        p = {static_cast<double>(static_cast<float>(p.x)), static_cast<double>(static_cast<float>(p.y)),
             static_cast<double>(static_cast<float>(p.z))};
}

void write_records(std::ostream& os, const std::vector<Record>& records)
{
    for (const auto& r : records) {
        io::write_le<std::uint64_t>(os, r.scene_id);
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.split));
        io::write_le<std::uint8_t>(os, r.true_los ? 1 : 0);
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.cloud.size()));
        for (const auto& p : r.cloud.points) {
            io::write_le<float>(os, static_cast<float>(p.x));
            io::write_le<float>(os, static_cast<float>(p.y));
            io::write_le<float>(os, static_cast<float>(p.z));
        }
        for (const Vec3& v : {r.ue_position, r.bs_position}) {
            io::write_le<double>(os, v.x);
            io::write_le<double>(os, v.y);
            io::write_le<double>(os, v.z);
        }
        for (std::size_t i = 0; i < r.true_channel.rows(); ++i)
            for (std::size_t j = 0; j < r.true_channel.cols(); ++j) {
                io::write_le<double>(os, r.true_channel(i, j).real());
                io::write_le<double>(os, r.true_channel(i, j).imag());
            }
        raytrace::write_paths(os, r.rt_paths);
    }
}

std::vector<Record> read_records(std::istream& is, std::size_t n_rx, std::size_t n_tx, int estimate_order)
{
    std::vector<Record> out;
    while (is.peek() != std::char_traits<char>::eof()) {
        Record r;
        r.scene_id = io::read_le<std::uint64_t>(is);
        const auto split = io::read_le<std::uint8_t>(is);
        if (split > 2) throw std::runtime_error("samples.bin: invalid split tag");
        r.split = static_cast<Split>(split);
        r.true_los = io::read_le<std::uint8_t>(is) != 0;
        const auto n_points = io::read_le<std::uint32_t>(is);
        r.cloud.points.resize(n_points);
        for (auto& p : r.cloud.points) {
            p.x = io::read_le<float>(is);
            p.y = io::read_le<float>(is);
            p.z = io::read_le<float>(is);
        }
        for (Vec3* v : {&r.ue_position, &r.bs_position}) {
            v->x = io::read_le<double>(is);
            v->y = io::read_le<double>(is);
            v->z = io::read_le<double>(is);
        }
        r.true_channel = linalg::ComplexMatrix(n_rx, n_tx);
        for (std::size_t i = 0; i < n_rx; ++i)
            for (std::size_t j = 0; j < n_tx; ++j) {
                const double re = io::read_le<double>(is);
                const double im = io::read_le<double>(is);
                r.true_channel(i, j) = {re, im};
            }
        r.rt_paths = raytrace::read_paths(is, estimate_order);
        out.push_back(std::move(r));
    }
    return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset)
{
    std::filesystem::create_directories(dir);
    std::filesystem::remove(dir / "manifest.json");
    {
        std::ofstream os(dir / "samples.bin", std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / "samples.bin").string());
        write_records(os, dataset.records);
        if (!os) throw std::runtime_error("write failed for " + (dir / "samples.bin").string());
    }
    const auto tmp = dir / "manifest.json.tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        os << dataset.manifest.to_json().dump(2) << '\n';
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, dir / "manifest.json");
}

Dataset read_dataset(const std::filesystem::path& dir)
{
    std::ifstream ms(dir / "manifest.json");
    if (!ms) throw std::runtime_error("dataset at " + dir.string() + " is missing or incomplete (no manifest.json)");
    Dataset d;
    d.manifest = Manifest::from_json(nlohmann::json::parse(ms));
    std::ifstream is(dir / "samples.bin", std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + (dir / "samples.bin").string());
    d.records = read_records(is, d.manifest.antennas.bs_array.size(), d.manifest.antennas.ue_array.size(),
                             d.manifest.estimate_order);
    return d;
}

}  // namespace raylink::dataset
