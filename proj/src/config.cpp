#include "raylink/config.hpp"

#include <algorithm>
#include <charconv>
#include <concepts>
#include <cmath>
#include <fstream>
#include <sstream>

namespace raylink::config {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(trim(item));
    return out;
}

template <typename T>
T parse_number(const std::string& text)
{
    const std::string s = trim(text);
    T value{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) throw ConfigError("invalid number '" + text + "'");
    return value;
}

template <typename T>
std::string format_number(T v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Parse/format overloads per field type.
void parse_into(const std::string& s, double& out) { out = parse_number<double>(s); }
void parse_into(const std::string& s, int& out) { out = parse_number<int>(s); }
template <std::unsigned_integral T>
    requires(!std::is_same_v<T, bool>)
void parse_into(const std::string& s, T& out)
{
    if (trim(s).starts_with('-')) throw ConfigError("expected a non-negative integer, got '" + s + "'");
    out = parse_number<T>(s);
}
void parse_into(const std::string& s, std::string& out) { out = trim(s); }
void parse_into(const std::string& s, bool& out)
{
    const std::string t = trim(s);
    if (t == "true" || t == "1") out = true;
    else if (t == "false" || t == "0") out = false;
    else throw ConfigError("expected true or false, got '" + s + "'");
}
void parse_into(const std::string& s, Vec3& out)
{
    const auto parts = split_list(s);
    if (parts.size() != 3) throw ConfigError("expected x,y,z, got '" + s + "'");
    out = {parse_number<double>(parts[0]), parse_number<double>(parts[1]), parse_number<double>(parts[2])};
}
template <typename T>
void parse_into(const std::string& s, std::vector<T>& out)
{
    std::vector<T> v;
    for (const auto& p : split_list(s)) {
        T x{};
        parse_into(p, x);
        v.push_back(x);
    }
    out = std::move(v);
}

std::string format(double v) { return format_number(v); }
std::string format(int v) { return format_number(v); }
template <std::unsigned_integral T>
    requires(!std::is_same_v<T, bool>)
std::string format(T v)
{
    return format_number(v);
}
std::string format(const std::string& v) { return v; }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const Vec3& v) { return format(v.x) + "," + format(v.y) + "," + format(v.z); }
template <typename T>
std::string format(const std::vector<T>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format(v[i]);
    return s;
}

template <typename T>
KeyInfo entry(std::string name, T RunConfig::*member, std::string help)
{
    return {std::move(name), std::move(help), [member](const RunConfig& c) { return format(c.*member); },
            [member](RunConfig& c, const std::string& s) { parse_into(s, c.*member); }};
}

std::vector<KeyInfo> build_registry()
{
    using C = RunConfig;
    return {
        entry("seed", &C::seed, "root seed for every random draw"),
        entry("threads", &C::threads, "worker threads for dataset generation"),
        entry("dataset_dir", &C::dataset_dir, "dataset directory"),
        entry("model_dir", &C::model_dir, "checkpoint and training-log directory"),
        entry("results_dir", &C::results_dir, "evaluation output directory"),

        entry("n_scenes", &C::n_scenes, "number of scenes to generate"),
        entry("street_half_length", &C::street_half_length, "street extent along x (m)"),
        entry("street_half_width", &C::street_half_width, "road half width (m)"),
        entry("buildings_min", &C::buildings_min, "minimum building count"),
        entry("buildings_max", &C::buildings_max, "maximum building count"),
        entry("vehicles_min", &C::vehicles_min, "minimum vehicle count"),
        entry("vehicles_max", &C::vehicles_max, "maximum vehicle count"),
        entry("los_fraction", &C::los_fraction, "target share of LoS scenes"),
        entry("bs_position", &C::bs_position, "base station position x,y,z (m)"),
        entry("ue_height", &C::ue_height, "UE antenna and LIDAR height (m)"),
        entry("ue_x_min", &C::ue_x_min, "UE placement region"),
        entry("ue_x_max", &C::ue_x_max, "UE placement region"),
        entry("ue_y_min", &C::ue_y_min, "UE placement region"),
        entry("ue_y_max", &C::ue_y_max, "UE placement region"),
        entry("min_link_distance", &C::min_link_distance, "minimum horizontal UE-BS distance (m)"),
        entry("blocker_min_distance", &C::blocker_min_distance, "blocker distance from the UE, lower bound (m)"),
        entry("blocker_max_distance", &C::blocker_max_distance, "blocker distance from the UE, upper bound (m)"),
        entry("los_clearance", &C::los_clearance, "vehicle clearance from the direct path in LoS scenes (m)"),
        entry("ground_reflection", &C::ground_reflection, "ground reflection coefficient"),
        entry("wavelength", &C::wavelength, "carrier wavelength (m)"),
        entry("max_attempts", &C::max_attempts, "placement attempts before a scene is rejected"),

        entry("lidar_azimuth_rays", &C::lidar_azimuth_rays, "LIDAR rays per revolution"),
        entry("lidar_elevation_rays", &C::lidar_elevation_rays, "LIDAR elevation channels"),
        entry("lidar_elevation_min_deg", &C::lidar_elevation_min_deg, "lowest LIDAR elevation (deg)"),
        entry("lidar_elevation_max_deg", &C::lidar_elevation_max_deg, "highest LIDAR elevation (deg)"),
        entry("lidar_range", &C::lidar_range, "LIDAR range (m)"),
        entry("lidar_noise_sigma", &C::lidar_noise_sigma, "per-axis point noise (m)"),
        entry("lidar_dropout", &C::lidar_dropout, "probability a return is lost"),

        entry("voxel_resolution", &C::voxel_resolution, "voxel edge length (m)"),
        entry("voxel_min_points", &C::voxel_min_points, "points needed to occupy a voxel"),
        entry("surface_material", &C::surface_material, "reflection coefficient of reconstructed faces"),
        entry("ground_threshold", &C::ground_threshold, "ground RANSAC inlier distance (m)"),
        entry("ransac_iterations", &C::ransac_iterations, "ground RANSAC iterations"),

        entry("estimate_order", &C::estimate_order, "reflection order of the ray-traced estimate"),
        entry("truth_order", &C::truth_order, "reflection order of the ground-truth channel"),
        entry("gain_sigma_db", &C::gain_sigma_db, "log-normal gain perturbation of true paths (dB)"),
        entry("phase_jitter_deg", &C::phase_jitter_deg, "uniform phase jitter of true paths (deg)"),
        entry("ue_nx", &C::ue_nx, "UE array columns"),
        entry("ue_ny", &C::ue_ny, "UE array rows"),
        entry("bs_nx", &C::bs_nx, "BS array columns"),
        entry("bs_ny", &C::bs_ny, "BS array rows"),
        entry("ue_broadside", &C::ue_broadside, "UE array broadside direction"),
        entry("bs_broadside", &C::bs_broadside, "BS array broadside direction"),

        entry("codebook_bits", &C::codebook_bits, "DFT oversampling bits B"),
        entry("prune_min_count", &C::prune_min_count, "keep codewords selected more often than this"),
        entry("use_pruned", &C::use_pruned, "restrict analog selection to the pruned codebook"),

        entry("gnn_k", &C::gnn_k, "neighbours per point"),
        entry("gnn_hidden", &C::gnn_hidden, "hop MLP width"),
        entry("gnn_hop_layers", &C::gnn_hop_layers, "layers per hop MLP"),
        entry("gnn_head_hidden", &C::gnn_head_hidden, "classifier hidden width"),
        entry("gnn_max_points", &C::gnn_max_points, "farthest-point subsample size"),
        entry("gnn_position_scale", &C::gnn_position_scale, "position divisor (m)"),
        entry("gnn_link_frame", &C::gnn_link_frame, "rotate clouds so the BS lies on the +x axis"),
        entry("detector_epochs", &C::detector_epochs, "detector training epochs"),
        entry("detector_batch", &C::detector_batch, "detector batch size"),
        entry("detector_lr", &C::detector_lr, "detector learning rate"),

        entry("refiner_channels", &C::refiner_channels, "hidden channels of the refiner ladder"),
        entry("refiner_epochs", &C::refiner_epochs, "refiner training epochs"),
        entry("refiner_batch", &C::refiner_batch, "refiner batch size"),
        entry("refiner_lr", &C::refiner_lr, "refiner learning rate"),

        entry("snr_db", &C::snr_db, "SNR sweep (dB)"),
    };
}

void require(bool ok, const std::string& message)
{
    if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const
{
    require(n_scenes > 0, "n_scenes must be positive");
    require(threads >= 1, "threads must be at least 1");
    require(estimate_order >= 0 && estimate_order <= 4, "estimate_order must be in [0, 4]");
    require(truth_order >= 0 && truth_order <= 4, "truth_order must be in [0, 4]");
    require(ue_nx > 0 && ue_ny > 0 && bs_nx > 0 && bs_ny > 0, "array dimensions must be positive");
    require(norm(ue_broadside) > 0 && norm(bs_broadside) > 0, "broadside directions must be non-zero");
    require(codebook_bits >= 1 && codebook_bits <= 4, "codebook_bits must be in [1, 4]");
    require(gnn_k > 0 && gnn_hidden > 0 && gnn_hop_layers > 0 && gnn_head_hidden > 0,
            "detector sizes must be positive");
    require(gnn_max_points > gnn_k, "gnn_max_points must exceed gnn_k");
    require(gnn_position_scale > 0, "gnn_position_scale must be positive");
    require(detector_epochs > 0 && detector_batch > 0 && detector_lr > 0, "detector training settings must be positive");
    require(!refiner_channels.empty(), "refiner_channels must not be empty");
    require(std::ranges::all_of(refiner_channels, [](std::size_t c) { return c > 0; }),
            "refiner_channels must be positive");
    require(refiner_epochs > 0 && refiner_batch > 1 && refiner_lr > 0, "refiner training settings must be positive");
    require(!snr_db.empty(), "snr_db must list at least one value");
    require(std::ranges::all_of(snr_db, [](double s) { return std::isfinite(s); }), "snr_db must be finite");
    require(gain_sigma_db >= 0 && phase_jitter_deg >= 0, "fading parameters must be non-negative");
    try {
        scene_config().validate();
        lidar_config().validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    require(voxel_resolution > 0 && voxel_min_points >= 1, "voxel settings must be positive");
    require(ransac_iterations >= 1 && ground_threshold > 0, "ground fit settings must be positive");
    require(surface_material >= 0 && surface_material <= 1, "surface_material must be in [0, 1]");
}

scene::SceneConfig RunConfig::scene_config() const
{
    scene::SceneConfig s;
    s.street_half_length = street_half_length;
    s.street_half_width = street_half_width;
    s.buildings_min = buildings_min;
    s.buildings_max = buildings_max;
    s.vehicles_min = vehicles_min;
    s.vehicles_max = vehicles_max;
    s.los_fraction = los_fraction;
    s.bs_position = bs_position;
    s.ue_height = ue_height;
    s.ue_x_min = ue_x_min;
    s.ue_x_max = ue_x_max;
    s.ue_y_min = ue_y_min;
    s.ue_y_max = ue_y_max;
    s.min_link_distance = min_link_distance;
    s.blocker_min_distance = blocker_min_distance;
    s.blocker_max_distance = blocker_max_distance;
    s.los_clearance = los_clearance;
    s.ground_reflection = ground_reflection;
    s.wavelength = wavelength;
    s.max_attempts = max_attempts;
    return s;
}

scene::LidarConfig RunConfig::lidar_config() const
{
    scene::LidarConfig l;
    l.azimuth_rays = lidar_azimuth_rays;
    l.elevation_rays = lidar_elevation_rays;
    l.elevation_min_deg = lidar_elevation_min_deg;
    l.elevation_max_deg = lidar_elevation_max_deg;
    l.range = lidar_range;
    l.noise_sigma = lidar_noise_sigma;
    l.dropout = lidar_dropout;
    return l;
}

surface::ReconstructOptions RunConfig::reconstruct_options() const
{
    surface::ReconstructOptions o;
    o.resolution = voxel_resolution;
    o.min_points = voxel_min_points;
    o.material = surface_material;
    o.noise_sigma = lidar_noise_sigma;
    o.ground_threshold = ground_threshold;
    o.ransac_iterations = ransac_iterations;
    return o;
}

scene::FadingConfig RunConfig::fading_config() const { return {gain_sigma_db, phase_jitter_deg}; }

scene::AntennaSetup RunConfig::antenna_setup() const
{
    scene::AntennaSetup a;
    a.ue_array = channel::ArrayConfig::half_wavelength(ue_nx, ue_ny, wavelength);
    a.bs_array = channel::ArrayConfig::half_wavelength(bs_nx, bs_ny, wavelength);
    a.ue_frame = Frame::from_broadside(ue_broadside);
    a.bs_frame = Frame::from_broadside(bs_broadside);
    return a;
}

detect::DetectorHyper RunConfig::detector_hyper() const
{
    detect::DetectorHyper h;
    h.k = gnn_k;
    h.hidden = gnn_hidden;
    h.hop_layers = gnn_hop_layers;
    h.head_hidden = gnn_head_hidden;
    h.max_points = gnn_max_points;
    h.position_scale = gnn_position_scale;
    h.link_frame = gnn_link_frame;
    return h;
}

refine::RefinerHyper RunConfig::refiner_hyper() const { return {refiner_channels}; }

const std::vector<KeyInfo>& keys()
{
    static const std::vector<KeyInfo> registry = build_registry();
    return registry;
}

const KeyInfo* find_key(const std::string& name)
{
    for (const auto& k : keys())
        if (k.name == name) return &k;
    return nullptr;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value)
{
    const KeyInfo* k = find_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    try {
        k->set(config, value);
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

std::string get_value(const RunConfig& config, const std::string& key)
{
    const KeyInfo* k = find_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    return k->get(config);
}

void apply_stream(RunConfig& config, std::istream& is, const std::string& origin)
{
    std::string line;
    for (int number = 1; std::getline(is, line); ++number) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
        try {
            set_value(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

void apply_file(RunConfig& config, const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    apply_stream(config, is, path.string());
}

void write_config(std::ostream& os, const RunConfig& config)
{
    for (const auto& k : keys()) os << k.name << " = " << k.get(config) << '\n';
}

nlohmann::json to_json(const RunConfig& config)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : keys()) j[k.name] = k.get(config);
    return j;
}

}  // namespace raylink::config
