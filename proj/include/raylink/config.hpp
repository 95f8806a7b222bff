/**
 * @file   config.hpp
 * @brief  Flat key-value run configuration shared by every subcommand.
 *
 * File format: one `key = value` per line, `#` starts a comment, blank lines
 * are ignored. Vectors are comma separated. Unknown keys are rejected.
 */
#pragma once

#include "raylink/detect.hpp"
#include "raylink/geometry.hpp"
#include "raylink/refine.hpp"
#include "raylink/scene.hpp"
#include "raylink/surface.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace raylink::config {

/// Bad key, bad value or out-of-range setting; maps to the usage exit code.
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig
{
    // run
    std::uint64_t seed = 1;
    int threads = 1;
    std::string dataset_dir = "dataset";
    std::string model_dir = "models";
    std::string results_dir = "results";

    // scenes
    std::size_t n_scenes = 2000;
    double street_half_length = 40.0;
    double street_half_width = 10.0;
    int buildings_min = 4;
    int buildings_max = 8;
    int vehicles_min = 2;
    int vehicles_max = 8;
    double los_fraction = 0.55;
    Vec3 bs_position{0.0, 8.5, 6.0};
    double ue_height = 1.8;
    double ue_x_min = -35.0;
    double ue_x_max = 35.0;
    double ue_y_min = -7.0;
    double ue_y_max = 3.0;
    double min_link_distance = 8.0;
    double blocker_min_distance = 3.0;
    double blocker_max_distance = 15.0;
    double los_clearance = 1.0;
    double ground_reflection = 0.5;
    double wavelength = 0.005;
    int max_attempts = 200;

    // lidar
    int lidar_azimuth_rays = 256;
    int lidar_elevation_rays = 32;
    double lidar_elevation_min_deg = -30.0;
    double lidar_elevation_max_deg = 10.0;
    double lidar_range = 100.0;
    double lidar_noise_sigma = 0.03;
    double lidar_dropout = 0.05;

    // reconstruction
    double voxel_resolution = 0.5;
    int voxel_min_points = 3;
    double surface_material = 0.6;
    double ground_threshold = 0.15;
    int ransac_iterations = 200;

    // channels
    int estimate_order = 2;
    int truth_order = 3;
    double gain_sigma_db = 1.0;
    double phase_jitter_deg = 10.0;
    std::size_t ue_nx = 4;
    std::size_t ue_ny = 4;
    std::size_t bs_nx = 4;
    std::size_t bs_ny = 4;
    Vec3 ue_broadside{0.0, 0.6, 0.8};
    Vec3 bs_broadside{0.0, -1.0, -0.25};

    // codebook
    int codebook_bits = 2;
    std::uint64_t prune_min_count = 2;
    bool use_pruned = true;

    // detector
    std::size_t gnn_k = 8;
    std::size_t gnn_hidden = 32;
    std::size_t gnn_hop_layers = 4;
    std::size_t gnn_head_hidden = 16;
    std::size_t gnn_max_points = 256;
    double gnn_position_scale = 100.0;
    bool gnn_link_frame = true;
    std::size_t detector_epochs = 100;
    std::size_t detector_batch = 64;
    double detector_lr = 1e-3;

    // refiner
    std::vector<std::size_t> refiner_channels{16, 32, 64, 128, 182};
    std::size_t refiner_epochs = 200;
    std::size_t refiner_batch = 200;
    double refiner_lr = 1e-3;

    // evaluation
    std::vector<double> snr_db{0, 5, 10, 15, 20};

    /// Throws ConfigError on any out-of-range value.
    void validate() const;

    scene::SceneConfig scene_config() const;
    scene::LidarConfig lidar_config() const;
    surface::ReconstructOptions reconstruct_options() const;
    scene::FadingConfig fading_config() const;
    scene::AntennaSetup antenna_setup() const;
    detect::DetectorHyper detector_hyper() const;
    refine::RefinerHyper refiner_hyper() const;
};

/// Registry entry: one per RunConfig field.
struct KeyInfo
{
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeyInfo>& keys();
const KeyInfo* find_key(const std::string& name);

/// Sets one key from its textual value. Throws ConfigError.
void set_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& config, const std::string& key);

/// Applies every assignment in the stream; `origin` names it in errors.
void apply_stream(RunConfig& config, std::istream& is, const std::string& origin);
void apply_file(RunConfig& config, const std::filesystem::path& path);

/// Resolved configuration in the file format, keys in registry order.
void write_config(std::ostream& os, const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);

}  // namespace raylink::config
