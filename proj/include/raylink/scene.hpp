/**
 * @file   scene.hpp
 * @brief  Synthetic street scenes, LIDAR scanning and ground-truth channels.
 */
#pragma once

#include "raylink/channel.hpp"
#include "raylink/geometry.hpp"
#include "raylink/raytrace.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace raylink::scene {

struct SceneConfig
{
    double street_half_length = 40.0;  ///< street runs along x in [-L, L]
    double street_half_width = 10.0;   ///< road occupies |y| < W; buildings sit beyond
    int buildings_min = 4;
    int buildings_max = 8;
    int vehicles_min = 2;
    int vehicles_max = 8;
    double los_fraction = 0.55;
    Vec3 bs_position{0.0, 8.5, 6.0};
    double ue_height = 1.8;
    double ue_x_min = -35.0, ue_x_max = 35.0;
    double ue_y_min = -7.0, ue_y_max = 3.0;
    double min_link_distance = 8.0;  ///< horizontal UE-BS separation
    double blocker_min_distance = 3.0;
    double blocker_max_distance = 15.0;
    double los_clearance = 1.0;  ///< keep vehicles this far from the direct segment in LoS scenes
    double ground_reflection = 0.5;
    double wavelength = 0.005;
    int max_attempts = 200;

    void validate() const;
};

struct Scene
{
    std::vector<Box> obstacles;
    /// Ground first (when present), then the faces of each obstacle in order.
    std::vector<Facet> facets;
    bool has_ground = true;
    Vec3 ue_position;
    Vec3 bs_position;
    double wavelength = 0.005;

    /// Direct UE-BS segment clear of every facet.
    bool true_los() const;
    /// Rebuilds `facets` from the ground flag and obstacle list.
    void rebuild_facets(double ground_half_extent, double ground_reflection);
};

/// Draws a scene whose direct path is clear with probability los_fraction, or
/// clear exactly when `want_los` is given.
Scene generate_scene(const SceneConfig& config, std::uint64_t seed, std::optional<bool> want_los = std::nullopt);

struct LidarConfig
{
    int azimuth_rays = 256;
    int elevation_rays = 32;
    double elevation_min_deg = -30.0;
    double elevation_max_deg = 10.0;
    double range = 100.0;
    double noise_sigma = 0.03;
    double dropout = 0.05;

    void validate() const;
};

/// Points in the sensor frame (sensor at the UE, axes aligned with the scene).
PointCloud lidar_scan(const Scene& scene, const LidarConfig& lidar, std::uint64_t seed);

/// Ray cast against a facet list; distance to the nearest hit within range.
std::optional<double> cast_ray(std::span<const Facet> facets, const Vec3& origin, const Vec3& direction,
                               double range);

struct AntennaSetup
{
    channel::ArrayConfig ue_array;  ///< transmitter
    channel::ArrayConfig bs_array;  ///< receiver
    Frame ue_frame;
    Frame bs_frame;

    static AntennaSetup standard(double wavelength);
};

struct FadingConfig
{
    double gain_sigma_db = 1.0;
    double phase_jitter_deg = 10.0;
};

/// Paths on the true geometry, UE to BS, in the global frame.
raytrace::PathList true_paths(const Scene& scene, const AntennaSetup& antennas, int max_order);

/// Multiplies each gain by 10^(N(0, sigma)/20) exp(j U(-jitter, jitter)).
void perturb_gains(raytrace::PathList& paths, const FadingConfig& fading, std::uint64_t seed);

/// Unnormalized channel (N_R x N_T) on the true geometry with perturbed gains;
/// nullopt when no path exists.
std::optional<linalg::ComplexMatrix> ground_truth_channel(const Scene& scene, const AntennaSetup& antennas, int max_order,
                                           const FadingConfig& fading, std::uint64_t seed);

}  // namespace raylink::scene
