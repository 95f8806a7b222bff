#include "raylink/scene.hpp"

#include "raylink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace raylink::scene {

namespace {

constexpr double kGroundHalfExtent = 150.0;
constexpr double kVehicleGap = 0.5;
constexpr double kBuildingGap = 2.0;
constexpr double kEndpointClearance = 1.0;

double deg(double d) { return d * std::numbers::pi / 180.0; }

bool overlaps_xy(const Box& a, const Box& b, double gap)
{
    return a.min.x < b.max.x + gap && b.min.x < a.max.x + gap && a.min.y < b.max.y + gap &&
           b.min.y < a.max.y + gap;
}

double distance_xy(const Box& b, const Vec3& p)
{
    const double dx = std::max({b.min.x - p.x, 0.0, p.x - b.max.x});
    const double dy = std::max({b.min.y - p.y, 0.0, p.y - b.max.y});
    return std::hypot(dx, dy);
}

Box vehicle_box(Rng& rng, double cx, double cy, bool truck)
{
    const double length = truck ? rng.uniform(6.0, 12.0) : rng.uniform(4.0, 5.0);
    const double width = truck ? 2.5 : 1.8;
    const double height = truck ? rng.uniform(3.2, 4.2) : rng.uniform(1.4, 1.7);
    const double reflection = rng.uniform(0.6, 0.9);
    return {{cx - length / 2, cy - width / 2, 0.0}, {cx + length / 2, cy + width / 2, height}, reflection};
}

std::vector<Box> place_buildings(Rng& rng, const SceneConfig& c)
{
    std::vector<Box> out;
    const int n = c.buildings_min + static_cast<int>(rng.below(c.buildings_max - c.buildings_min + 1));
    for (int i = 0; i < n; ++i) {
        const bool north = i % 2 == 0;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const double width = rng.uniform(8.0, 20.0);
            const double depth = rng.uniform(8.0, 15.0);
            const double height = rng.uniform(8.0, 25.0);
            const double cx = rng.uniform(-c.street_half_length, c.street_half_length);
            const double reflection = rng.uniform(0.3, 0.7);
            const double y0 = north ? c.street_half_width : -c.street_half_width - depth;
            const Box b{{cx - width / 2, y0, 0.0}, {cx + width / 2, y0 + depth, height}, reflection};
            if (std::none_of(out.begin(), out.end(), [&](const Box& o) { return overlaps_xy(b, o, kBuildingGap); })) {
                out.push_back(b);
                break;
            }
        }
    }
    return out;
}

bool endpoint_clear(const Box& b, const Scene& s)
{
    return distance_xy(b, s.ue_position) >= kEndpointClearance && !b.contains(s.bs_position) &&
           distance_xy(b, s.bs_position) >= kEndpointClearance;
}

/// Truck between UE and BS that cuts the direct segment.
bool place_blocker(Rng& rng, const SceneConfig& c, Scene& s)
{
    const Vec3 ue = s.ue_position;
    const Vec3 d{s.bs_position.x - ue.x, s.bs_position.y - ue.y, 0.0};
    const double horizontal = norm(d);
    const double hi = std::min(c.blocker_max_distance, 0.7 * horizontal);
    if (hi <= c.blocker_min_distance) return false;
    const Vec3 dir = d * (1.0 / horizontal);
    for (int attempt = 0; attempt < 50; ++attempt) {
        const double t = rng.uniform(c.blocker_min_distance, hi);
        const Box b = vehicle_box(rng, ue.x + t * dir.x, ue.y + t * dir.y, true);
        if (b.intersects_segment(s.ue_position, s.bs_position) && endpoint_clear(b, s)) {
            s.obstacles.push_back(b);
            return true;
        }
    }
    return false;
}

}  // namespace

void SceneConfig::validate() const
{
    if (buildings_min < 0 || buildings_max < buildings_min)
        throw std::invalid_argument("scene: building count range is invalid");
    if (vehicles_min < 0 || vehicles_max < vehicles_min)
        throw std::invalid_argument("scene: vehicle count range is invalid");
    if (los_fraction < 0.0 || los_fraction > 1.0) throw std::invalid_argument("scene: los_fraction outside [0, 1]");
    if (!(ue_x_max >= ue_x_min) || !(ue_y_max >= ue_y_min))
        throw std::invalid_argument("scene: UE placement region is empty");
    if (!(wavelength > 0.0)) throw std::invalid_argument("scene: wavelength must be positive");
    if (max_attempts < 1) throw std::invalid_argument("scene: max_attempts must be at least 1");
}

bool Scene::true_los() const
{
    return !raytrace::segment_blocked(facets, ue_position, bs_position);
}

void Scene::rebuild_facets(double ground_half_extent, double ground_reflection)
{
    facets.clear();
    if (has_ground) {
        const double e = ground_half_extent;
        facets.push_back({{-e, -e, 0.0}, {2 * e, 0.0, 0.0}, {0.0, 2 * e, 0.0}, ground_reflection});
    }
    for (const auto& b : obstacles)
        for (const auto& f : b.facets()) facets.push_back(f);
}

Scene generate_scene(const SceneConfig& c, std::uint64_t seed, std::optional<bool> los_target)
{
    c.validate();
    Rng rng(seed);
    const bool drawn = rng.bernoulli(c.los_fraction);
    const bool want_los = c.vehicles_max == 0 || los_target.value_or(drawn);

    for (int attempt = 0; attempt < c.max_attempts; ++attempt) {
        Scene s;
        s.wavelength = c.wavelength;
        s.bs_position = c.bs_position;
        s.ue_position = {rng.uniform(c.ue_x_min, c.ue_x_max), rng.uniform(c.ue_y_min, c.ue_y_max), c.ue_height};
        if (std::hypot(s.ue_position.x - s.bs_position.x, s.ue_position.y - s.bs_position.y) <
            c.min_link_distance)
            continue;

        s.obstacles = place_buildings(rng, c);
        if (std::any_of(s.obstacles.begin(), s.obstacles.end(),
                        [&](const Box& b) { return b.contains(s.ue_position) || b.contains(s.bs_position); }))
            continue;
        const std::size_t n_buildings = s.obstacles.size();

        int n_vehicles = c.vehicles_min + static_cast<int>(rng.below(c.vehicles_max - c.vehicles_min + 1));
        if (!want_los) {
            if (!place_blocker(rng, c, s)) continue;
            n_vehicles = std::max(n_vehicles - 1, 0);
        }
        const double lane = c.street_half_width - 1.5;
        for (int v = 0; v < n_vehicles; ++v) {
            for (int tries = 0; tries < 20; ++tries) {
                const bool truck = rng.bernoulli(0.3);
                const Box b = vehicle_box(rng, rng.uniform(-c.street_half_length, c.street_half_length),
                                          rng.uniform(-lane, lane), truck);
                bool ok = endpoint_clear(b, s);
                for (std::size_t k = n_buildings; ok && k < s.obstacles.size(); ++k)
                    ok = !overlaps_xy(b, s.obstacles[k], kVehicleGap);
                if (ok && want_los) ok = b.distance_to_segment(s.ue_position, s.bs_position) >= c.los_clearance;
                if (ok) {
                    s.obstacles.push_back(b);
                    break;
                }
            }
        }

        s.rebuild_facets(kGroundHalfExtent, c.ground_reflection);
        if (s.true_los() != want_los) continue;
        return s;
    }
    throw std::invalid_argument("scene: no valid placement after " + std::to_string(c.max_attempts) +
                                " attempts; the configuration is infeasible");
}

void LidarConfig::validate() const
{
    if (azimuth_rays < 1 || elevation_rays < 1) throw std::invalid_argument("lidar: angular grid is empty");
    if (!(range > 0.0)) throw std::invalid_argument("lidar: range must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("lidar: noise sigma must be non-negative");
    if (dropout < 0.0 || dropout > 1.0) throw std::invalid_argument("lidar: dropout outside [0, 1]");
}

std::optional<double> cast_ray(std::span<const Facet> facets, const Vec3& origin, const Vec3& direction,
                               double range)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : facets) {
        const Vec3 n = cross(f.edge_u, f.edge_v);
        const double denom = dot(n, direction);
        if (std::abs(denom) < 1e-15 * norm(n)) continue;
        const double t = dot(n, f.origin - origin) / denom;
        if (!(t > 1e-9) || t >= best || t > range) continue;
        if (f.contains_projection(origin + t * direction)) best = t;
    }
    if (!std::isfinite(best)) return std::nullopt;
    return best;
}

PointCloud lidar_scan(const Scene& scene, const LidarConfig& lidar, std::uint64_t seed)
{
    lidar.validate();
    Rng rng(seed);
    PointCloud cloud;
    const double el_lo = deg(lidar.elevation_min_deg);
    const double el_step =
        lidar.elevation_rays > 1 ? deg(lidar.elevation_max_deg - lidar.elevation_min_deg) / (lidar.elevation_rays - 1)
                                 : 0.0;
    for (int j = 0; j < lidar.elevation_rays; ++j) {
        const double el = el_lo + j * el_step;
        for (int i = 0; i < lidar.azimuth_rays; ++i) {
            const double az = 2.0 * std::numbers::pi * i / lidar.azimuth_rays;
            const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
            const bool dropped = rng.uniform() < lidar.dropout;
            const auto t = cast_ray(scene.facets, scene.ue_position, dir, lidar.range);
            if (!t || dropped) continue;
            Vec3 p = *t * dir;
            if (lidar.noise_sigma > 0.0) {
                const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
                p += lidar.noise_sigma * Vec3{nx, ny, nz};
            }
            if (norm(p) <= lidar.range) cloud.points.push_back(p);
        }
    }
    return cloud;
}

AntennaSetup AntennaSetup::standard(double wavelength)
{
    AntennaSetup a;
    a.ue_array = channel::ArrayConfig::half_wavelength(4, 4, wavelength);
    a.bs_array = channel::ArrayConfig::half_wavelength(4, 4, wavelength);
    a.ue_frame = Frame::from_broadside({0.0, 0.6, 0.8});
    a.bs_frame = Frame::from_broadside({0.0, -1.0, -0.25});
    return a;
}

raytrace::PathList true_paths(const Scene& scene, const AntennaSetup& antennas, int max_order)
{
    raytrace::TraceOptions opt;
    opt.wavelength = scene.wavelength;
    opt.max_order = max_order;
    opt.tx_frame = antennas.ue_frame;
    opt.rx_frame = antennas.bs_frame;
    return raytrace::trace(scene.facets, scene.ue_position, scene.bs_position, opt);
}

void perturb_gains(raytrace::PathList& paths, const FadingConfig& fading, std::uint64_t seed)
{
    Rng rng(seed);
    const double jitter = deg(fading.phase_jitter_deg);
    for (auto& p : paths.paths) {
        const double amp = std::pow(10.0, fading.gain_sigma_db * rng.normal() / 20.0);
        const double phase = rng.uniform(-jitter, jitter);
        p.gain *= std::polar(amp, phase);
    }
}

std::optional<linalg::ComplexMatrix> ground_truth_channel(const Scene& scene, const AntennaSetup& antennas,
                                                          int max_order, const FadingConfig& fading,
                                                          std::uint64_t seed)
{
    auto paths = true_paths(scene, antennas, max_order);
    if (paths.empty()) return std::nullopt;
    perturb_gains(paths, fading, seed);
    return channel::assemble(paths, antennas.ue_array, antennas.bs_array, scene.wavelength);
}

}  // namespace raylink::scene
