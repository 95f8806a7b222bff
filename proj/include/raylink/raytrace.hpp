/**
 * @file   raytrace.hpp
 * @brief  Image-method ray tracer over planar facets.
 *
 * Paths are enumerated by mirroring the transmitter through every admissible
 * facet sequence up to the configured reflection order. A candidate is kept
 * when every reflection point falls inside its facet, each reflection happens
 * on the facet's front side, and no segment is blocked by another facet.
 */
#pragma once

#include "raylink/geometry.hpp"

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace raylink::raytrace {

/// One propagation path. Angles follow the steering-vector convention:
/// "azimuth" is the polar angle from the array broadside and "elevation" the
/// in-plane angle from the array x axis, both in radians.
struct Path
{
    std::complex<double> gain;
    double aoa_azimuth = 0.0;
    double aoa_elevation = 0.0;
    double aod_azimuth = 0.0;
    double aod_elevation = 0.0;
    bool is_los = false;
    double length = 0.0;
    int bounce_count = 0;
    std::vector<std::uint32_t> facet_sequence;  ///< not serialized

    friend bool operator==(const Path&, const Path&) = default;
};

/// Paths sorted by decreasing |gain|; a LoS path, if present, comes first.
struct PathList
{
    std::vector<Path> paths;
    int max_order = 0;

    bool empty() const { return paths.empty(); }
    std::size_t size() const { return paths.size(); }
    const Path* los_path() const;

    friend bool operator==(const PathList&, const PathList&) = default;
};

struct TraceOptions
{
    double wavelength = 0.005;
    int max_order = 2;
    Frame tx_frame;  ///< orientation used for departure angles
    Frame rx_frame;  ///< orientation used for arrival angles
};

/// Complex gain of a path: lambda / (4 pi d) * prod(reflection) * exp(-j k d).
std::complex<double> path_gain(double wavelength, double length, double reflection_product);

/// Segment blocked by any facet other than the excluded ones (1e-9 m end tolerance).
bool segment_blocked(std::span<const Facet> facets, const Vec3& a, const Vec3& b,
                     std::int64_t exclude_a = -1, std::int64_t exclude_b = -1);

PathList trace(std::span<const Facet> facets, const Vec3& tx, const Vec3& rx, const TraceOptions& options);

/// Record layout: path count (u32), then per path gain re/im (f64), four
/// angles (f64: aoa az, aoa el, aod az, aod el), length (f64), bounce count
/// (u8), LoS flag (u8). Little-endian.
void write_paths(std::ostream& os, const PathList& list);
PathList read_paths(std::istream& is, int max_order);

}  // namespace raylink::raytrace
