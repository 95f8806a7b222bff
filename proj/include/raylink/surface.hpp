/**
 * @file   surface.hpp
 * @brief  Voxel-occupancy surface reconstruction from a LIDAR point cloud.
 *
 * Non-ground points are binned into a cubic grid; voxels holding at least
 * `min_points` points are occupied. Every occupied-to-empty voxel face is
 * emitted, after greedy merging into maximal rectangles per plane. The ground
 * is fitted separately by RANSAC and emitted as a single facet.
 */
#pragma once

#include "raylink/geometry.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace raylink::surface {

struct ReconstructOptions
{
    double resolution = 0.5;
    std::size_t min_points = 3;
    double material = 0.6;
    /// Sensor noise used only for the provenance check (resolution >= 2 sigma).
    double noise_sigma = 0.03;
    bool fit_ground = true;
    double ground_threshold = 0.15;
    int ransac_iterations = 200;
};

struct GroundPlane
{
    double a = 0.0, b = 0.0, c = 0.0;  ///< z = a x + b y + c
    std::size_t inliers = 0;

    double distance(const Vec3& p) const { return std::abs(p.z - a * p.x - b * p.y - c) / std::sqrt(1 + a * a + b * b); }
};

using VoxelKey = std::array<int, 3>;

struct ReconstructedSurface
{
    std::vector<Facet> facets;
    double resolution = 0.5;
    std::size_t min_points = 3;
    std::optional<GroundPlane> ground;
    std::vector<VoxelKey> occupied;  ///< sorted lexicographically
    std::vector<std::string> warnings;
};

/// Voxels holding at least `min_points` of the given points, sorted.
std::vector<VoxelKey> occupied_voxels(const std::vector<Vec3>& points, double resolution, std::size_t min_points);

/// RANSAC fit of a near-horizontal plane on the lowest points of the cloud.
std::optional<GroundPlane> fit_ground(const PointCloud& cloud, const ReconstructOptions& options);

ReconstructedSurface reconstruct(const PointCloud& cloud, const ReconstructOptions& options);

/// One facet per row: four corners (x, y, z each) followed by the unit normal.
void write_facets_csv(std::ostream& os, const std::vector<Facet>& facets);

}  // namespace raylink::surface
