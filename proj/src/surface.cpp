#include "raylink/surface.hpp"

#include "raylink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace raylink::surface {

namespace {

struct KeyHash
{
    std::size_t operator()(const VoxelKey& k) const
    {
        std::uint64_t h = static_cast<std::uint32_t>(k[0]);
        h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(k[1]);
        h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(k[2]);
        return static_cast<std::size_t>(splitmix64(h));
    }
};

/// In-plane axes (u, v) per face direction, ordered so that e_u x e_v is the outward normal.
struct FaceDirection
{
    int axis;
    int sign;
    int u;
    int v;
};
constexpr FaceDirection kDirections[6] = {
    {0, +1, 1, 2}, {0, -1, 2, 1}, {1, +1, 2, 0}, {1, -1, 0, 2}, {2, +1, 0, 1}, {2, -1, 1, 0},
};

Vec3 axis_vector(int axis, double length)
{
    Vec3 e;
    (axis == 0 ? e.x : axis == 1 ? e.y : e.z) = length;
    return e;
}

using Cell = std::pair<int, int>;

/// Greedy maximal-rectangle cover of a set of cells, scanning (u, v) lexicographically.
std::vector<std::array<int, 4>> merge_rectangles(const std::set<Cell>& cells)
{
    std::vector<std::array<int, 4>> rects;
    std::set<Cell> used;
    auto free_cell = [&](int u, int v) { return cells.count({u, v}) && !used.count({u, v}); };
    for (const auto& [u0, v0] : cells) {
        if (used.count({u0, v0})) continue;
        int v1 = v0;
        while (free_cell(u0, v1 + 1)) ++v1;
        int u1 = u0;
        for (;;) {
            bool row = true;
            for (int v = v0; v <= v1 && row; ++v) row = free_cell(u1 + 1, v);
            if (!row) break;
            ++u1;
        }
        for (int u = u0; u <= u1; ++u)
            for (int v = v0; v <= v1; ++v) used.insert({u, v});
        rects.push_back({u0, v0, u1, v1});
    }
    return rects;
}

GroundPlane least_squares_plane(const std::vector<Vec3>& pts)
{
    // Normal equations for z = a x + b y + c.
    double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, sxz = 0, syz = 0, sz = 0;
    for (const auto& p : pts) {
        sxx += p.x * p.x; sxy += p.x * p.y; syy += p.y * p.y;
        sx += p.x; sy += p.y;
        sxz += p.x * p.z; syz += p.y * p.z; sz += p.z;
    }
    const double n = static_cast<double>(pts.size());
    const double m[3][3] = {{sxx, sxy, sx}, {sxy, syy, sy}, {sx, sy, n}};
    const double r[3] = {sxz, syz, sz};
    auto det3 = [](const double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double d = det3(m);
    GroundPlane g;
    if (std::abs(d) < 1e-12 * std::max(1.0, n * n * n)) {
        g.c = sz / n;
        return g;
    }
    double sol[3];
    for (int k = 0; k < 3; ++k) {
        double mk[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) mk[i][j] = j == k ? r[i] : m[i][j];
        sol[k] = det3(mk) / d;
    }
    g.a = sol[0];
    g.b = sol[1];
    g.c = sol[2];
    return g;
}

}  // namespace

std::vector<VoxelKey> occupied_voxels(const std::vector<Vec3>& points, double resolution, std::size_t min_points)
{
    std::unordered_map<VoxelKey, std::size_t, KeyHash> counts;
    for (const auto& p : points) {
        const VoxelKey k{static_cast<int>(std::floor(p.x / resolution)), static_cast<int>(std::floor(p.y / resolution)),
                         static_cast<int>(std::floor(p.z / resolution))};
        ++counts[k];
    }
    std::vector<VoxelKey> out;
    for (const auto& [k, n] : counts)
        if (n >= min_points) out.push_back(k);
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<GroundPlane> fit_ground(const PointCloud& cloud, const ReconstructOptions& options)
{
    if (cloud.size() < 3) return std::nullopt;
    std::vector<double> zs;
    zs.reserve(cloud.size());
    for (const auto& p : cloud.points) zs.push_back(p.z);
    const std::size_t q = zs.size() / 50;
    std::nth_element(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(q), zs.end());
    const double z_cut = zs[q] + 1.0;

    std::vector<Vec3> low;
    for (const auto& p : cloud.points)
        if (p.z <= z_cut) low.push_back(p);
    if (low.size() < 3) return std::nullopt;

    Rng rng(splitmix64(0x67726f756e64ULL ^ cloud.size()));
    std::optional<GroundPlane> best;
    for (int it = 0; it < options.ransac_iterations; ++it) {
        const Vec3& p0 = low[rng.below(low.size())];
        const Vec3& p1 = low[rng.below(low.size())];
        const Vec3& p2 = low[rng.below(low.size())];
        const Vec3 n = cross(p1 - p0, p2 - p0);
        const double len = norm(n);
        if (len < 1e-9 || std::abs(n.z) / len < 0.9) continue;
        GroundPlane g;
        g.a = -n.x / n.z;
        g.b = -n.y / n.z;
        g.c = p0.z - g.a * p0.x - g.b * p0.y;
        for (const auto& p : low)
            if (g.distance(p) < options.ground_threshold) ++g.inliers;
        if (!best || g.inliers > best->inliers) best = g;
    }
    if (!best || best->inliers < 3) return std::nullopt;

    std::vector<Vec3> inliers;
    for (const auto& p : low)
        if (best->distance(p) < options.ground_threshold) inliers.push_back(p);
    GroundPlane refined = least_squares_plane(inliers);
    refined.inliers = 0;
    for (const auto& p : cloud.points)
        if (refined.distance(p) < options.ground_threshold) ++refined.inliers;
    return refined;
}

ReconstructedSurface reconstruct(const PointCloud& cloud, const ReconstructOptions& options)
{
    if (!(options.resolution > 0.0)) throw std::invalid_argument("reconstruct: resolution must be positive");
    if (options.min_points < 1) throw std::invalid_argument("reconstruct: min_points must be at least 1");

    ReconstructedSurface out;
    out.resolution = options.resolution;
    out.min_points = options.min_points;
    if (options.resolution < 2.0 * options.noise_sigma)
        out.warnings.push_back("resolution is below twice the LIDAR noise sigma");
    if (cloud.empty()) return out;

    std::vector<Vec3> rest;
    if (options.fit_ground) out.ground = fit_ground(cloud, options);
    if (out.ground) {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& p : cloud.points) {
            if (out.ground->distance(p) < options.ground_threshold) {
                xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
                ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
            } else {
                rest.push_back(p);
            }
        }
        const auto& g = *out.ground;
        const double dx = xmax - xmin, dy = ymax - ymin;
        if (dx > 0.0 && dy > 0.0) {
            out.facets.push_back({{xmin, ymin, g.a * xmin + g.b * ymin + g.c},
                                  {dx, 0.0, g.a * dx},
                                  {0.0, dy, g.b * dy},
                                  options.material});
        }
    } else {
        rest = cloud.points;
    }

    out.occupied = occupied_voxels(rest, options.resolution, options.min_points);
    std::set<VoxelKey> occ(out.occupied.begin(), out.occupied.end());
    const double r = options.resolution;
    for (const auto& dir : kDirections) {
        std::map<int, std::set<Cell>> slices;
        for (const auto& k : out.occupied) {
            VoxelKey nb = k;
            nb[dir.axis] += dir.sign;
            if (occ.count(nb)) continue;
            slices[k[dir.axis] + (dir.sign > 0 ? 1 : 0)].insert({k[dir.u], k[dir.v]});
        }
        for (const auto& [slice, cells] : slices) {
            for (const auto& [u0, v0, u1, v1] : merge_rectangles(cells)) {
                Vec3 origin = axis_vector(dir.axis, slice * r) + axis_vector(dir.u, u0 * r) + axis_vector(dir.v, v0 * r);
                out.facets.push_back({origin, axis_vector(dir.u, (u1 - u0 + 1) * r),
                                      axis_vector(dir.v, (v1 - v0 + 1) * r), options.material});
            }
        }
    }
    return out;
}

void write_facets_csv(std::ostream& os, const std::vector<Facet>& facets)
{
    os << "x0,y0,z0,x1,y1,z1,x2,y2,z2,x3,y3,z3,nx,ny,nz\n";
    char buf[64];
    for (const auto& f : facets) {
        bool first = true;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.9g", v);
            os << (first ? "" : ",") << buf;
            first = false;
        };
        for (const auto& c : f.corners()) {
            put(c.x); put(c.y); put(c.z);
        }
        const Vec3 n = f.normal();
        put(n.x); put(n.y); put(n.z);
        os << '\n';
    }
}

}  // namespace raylink::surface
