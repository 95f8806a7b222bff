/**
 * @file   geometry.hpp
 * @brief  3D vectors, planar rectangular facets, boxes and local frames.
 */
#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace raylink {

struct Vec3
{
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a * (1.0 / norm(a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Parallelogram facet: points origin + s*edge_u + t*edge_v for s, t in [0, 1].
/// The facet reflects on the side its normal (edge_u x edge_v) points to;
/// occlusion is two-sided.
struct Facet
{
    Vec3 origin;
    Vec3 edge_u;
    Vec3 edge_v;
    double reflection = 0.6;  ///< real amplitude coefficient in [0, 1]

    Vec3 normal() const { return normalized(cross(edge_u, edge_v)); }
    double area() const { return norm(cross(edge_u, edge_v)); }
    Vec3 center() const { return origin + 0.5 * edge_u + 0.5 * edge_v; }
    /// Signed distance of p from the facet plane (positive on the normal side).
    double signed_distance(const Vec3& p) const { return dot(p - origin, normal()); }
    Vec3 mirror(const Vec3& p) const { return p - 2.0 * signed_distance(p) * normal(); }
    /// In-plane coordinates (s, t) of the projection of p.
    std::pair<double, double> plane_coords(const Vec3& p) const;
    bool contains_projection(const Vec3& p, double tol = 1e-9) const;
    /// Parameter t in (0, 1) where segment a->b crosses the facet, if it does.
    std::optional<double> intersect_segment(const Vec3& a, const Vec3& b) const;
    /// Distance from p to the closest point of the facet.
    double distance_to(const Vec3& p) const;
    std::vector<Vec3> corners() const;

    friend bool operator==(const Facet&, const Facet&) = default;
};

struct Box
{
    Vec3 min;
    Vec3 max;
    double reflection = 0.6;

    bool contains(const Vec3& p) const
    {
        return p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y && p.z > min.z && p.z < max.z;
    }
    /// Outward-facing faces; the bottom face is omitted when the box rests on z = 0.
    std::vector<Facet> facets() const;
    /// True when the open segment a->b passes through the box interior or surface.
    bool intersects_segment(const Vec3& a, const Vec3& b) const;
    /// Euclidean distance between the box and the segment a->b (0 on contact).
    double distance_to_segment(const Vec3& a, const Vec3& b) const;
};

/// LIDAR samples, meters, expressed relative to the sensor origin.
struct PointCloud
{
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Orthonormal array frame: broadside axis plus the two in-plane axes along
/// which the UPA x and y indices advance.
struct Frame
{
    Vec3 axis_x{1, 0, 0};
    Vec3 axis_y{0, 1, 0};
    Vec3 broadside{0, 0, 1};

    /// Builds a right-handed frame from a broadside direction and an "up" hint
    /// used to orient axis_x.
    static Frame from_broadside(const Vec3& broadside, const Vec3& up_hint = {0, 0, 1});

    /// Spherical angles of a direction: polar angle from broadside and the
    /// in-plane angle measured from axis_x towards axis_y.
    std::pair<double, double> angles(const Vec3& direction) const;
};

}  // namespace raylink
