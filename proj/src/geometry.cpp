#include "raylink/geometry.hpp"

#include <algorithm>
#include <limits>

namespace raylink {

std::pair<double, double> Facet::plane_coords(const Vec3& p) const
{
    const Vec3 q = p - origin;
    const double uu = dot(edge_u, edge_u);
    const double uv = dot(edge_u, edge_v);
    const double vv = dot(edge_v, edge_v);
    const double qu = dot(q, edge_u);
    const double qv = dot(q, edge_v);
    const double det = uu * vv - uv * uv;
    return {(qu * vv - qv * uv) / det, (qv * uu - qu * uv) / det};
}

bool Facet::contains_projection(const Vec3& p, double tol) const
{
    const auto [s, t] = plane_coords(p);
    const double tol_s = tol / norm(edge_u);
    const double tol_t = tol / norm(edge_v);
    return s >= -tol_s && s <= 1.0 + tol_s && t >= -tol_t && t <= 1.0 + tol_t;
}

std::optional<double> Facet::intersect_segment(const Vec3& a, const Vec3& b) const
{
    const Vec3 n = cross(edge_u, edge_v);
    const double da = dot(a - origin, n);
    const double db = dot(b - origin, n);
    if ((da > 0.0 && db > 0.0) || (da < 0.0 && db < 0.0) || da == db) return std::nullopt;
    const double t = da / (da - db);
    if (t <= 0.0 || t >= 1.0) return std::nullopt;
    const Vec3 hit = a + t * (b - a);
    if (!contains_projection(hit, 0.0)) return std::nullopt;
    return t;
}

double Facet::distance_to(const Vec3& p) const
{
    auto [s, t] = plane_coords(p);
    if (s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0) return std::abs(signed_distance(p));
    // Outside the facet: the closest point lies on an edge.
    auto seg_dist = [&](const Vec3& a, const Vec3& b) {
        const Vec3 d = b - a;
        const double l = std::clamp(dot(p - a, d) / dot(d, d), 0.0, 1.0);
        return distance(p, a + l * d);
    };
    const Vec3 c0 = origin, c1 = origin + edge_u, c2 = origin + edge_u + edge_v, c3 = origin + edge_v;
    return std::min({seg_dist(c0, c1), seg_dist(c1, c2), seg_dist(c2, c3), seg_dist(c3, c0)});
}

std::vector<Vec3> Facet::corners() const
{
    return {origin, origin + edge_u, origin + edge_u + edge_v, origin + edge_v};
}

std::vector<Facet> Box::facets() const
{
    const Vec3 d = max - min;
    const Vec3 ex{d.x, 0, 0}, ey{0, d.y, 0}, ez{0, 0, d.z};
    std::vector<Facet> out;
    // Edge order is chosen so that edge_u x edge_v points outward.
    out.push_back({Vec3{max.x, min.y, min.z}, ey, ez, reflection});  // +x
    out.push_back({Vec3{min.x, min.y, min.z}, ez, ey, reflection});  // -x
    out.push_back({Vec3{min.x, max.y, min.z}, ez, ex, reflection});  // +y
    out.push_back({Vec3{min.x, min.y, min.z}, ex, ez, reflection});  // -y
    out.push_back({Vec3{min.x, min.y, max.z}, ex, ey, reflection});  // +z
    if (min.z > 0.0) out.push_back({Vec3{min.x, min.y, min.z}, ey, ex, reflection});  // -z
    return out;
}

bool Box::intersects_segment(const Vec3& a, const Vec3& b) const
{
    // Slab test on the closed box.
    double t0 = 0.0, t1 = 1.0;
    const double pa[3] = {a.x, a.y, a.z};
    const double pd[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
    const double lo[3] = {min.x, min.y, min.z};
    const double hi[3] = {max.x, max.y, max.z};
    for (int k = 0; k < 3; ++k) {
        if (std::abs(pd[k]) < 1e-300) {
            if (pa[k] < lo[k] || pa[k] > hi[k]) return false;
            continue;
        }
        double ta = (lo[k] - pa[k]) / pd[k];
        double tb = (hi[k] - pa[k]) / pd[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

double Box::distance_to_segment(const Vec3& a, const Vec3& b) const
{
    if (intersects_segment(a, b)) return 0.0;
    // The distance is convex along the segment; golden-section search then polish.
    auto box_dist = [&](const Vec3& p) {
        const double dx = std::max({min.x - p.x, 0.0, p.x - max.x});
        const double dy = std::max({min.y - p.y, 0.0, p.y - max.y});
        const double dz = std::max({min.z - p.z, 0.0, p.z - max.z});
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    };
    double lo = 0.0, hi = 1.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = box_dist(a + x1 * (b - a)), f2 = box_dist(a + x2 * (b - a));
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = box_dist(a + x1 * (b - a));
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = box_dist(a + x2 * (b - a));
        }
    }
    return std::min({f1, f2, box_dist(a), box_dist(b)});
}

Frame Frame::from_broadside(const Vec3& broadside, const Vec3& up_hint)
{
    Frame f;
    f.broadside = normalized(broadside);
    Vec3 hint = up_hint;
    if (norm(cross(hint, f.broadside)) < 1e-9) hint = {1, 0, 0};
    f.axis_x = normalized(hint - dot(hint, f.broadside) * f.broadside);
    f.axis_y = cross(f.broadside, f.axis_x);
    return f;
}

std::pair<double, double> Frame::angles(const Vec3& direction) const
{
    const Vec3 d = normalized(direction);
    const double c = std::clamp(dot(d, broadside), -1.0, 1.0);
    const double polar = std::acos(c);
    const double planar = std::atan2(dot(d, axis_y), dot(d, axis_x));
    return {polar, planar};
}

}  // namespace raylink
