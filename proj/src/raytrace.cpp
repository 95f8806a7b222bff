#include "raylink/raytrace.hpp"

#include "raylink/binary_io.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace raylink::raytrace {

namespace {

constexpr double kEndTolerance = 1e-9;
constexpr double kSideTolerance = 1e-9;

struct FacetCache
{
    Vec3 origin;
    Vec3 normal;
    double offset;  // dot(normal, origin)
};

class Tracer
{
  public:
    Tracer(std::span<const Facet> facets, const Vec3& tx, const Vec3& rx, const TraceOptions& opt)
        : facets_(facets), tx_(tx), rx_(rx), opt_(opt)
    {
        const std::size_t n = facets.size();
        cache_.reserve(n);
        for (const auto& f : facets) {
            const Vec3 nrm = f.normal();
            cache_.push_back({f.origin, nrm, dot(nrm, f.origin)});
        }
        tx_front_.resize(n);
        rx_front_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            tx_front_[i] = side(i, tx) > kSideTolerance;
            rx_front_[i] = side(i, rx) > kSideTolerance;
        }
        if (opt.max_order >= 2) {
            // Facet j can follow facet i only if each has some part in front of the other.
            facing_.assign(n * n, false);
            std::vector<std::vector<Vec3>> corners(n);
            for (std::size_t i = 0; i < n; ++i) corners[i] = facets[i].corners();
            auto any_front = [&](std::size_t of, std::size_t wrt) {
                return std::any_of(corners[of].begin(), corners[of].end(),
                                   [&](const Vec3& c) { return side(wrt, c) > kSideTolerance; });
            };
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    facing_[i * n + j] = i != j && any_front(j, i) && any_front(i, j);
        }
    }

    PathList run()
    {
        PathList out;
        out.max_order = opt_.max_order;
        if (!segment_blocked(facets_, tx_, rx_)) {
            add_path({}, {});
        }
        if (opt_.max_order >= 1) {
            std::vector<std::uint32_t> seq;
            std::vector<Vec3> images{tx_};
            recurse(seq, images);
        }
        std::stable_sort(paths_.begin(), paths_.end(),
                         [](const Path& a, const Path& b) { return std::abs(a.gain) > std::abs(b.gain); });
        out.paths = std::move(paths_);
        return out;
    }

  private:
    double side(std::size_t i, const Vec3& p) const { return dot(cache_[i].normal, p) - cache_[i].offset; }

    Vec3 mirror(std::size_t i, const Vec3& p) const { return p - 2.0 * side(i, p) * cache_[i].normal; }

    void recurse(std::vector<std::uint32_t>& seq, std::vector<Vec3>& images)
    {
        const std::size_t n = facets_.size();
        for (std::size_t f = 0; f < n; ++f) {
            if (seq.empty()) {
                if (!tx_front_[f]) continue;
            } else if (!facing_[seq.back() * n + f]) {
                continue;
            }
            const Vec3& source = images.back();
            if (std::abs(side(f, source)) <= kSideTolerance) continue;
            seq.push_back(static_cast<std::uint32_t>(f));
            images.push_back(mirror(f, source));
            if (rx_front_[f]) try_close(seq, images);
            if (static_cast<int>(seq.size()) < opt_.max_order) recurse(seq, images);
            seq.pop_back();
            images.pop_back();
        }
    }

    void try_close(const std::vector<std::uint32_t>& seq, const std::vector<Vec3>& images)
    {
        const std::size_t k = seq.size();
        std::vector<Vec3> points(k + 2);
        points[0] = tx_;
        points[k + 1] = rx_;
        Vec3 target = rx_;
        for (std::size_t idx = k; idx-- > 0;) {
            const std::size_t f = seq[idx];
            const Vec3& image = images[idx + 1];
            const double da = side(f, image);
            const double db = side(f, target);
            if (da * db >= 0.0) return;
            const double t = da / (da - db);
            const Vec3 hit = image + t * (target - image);
            if (!facets_[f].contains_projection(hit, 1e-9)) return;
            points[idx + 1] = hit;
            target = hit;
        }
        for (std::size_t idx = 0; idx < k; ++idx) {
            const std::size_t f = seq[idx];
            if (side(f, points[idx]) <= kSideTolerance || side(f, points[idx + 2]) <= kSideTolerance) return;
        }
        for (std::size_t s = 0; s <= k; ++s) {
            const std::int64_t ea = s == 0 ? -1 : static_cast<std::int64_t>(seq[s - 1]);
            const std::int64_t eb = s == k ? -1 : static_cast<std::int64_t>(seq[s]);
            if (segment_blocked(facets_, points[s], points[s + 1], ea, eb)) return;
        }
        add_path(seq, points);
    }

    void add_path(const std::vector<std::uint32_t>& seq, std::vector<Vec3> points)
    {
        if (points.empty()) points = {tx_, rx_};
        Path p;
        double length = 0.0;
        for (std::size_t s = 0; s + 1 < points.size(); ++s) length += distance(points[s], points[s + 1]);
        double refl = 1.0;
        for (auto f : seq) refl *= facets_[f].reflection;
        p.length = length;
        p.bounce_count = static_cast<int>(seq.size());
        p.is_los = seq.empty();
        p.gain = path_gain(opt_.wavelength, length, refl);
        std::tie(p.aod_azimuth, p.aod_elevation) = opt_.tx_frame.angles(points[1] - points[0]);
        std::tie(p.aoa_azimuth, p.aoa_elevation) =
            opt_.rx_frame.angles(points[points.size() - 2] - points.back());
        p.facet_sequence = seq;
        paths_.push_back(std::move(p));
    }

    std::span<const Facet> facets_;
    Vec3 tx_, rx_;
    TraceOptions opt_;
    std::vector<FacetCache> cache_;
    std::vector<bool> tx_front_, rx_front_, facing_;
    std::vector<Path> paths_;
};

}  // namespace

const Path* PathList::los_path() const
{
    for (const auto& p : paths)
        if (p.is_los) return &p;
    return nullptr;
}

std::complex<double> path_gain(double wavelength, double length, double reflection_product)
{
    const double k = 2.0 * std::numbers::pi / wavelength;
    const double amplitude = wavelength / (4.0 * std::numbers::pi * length) * reflection_product;
    return std::polar(amplitude, -k * length);
}

bool segment_blocked(std::span<const Facet> facets, const Vec3& a, const Vec3& b, std::int64_t exclude_a,
                     std::int64_t exclude_b)
{
    const double len = distance(a, b);
    for (std::size_t i = 0; i < facets.size(); ++i) {
        const auto si = static_cast<std::int64_t>(i);
        if (si == exclude_a || si == exclude_b) continue;
        const auto t = facets[i].intersect_segment(a, b);
        if (t && *t * len > kEndTolerance && (1.0 - *t) * len > kEndTolerance) return true;
    }
    return false;
}

PathList trace(std::span<const Facet> facets, const Vec3& tx, const Vec3& rx, const TraceOptions& options)
{
    if (options.max_order < 0 || options.max_order > 3)
        throw std::invalid_argument("trace: max_order must lie in [0, 3]");
    if (distance(tx, rx) <= 0.0) throw std::invalid_argument("trace: tx and rx coincide");
    if (!(options.wavelength > 0.0)) throw std::invalid_argument("trace: wavelength must be positive");
    return Tracer(facets, tx, rx, options).run();
}

void write_paths(std::ostream& os, const PathList& list)
{
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(list.paths.size()));
    for (const auto& p : list.paths) {
        io::write_le(os, p.gain.real());
        io::write_le(os, p.gain.imag());
        io::write_le(os, p.aoa_azimuth);
        io::write_le(os, p.aoa_elevation);
        io::write_le(os, p.aod_azimuth);
        io::write_le(os, p.aod_elevation);
        io::write_le(os, p.length);
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(p.bounce_count));
        io::write_le<std::uint8_t>(os, p.is_los ? 1 : 0);
    }
}

PathList read_paths(std::istream& is, int max_order)
{
    PathList list;
    list.max_order = max_order;
    const auto count = io::read_le<std::uint32_t>(is);
    list.paths.resize(count);
    for (auto& p : list.paths) {
        const double re = io::read_le<double>(is);
        const double im = io::read_le<double>(is);
        p.gain = {re, im};
        p.aoa_azimuth = io::read_le<double>(is);
        p.aoa_elevation = io::read_le<double>(is);
        p.aod_azimuth = io::read_le<double>(is);
        p.aod_elevation = io::read_le<double>(is);
        p.length = io::read_le<double>(is);
        p.bounce_count = io::read_le<std::uint8_t>(is);
        p.is_los = io::read_le<std::uint8_t>(is) != 0;
    }
    return list;
}

}  // namespace raylink::raytrace
