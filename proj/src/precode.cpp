#include "raylink/precode.hpp"

#include "raylink/log.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace raylink::precode {

namespace {

/// First n rows of the unitary m-point DFT matrix, column-major access [col][row].
std::vector<std::vector<Complex>> truncated_dft(std::size_t n, std::size_t m)
{
    std::vector<std::vector<Complex>> cols(m, std::vector<Complex>(n));
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::size_t c = 0; c < m; ++c)
        for (std::size_t r = 0; r < n; ++r) {
            // Reduce r*c modulo m first so the phase stays exact for large grids.
            const auto rc = static_cast<double>((r * c) % m);
            cols[c][r] = std::polar(scale, -2.0 * std::numbers::pi * rc / static_cast<double>(m));
        }
    return cols;
}

}  // namespace

Codebook build_codebook(const channel::ArrayConfig& array, int b_bits)
{
    array.validate();
    if (b_bits < 1) throw std::invalid_argument("build_codebook: b_bits must be at least 1");
    const auto grid = [&](std::size_t n) {
        const auto bits = static_cast<std::size_t>(b_bits) * (n - 1);
        if (bits > 20) throw std::invalid_argument("build_codebook: codebook too large");
        return std::size_t{1} << bits;
    };
    const std::size_t mx = grid(array.n_x);
    const std::size_t my = grid(array.n_y);
    const auto wx = truncated_dft(array.n_x, mx);
    const auto wy = truncated_dft(array.n_y, my);
    const double unit = 1.0 / std::sqrt(static_cast<double>(array.size()));

    Codebook cb;
    cb.b_bits = b_bits;
    cb.codewords.reserve(mx * my);
    for (std::size_t cx = 0; cx < mx; ++cx)
        for (std::size_t cy = 0; cy < my; ++cy) {
            std::vector<Complex> w(array.size());
            for (std::size_t ix = 0; ix < array.n_x; ++ix)
                for (std::size_t iy = 0; iy < array.n_y; ++iy) {
                    const Complex z = wx[cx][ix] * wy[cy][iy];
                    w[ix * array.n_y + iy] = std::polar(unit, std::arg(z));
                }
            cb.codewords.push_back(std::move(w));
        }
    return cb;
}

std::size_t select_analog(const GramMatrix& t, const Codebook& codebook, bool use_pruned)
{
    if (codebook.codewords.empty()) throw std::invalid_argument("select_analog: empty codebook");
    const auto& m = t.matrix();
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t idx) {
        const double v = channel::quadratic_form(m, codebook.codewords[idx]);
        if (v > best_value) {
            best_value = v;
            best = idx;
        }
    };
    if (use_pruned && codebook.pruned_indices) {
        if (codebook.pruned_indices->empty()) throw std::invalid_argument("select_analog: empty pruned set");
        for (auto idx : *codebook.pruned_indices) consider(idx);
    } else {
        for (std::size_t idx = 0; idx < codebook.size(); ++idx) consider(idx);
    }
    return best;
}

Codebook prune_codebook(const Codebook& codebook, std::span<const GramMatrix> training_t, std::uint64_t min_count)
{
    if (training_t.empty()) throw std::invalid_argument("prune_codebook: no training Gram matrices");
    Codebook out = codebook;
    out.counts.assign(codebook.size(), 0);
    for (const auto& t : training_t) ++out.counts[select_analog(t, codebook, false)];

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.counts[i] > min_count) kept.push_back(i);
    out.prune_fallback = kept.empty();
    if (kept.empty()) {
        warn("pruning removed every codeword; keeping the 16 most frequent");
        std::vector<std::size_t> order(out.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return out.counts[a] > out.counts[b]; });
        order.resize(std::min<std::size_t>(16, order.size()));
        std::sort(order.begin(), order.end());
        kept = order;
    }
    out.pruned_indices = kept;
    return out;
}

std::size_t most_frequent_codeword(const Codebook& codebook)
{
    if (codebook.counts.empty()) return 0;
    return static_cast<std::size_t>(std::max_element(codebook.counts.begin(), codebook.counts.end()) -
                                    codebook.counts.begin());
}

PowerAllocation water_fill(std::span<const double> eigenvalues, double snr)
{
    if (!(snr > 0.0)) throw std::invalid_argument("water_fill: snr must be positive");
    const double top = eigenvalues.empty() ? 0.0 : *std::max_element(eigenvalues.begin(), eigenvalues.end());
    if (!(top > 0.0)) throw std::invalid_argument("water_fill: no positive eigenvalue (no usable channel)");
    const double floor_tol = 1e-14 * top;

    std::vector<double> inv(eigenvalues.size(), std::numeric_limits<double>::infinity());
    double max_inv = 0.0;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] > floor_tol) {
            inv[i] = 1.0 / (snr * eigenvalues[i]);
            max_inv = std::max(max_inv, inv[i]);
        }
    auto filled = [&](double mu) {
        double s = 0.0;
        for (double v : inv)
            if (mu > v) s += mu - v;
        return s;
    };
    double lo = 0.0, hi = max_inv + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (filled(mid) < 1.0 ? lo : hi) = mid;
    }
    // Polish with the closed form on the active set the bisection identified.
    double mu = 0.5 * (lo + hi);
    double inv_sum = 0.0;
    std::size_t active = 0;
    for (double v : inv)
        if (mu > v) {
            inv_sum += v;
            ++active;
        }
    if (active > 0) {
        const double exact = (1.0 + inv_sum) / static_cast<double>(active);
        std::size_t check = 0;
        for (double v : inv)
            if (exact > v) ++check;
        if (check == active) mu = exact;
    }
    PowerAllocation out;
    out.water_level = mu;
    out.powers.resize(eigenvalues.size());
    for (std::size_t i = 0; i < inv.size(); ++i) out.powers[i] = std::max(0.0, mu - inv[i]);
    return out;
}

ComplexMatrix beam_covariance(std::span<const Complex> w)
{
    ComplexMatrix q(w.size(), w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < w.size(); ++j) q(i, j) = w[i] * std::conj(w[j]);
    return q;
}

namespace {

ComplexMatrix isotropic_covariance(std::size_t n)
{
    ComplexMatrix q = ComplexMatrix::identity(n);
    q *= 1.0 / static_cast<double>(n);
    return q;
}

ComplexMatrix covariance_from_eig(const linalg::HermitianEig& eig, double snr)
{
    const std::size_t n = eig.eigenvectors.rows();
    const double top = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    if (!(top > 0.0)) return isotropic_covariance(n);
    const auto alloc = water_fill(eig.eigenvalues, snr);
    linalg::HermitianEig weighted = eig;
    weighted.eigenvalues = alloc.powers;
    return weighted.reconstruct();
}

}  // namespace

ComplexMatrix digital_covariance(const GramMatrix& estimate, double snr)
{
    return covariance_from_eig(linalg::hermitian_eig(estimate.matrix()), snr);
}

std::string to_string(LosSplit split)
{
    switch (split) {
        case LosSplit::Los: return "los";
        case LosSplit::Nlos: return "nlos";
        case LosSplit::All: return "all";
    }
    return "all";
}

std::optional<double> MetricTable::find(const std::string& strategy, double snr_db, LosSplit split,
                                        const std::string& metric) const
{
    for (const auto& r : rows)
        if (r.strategy == strategy && r.snr_db && std::abs(*r.snr_db - snr_db) < 1e-9 && r.split == split &&
            r.metric == metric)
            return r.value;
    return std::nullopt;
}

void MetricTable::write_csv(std::ostream& os) const
{
    os << "strategy,snr_db,los_split,metric_name,value,sample_count\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.strategy << ',';
        if (r.snr_db) {
            std::snprintf(buf, sizeof buf, "%.6g", *r.snr_db);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.12g", r.value);
        os << ',' << to_string(r.split) << ',' << r.metric << ',' << buf << ',' << r.sample_count << '\n';
    }
}

MetricTable evaluate(std::span<const EvalSample> samples, std::span<const Strategy> strategies,
                     const Codebook& codebook, const EvaluateOptions& options)
{
    for (const auto& s : strategies)
        if (!s.isotropic && s.estimates.size() != samples.size())
            throw std::invalid_argument("evaluate: strategy '" + s.name + "' has the wrong estimate count");

    struct Acc
    {
        double rate = 0.0, capacity = 0.0, ratio = 0.0, analog_rate = 0.0;
        std::size_t n = 0;
    };
    const std::size_t n_snr = options.snr_db.size();
    constexpr LosSplit kSplits[] = {LosSplit::Los, LosSplit::Nlos, LosSplit::All};
    auto split_index = [](LosSplit s) { return static_cast<std::size_t>(s); };

    // acc[strategy][snr][split]; the extra strategy slot holds capacity.
    std::vector<std::vector<std::array<Acc, 3>>> acc(strategies.size() + 1,
                                                     std::vector<std::array<Acc, 3>>(n_snr));
    std::vector<std::size_t> invalid(strategies.size(), 0);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sample = samples[i];
        const channel::RateEvaluator truth(sample.truth);
        const std::size_t n = sample.truth.size();
        const double lmax = truth.max_eigenvalue();
        if (!(lmax > 0.0)) continue;

        std::vector<double> snr(n_snr), capacity(n_snr), single(n_snr);
        for (std::size_t k = 0; k < n_snr; ++k) {
            snr[k] = std::pow(10.0, options.snr_db[k] / 10.0);
            const auto alloc = water_fill(truth.eigenvalues(), snr[k]);
            double c = 0.0;
            for (std::size_t m = 0; m < n; ++m)
                c += std::log2(1.0 + snr[k] * std::max(truth.eigenvalues()[m], 0.0) * alloc.powers[m]);
            capacity[k] = c;
            single[k] = std::log2(1.0 + snr[k] * lmax);
        }
        auto add = [&](std::size_t slot, std::size_t k, const Acc& v) {
            for (LosSplit sp : kSplits) {
                if (sp == LosSplit::Los && !sample.los) continue;
                if (sp == LosSplit::Nlos && sample.los) continue;
                auto& a = acc[slot][k][split_index(sp)];
                a.rate += v.rate;
                a.capacity += v.capacity;
                a.ratio += v.ratio;
                a.analog_rate += v.analog_rate;
                a.n += 1;
            }
        };
        for (std::size_t k = 0; k < n_snr; ++k) add(strategies.size(), k, {capacity[k], capacity[k], 1.0, 0.0, 1});

        for (std::size_t s = 0; s < strategies.size(); ++s) {
            const auto& strat = strategies[s];
            std::optional<linalg::HermitianEig> eig;
            std::size_t codeword = strat.fixed_codeword;
            if (!strat.isotropic) {
                const auto& est = strat.estimates[i];
                if (!est || !est->matrix().all_finite() || est->size() != n) {
                    ++invalid[s];
                    continue;
                }
                eig = linalg::hermitian_eig(est->matrix());
                codeword = select_analog(*est, codebook, options.use_pruned);
            }
            for (std::size_t k = 0; k < n_snr; ++k) {
                const ComplexMatrix q = strat.isotropic ? isotropic_covariance(n) : covariance_from_eig(*eig, snr[k]);
                const double r = truth.rate(q, snr[k]);
                const double ar = truth.beam_rate(codebook.codewords[codeword], snr[k]);
                add(s, k, {r, capacity[k], ar / single[k], ar, 1});
            }
        }
    }

    MetricTable table;
    for (std::size_t s = 0; s <= strategies.size(); ++s) {
        const std::string name = s == strategies.size() ? "capacity" : strategies[s].name;
        for (std::size_t k = 0; k < n_snr; ++k)
            for (LosSplit sp : kSplits) {
                const auto& a = acc[s][k][split_index(sp)];
                const double nn = a.n > 0 ? static_cast<double>(a.n) : 1.0;
                table.rows.push_back({name, options.snr_db[k], sp, "rate", a.rate / nn, a.n});
                if (s == strategies.size()) continue;
                table.rows.push_back(
                    {name, options.snr_db[k], sp, "capacity_ratio", a.capacity > 0 ? a.rate / a.capacity : 0.0, a.n});
                table.rows.push_back({name, options.snr_db[k], sp, "rate_ratio", a.ratio / nn, a.n});
                table.rows.push_back({name, options.snr_db[k], sp, "analog_rate", a.analog_rate / nn, a.n});
            }
        if (s < strategies.size())
            table.rows.push_back({name, std::nullopt, LosSplit::All, "invalid", static_cast<double>(invalid[s]), invalid[s]});
    }
    return table;
}

}  // namespace raylink::precode
