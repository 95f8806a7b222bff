/**
 * @file   precode.hpp
 * @brief  DFT analog codebook (build, prune, select), water-filling digital
 *         precoding and rate evaluation of precoding strategies.
 */
#pragma once

#include "raylink/channel.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace raylink::precode {

using channel::GramMatrix;
using linalg::Complex;
using linalg::ComplexMatrix;

struct Codebook
{
    std::vector<std::vector<Complex>> codewords;
    int b_bits = 0;
    /// Active subset after pruning, ascending indices into `codewords`.
    std::optional<std::vector<std::size_t>> pruned_indices;
    /// Per-codeword selection counts gathered while pruning.
    std::vector<std::uint64_t> counts;
    bool prune_fallback = false;

    std::size_t size() const { return codewords.size(); }
};

/// Columns of W_X kron W_Y, where W_X holds the first N_X rows of the unitary
/// 2^{B(N_X-1)}-point DFT matrix. Each column is rescaled to unit norm, so
/// every entry has modulus 1/sqrt(N_T). Column index = ix * M_Y + iy.
Codebook build_codebook(const channel::ArrayConfig& array, int b_bits);

/// argmax over the active set of w^H T w; ties go to the lowest index.
std::size_t select_analog(const GramMatrix& t, const Codebook& codebook, bool use_pruned);

/// Keeps codewords selected more than `min_count` times on the training Gram
/// matrices; falls back to the 16 most frequent when that would empty the set.
Codebook prune_codebook(const Codebook& codebook, std::span<const GramMatrix> training_t,
                        std::uint64_t min_count = 2);

/// Most frequently selected codeword according to the pruning counts.
std::size_t most_frequent_codeword(const Codebook& codebook);

struct PowerAllocation
{
    std::vector<double> powers;
    double water_level = 0.0;
};

/// p_i = max(0, mu - 1/(rho lambda_i)) with sum p_i = 1; eigenvalues descending.
PowerAllocation water_fill(std::span<const double> eigenvalues, double snr);

/// Water-filling transmit covariance V P V^H built from an estimate. Falls
/// back to I/N when the estimate carries no positive eigenvalue.
ComplexMatrix digital_covariance(const GramMatrix& estimate, double snr);

ComplexMatrix beam_covariance(std::span<const Complex> w);

// ---------------------------------------------------------------------------
// Strategy evaluation

enum class LosSplit { Los, Nlos, All };
std::string to_string(LosSplit split);

struct EvalSample
{
    std::uint64_t scene_id = 0;
    GramMatrix truth;
    bool los = false;
};

/// A precoding strategy to score. Estimate-based strategies design precoders
/// from per-sample Gram estimates (a missing entry marks the pair invalid).
/// Isotropic strategies transmit Q = I/N digitally and a fixed codeword in analog.
struct Strategy
{
    std::string name;
    bool isotropic = false;
    std::vector<std::optional<GramMatrix>> estimates;
    std::size_t fixed_codeword = 0;
};

struct MetricRow
{
    std::string strategy;
    std::optional<double> snr_db;
    LosSplit split = LosSplit::All;
    std::string metric;
    double value = 0.0;
    std::size_t sample_count = 0;
};

struct MetricTable
{
    std::vector<MetricRow> rows;

    std::optional<double> find(const std::string& strategy, double snr_db, LosSplit split,
                               const std::string& metric) const;
    /// CSV with columns strategy,snr_db,los_split,metric_name,value,sample_count.
    void write_csv(std::ostream& os) const;
};

struct EvaluateOptions
{
    std::vector<double> snr_db{0, 5, 10, 15, 20};
    bool use_pruned = true;
};

/// Digital metrics: "rate" (mean log-det rate on the true T) and
/// "capacity_ratio" (mean rate / mean capacity). Analog metrics: "rate_ratio"
/// (mean of R / log2(1 + rho lambda_max)). A "capacity" strategy row holds the
/// water-filling rate on the true T. "invalid" rows count excluded samples.
MetricTable evaluate(std::span<const EvalSample> samples, std::span<const Strategy> strategies,
                     const Codebook& codebook, const EvaluateOptions& options);

}  // namespace raylink::precode
