/**
 * @file   refine.hpp
 * @brief  Refinement of the ray-traced Gram matrix: eigenvector replacement
 *         for LoS links, residual CNN plus PSD projection for NLoS links.
 */
#pragma once

#include "raylink/channel.hpp"
#include "raylink/nn/checkpoint.hpp"
#include "raylink/nn/layers.hpp"
#include "raylink/raytrace.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace raylink::refine {

using channel::GramMatrix;
using linalg::ComplexMatrix;

/// Arrays and wavelength needed to rebuild the LoS channel from a path.
struct LinkGeometry
{
    channel::ArrayConfig tx_array;
    channel::ArrayConfig rx_array;
    double wavelength = 0.005;
};

struct LosRefinement
{
    GramMatrix t;
    bool fallback = false;  ///< no LoS path; t_rt returned unchanged
};

/// Replaces the dominant eigenvector of t_rt by the right singular vector of
/// the LoS-only channel and keeps the eigenvalues: V' diag(lambda) V'^H with
/// V' = gram_schmidt([v_LoS, V_RT columns 2..N]).
LosRefinement refine_los(const raytrace::PathList& paths, const GramMatrix& t_rt, const LinkGeometry& link);

struct RefinerHyper
{
    std::vector<std::size_t> channels{16, 32, 64, 128, 182};
};

/// Convolution ladder (3x3 conv, batch norm, LeakyReLU per hidden stage) and a
/// linear 3x3 conv back to two channels. Its output is added to the input.
class RefinerModel
{
  public:
    RefinerModel(std::size_t n, const RefinerHyper& hyper, std::uint64_t seed);

    std::size_t n() const { return n_; }
    const RefinerHyper& hyper() const { return hyper_; }
    std::uint64_t seed() const { return seed_; }
    /// Gram matrices are divided by this before entering the network.
    double input_scale() const { return input_scale_; }
    void set_input_scale(double s) { input_scale_ = s; }

    std::vector<nn::Var> parameters() const { return stack_.parameters(); }
    void set_training(bool training) { stack_.set_training(training); }
    nn::Sequential& stack() { return stack_; }

    /// x + stack(x) for x of shape [B, 2, N, N].
    nn::Var forward(const nn::Var& x);

    nn::Checkpoint to_checkpoint(const nlohmann::json& extra = {}) const;
    static RefinerModel from_checkpoint(const nn::Checkpoint& checkpoint);

  private:
    std::size_t n_;
    RefinerHyper hyper_;
    std::uint64_t seed_;
    double input_scale_ = 1.0;
    nn::Sequential stack_;
};

/// (re, im) channels of t / scale written at `out` (2 * N * N values).
void gram_to_channels(const ComplexMatrix& t, double scale, double* out);
ComplexMatrix channels_to_matrix(const double* in, std::size_t n, double scale);

struct NlosRefinement
{
    GramMatrix t;
    bool fault = false;  ///< non-finite network output; projection of t_rt returned
};

NlosRefinement refine_nlos(const GramMatrix& t_rt, RefinerModel& model);

struct Refinement
{
    GramMatrix t;
    bool los_branch = false;
    bool fallback = false;
};

/// LoS branch when probability >= 1/2, NLoS branch otherwise.
Refinement refine(double los_probability, const raytrace::PathList& paths, const GramMatrix& t_rt,
                  const LinkGeometry& link, RefinerModel& model);

struct RefinerSample
{
    GramMatrix t_rt;
    GramMatrix t_true;
};

struct RefinerTrainOptions
{
    std::size_t epochs = 200;
    std::size_t batch_size = 200;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::ostream* progress = nullptr;
};

struct RefinerLogRow
{
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
};

struct RefinerTrainResult
{
    RefinerModel model;
    std::vector<RefinerLogRow> log;  ///< row 0 holds the untrained model
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
    bool diverged = false;
    std::string diagnostic;
};

/// Mean absolute error between (x + stack(x)) and the true Gram matrix, both
/// divided by the model's input scale.
double validation_mae(RefinerModel& model, std::span<const RefinerSample> samples, std::size_t batch_size = 200);

/// Trains on the given (NLoS) samples. The input scale is the mean Frobenius
/// norm of t_rt over `train`. Keeps the parameters with the lowest validation
/// MAE, the untrained model included.
RefinerTrainResult train_refiner(std::span<const RefinerSample> train, std::span<const RefinerSample> val,
                                 std::size_t n, const RefinerHyper& hyper, const RefinerTrainOptions& options);

void write_refiner_log(std::ostream& os, const std::vector<RefinerLogRow>& log);

}  // namespace raylink::refine
