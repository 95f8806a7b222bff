/**
 * @file   detect.hpp
 * @brief  Blockage detectors: ray-tracing rule, point-cloud GNN and the GNN
 *         that also sees the ray-tracing status.
 */
#pragma once

#include "raylink/geometry.hpp"
#include "raylink/nn/checkpoint.hpp"
#include "raylink/nn/layers.hpp"
#include "raylink/raytrace.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace raylink::detect {

enum class Variant { Rt, Gnn, Pbgnn };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// LoS flag of the strongest path; 0 for an empty list.
int detect_rt(const raytrace::PathList& paths);

struct KnnGraph
{
    std::vector<Vec3> positions;
    /// Per node, its min(k, n-1) nearest neighbours sorted by (distance, index).
    std::vector<std::vector<std::uint32_t>> nearest;
    /// Symmetrized undirected adjacency, ascending indices, no self loops.
    std::vector<std::vector<std::uint32_t>> adjacency;
};

KnnGraph build_knn_graph(std::span<const Vec3> points, std::size_t k);

/// Farthest-point subsample of at most `max_points` points. The start point
/// and every tie are resolved by coordinates, so the selected set does not
/// depend on the input order. Clouds within the limit are returned unchanged.
std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, std::size_t max_points);

struct DetectorHyper
{
    std::size_t k = 8;
    std::size_t hidden = 32;
    std::size_t hop_layers = 4;
    std::size_t head_hidden = 16;
    std::size_t max_points = 256;
    double position_scale = 100.0;  ///< meters per feature unit
    bool link_frame = true;         ///< express the cloud in a frame whose x axis points at the BS
};

/// Graph ready for message passing: scaled positions plus directed edges
/// j -> i for every j in N(i) and the self edge i -> i.
struct PreparedGraph
{
    std::vector<Vec3> positions;
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;
};

/// Rotation taking `direction` to +x while keeping the horizontal plane's
/// orientation as close as possible (yaw, then pitch). Rows are the new axes.
std::array<Vec3, 3> link_frame_axes(const Vec3& direction);

/// Subsamples, optionally rotates into the link frame (required when
/// hyper.link_frame is set), scales and builds the edge lists.
PreparedGraph prepare_graph(const PointCloud& cloud, const DetectorHyper& hyper,
                            std::optional<Vec3> link_direction = std::nullopt);

class DetectorModel
{
  public:
    DetectorModel(Variant variant, const DetectorHyper& hyper, std::uint64_t seed);

    Variant variant() const { return variant_; }
    const DetectorHyper& hyper() const { return hyper_; }
    std::uint64_t seed() const { return seed_; }
    std::vector<nn::Var> parameters() const;

    nn::Mlp& hop1() { return hop1_; }
    nn::Mlp& hop2() { return hop2_; }
    nn::Mlp& head() { return head_; }

    /// Probabilities [B, 1] for a batch of graphs; `rt_status` required for pbgnn.
    nn::Var forward(std::span<const PreparedGraph* const> graphs, std::span<const double> rt_status);

    nn::Checkpoint to_checkpoint(const nlohmann::json& extra = {}) const;
    static DetectorModel from_checkpoint(const nn::Checkpoint& checkpoint);

  private:
    Variant variant_;
    DetectorHyper hyper_;
    std::uint64_t seed_;
    nn::Mlp hop1_;
    nn::Mlp hop2_;
    nn::Mlp head_;
};

/// Probability of LoS for one cloud. Rejects an empty cloud.
double gnn_forward(const PointCloud& cloud, DetectorModel& model, std::optional<int> rt_status = std::nullopt,
                   std::optional<Vec3> link_direction = std::nullopt);

struct DetectorSample
{
    PreparedGraph graph;
    double rt_status = 0.0;
    int label = 0;
};

struct TrainOptions
{
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::ostream* progress = nullptr;
};

struct DetectorLogRow
{
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct DetectorTrainResult
{
    DetectorModel model;
    std::vector<DetectorLogRow> log;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    bool diverged = false;
    std::string diagnostic;
};

/// Minimizes BCE on `train` and keeps the parameters of the epoch with the
/// best validation accuracy.
DetectorTrainResult train_detector(std::span<const DetectorSample> train, std::span<const DetectorSample> val,
                                   Variant variant, const DetectorHyper& hyper, const TrainOptions& options);

/// Batched inference; probabilities in sample order.
std::vector<double> predict(DetectorModel& model, std::span<const DetectorSample> samples, std::size_t batch_size = 64);

void write_detector_log(std::ostream& os, const std::vector<DetectorLogRow>& log);

struct ClassificationMetrics
{
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    bool precision_undefined = false;
    bool recall_undefined = false;
};

/// Positive class is LoS (1). 0/0 ratios yield 1 and set the matching flag.
ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels);

}  // namespace raylink::detect
