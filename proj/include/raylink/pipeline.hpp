/**
 * @file   pipeline.hpp
 * @brief  The gen / train / eval / report commands behind the raylink CLI.
 *
 * Output files
 *   dataset_dir/   manifest.json, samples.bin, config.ini, VERSION
 *   model_dir/     detector-gnn.ckpt, detector-pbgnn.ckpt, refiner.ckpt and a
 *                  <target>.log.csv per training run, config.ini, VERSION
 *   results_dir/   detection.csv, digital_rate.csv, analog_rate_ratio.csv,
 *                  summary.json, report.csv (after `report`), refined.bin
 *                  (with --cache-refined), config.ini, VERSION
 */
#pragma once

#include "raylink/config.hpp"
#include "raylink/dataset.hpp"
#include "raylink/precode.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace raylink::pipeline {

inline constexpr const char* kVersion = "1.0.0";

/// Training stopped on a non-finite loss or gradient; maps to exit code 3.
class DivergenceError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Exclusive `.lock` file in a directory, removed on destruction.
class DirectoryLock
{
  public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

  private:
    std::filesystem::path path_;
};

/// Writes config.ini and VERSION into `dir`.
void write_provenance(const std::filesystem::path& dir, const config::RunConfig& config);

// ---------------------------------------------------------------------------
// gen

struct GeneratedSample
{
    dataset::Record record;  ///< true_channel still unnormalized
    std::size_t discarded = 0;
};

/// Scene, scan, true channel and ray-traced estimate for one scene id. Scenes
/// without any true path (or without LIDAR returns) are redrawn with the next
/// sub-seed of hash(root, "scene", id).
GeneratedSample generate_sample(const config::RunConfig& config, std::uint64_t scene_id);

/// All samples, normalized, with the codebook pruned on the training split.
dataset::Dataset generate_dataset(const config::RunConfig& config, std::ostream* log = nullptr);

void cmd_gen(const config::RunConfig& config, std::ostream* log = nullptr);

/// Facets reconstructed for one scene id, as CSV.
void export_facets(const config::RunConfig& config, std::uint64_t scene_id, std::ostream& os);

// ---------------------------------------------------------------------------
// train

enum class TrainTarget { DetectorGnn, DetectorPbgnn, Refiner };
std::string to_string(TrainTarget t);
TrainTarget train_target_from_string(const std::string& s);

/// Throws DivergenceError after saving the best checkpoint when training diverged.
void cmd_train(const config::RunConfig& config, TrainTarget target, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// eval

/// c * H(paths) with the dataset's arrays.
linalg::ComplexMatrix estimate_channel(const raytrace::PathList& paths, const dataset::Manifest& manifest);
/// The direct UE-BS path computed from positions alone, ignoring obstacles.
raytrace::PathList geometric_los_paths(const dataset::Record& record, const dataset::Manifest& manifest);
/// Codebook with the pruning stored in the manifest.
precode::Codebook dataset_codebook(const dataset::Manifest& manifest);

struct EvalOptions
{
    bool oracle = false;         ///< every estimate replaced by the true Gram matrix
    bool cache_refined = false;  ///< write refined estimates to refined.bin
};

void cmd_eval(const config::RunConfig& config, const EvalOptions& options, std::ostream* log = nullptr);

/// Merges the results CSVs into report.csv and prints it as a table.
void cmd_report(const config::RunConfig& config, std::ostream& out);

}  // namespace raylink::pipeline
