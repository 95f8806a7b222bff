/**
 * @file   dataset.hpp
 * @brief  Dataset directory: manifest.json plus samples.bin.
 *
 * samples.bin is little-endian; per record: scene_id (u64), split (u8),
 * true_los (u8), point count (u32), points as f32 x,y,z, UE and BS positions
 * as f64, the normalized true channel as f64 (re, im) pairs in row-major
 * order, then the ray-traced estimate paths (see raytrace::write_paths).
 */
#pragma once

#include "raylink/geometry.hpp"
#include "raylink/linalg.hpp"
#include "raylink/raytrace.hpp"
#include "raylink/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace raylink::dataset {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string to_string(Split s);

/// 80/10/10 split from hash(seed, "split", scene_id) mod 10.
Split split_for(std::uint64_t seed, std::uint64_t scene_id);

struct Record
{
    std::uint64_t scene_id = 0;
    Split split = Split::Train;
    bool true_los = false;
    PointCloud cloud;  ///< f32-representable coordinates
    Vec3 ue_position;
    Vec3 bs_position;
    linalg::ComplexMatrix true_channel;  ///< normalized, N_R x N_T
    raytrace::PathList rt_paths;         ///< estimate in the UE-centred frame, raw gains

    friend bool operator==(const Record&, const Record&) = default;
};

struct CodebookInfo
{
    int b_bits = 2;
    std::vector<std::size_t> pruned_indices;
    std::vector<std::uint64_t> counts;
    bool fallback = false;
};

struct Manifest
{
    int format_version = 1;
    std::string tool_version;
    std::uint64_t seed = 0;
    scene::AntennaSetup antennas;
    double wavelength = 0.005;
    double normalization = 1.0;  ///< c with H_normalized = c * H_raw
    int estimate_order = 2;
    int truth_order = 3;
    std::size_t train_count = 0, val_count = 0, test_count = 0;
    std::size_t los_count = 0, nlos_count = 0;
    std::size_t discarded = 0;
    CodebookInfo codebook;
    nlohmann::json config;

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
};

struct Dataset
{
    Manifest manifest;
    std::vector<Record> records;

    std::vector<std::size_t> indices(Split split) const;
};

/// Rounds every coordinate to the nearest f32 so the cloud survives storage bit-exactly.
void round_to_float(PointCloud& cloud);

void write_records(std::ostream& os, const std::vector<Record>& records);
std::vector<Record> read_records(std::istream& is, std::size_t n_rx, std::size_t n_tx, int estimate_order);

/// Writes samples.bin first and manifest.json last, so a directory without a
/// manifest is incomplete.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace raylink::dataset
