/**
 * @file   checkpoint.hpp
 * @brief  Model checkpoint container.
 *
 * Layout (little-endian): magic "RLNKCKPT", format version (u32), header
 * length (u64), UTF-8 JSON header, then every tensor's values as f64 in the
 * order listed under the header's "tensors" key.
 */
#pragma once

#include "raylink/nn/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace raylink::nn {

struct NamedTensor
{
    std::string name;
    Tensor tensor;
};

struct Checkpoint
{
    nlohmann::json header;  ///< architecture, hyperparameters, seed
    std::vector<NamedTensor> tensors;

    const Tensor& get(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace raylink::nn
