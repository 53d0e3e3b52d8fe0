#pragma once

#include "dapt/training.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dapt::train {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr const char* kCheckpointFileName = "model.ckpt";
inline constexpr const char* kConfigFileName = "config.json";

/// Layout (little-endian): magic "DAPTCKPT", u32 version, config JSON,
/// named tensors (name, rank, dims, f64 values), optional Adam moments,
/// metadata, then the SHA-256 of all preceding bytes.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Hex SHA-256 of the serialized body; identifies a checkpoint in parent chains.
std::string checkpoint_hash(const Checkpoint& checkpoint);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Accepts a checkpoint file or a directory containing model.ckpt.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes model.ckpt and config.json into `dir` (the vocabulary is copied by callers).
void save_model_package(const Checkpoint& checkpoint, const std::filesystem::path& dir);

} // namespace dapt::train
