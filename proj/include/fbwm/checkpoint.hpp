#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbwm/tensor.hpp"

namespace fbwm::checkpoint {

struct NamedTensor {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    bool operator==(const NamedTensor&) const = default;
};

enum class CheckpointErrorCode { Io, BadMagic, VersionMismatch, Truncated, Mismatch };

struct CheckpointError : std::runtime_error {
    CheckpointError(CheckpointErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
    CheckpointErrorCode code;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Named-tensor container with training metadata. File layout: "WMCK", u16
// version, kind, epoch, seed, config digest, string attributes, tensors
// (name, rank, dims, raw little-endian f64). Round trips are bit-exact.
struct Checkpoint {
    std::string kind;
    std::uint32_t epoch = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_digest = 0;
    std::map<std::string, std::string> attributes;
    std::vector<NamedTensor> tensors;

    void add_params(const tensor::ParamStore& store);
    // Copies tensors into same-named parameters; every parameter must be present
    // with a matching shape.
    void restore_params(tensor::ParamStore& store) const;

    const std::string& attribute(const std::string& key) const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    bool operator==(const Checkpoint&) const = default;
};

// FNV-1a digest of a file's bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace fbwm::checkpoint
