#pragma once

// Versioned checkpoint container.
//
// Layout (little-endian):
//   magic "I2ICKPT\n" | u32 version | u64 n + metadata JSON (sorted keys)
//   | u64 count, then per token: u32 n + bytes
//   | u64 count, then per array: u32 n + name | u8 dtype (0 f32, 1 f64)
//     | u32 rank | i64 dims[rank] | u64 n + payload
//   | u32 crc32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "int2int/model.hpp"

namespace int2int {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

struct NamedArray {
    std::string name;
    Dtype dtype = Dtype::f64;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> payload;

    template <typename T>
    static NamedArray from_matrix(std::string name, const nn::Matrix<T>& m);
    /// Copies into `m`; throws IntegrityError on a shape or dtype mismatch.
    template <typename T>
    void to_matrix(nn::Matrix<T>& m) const;
};

struct CheckpointData {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::string> vocabulary;
    std::vector<NamedArray> arrays;

    [[nodiscard]] const NamedArray* find(std::string_view name) const;
};

/// Written to a temporary file then renamed into place. Throws IoError.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
/// Throws FileError, IntegrityError, VersionMismatch.
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace int2int
