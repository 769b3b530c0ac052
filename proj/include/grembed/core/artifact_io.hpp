#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "grembed/core/run_config.hpp"
#include "grembed/core/types.hpp"

namespace grembed {

/// Failure to read or write an inter-stage artifact.
class ArtifactError : public std::runtime_error {
 public:
  enum class Kind {
    kNotFound,
    kIo,
    kBadMagic,
    kVersionMismatch,
    kWrongType,
    kTruncated,
    kMalformed,
    kInvariant,
  };

  ArtifactError(Kind kind, const std::string& message, std::optional<std::size_t> offset = std::nullopt);

  Kind kind() const { return kind_; }
  /// Byte offset into the file, when the failure has one.
  std::optional<std::size_t> offset() const { return offset_; }

 private:
  Kind kind_;
  std::optional<std::size_t> offset_;
};

const char* to_string(ArtifactError::Kind kind);

/// Binary artifact tags. Layout: "GFG1", u16 version, u8 tag, u64 config hash,
/// then a tag-specific shape header and little-endian payload.
enum class ArtifactTag : std::uint8_t {
  kDistanceMatrix = 1,
  kDatasetGraph = 2,
  kGcnModel = 3,
  kMatrix = 4,
};

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr int kArsrgTextVersion = 1;

template <typename T>
struct Stamped {
  T value;
  std::uint64_t config_hash = 0;
};

std::string encode_artifact(const DistanceMatrix& dm, std::uint64_t config_hash);
std::string encode_artifact(const Matrix& m, std::uint64_t config_hash);
std::string encode_artifact(const DatasetGraph& g, std::uint64_t config_hash);
std::string encode_artifact(const GcnModel& model, std::uint64_t config_hash);
/// Line-oriented text; reals printed with 9 significant digits.
std::string encode_artifact(const Arsrg& g, std::uint64_t config_hash);

template <typename T>
Stamped<T> decode_artifact(std::string_view bytes);

template <>
Stamped<DistanceMatrix> decode_artifact<DistanceMatrix>(std::string_view bytes);
template <>
Stamped<Matrix> decode_artifact<Matrix>(std::string_view bytes);
template <>
Stamped<DatasetGraph> decode_artifact<DatasetGraph>(std::string_view bytes);
template <>
Stamped<GcnModel> decode_artifact<GcnModel>(std::string_view bytes);
template <>
Stamped<Arsrg> decode_artifact<Arsrg>(std::string_view bytes);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

/// Validates, encodes and writes. Throws ArtifactError(kInvariant) when the value is invalid.
template <typename T>
void write_artifact(const std::filesystem::path& path, const T& value, std::uint64_t config_hash);

template <typename T>
Stamped<T> read_artifact(const std::filesystem::path& path) {
  return decode_artifact<T>(read_file_bytes(path));
}

}  // namespace grembed
