#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/core.hpp"

namespace oodlab {

enum class DType { F32, F64, I32 };

std::string_view to_string(DType t) noexcept;
std::size_t dtype_size(DType t) noexcept;

/// One array per file: "FMX1", a little-endian u64 header length, a JSON header, then the
/// raw little-endian row-major payload. The header's checksum is the CRC-32 of the payload.
struct FmxArray {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::int64_t> shape;
  std::string role;
  std::string dataset_id;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;

  /// 2-D float payloads as a double matrix.
  Matrix as_matrix() const;
  /// 1-D payloads (any dtype) as doubles.
  Vector as_vector() const;
  /// 1-D i32 payload.
  Labels as_labels() const;
  /// 3-D T x N x C float payload, one matrix per leading index.
  std::vector<Matrix> as_passes() const;
};

inline constexpr const char* kFmxRoles[] = {"features", "logits", "labels",  "embeddings",
                                            "scores",   "weights", "bias",   "passes"};

/// Checks the role against dtype and rank; throws Schema.
void validate_schema(const FmxArray& array);

FmxArray make_fmx(const Matrix& m, std::string role, DType dtype = DType::F64, std::string dataset_id = {},
                  std::string name = {});
FmxArray make_fmx(const Vector& v, std::string role, DType dtype = DType::F64, std::string dataset_id = {},
                  std::string name = {});
FmxArray make_fmx(const Labels& labels, std::string dataset_id = {}, std::string name = {});
FmxArray make_fmx(const std::vector<Matrix>& passes, DType dtype = DType::F64, std::string dataset_id = {},
                  std::string name = {});

std::vector<std::uint8_t> encode_fmx(const FmxArray& array);
/// Throws CorruptFile on truncation or checksum mismatch, Schema on role / shape mismatch.
FmxArray decode_fmx(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void write_fmx(const FmxArray& array, const std::filesystem::path& path);
FmxArray read_fmx(const std::filesystem::path& path);

/// Comma-separated numeric table; a first line that does not parse as numbers is a header.
Matrix read_csv_matrix(const std::filesystem::path& path);

/// FMX or, for a ".csv" extension, the CSV reader.
Matrix load_matrix(const std::filesystem::path& path);
Vector load_vector(const std::filesystem::path& path);
Labels load_labels(const std::filesystem::path& path);

}  // namespace oodlab
