#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lisa/types.hpp"

namespace lisa {

/// Element type tag stored in a tensor file header.
enum class DType : std::uint8_t { f64 = 0, f32 = 1, u16 = 2, u32 = 3 };

std::size_t dtype_size(DType dtype);

/// A self-describing row-major array.
///
/// File layout (little-endian):
///   "LISA" | u8 version (1) | u8 dtype | u8 ndims | u8 pad (0)
///   ndims x u64 dims
///   payload, prod(dims) elements of dtype
struct Tensor {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;

  static Tensor from_f64(std::vector<std::uint64_t> dims, std::span<const double> values);
  static Tensor from_u16(std::vector<std::uint64_t> dims, std::span<const std::uint16_t> values);

  /// Elements widened to double (any dtype).
  std::vector<double> to_f64() const;
  /// Elements as codeword ids; u16 or u32 payloads whose values fit.
  std::vector<CodewordId> to_ids() const;
};

inline constexpr std::uint8_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Matrix& m);
Tensor to_tensor(const Codebooks& codebooks);
Tensor to_tensor(const CodewordIndices& indices);

/// 2-D tensor of any real dtype.
Matrix tensor_to_matrix(const Tensor& tensor);
/// 3-D B x W x D tensor.
Codebooks tensor_to_codebooks(const Tensor& tensor);
/// 2-D L x B tensor of u16/u32 ids.
CodewordIndices tensor_to_indices(const Tensor& tensor);

}  // namespace lisa
