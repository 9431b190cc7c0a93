#include "lisa/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are copied in host byte order, which must be little-endian");

constexpr char kMagic[4] = {'L', 'I', 'S', 'A'};
constexpr std::size_t kFixedHeader = 8;

template <class T>
std::vector<T> copy_out(const std::vector<std::uint8_t>& payload, std::size_t count) {
  std::vector<T> out(count);
  std::memcpy(out.data(), payload.data(), count * sizeof(T));
  return out;
}

template <class T>
std::vector<std::uint8_t> copy_in(std::span<const T> values) {
  std::vector<std::uint8_t> out(values.size() * sizeof(T));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  LISA_REQUIRE(t.dims.size() == rank, InvalidInput,
               std::string(what) + " tensor must have " + std::to_string(rank) +
                   " dimensions, file has " + std::to_string(t.dims.size()));
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::f64:
      return 8;
    case DType::f32:
      return 4;
    case DType::u16:
      return 2;
    case DType::u32:
      return 4;
  }
  throw InvalidInput("unknown tensor dtype");
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) {
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::from_f64(std::vector<std::uint64_t> dims, std::span<const double> values) {
  Tensor t{DType::f64, std::move(dims), copy_in(values)};
  LISA_REQUIRE(t.element_count() == values.size(), InvalidInput, "tensor dims do not match data");
  return t;
}

Tensor Tensor::from_u16(std::vector<std::uint64_t> dims, std::span<const std::uint16_t> values) {
  Tensor t{DType::u16, std::move(dims), copy_in(values)};
  LISA_REQUIRE(t.element_count() == values.size(), InvalidInput, "tensor dims do not match data");
  return t;
}

std::vector<double> Tensor::to_f64() const {
  const std::size_t n = element_count();
  std::vector<double> out(n);
  switch (dtype) {
    case DType::f64:
      return copy_out<double>(payload, n);
    case DType::f32: {
      const auto v = copy_out<float>(payload, n);
      std::copy(v.begin(), v.end(), out.begin());
      return out;
    }
    case DType::u16: {
      const auto v = copy_out<std::uint16_t>(payload, n);
      std::copy(v.begin(), v.end(), out.begin());
      return out;
    }
    case DType::u32: {
      const auto v = copy_out<std::uint32_t>(payload, n);
      std::copy(v.begin(), v.end(), out.begin());
      return out;
    }
  }
  throw InvalidInput("unknown tensor dtype");
}

std::vector<CodewordId> Tensor::to_ids() const {
  const std::size_t n = element_count();
  if (dtype == DType::u16) {
    return copy_out<std::uint16_t>(payload, n);
  }
  LISA_REQUIRE(dtype == DType::u32, InvalidInput, "codeword ids must be stored as u16 or u32");
  const auto wide = copy_out<std::uint32_t>(payload, n);
  std::vector<CodewordId> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    LISA_REQUIRE(wide[k] <= std::numeric_limits<CodewordId>::max(), OutOfRange,
                 "codeword id " + std::to_string(wide[k]) + " does not fit in 16 bits");
    out[k] = static_cast<CodewordId>(wide[k]);
  }
  return out;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  LISA_REQUIRE(tensor.dims.size() <= 255, InvalidInput, "tensor has too many dimensions");
  LISA_REQUIRE(tensor.payload.size() == tensor.element_count() * dtype_size(tensor.dtype),
               InvalidInput, "tensor payload size does not match dims and dtype");
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 8 * tensor.dims.size() + tensor.payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dtype));
  out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
  out.push_back(0);
  for (std::uint64_t d : tensor.dims) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&d);
    out.insert(out.end(), p, p + sizeof(d));
  }
  out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  LISA_REQUIRE(bytes.size() >= kFixedHeader, InvalidInput, "tensor file is truncated");
  LISA_REQUIRE(std::memcmp(bytes.data(), kMagic, 4) == 0, InvalidInput,
               "not a LISA tensor file (bad magic)");
  LISA_REQUIRE(bytes[4] == kTensorFormatVersion, InvalidInput,
               "unsupported tensor format version " + std::to_string(bytes[4]));
  LISA_REQUIRE(bytes[5] <= 3, InvalidInput, "unknown tensor dtype " + std::to_string(bytes[5]));
  Tensor t;
  t.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndims = bytes[6];
  LISA_REQUIRE(bytes.size() >= kFixedHeader + 8 * ndims, InvalidInput,
               "tensor file is truncated inside the dims block");
  t.dims.resize(ndims);
  std::memcpy(t.dims.data(), bytes.data() + kFixedHeader, 8 * ndims);
  const std::size_t offset = kFixedHeader + 8 * ndims;
  std::size_t expected = dtype_size(t.dtype);
  for (std::uint64_t d : t.dims) {
    LISA_REQUIRE(!__builtin_mul_overflow(expected, d, &expected), InvalidInput,
                 "tensor dims overflow the addressable size");
  }
  LISA_REQUIRE(bytes.size() - offset == expected, InvalidInput,
               "tensor payload has " + std::to_string(bytes.size() - offset) +
                   " bytes, dims imply " + std::to_string(expected));
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  LISA_REQUIRE(out.good(), Error, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  LISA_REQUIRE(out.good(), Error, "failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  LISA_REQUIRE(in.good(), Error, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

Tensor to_tensor(const Matrix& m) { return Tensor::from_f64({m.rows(), m.cols()}, m.values()); }

Tensor to_tensor(const Codebooks& codebooks) {
  return Tensor::from_f64({codebooks.num_books(), codebooks.num_words(), codebooks.dim()},
                          codebooks.values());
}

Tensor to_tensor(const CodewordIndices& indices) {
  return Tensor::from_u16({indices.length(), indices.num_books()}, indices.values());
}

Matrix tensor_to_matrix(const Tensor& tensor) {
  require_rank(tensor, 2, "matrix");
  LISA_REQUIRE(tensor.dtype == DType::f64 || tensor.dtype == DType::f32, InvalidInput,
               "matrix tensors must be f64 or f32");
  return Matrix(tensor.dims[0], tensor.dims[1], tensor.to_f64());
}

Codebooks tensor_to_codebooks(const Tensor& tensor) {
  require_rank(tensor, 3, "codebook");
  LISA_REQUIRE(tensor.dtype == DType::f64 || tensor.dtype == DType::f32, InvalidInput,
               "codebook tensors must be f64 or f32");
  return Codebooks(tensor.dims[0], tensor.dims[1], tensor.dims[2], tensor.to_f64());
}

CodewordIndices tensor_to_indices(const Tensor& tensor) {
  require_rank(tensor, 2, "codeword index");
  return CodewordIndices(tensor.dims[0], tensor.dims[1], tensor.to_ids());
}

}  // namespace lisa
