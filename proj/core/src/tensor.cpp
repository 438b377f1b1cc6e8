#include "tcdc/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace tcdc {

namespace {

std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::size_t shape_size(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void validate_shape(const Shape& dims) {
  for (auto d : dims) {
    if (d == 0) fail(ErrorCode::ZeroDim, "zero extent in dims " + shape_str(dims));
  }
  if (dims.empty() || dims.size() > kMaxRank) {
    fail(ErrorCode::RankOutOfRange, "rank " + std::to_string(dims.size()) + " outside [1,5]");
  }
}

void require_same_dims(const Shape& a, const Shape& b, const char* context) {
  if (a != b) {
    fail(ErrorCode::ShapeMismatch, std::string(context) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape dims, T fill) : dims_(std::move(dims)) {
  validate_shape(dims_);
  data_.assign(shape_size(dims_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
  validate_shape(dims_);
  if (data_.size() != shape_size(dims_)) {
    fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) + " does not match dims " +
                                       shape_str(dims_));
  }
}

template <typename T>
Shape BasicTensor<T>::strides() const {
  Shape s(dims_.size(), 1);
  for (std::size_t i = dims_.size(); i-- > 1;) s[i - 1] = s[i] * dims_[i];
  return s;
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) fail(ErrorCode::ShapeMismatch, "index rank differs from tensor rank");
  std::size_t off = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (index[i] >= dims_[i]) fail(ErrorCode::ShapeMismatch, "index out of bounds on axis " + std::to_string(i));
    off = off * dims_[i] + index[i];
  }
  return off;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

template <typename T>
void BasicTensor<T>::reshape(Shape dims) {
  validate_shape(dims);
  if (shape_size(dims) != data_.size()) {
    fail(ErrorCode::ShapeMismatch, "reshape " + shape_str(dims_) + " -> " + shape_str(dims));
  }
  dims_ = std::move(dims);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
BasicTensor<T> tensor_new(const Shape& dims, T fill) {
  return BasicTensor<T>(dims, fill);
}

template <typename T>
BasicTensor<T> tensor_map2(const BasicTensor<T>& a, const BasicTensor<T>& b, Map2Op op) {
  BasicTensor<T> out = a;
  auto o = out.data();
  auto y = b.data();
  if (op == Map2Op::Scale) {
    if (b.rank() != 1 || b.size() != 1) fail(ErrorCode::ShapeMismatch, "scale expects a length-1 scalar tensor");
    const T s = y[0];
    for (auto& v : o) v *= s;
    return out;
  }
  require_same_dims(a.dims(), b.dims(), "tensor_map2");
  switch (op) {
    case Map2Op::Add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
      break;
    case Map2Op::Sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
      break;
    case Map2Op::Mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
      break;
    case Map2Op::Scale:
      break;
  }
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> tensor_new(const Shape&, float);
template BasicTensor<double> tensor_new(const Shape&, double);
template BasicTensor<float> tensor_map2(const BasicTensor<float>&, const BasicTensor<float>&, Map2Op);
template BasicTensor<double> tensor_map2(const BasicTensor<double>&, const BasicTensor<double>&, Map2Op);

std::vector<std::uint8_t> tensor_encode(const Tensor& t) {
  if (t.rank() == 0) fail(ErrorCode::RankOutOfRange, "cannot encode an empty tensor");
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), {'V', 'T', 'N', 'S', kVtnsVersion, static_cast<std::uint8_t>(t.rank())});
  for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor tensor_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "VTNS", 4) != 0) {
    fail(ErrorCode::BadMagic, "missing VTNS magic");
  }
  if (bytes[4] != kVtnsVersion) fail(ErrorCode::BadVersion, "unsupported VTNS version " + std::to_string(bytes[4]));
  const std::size_t rank = bytes[5];
  if (bytes.size() < 6 + 4 * rank) fail(ErrorCode::TruncatedPayload, "header shorter than declared rank");
  Shape dims(rank);
  for (std::size_t i = 0; i < rank; ++i) dims[i] = get_u32(bytes.data() + 6 + 4 * i);
  validate_shape(dims);
  const std::size_t n = shape_size(dims);
  const std::size_t header = 6 + 4 * rank;
  if (bytes.size() - header < 4 * n) {
    fail(ErrorCode::TruncatedPayload, "payload holds " + std::to_string(bytes.size() - header) + " bytes, need " +
                                          std::to_string(4 * n));
  }
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
  return Tensor(std::move(dims), std::move(data));
}

void tensor_save(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = tensor_encode(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Tensor tensor_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return tensor_decode(bytes);
}

}  // namespace tcdc
