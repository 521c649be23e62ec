#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ocksr/errors.hpp"
#include "ocksr/model.hpp"

// Layout (all integers and reals little-endian):
//   "OCKSR1"            6 bytes magic
//   u32 family          0 = RBF
//   f64 sigma, f64 delta
//   u64 n, u64 n_neg, u64 d
//   f64 x_train[n*d]    row-major
//   f64 alpha[n]
//   u8  has_tau, f64 tau

namespace ocksr {

namespace {

constexpr char kMagic[] = {'O', 'C', 'K', 'S', 'R', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::span<const unsigned char> raw(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("model file is truncated");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_model(const Model& model) {
  if (model.target_mean != 1.0) throw DataError("only models with unit target mean can be saved");
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(model.spec.family));
  w.f64(model.spec.sigma);
  w.f64(model.spec.delta);
  w.u64(model.size());
  w.u64(model.n_neg);
  w.u64(model.dim());
  for (Eigen::Index r = 0; r < model.x_train.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.x_train.cols(); ++c) w.f64(model.x_train(r, c));
  }
  for (Eigen::Index i = 0; i < model.alpha.size(); ++i) w.f64(model.alpha(i));
  w.u8(model.tau.has_value() ? 1 : 0);
  w.f64(model.tau.value_or(0.0));
  return w.take();
}

Model decode_model(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  auto magic = r.raw(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not an OCKSR1 model file");
  }
  Model m;
  const std::uint32_t family = r.u32();
  if (family != static_cast<std::uint32_t>(KernelFamily::Rbf)) {
    throw DataError("unknown kernel family " + std::to_string(family));
  }
  m.spec.family = KernelFamily::Rbf;
  m.spec.sigma = r.f64();
  m.spec.delta = r.f64();
  m.spec.validate();
  const std::uint64_t n = r.u64();
  const std::uint64_t n_neg = r.u64();
  const std::uint64_t d = r.u64();
  if (n == 0 || d == 0 || n_neg >= n) throw DataError("model header is inconsistent");
  // n*d + n + 1 doubles and one byte must follow; reject before allocating.
  if (n > r.remaining() / 8 || d > r.remaining() / 8 / n || (n * d + n) * 8 + 9 != r.remaining()) {
    throw DataError("model file size does not match its header");
  }
  m.n_neg = n_neg;
  m.x_train.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.x_train.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.x_train.cols(); ++c) m.x_train(i, c) = r.f64();
  }
  m.alpha.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.alpha.size(); ++i) m.alpha(i) = r.f64();
  const bool has_tau = r.u8() != 0;
  const double tau = r.f64();
  if (has_tau) m.tau = tau;
  if (!m.x_train.allFinite() || !m.alpha.allFinite()) throw DataError("model contains non-finite values");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

}  // namespace ocksr
