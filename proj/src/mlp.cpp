#include "ldr/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "ldr/errors.hpp"

namespace ldr {

namespace {

constexpr char kMagic[8] = {'L', 'D', 'R', 'M', 'L', 'P', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

Mlp::Mlp(std::size_t d, std::size_t h, std::size_t K) : d_(d), h_(h == 0 ? std::min(d, K) : h), K_(K) {
  if (d == 0 || K == 0) throw DomainError("Mlp: empty input or output layer");
  params_.assign(h_ * d_ + h_ + K_ * h_ + K_, 0.0);
}

Mlp Mlp::kaiming(std::size_t d, std::size_t h, std::size_t K, std::uint64_t seed) {
  Mlp m(d, h, K);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> first(-std::sqrt(6.0 / static_cast<double>(m.d_)),
                                               std::sqrt(6.0 / static_cast<double>(m.d_)));
  std::uniform_real_distribution<double> second(-std::sqrt(6.0 / static_cast<double>(m.h_)),
                                                std::sqrt(6.0 / static_cast<double>(m.h_)));
  for (std::size_t i = m.w1(); i < m.b1(); ++i) m.params_[i] = first(rng);
  for (std::size_t i = m.w2(); i < m.b2(); ++i) m.params_[i] = second(rng);
  return m;
}

bool normalize_logits(std::span<const double> f, std::span<double> g, double& l1) {
  l1 = 0.0;
  for (double v : f) l1 += std::abs(v);
  const bool scaled = l1 > kNormEpsilon;
  const double s = scaled ? static_cast<double>(f.size()) / l1 : 1.0;
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] * s;
  return scaled;
}

void forward(const Mlp& model, std::span<const double> x, bool normalize, ForwardCache& cache) {
  const std::size_t d = model.d(), h = model.h(), K = model.K();
  const double* p = model.params().data();
  cache.hidden.resize(h);
  cache.logits.resize(K);
  cache.normalized.resize(K);
  for (std::size_t j = 0; j < h; ++j) {
    const double* w = p + model.w1() + j * d;
    double a = p[model.b1() + j];
    for (std::size_t i = 0; i < d; ++i) a += w[i] * x[i];
    cache.hidden[j] = a > 0.0 || std::isnan(a) ? a : 0.0;  // NaN must reach the loss
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double* w = p + model.w2() + k * h;
    double a = p[model.b2() + k];
    for (std::size_t j = 0; j < h; ++j) a += w[j] * cache.hidden[j];
    cache.logits[k] = a;
  }
  if (normalize) {
    cache.scaled = normalize_logits(cache.logits, cache.normalized, cache.l1);
  } else {
    cache.normalized = cache.logits;
    cache.scaled = false;
    cache.l1 = 0.0;
  }
}

void normalization_backward(const ForwardCache& cache, std::span<const double> dL_dg, std::span<double> dL_df) {
  const std::size_t K = dL_dg.size();
  if (!cache.scaled) {
    std::copy(dL_dg.begin(), dL_dg.end(), dL_df.begin());
    return;
  }
  double gdot = 0.0;
  for (std::size_t i = 0; i < K; ++i) gdot += cache.normalized[i] * dL_dg[i];
  const double Kd = static_cast<double>(K);
  for (std::size_t j = 0; j < K; ++j) {
    const double f = cache.logits[j];
    const double sign = f > 0.0 ? 1.0 : (f < 0.0 ? -1.0 : 0.0);
    dL_df[j] = (Kd / cache.l1) * (dL_dg[j] - sign * gdot / Kd);
  }
}

void backward(const Mlp& model, std::span<const double> x, const ForwardCache& cache, std::span<const double> dL_dg,
              std::span<double> grad) {
  const std::size_t d = model.d(), h = model.h(), K = model.K();
  const double* p = model.params().data();
  double df_buf[64];
  RealVec df_heap;
  double* df = df_buf;
  if (K > 64) {
    df_heap.resize(K);
    df = df_heap.data();
  }
  normalization_backward(cache, dL_dg, std::span<double>(df, K));

  double* gw2 = grad.data() + model.w2();
  double* gb2 = grad.data() + model.b2();
  double* gw1 = grad.data() + model.w1();
  double* gb1 = grad.data() + model.b1();
  for (std::size_t k = 0; k < K; ++k) {
    gb2[k] += df[k];
    for (std::size_t j = 0; j < h; ++j) gw2[k * h + j] += df[k] * cache.hidden[j];
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (cache.hidden[j] <= 0.0) continue;
    double dh = 0.0;
    for (std::size_t k = 0; k < K; ++k) dh += p[model.w2() + k * h + j] * df[k];
    gb1[j] += dh;
    for (std::size_t i = 0; i < d; ++i) gw1[j * d + i] += dh * x[i];
  }
}

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, model.d());
  put_u64(out, model.h());
  put_u64(out, model.K());
  for (double v : model.params()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw ConfigError("short write to " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not a checkpoint: " + path.string());
  const std::uint64_t d = get_u64(in), h = get_u64(in), K = get_u64(in);
  if (d == 0 || h == 0 || K == 0 || d > (1u << 24) || h > (1u << 24) || K > (1u << 24))
    throw ConfigError("implausible checkpoint shape");
  Mlp model(d, h, K);
  for (double& v : model.params()) v = std::bit_cast<double>(get_u64(in));
  return model;
}

}  // namespace ldr
