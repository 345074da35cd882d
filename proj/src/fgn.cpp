#include "zsq/fgn.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "zsq/error.hpp"
#include "zsq/rng.hpp"

namespace zsq {

HurstIndex::HurstIndex(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "Hurst index must lie in (0,1), got " + std::to_string(value));
  }
}

void FgnSpec::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorKind::InvalidArgument, "fGN step must be positive");
  }
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "fGN count must be >= 1");
  if (dims < 1) throw Error(ErrorKind::InvalidArgument, "fGN dims must be >= 1");
}

double fgn_autocovariance(HurstIndex h, std::size_t lag, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  const double two_h = 2.0 * h.value();
  const double k = static_cast<double>(lag);
  const double unit = 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                             std::pow(std::abs(k - 1.0), two_h));
  return unit * std::pow(step, two_h);
}

double fbm_covariance(HurstIndex h, double s, double t) {
  if (s < 0.0 || t < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "fBm covariance needs s, t >= 0");
  }
  const double two_h = 2.0 * h.value();
  return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) - std::pow(std::abs(t - s), two_h));
}

namespace {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

// FFTW's planner is not thread-safe; execution with the new-array interface
// is. Plans are created once per size and kept for the process lifetime.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan r2c(std::size_t size) { return get(size, true); }
  fftw_plan c2r(std::size_t size) { return get(size, false); }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t size, bool forward) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(size, forward);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto real = fftw_buffer<double>(size);
    auto cplx = fftw_buffer<fftw_complex>(size / 2 + 1);
    const int n = static_cast<int>(size);
    fftw_plan plan = forward
                         ? fftw_plan_dft_r2c_1d(n, real.get(), cplx.get(), FFTW_ESTIMATE)
                         : fftw_plan_dft_c2r_1d(n, cplx.get(), real.get(), FFTW_ESTIMATE);
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, bool>, fftw_plan> plans_;
};

// Square roots of the scaled embedding eigenvalues sqrt(lambda_k / M) for
// k = 0..M/2, for the unit-step fGN of a given H and half-length.
struct Embedding {
  std::vector<double> scale;
  bool psd = true;
};

class EmbeddingCache {
 public:
  static EmbeddingCache& instance() {
    static EmbeddingCache cache;
    return cache;
  }

  std::shared_ptr<const Embedding> get(double h, std::size_t half) {
    const auto key = std::make_pair(h, half);
    {
      std::lock_guard lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto built = std::make_shared<const Embedding>(build(h, half));
    std::lock_guard lock(mutex_);
    if (entries_.size() >= kCapacity) entries_.clear();
    entries_.emplace(key, built);
    return built;
  }

 private:
  static constexpr std::size_t kCapacity = 64;

  static Embedding build(double h, std::size_t half) {
    const HurstIndex hurst(h);
    Eigen::VectorXd gamma(static_cast<Eigen::Index>(half + 1));
    for (std::size_t k = 0; k <= half; ++k) {
      gamma(static_cast<Eigen::Index>(k)) = fgn_autocovariance(hurst, k, 1.0);
    }
    const Eigen::VectorXd lambda = fgn_detail::circulant_eigenvalues(gamma);
    const double m = static_cast<double>(2 * half);
    const double max_lambda = lambda.maxCoeff();
    Embedding e;
    e.scale.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
      double l = lambda(static_cast<Eigen::Index>(k));
      if (l < -fgn_detail::kNegativeEigenTolerance * max_lambda) e.psd = false;
      l = std::max(l, 0.0);
      e.scale[k] = std::sqrt(l / m);
    }
    return e;
  }

  std::mutex mutex_;
  std::map<std::pair<double, std::size_t>, std::shared_ptr<const Embedding>> entries_;
};

}  // namespace

namespace fgn_detail {

Eigen::VectorXd circulant_eigenvalues(const Eigen::VectorXd& autocovariance) {
  // First row of the circulant: c_0..c_L, c_{L-1}..c_1, length M = 2L.
  const auto half = static_cast<std::size_t>(autocovariance.size()) - 1;
  if (half < 1) {
    throw Error(ErrorKind::InvalidArgument, "circulant embedding needs at least two lags");
  }
  const std::size_t m = 2 * half;
  auto row = fftw_buffer<double>(m);
  auto spec = fftw_buffer<fftw_complex>(half + 1);
  for (std::size_t k = 0; k <= half; ++k) row[k] = autocovariance(static_cast<Eigen::Index>(k));
  for (std::size_t k = 1; k < half; ++k) row[m - k] = autocovariance(static_cast<Eigen::Index>(k));
  fftw_execute_dft_r2c(PlanCache::instance().r2c(m), row.get(), spec.get());
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(half + 1));
  for (std::size_t k = 0; k <= half; ++k) lambda(static_cast<Eigen::Index>(k)) = spec[k][0];
  return lambda;
}

void sample_circulant(HurstIndex h, double step, std::uint64_t stream_seed,
                      Eigen::Ref<Eigen::RowVectorXd> out) {
  const auto count = static_cast<std::size_t>(out.size());
  const std::size_t half = std::bit_ceil(std::max<std::size_t>(count, 2));
  const std::size_t m = 2 * half;
  const auto embedding = EmbeddingCache::instance().get(h.value(), half);
  if (!embedding->psd) {
    throw Error(ErrorKind::CirculantNotPSD,
                "negative eigenvalue in circulant embedding of size " + std::to_string(m));
  }

  RandomStream rng(stream_seed);
  auto w = fftw_buffer<fftw_complex>(half + 1);
  const auto& s = embedding->scale;
  w[0][0] = s[0] * rng.normal();
  w[0][1] = 0.0;
  for (std::size_t k = 1; k < half; ++k) {
    const double a = rng.normal();
    const double b = rng.normal();
    w[k][0] = s[k] * a * M_SQRT1_2;
    w[k][1] = s[k] * b * M_SQRT1_2;
  }
  w[half][0] = s[half] * rng.normal();
  w[half][1] = 0.0;

  auto x = fftw_buffer<double>(m);
  fftw_execute_dft_c2r(PlanCache::instance().c2r(m), w.get(), x.get());
  const double scale = std::pow(step, h.value());
  for (std::size_t i = 0; i < count; ++i) out(static_cast<Eigen::Index>(i)) = scale * x[i];
}

void sample_cholesky(HurstIndex h, double step, std::uint64_t stream_seed,
                     Eigen::Ref<Eigen::RowVectorXd> out) {
  const Eigen::Index n = out.size();
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double c = fgn_autocovariance(h, static_cast<std::size_t>(i - j), 1.0);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidArgument, "fGN covariance is not positive definite");
  }
  RandomStream rng(stream_seed);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  const double scale = std::pow(step, h.value());
  const Eigen::VectorXd lz = llt.matrixL() * z;
  out = (scale * lz).transpose();
}

}  // namespace fgn_detail

IncrementMatrix sample_fgn(const FgnSpec& spec) {
  spec.validate();
  IncrementMatrix result(static_cast<Eigen::Index>(spec.dims), static_cast<Eigen::Index>(spec.count));
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(spec.count));
  for (std::size_t j = 0; j < spec.dims; ++j) {
    const std::uint64_t stream_seed = hash64({spec.seed, j});
    bool done = false;
    if (spec.count >= fgn_detail::kMinCirculantCount) {
      try {
        fgn_detail::sample_circulant(spec.h, spec.step, stream_seed, row);
        done = true;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::CirculantNotPSD) throw;
      }
    }
    if (!done) fgn_detail::sample_cholesky(spec.h, spec.step, stream_seed, row);
    result.row(static_cast<Eigen::Index>(j)) = row;
  }
  return result;
}

Eigen::MatrixXd cumulate(const IncrementMatrix& increments) {
  Eigen::MatrixXd path = Eigen::MatrixXd::Zero(increments.rows(), increments.cols() + 1);
  for (Eigen::Index j = 0; j < increments.rows(); ++j) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < increments.cols(); ++k) {
      acc += increments(j, k);
      path(j, k + 1) = acc;
    }
  }
  return path;
}

IncrementMatrix difference(const Eigen::MatrixXd& path) {
  if (path.cols() == 0) return IncrementMatrix(path.rows(), 0);
  IncrementMatrix inc(path.rows(), path.cols() - 1);
  for (Eigen::Index k = 0; k + 1 < path.cols(); ++k) inc.col(k) = path.col(k + 1) - path.col(k);
  return inc;
}

}  // namespace zsq
