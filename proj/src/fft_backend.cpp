#include "fft_backend.hpp"

#include <fftw3.h>

#include <cstdint>
#include <cstring>
#include <map>
#include <mutex>
#include <utility>

#include "anderson/aligned.hpp"

namespace anderson::detail {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

bool aligned(const void* p) { return reinterpret_cast<std::uintptr_t>(p) % kAlignment == 0; }

template <class V>
typename V::value_type* scratch(V& v, std::size_t n) {
  if (v.size() < n) v.resize(n);
  return v.data();
}

}  // namespace

std::shared_ptr<const RealFft> RealFft::get(int dimension, int points) {
  static std::mutex cache_mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const RealFft>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_pair(dimension, points);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto fft = std::make_shared<const RealFft>(dimension, points);
  cache.emplace(key, fft);
  return fft;
}

RealFft::RealFft(int dimension, int points) : d_(dimension), m_(points) {
  real_size_ = 1;
  for (int j = 0; j < d_; ++j) real_size_ *= static_cast<std::size_t>(m_);
  const std::size_t last = static_cast<std::size_t>(m_ / 2 + 1);
  half_size_ = real_size_ / static_cast<std::size_t>(m_) * last;

  int dims[3] = {m_, m_, m_};
  RealVector in(real_size_);
  ComplexVector out(half_size_);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_r2c_ = fftw_plan_dft_r2c(d_, dims, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    plan_c2r_ = fftw_plan_dft_c2r(d_, dims, reinterpret_cast<fftw_complex*>(out.data()), in.data(),
                                  FFTW_ESTIMATE);
  }

  for (auto& v : k_) v.assign(half_size_, 0.0);
  for (auto& v : ki_) v.assign(half_size_, 0);
  k2_.assign(half_size_, 0.0);
  nyq_.assign(half_size_, 0);
  full_.assign(half_size_, 0);
  for (std::size_t h = 0; h < half_size_; ++h) {
    std::size_t rest = h;
    std::size_t full = 0;
    std::size_t stride_full = 1;
    int k2 = 0;
    bool nyq = false;
    int idx[3] = {0, 0, 0};
    idx[d_ - 1] = static_cast<int>(rest % last);
    rest /= last;
    for (int j = d_ - 2; j >= 0; --j) {
      idx[j] = static_cast<int>(rest % static_cast<std::size_t>(m_));
      rest /= static_cast<std::size_t>(m_);
    }
    for (int j = d_ - 1; j >= 0; --j) {
      int kj = idx[j] < m_ / 2 ? idx[j] : idx[j] - m_;
      if (idx[j] == m_ / 2) nyq = true;
      k_[j][h] = kj;
      ki_[j][h] = kj;
      k2 += kj * kj;
      full += static_cast<std::size_t>(idx[j]) * stride_full;
      stride_full *= static_cast<std::size_t>(m_);
    }
    k2_[h] = k2;
    nyq_[h] = nyq ? 1 : 0;
    full_[h] = full;
  }
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
}

void RealFft::forward(const double* in, std::complex<double>* out_half) const {
  thread_local RealVector in_buf;
  thread_local ComplexVector out_buf;
  // FFTW may read the input of r2c only, but new-array execution requires alignment
  // identical to the planning arrays.
  double* src = const_cast<double*>(in);
  if (!aligned(in)) {
    src = scratch(in_buf, real_size_);
    std::memcpy(src, in, real_size_ * sizeof(double));
  }
  std::complex<double>* dst = aligned(out_half) ? out_half : scratch(out_buf, half_size_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_r2c_), src, reinterpret_cast<fftw_complex*>(dst));
  const double scale = 1.0 / static_cast<double>(real_size_);
  for (std::size_t h = 0; h < half_size_; ++h) dst[h] *= scale;
  if (dst != out_half) std::memcpy(out_half, dst, half_size_ * sizeof(std::complex<double>));
}

void RealFft::inverse(const std::complex<double>* in_half, double* out) const {
  thread_local ComplexVector in_buf;
  thread_local RealVector out_buf;
  std::complex<double>* src = scratch(in_buf, half_size_);
  std::memcpy(src, in_half, half_size_ * sizeof(std::complex<double>));
  double* dst = aligned(out) ? out : scratch(out_buf, real_size_);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_c2r_), reinterpret_cast<fftw_complex*>(src), dst);
  if (dst != out) std::memcpy(out, dst, real_size_ * sizeof(double));
}

void RealFft::zero_nyquist(std::complex<double>* half) const noexcept {
  for (std::size_t h = 0; h < half_size_; ++h)
    if (nyq_[h]) half[h] = 0.0;
}

}  // namespace anderson::detail
