#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

namespace anderson::detail {

/// FFTW planning is not thread-safe; every planner call holds this lock.
std::mutex& planner_mutex();

/// Real-to-half-complex transforms on a d-dimensional periodic grid with M points
/// per axis. Half spectra have shape (M, ..., M, M/2 + 1).
///
/// forward() is normalized by M^-d; inverse() is plain synthesis sum_k c_k e^{ikx}.
/// Instances are cached per shape and safe to use from several threads.
class RealFft {
 public:
  static std::shared_ptr<const RealFft> get(int dimension, int points);

  RealFft(int dimension, int points);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int dimension() const noexcept { return d_; }
  int points() const noexcept { return m_; }
  std::size_t real_size() const noexcept { return real_size_; }
  std::size_t half_size() const noexcept { return half_size_; }

  void forward(const double* in, std::complex<double>* out_half) const;
  void inverse(const std::complex<double>* in_half, double* out) const;

  /// Per half-index frequency components, |k|^2, and Nyquist flag.
  const std::vector<double>& k(int axis) const noexcept { return k_[axis]; }
  const std::vector<int>& k_int(int axis) const noexcept { return ki_[axis]; }
  const std::vector<double>& norm_sq() const noexcept { return k2_; }
  const std::vector<unsigned char>& nyquist() const noexcept { return nyq_; }
  /// Flat index of the same frequency in the full (M^d) layout.
  const std::vector<std::size_t>& full_index() const noexcept { return full_; }

  void zero_nyquist(std::complex<double>* half) const noexcept;

 private:
  int d_;
  int m_;
  std::size_t real_size_;
  std::size_t half_size_;
  void* plan_r2c_;
  void* plan_c2r_;
  std::array<std::vector<double>, 3> k_;
  std::array<std::vector<int>, 3> ki_;
  std::vector<double> k2_;
  std::vector<unsigned char> nyq_;
  std::vector<std::size_t> full_;
};

}  // namespace anderson::detail
