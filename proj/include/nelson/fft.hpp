#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace nelson {

using cplx = std::complex<double>;

/// Unnormalized d-dimensional complex FFT on a row-major periodic grid.
///
/// forward:  F[m] = sum_n f[n] exp(-2 pi i m.n / n_axis)
/// backward: f[n] = sum_m F[m] exp(+2 pi i m.n / n_axis)   (no 1/G factor)
///
/// Plans are created once (FFTW_ESTIMATE, unaligned) and are safe to execute
/// concurrently on distinct buffers.
class FftPlan {
public:
  FftPlan(int dim, int points_per_axis);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(std::span<cplx> data) const;
  void backward(std::span<cplx> data) const;

  [[nodiscard]] std::size_t size() const { return size_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t size_;
};

} // namespace nelson
