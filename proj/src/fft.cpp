#include "nelson/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace nelson {

namespace {
// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

struct FftPlan::Impl {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

FftPlan::FftPlan(int dim, int points_per_axis) : impl_(std::make_unique<Impl>()) {
  std::vector<int> dims(static_cast<std::size_t>(dim), points_per_axis);
  size_ = 1;
  for (int d : dims) size_ *= static_cast<std::size_t>(d);

  std::lock_guard lock(planner_mutex());
  auto* scratch = fftw_alloc_complex(size_);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  impl_->fwd = fftw_plan_dft(dim, dims.data(), scratch, scratch, FFTW_FORWARD, flags);
  impl_->bwd = fftw_plan_dft(dim, dims.data(), scratch, scratch, FFTW_BACKWARD, flags);
  fftw_free(scratch);
  if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("FFTW planning failed");
}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
}

void FftPlan::forward(std::span<cplx> data) const {
  if (data.size() != size_) throw std::invalid_argument("FftPlan: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->fwd, p, p);
}

void FftPlan::backward(std::span<cplx> data) const {
  if (data.size() != size_) throw std::invalid_argument("FftPlan: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->bwd, p, p);
}

} // namespace nelson
