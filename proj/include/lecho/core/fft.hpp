#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "lecho/core/error.hpp"

namespace lecho {

/// FFTW's planner is not re-entrant; plan creation and destruction are
/// serialized here while execution through the new-array API is thread safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// In-place complex transforms of a fixed shape (row-major, up to any rank).
/// Forward is e^{-ikx}, backward e^{+ikx}; neither is normalized.
class FftPlan {
 public:
  explicit FftPlan(std::vector<int> shape) : shape_(std::move(shape)) {
    size_ = 1;
    for (int n : shape_) {
      if (n <= 0) throw Error(Errc::invalid_argument, "FftPlan: non-positive dimension");
      size_ *= static_cast<std::size_t>(n);
    }
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    auto* scratch = fftw_alloc_complex(size_);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int rank = static_cast<int>(shape_.size());
    forward_ = fftw_plan_dft(rank, shape_.data(), scratch, scratch, FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft(rank, shape_.data(), scratch, scratch, FFTW_BACKWARD, flags);
    fftw_free(scratch);
  }

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  ~FftPlan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  std::size_t size() const { return size_; }

  void forward(std::span<std::complex<double>> data) const { execute(forward_, data); }
  void backward(std::span<std::complex<double>> data) const { execute(backward_, data); }

 private:
  void execute(fftw_plan plan, std::span<std::complex<double>> data) const {
    if (data.size() != size_) throw Error(Errc::invalid_argument, "FftPlan: size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  std::vector<int> shape_;
  std::size_t size_ = 0;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace lecho
