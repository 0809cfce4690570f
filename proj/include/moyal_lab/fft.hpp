#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "moyal_lab/errors.hpp"

namespace moyal::fft {

using Complex = std::complex<double>;

namespace detail {

// The FFTW planner is not re-entrant; execution on new arrays is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// ESTIMATE keeps plan selection (and so the rounding pattern) identical run to run.
inline constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

inline fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// Signed angular wavenumber of DFT bin m for n samples over a period `length`.
inline double wavenumber(std::size_t m, std::size_t n, double length) {
  const auto signed_m = m <= n / 2 ? static_cast<double>(m) : static_cast<double>(m) - static_cast<double>(n);
  return 2.0 * std::numbers::pi * signed_m / length;
}

inline bool is_nyquist(std::size_t m, std::size_t n) { return n % 2 == 0 && m == n / 2; }

enum class Along { rows_index, cols_index };

/// Batched real-to-complex transforms of a row-major rows x cols matrix along
/// one index. Along::cols_index transforms each row (output rows x (cols/2+1));
/// Along::rows_index transforms each column (output (rows/2+1) x cols).
/// Transforms are unnormalized.
class RealAxisFft {
 public:
  RealAxisFft(std::size_t rows, std::size_t cols, Along along) : rows_(rows), cols_(cols), along_(along) {
    const std::size_t n = along == Along::cols_index ? cols : rows;
    const std::size_t howmany = along == Along::cols_index ? rows : cols;
    const int stride = along == Along::cols_index ? 1 : static_cast<int>(cols);
    const int real_dist = along == Along::cols_index ? static_cast<int>(cols) : 1;
    const int half_dist = along == Along::cols_index ? static_cast<int>(n / 2 + 1) : 1;
    const int nn = static_cast<int>(n);

    std::vector<double> real(rows * cols);
    std::vector<Complex> spec(spectrum_size());
    std::lock_guard lock(detail::planner_mutex());
    forward_.reset(fftw_plan_many_dft_r2c(1, &nn, static_cast<int>(howmany), real.data(), nullptr, stride, real_dist,
                                          detail::as_fftw(spec.data()), nullptr, stride, half_dist, detail::kFlags));
    backward_.reset(fftw_plan_many_dft_c2r(1, &nn, static_cast<int>(howmany), detail::as_fftw(spec.data()), nullptr,
                                           stride, half_dist, real.data(), nullptr, stride, real_dist, detail::kFlags));
    if (!forward_ || !backward_) throw Error("FFTW planning failed");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t length() const noexcept { return along_ == Along::cols_index ? cols_ : rows_; }
  std::size_t half_rows() const noexcept { return along_ == Along::cols_index ? rows_ : rows_ / 2 + 1; }
  std::size_t half_cols() const noexcept { return along_ == Along::cols_index ? cols_ / 2 + 1 : cols_; }
  std::size_t spectrum_size() const noexcept { return half_rows() * half_cols(); }

  void forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(forward_.get(), const_cast<double*>(in), detail::as_fftw(out));
  }
  /// Destroys `in`.
  void backward(Complex* in, double* out) const { fftw_execute_dft_c2r(backward_.get(), detail::as_fftw(in), out); }

 private:
  std::size_t rows_, cols_;
  Along along_;
  detail::PlanHandle forward_;
  detail::PlanHandle backward_;
};

/// Unnormalized complex 1-D transform of length n.
class ComplexFft {
 public:
  explicit ComplexFft(std::size_t n) : n_(n) {
    std::vector<Complex> a(n), b(n);
    std::lock_guard lock(detail::planner_mutex());
    forward_.reset(fftw_plan_dft_1d(static_cast<int>(n), detail::as_fftw(a.data()), detail::as_fftw(b.data()),
                                    FFTW_FORWARD, detail::kFlags));
    backward_.reset(fftw_plan_dft_1d(static_cast<int>(n), detail::as_fftw(a.data()), detail::as_fftw(b.data()),
                                     FFTW_BACKWARD, detail::kFlags));
    if (!forward_ || !backward_) throw Error("FFTW planning failed");
  }

  std::size_t size() const noexcept { return n_; }

  void forward(const Complex* in, Complex* out) const {
    fftw_execute_dft(forward_.get(), detail::as_fftw(const_cast<Complex*>(in)), detail::as_fftw(out));
  }
  void backward(const Complex* in, Complex* out) const {
    fftw_execute_dft(backward_.get(), detail::as_fftw(const_cast<Complex*>(in)), detail::as_fftw(out));
  }

 private:
  std::size_t n_;
  detail::PlanHandle forward_;
  detail::PlanHandle backward_;
};

}  // namespace moyal::fft
