#include "sarsfe/fft.hpp"

#include <mutex>

#include <fftw3.h>

#include "sarsfe/error.hpp"

namespace sarsfe {
namespace {

// FFTW planning is not thread-safe; execution with a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

ComplexImage fft2(const ComplexImage& in, bool inverse) {
  if (in.size() == 0) throw Error(ErrorKind::Parameter, "fft2 of an empty image");
  ComplexImage src = in;
  ComplexImage out(in.rows(), in.cols());
  auto* src_ptr = reinterpret_cast<fftw_complex*>(src.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(in.rows()), static_cast<int>(in.cols()), src_ptr, out_ptr,
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw Error(ErrorKind::Numerical, "FFTW failed to create a plan");
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

ComplexImage crop_centered_spectrum(const ComplexImage& spectrum, Eigen::Index mh, Eigen::Index mw) {
  const Eigen::Index h = spectrum.rows();
  const Eigen::Index w = spectrum.cols();
  if (mh < 1 || mw < 1 || mh > h || mw > w) {
    throw Error(ErrorKind::Parameter, "spectral crop must fit inside the spectrum");
  }
  auto wrap = [](Eigen::Index f, Eigen::Index n) { return ((f % n) + n) % n; };
  ComplexImage out(mh, mw);
  for (Eigen::Index a = 0; a < mh; ++a) {
    const Eigen::Index fr = a - mh / 2;
    for (Eigen::Index b = 0; b < mw; ++b) {
      const Eigen::Index fc = b - mw / 2;
      out(wrap(fr, mh), wrap(fc, mw)) = spectrum(wrap(fr, h), wrap(fc, w));
    }
  }
  return out;
}

}  // namespace sarsfe
