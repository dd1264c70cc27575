#pragma once

#include <complex>

#include <Eigen/Core>

namespace sarsfe {

using ComplexImage =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unnormalized 2D DFT (forward: exp(-i...), inverse: exp(+i...)), any size.
ComplexImage fft2(const ComplexImage& in, bool inverse = false);

/// Keeps the centred mh x mw block of a spectrum in natural (unshifted) order:
/// out[f mod mh] = in[f mod h] for f in [-floor(mh/2), mh - floor(mh/2)).
ComplexImage crop_centered_spectrum(const ComplexImage& spectrum, Eigen::Index mh, Eigen::Index mw);

}  // namespace sarsfe
