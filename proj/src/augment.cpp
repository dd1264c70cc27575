#include "sarsfe/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sarsfe/error.hpp"
#include "sarsfe/fft.hpp"

namespace sarsfe {

void AugmentConfig::validate() const {
  if (global_crop < 1 || local_crop < 1) throw Error(ErrorKind::Parameter, "crop sizes must be >= 1");
  if (local_crop > global_crop) throw Error(ErrorKind::Parameter, "local_crop must not exceed global_crop");
  if (!(subband_fraction > 0.0f && subband_fraction <= 1.0f)) {
    throw Error(ErrorKind::Parameter, "subband_fraction must be in (0, 1]");
  }
  if (!(subband_probability >= 0.0f && subband_probability <= 1.0f)) {
    throw Error(ErrorKind::Parameter, "subband_probability must be in [0, 1]");
  }
  if (!(mask_ratio >= 0.0f && mask_ratio < 1.0f)) throw Error(ErrorKind::Parameter, "mask_ratio must be in [0, 1)");
  if (!(mean_shift_range >= 0.0f && mean_shift_range <= 0.5f)) {
    throw Error(ErrorKind::Parameter, "mean_shift_range must be in [0, 0.5]");
  }
  if (despeckle_looks < 1) throw Error(ErrorKind::Parameter, "despeckle_looks must be >= 1");
}

ImageF reflect_window(const ImageF& img, Eigen::Index top, Eigen::Index left, Eigen::Index rows,
                      Eigen::Index cols) {
  ImageF out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index r = reflect_index(top + i, img.rows());
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = img(r, reflect_index(left + j, img.cols()));
  }
  return out;
}

namespace {

// Top-left corner of a random window in original-image coordinates (may be negative when
// the axis is padded). Draws the row offset, then the column offset.
std::pair<Eigen::Index, Eigen::Index> draw_window(Eigen::Index rows, Eigen::Index cols,
                                                  Eigen::Index size, Rng& rng,
                                                  std::pair<Eigen::Index, Eigen::Index>* corner) {
  auto axis = [&](Eigen::Index n) {
    const Eigen::Index padded = std::max(n, size);
    const Eigen::Index pad_before = (padded - n) / 2;
    const auto offset = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(padded - size + 1)));
    return std::pair{offset, offset - pad_before};
  };
  const auto [pr, top] = axis(rows);
  const auto [pc, left] = axis(cols);
  if (corner != nullptr) *corner = {pr, pc};
  return {top, left};
}

void check_rho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorKind::Parameter, "subband fraction must be in (0, 1]");
}

ComplexImage subband_complex(const ComplexImage& x, double rho) {
  const Eigen::Index h = x.rows();
  const Eigen::Index w = x.cols();
  const auto mh = static_cast<Eigen::Index>(std::ceil(rho * static_cast<double>(h)));
  const auto mw = static_cast<Eigen::Index>(std::ceil(rho * static_cast<double>(w)));
  const ComplexImage kept = crop_centered_spectrum(fft2(x), std::max<Eigen::Index>(mh, 1),
                                                   std::max<Eigen::Index>(mw, 1));
  // Inverse over the kept size divides by mh*mw; the (mh/h)(mw/w) level compensation
  // folds that into a single 1/(h*w).
  ComplexImage y = fft2(kept, /*inverse=*/true);
  y /= static_cast<double>(h * w);
  return y;
}

}  // namespace

AmplitudeImage crop(const AmplitudeImage& img, std::uint32_t size, Rng& rng,
                    std::pair<Eigen::Index, Eigen::Index>* corner) {
  if (size < 1) throw Error(ErrorKind::Parameter, "crop size must be >= 1");
  const auto [top, left] = draw_window(img.rows(), img.cols(), size, rng, corner);
  return {reflect_window(img.data, top, left, size, size), img.meta};
}

SlcImage crop(const SlcImage& img, std::uint32_t size, Rng& rng,
              std::pair<Eigen::Index, Eigen::Index>* corner) {
  if (size < 1) throw Error(ErrorKind::Parameter, "crop size must be >= 1");
  const auto [top, left] = draw_window(img.rows(), img.cols(), size, rng, corner);
  return {reflect_window(img.real, top, left, size, size), reflect_window(img.imag, top, left, size, size),
          img.meta};
}

AmplitudeImage subband_subsample(const AmplitudeImage& img, double rho) {
  check_rho(rho);
  const ComplexImage y = subband_complex(img.data.cast<std::complex<double>>(), rho);
  AmplitudeImage out{ImageF(y.rows(), y.cols()), img.meta};
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      out.data(i, j) = static_cast<float>(std::clamp(std::abs(y(i, j)), 0.0, 1.0));
    }
  }
  return out;
}

SlcImage subband_subsample(const SlcImage& img, double rho) {
  check_rho(rho);
  ComplexImage x(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = {img.real(i, j), img.imag(i, j)};
  }
  const ComplexImage y = subband_complex(x, rho);
  SlcImage out{ImageF(y.rows(), y.cols()), ImageF(y.rows(), y.cols()), img.meta};
  out.real = y.real().cast<float>();
  out.imag = y.imag().cast<float>();
  return out;
}

PatchMask patch_mask(std::uint32_t count, float ratio, Rng& rng) {
  if (count < 1) throw Error(ErrorKind::Parameter, "patch mask needs at least one patch");
  if (!(ratio >= 0.0f && ratio < 1.0f)) throw Error(ErrorKind::Parameter, "mask ratio must be in [0, 1)");
  const auto masked = static_cast<std::uint32_t>(std::floor(static_cast<double>(ratio) * count));
  std::vector<std::uint32_t> order(count);
  for (std::uint32_t i = 0; i < count; ++i) order[i] = i;
  // Partial Fisher-Yates: the first `masked` slots are a uniform sample.
  for (std::uint32_t i = 0; i < masked; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.uniform_int(count - i));
    std::swap(order[i], order[j]);
  }
  PatchMask mask(count, false);
  for (std::uint32_t i = 0; i < masked; ++i) mask[order[i]] = true;
  return mask;
}

AmplitudeImage mean_shift_by(const AmplitudeImage& img, float delta) {
  return {(img.data.array() + delta).cwiseMax(0.0f).cwiseMin(1.0f).matrix(), img.meta};
}

AmplitudeImage mean_shift(const AmplitudeImage& img, float max_delta, Rng& rng, float* drawn) {
  if (!(max_delta >= 0.0f && max_delta <= 0.5f)) throw Error(ErrorKind::Parameter, "mean shift range must be in [0, 0.5]");
  const auto delta = static_cast<float>(rng.uniform(-max_delta, max_delta));
  if (drawn != nullptr) *drawn = delta;
  return mean_shift_by(img, delta);
}

ViewSet make_views(const SlcImage& img, const AugmentConfig& cfg, Rng& rng, std::uint32_t patch_size) {
  cfg.validate();
  if (patch_size < 1) throw Error(ErrorKind::Parameter, "patch size must be >= 1");
  img.validate();

  ViewSet views;
  std::pair<Eigen::Index, Eigen::Index> at;
  {
    const MultilookDespeckler despeckler(cfg.despeckle_looks);
    views.teacher_view = crop(despeckler.despeckle(img), cfg.global_crop, rng, &at);
    std::ostringstream p;
    p << "teacher: " << despeckler.describe() << " crop(" << cfg.global_crop << "@" << at.first << ","
      << at.second << ")";
    views.provenance.push_back(p.str());
  }

  const bool slc_domain = cfg.subband_domain == SubbandDomain::Slc;
  std::optional<AmplitudeImage> normalized;
  if (!slc_domain) normalized = log_normalize(img);

  const std::uint32_t n_views = 1 + cfg.n_local;
  for (std::uint32_t v = 0; v < n_views; ++v) {
    const std::uint32_t size = v == 0 ? cfg.global_crop : cfg.local_crop;
    std::ostringstream p;
    p << "student[" << v << "]: " << (v == 0 ? "global" : "local") << " crop(" << size;

    AmplitudeImage view;
    const bool subband = rng.uniform() < cfg.subband_probability;
    if (slc_domain) {
      SlcImage window = crop(img, size, rng, &at);
      p << "@" << at.first << "," << at.second << ")";
      if (subband) {
        window = subband_subsample(window, cfg.subband_fraction);
        p << " subband_slc(" << cfg.subband_fraction << ")";
      }
      view = log_normalize(window);
    } else {
      view = crop(*normalized, size, rng, &at);
      p << "@" << at.first << "," << at.second << ")";
      if (subband) {
        view = subband_subsample(view, cfg.subband_fraction);
        p << " subband(" << cfg.subband_fraction << ")";
      }
    }
    float delta = 0.0f;
    view = mean_shift(view, cfg.mean_shift_range, rng, &delta);
    p << " shift(" << delta << ")";

    const auto grid = (view.rows() / patch_size) * (view.cols() / patch_size);
    if (grid < 1) {
      throw Error(ErrorKind::Size, "student view " + std::to_string(view.rows()) + "x" +
                                       std::to_string(view.cols()) + " is smaller than one patch");
    }
    views.student_patch_masks.emplace_back(patch_mask(static_cast<std::uint32_t>(grid), cfg.mask_ratio, rng));
    views.student_views.push_back(std::move(view));
    views.provenance.push_back(p.str());
  }
  return views;
}

}  // namespace sarsfe
