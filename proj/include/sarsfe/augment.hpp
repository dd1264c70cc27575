#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sarsfe/rng.hpp"
#include "sarsfe/sar_data.hpp"

namespace sarsfe {

/// Which signal the spectral crop sees: the normalized amplitude, or the complex SLC
/// before normalization.
enum class SubbandDomain { Amplitude, Slc };

struct AugmentConfig {
  std::uint32_t global_crop = 64;
  std::uint32_t local_crop = 32;
  std::uint32_t n_local = 3;
  float subband_fraction = 0.5f;     // rho
  float subband_probability = 0.5f;  // per student view
  SubbandDomain subband_domain = SubbandDomain::Amplitude;
  float mask_ratio = 0.5f;
  float mean_shift_range = 0.2f;     // delta_max
  std::uint32_t despeckle_looks = 3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// true = patch removed from the token sequence.
using PatchMask = std::vector<bool>;

struct ViewSet {
  AmplitudeImage teacher_view;
  std::vector<AmplitudeImage> student_views;  // [global, local...]
  std::vector<std::optional<PatchMask>> student_patch_masks;
  std::vector<std::string> provenance;        // teacher first, then one per student view
};

/// Copies `rows x cols` pixels starting at (top, left), reading through reflect_index.
ImageF reflect_window(const ImageF& img, Eigen::Index top, Eigen::Index left, Eigen::Index rows,
                      Eigen::Index cols);

/// Random size x size window, reflect-padding axes shorter than `size` (centred).
/// The chosen corner, in padded coordinates, is written to `corner` when non-null.
AmplitudeImage crop(const AmplitudeImage& img, std::uint32_t size, Rng& rng,
                    std::pair<Eigen::Index, Eigen::Index>* corner = nullptr);
SlcImage crop(const SlcImage& img, std::uint32_t size, Rng& rng,
              std::pair<Eigen::Index, Eigen::Index>* corner = nullptr);

/// Keeps the centred ceil(rho*h) x ceil(rho*w) block of the spectrum and returns the
/// magnitude of its inverse transform, rescaled so flat images keep their level and
/// clipped to [0, 1].
AmplitudeImage subband_subsample(const AmplitudeImage& img, double rho);
/// Complex variant operating on the SLC spectrum; no magnitude, no clipping.
SlcImage subband_subsample(const SlcImage& img, double rho);

/// Exactly floor(ratio * count) entries set, uniformly without replacement.
PatchMask patch_mask(std::uint32_t count, float ratio, Rng& rng);

AmplitudeImage mean_shift_by(const AmplitudeImage& img, float delta);
/// Adds one delta ~ U(-max_delta, max_delta) to every pixel, clipped to [0, 1].
AmplitudeImage mean_shift(const AmplitudeImage& img, float max_delta, Rng& rng, float* drawn = nullptr);

/// Teacher: despeckle -> global crop. Students: normalize -> crop (1 global + n_local
/// local) -> subband with probability subband_probability -> mean shift, each with a
/// patch mask sized for `patch_size`.
ViewSet make_views(const SlcImage& img, const AugmentConfig& cfg, Rng& rng,
                   std::uint32_t patch_size = 8);

}  // namespace sarsfe
