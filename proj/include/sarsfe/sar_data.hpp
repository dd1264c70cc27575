#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sarsfe {

using ImageF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SampleSource { Synthetic, Mstar, Raw };

const char* to_string(SampleSource source);
SampleSource parse_sample_source(const std::string& name);

struct SampleMeta {
  std::string id;
  std::optional<std::string> class_label;
  SampleSource source = SampleSource::Raw;
  std::optional<std::uint64_t> seed;
};

/// Single-look complex image, one channel.
struct SlcImage {
  ImageF real;
  ImageF imag;
  SampleMeta meta;

  Eigen::Index rows() const { return real.rows(); }
  Eigen::Index cols() const { return real.cols(); }

  /// Throws InvalidData on mismatched or empty planes and on non-finite entries.
  void validate() const;
  /// |z|^2 per pixel, accumulated in double.
  ImageD intensity() const;
};

/// Log-scaled amplitude with every entry in [0, 1].
struct AmplitudeImage {
  ImageF data;
  SampleMeta meta;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
};

inline constexpr double kLogEpsilon = 1e-10;

/// Per-image min-max of log(amplitude + 1e-10). A flat image maps to all zeros.
AmplitudeImage log_normalize(const SlcImage& img);
/// Same normalization applied to a precomputed amplitude plane.
AmplitudeImage log_normalize_amplitude(const ImageD& amplitude, SampleMeta meta);

/// Boxcar mean of intensity over looks x looks windows, stride 1, reflect-padded.
ImageD multilook_intensity(const SlcImage& img, std::uint32_t looks);
/// multilook_intensity -> sqrt -> log_normalize_amplitude.
AmplitudeImage multilook_despeckle(const SlcImage& img, std::uint32_t looks);

/// Removes speckle from an SLC image, producing the teacher-side amplitude.
class Despeckler {
 public:
  virtual ~Despeckler() = default;
  virtual AmplitudeImage despeckle(const SlcImage& img) const = 0;
  virtual std::string describe() const = 0;
};

class MultilookDespeckler final : public Despeckler {
 public:
  explicit MultilookDespeckler(std::uint32_t looks);
  AmplitudeImage despeckle(const SlcImage& img) const override;
  std::string describe() const override;

 private:
  std::uint32_t looks_;
};

/// Mirror index without repeating the edge sample (… c b | a b c d | c b …).
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n);

// --- synthetic speckled targets -------------------------------------------------

inline constexpr std::uint32_t kDefaultSyntheticClasses = 4;
inline constexpr std::uint32_t kMaxSyntheticClasses = 8;

struct Scatterer {
  double row_frac;
  double col_frac;
  double peak;  // reflectivity above the clutter floor at the scatterer centre
};

/// Scatterer layout of one synthetic class, positions as fractions of the image size.
std::span<const Scatterer> synthetic_constellation(std::uint32_t class_id);
std::string synthetic_class_name(std::uint32_t class_id);

inline constexpr double kClutterFloor = 1.0;

/// Expected intensity map sigma_c for a class.
ImageD reflectivity_map(std::uint32_t class_id, Eigen::Index rows, Eigen::Index cols,
                        std::uint32_t num_classes = kDefaultSyntheticClasses);

/// Fully developed speckle over reflectivity_map, keyed per pixel on (seed, class, row, col).
SlcImage generate_synthetic(std::uint32_t class_id, Eigen::Index rows, Eigen::Index cols,
                            std::uint64_t seed,
                            std::uint32_t num_classes = kDefaultSyntheticClasses);

struct SynthSpec {
  std::uint32_t classes = kDefaultSyntheticClasses;
  std::uint32_t per_class = 16;
  Eigen::Index rows = 64;
  Eigen::Index cols = 64;
  std::uint64_t seed = 0;
};

// --- file formats ----------------------------------------------------------------

inline constexpr const char* kMstarEndOfHeader = "[EndofPhoenixHeader]";

/// Parses an MSTAR Phoenix-format file held in memory.
SlcImage parse_mstar(std::span<const std::uint8_t> bytes);
SlcImage ingest_mstar(const std::filesystem::path& path);

/// Writes magnitude then phase blocks (big-endian f32) after a Phoenix-style header.
std::vector<std::uint8_t> encode_mstar(const SlcImage& img, const std::string& target_type,
                                       bool include_phase = true);
void write_mstar(const std::filesystem::path& path, const SlcImage& img,
                 const std::string& target_type, bool include_phase = true);
bool is_mstar_file(const std::filesystem::path& path);

/// Stores an SLC image as one SFET tensor of shape [2, rows, cols] (real plane, imag plane).
void save_slc_sfet(const std::filesystem::path& path, const SlcImage& img);

/// Reads any supported sample file: SFET [2,h,w] / [h,w] or MSTAR.
SlcImage load_sample(const std::filesystem::path& path);

/// Sample id derived from a file name: the stem for .sfet files, the full name otherwise.
std::string sample_id_for(const std::filesystem::path& path);

// --- manifest --------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
  std::optional<std::string> label;
  SampleSource source = SampleSource::Raw;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::uint64_t> class_counts;

  /// Recomputes class_counts and checks id uniqueness.
  void finalize();
  std::size_t size() const { return entries.size(); }
};

/// Scans `dir` recursively for ingestible files; entries sorted by id.
/// Labels come from the enclosing class directory when the file is nested,
/// otherwise from the MSTAR TargetType header key.
DatasetManifest build_manifest(const std::filesystem::path& dir);

std::string manifest_to_json(const DatasetManifest& manifest,
                             const std::filesystem::path& relative_to = {});
DatasetManifest manifest_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir = {});
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes `<out>/<class>/<class>_<idx>.sfet` for every image plus `<out>/manifest.json`.
/// Image idx of class c uses seed hash_keys({seed, c, idx}). An existing non-empty `out`
/// is refused unless `force`.
DatasetManifest synthesize_dataset(const std::filesystem::path& out, const SynthSpec& spec, bool force = false);

}  // namespace sarsfe
