#include "sarsfe/sar_data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sarsfe/error.hpp"
#include "sarsfe/rng.hpp"
#include "sarsfe/tensor_io.hpp"

namespace sarsfe {
namespace fs = std::filesystem;

const char* to_string(SampleSource source) {
  switch (source) {
    case SampleSource::Synthetic: return "synthetic";
    case SampleSource::Mstar: return "mstar";
    case SampleSource::Raw: return "raw";
  }
  return "raw";
}

SampleSource parse_sample_source(const std::string& name) {
  if (name == "synthetic") return SampleSource::Synthetic;
  if (name == "mstar") return SampleSource::Mstar;
  if (name == "raw") return SampleSource::Raw;
  throw Error(ErrorKind::Parameter, "unknown sample source '" + name + "'");
}

void SlcImage::validate() const {
  if (real.rows() < 1 || real.cols() < 1) throw Error(ErrorKind::InvalidData, "empty SLC image");
  if (real.rows() != imag.rows() || real.cols() != imag.cols()) {
    throw Error(ErrorKind::InvalidData, "real and imaginary planes differ in size");
  }
  if (!real.allFinite() || !imag.allFinite()) {
    throw Error(ErrorKind::InvalidData, "SLC image '" + meta.id + "' has non-finite entries");
  }
}

ImageD SlcImage::intensity() const {
  const ImageD re = real.cast<double>();
  const ImageD im = imag.cast<double>();
  return (re.array().square() + im.array().square()).matrix();
}

AmplitudeImage log_normalize_amplitude(const ImageD& amplitude, SampleMeta meta) {
  if (amplitude.size() == 0) throw Error(ErrorKind::InvalidData, "empty amplitude image");
  if (!amplitude.allFinite()) throw Error(ErrorKind::InvalidData, "non-finite amplitude");
  const ImageD logs = (amplitude.array() + kLogEpsilon).log().matrix();
  const double lo = logs.minCoeff();
  const double hi = logs.maxCoeff();
  AmplitudeImage out{ImageF::Zero(amplitude.rows(), amplitude.cols()), std::move(meta)};
  if (hi > lo) out.data = ((logs.array() - lo) / (hi - lo)).cast<float>().matrix();
  return out;
}

AmplitudeImage log_normalize(const SlcImage& img) {
  img.validate();
  return log_normalize_amplitude(img.intensity().array().sqrt().matrix(), img.meta);
}

Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (n <= 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

ImageD multilook_intensity(const SlcImage& img, std::uint32_t looks) {
  if (looks == 0) throw Error(ErrorKind::Parameter, "multilook requires looks >= 1");
  img.validate();
  const ImageD intensity = img.intensity();
  const Eigen::Index rows = intensity.rows();
  const Eigen::Index cols = intensity.cols();
  const Eigen::Index n = looks;
  const Eigen::Index lo = (n - 1) / 2;
  ImageD out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      double sum = 0.0;
      for (Eigen::Index di = 0; di < n; ++di) {
        const Eigen::Index r = reflect_index(i - lo + di, rows);
        for (Eigen::Index dj = 0; dj < n; ++dj) sum += intensity(r, reflect_index(j - lo + dj, cols));
      }
      out(i, j) = sum / static_cast<double>(n * n);
    }
  }
  return out;
}

AmplitudeImage multilook_despeckle(const SlcImage& img, std::uint32_t looks) {
  return log_normalize_amplitude(multilook_intensity(img, looks).array().sqrt().matrix(), img.meta);
}

MultilookDespeckler::MultilookDespeckler(std::uint32_t looks) : looks_(looks) {
  if (looks_ == 0) throw Error(ErrorKind::Parameter, "multilook requires looks >= 1");
}

AmplitudeImage MultilookDespeckler::despeckle(const SlcImage& img) const {
  return multilook_despeckle(img, looks_);
}

std::string MultilookDespeckler::describe() const {
  return "multilook(looks=" + std::to_string(looks_) + ")";
}

// --- synthetic ---------------------------------------------------------------------

namespace {

// Peaks are in units of the clutter floor.
const std::array<std::vector<Scatterer>, kMaxSyntheticClasses> kConstellations = {{
    // 0: cross
    {{0.50, 0.50, 40}, {0.34, 0.50, 30}, {0.66, 0.50, 30}, {0.50, 0.34, 30}, {0.50, 0.66, 30}},
    // 1: diagonal line
    {{0.30, 0.30, 35}, {0.43, 0.43, 35}, {0.57, 0.57, 35}, {0.70, 0.70, 35}},
    // 2: triangle
    {{0.30, 0.50, 45}, {0.68, 0.32, 45}, {0.68, 0.68, 45}},
    // 3: square corners
    {{0.35, 0.35, 30}, {0.35, 0.65, 30}, {0.65, 0.35, 30}, {0.65, 0.65, 30}},
    // 4: horizontal bar
    {{0.50, 0.25, 30}, {0.50, 0.42, 30}, {0.50, 0.58, 30}, {0.50, 0.75, 30}},
    // 5: hexagon
    {{0.30, 0.50, 25}, {0.40, 0.67, 25}, {0.60, 0.67, 25}, {0.70, 0.50, 25}, {0.60, 0.33, 25},
     {0.40, 0.33, 25}},
    // 6: bright pair
    {{0.40, 0.40, 80}, {0.60, 0.60, 80}},
    // 7: T shape
    {{0.30, 0.30, 30}, {0.30, 0.50, 30}, {0.30, 0.70, 30}, {0.50, 0.50, 30}, {0.70, 0.50, 30}},
}};

constexpr std::array<const char*, kMaxSyntheticClasses> kClassNames = {
    "cross", "diagonal", "triangle", "square", "bar", "hexagon", "pair", "tee"};

void check_class(std::uint32_t class_id, std::uint32_t num_classes) {
  if (num_classes == 0 || num_classes > kMaxSyntheticClasses) {
    throw Error(ErrorKind::Parameter,
                "synthetic class count must be in [1, " + std::to_string(kMaxSyntheticClasses) + "]");
  }
  if (class_id >= num_classes) {
    throw Error(ErrorKind::Parameter, "class id " + std::to_string(class_id) +
                                          " out of range for " + std::to_string(num_classes) +
                                          " classes");
  }
}

}  // namespace

std::span<const Scatterer> synthetic_constellation(std::uint32_t class_id) {
  check_class(class_id, kMaxSyntheticClasses);
  return kConstellations[class_id];
}

std::string synthetic_class_name(std::uint32_t class_id) {
  check_class(class_id, kMaxSyntheticClasses);
  return kClassNames[class_id];
}

ImageD reflectivity_map(std::uint32_t class_id, Eigen::Index rows, Eigen::Index cols,
                        std::uint32_t num_classes) {
  check_class(class_id, num_classes);
  if (rows < 1 || cols < 1) throw Error(ErrorKind::Parameter, "reflectivity map needs a non-empty size");
  ImageD sigma = ImageD::Constant(rows, cols, kClutterFloor);
  const double radius = std::max(1.0, 0.02 * static_cast<double>(std::min(rows, cols)));
  const double cutoff2 = 9.0 * radius * radius;
  for (const auto& s : kConstellations[class_id]) {
    const double ci = s.row_frac * static_cast<double>(rows - 1);
    const double cj = s.col_frac * static_cast<double>(cols - 1);
    const auto r0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(ci - 3 * radius)));
    const auto r1 = std::min<Eigen::Index>(rows - 1, static_cast<Eigen::Index>(std::ceil(ci + 3 * radius)));
    const auto c0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(cj - 3 * radius)));
    const auto c1 = std::min<Eigen::Index>(cols - 1, static_cast<Eigen::Index>(std::ceil(cj + 3 * radius)));
    for (Eigen::Index i = r0; i <= r1; ++i) {
      for (Eigen::Index j = c0; j <= c1; ++j) {
        const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
        if (d2 <= cutoff2) sigma(i, j) += s.peak * kClutterFloor * std::exp(-d2 / (2 * radius * radius));
      }
    }
  }
  return sigma;
}

SlcImage generate_synthetic(std::uint32_t class_id, Eigen::Index rows, Eigen::Index cols,
                            std::uint64_t seed, std::uint32_t num_classes) {
  check_class(class_id, num_classes);
  if (rows < 16 || cols < 16) throw Error(ErrorKind::Parameter, "synthetic images must be at least 16x16");
  const ImageD sigma = reflectivity_map(class_id, rows, cols, num_classes);
  SlcImage img{ImageF(rows, cols), ImageF(rows, cols), {}};
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::uint64_t key = hash_keys({seed, class_id, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(j)});
      const double u1 = bits_to_unit_open(mix64(key ^ 0x243F6A8885A308D3ULL));
      const double u2 = bits_to_unit_open(mix64(key ^ 0x13198A2E03707344ULL));
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      const double scale = std::sqrt(sigma(i, j) / 2.0);
      img.real(i, j) = static_cast<float>(scale * radius * std::cos(angle));
      img.imag(i, j) = static_cast<float>(scale * radius * std::sin(angle));
    }
  }
  img.meta.class_label = synthetic_class_name(class_id);
  img.meta.source = SampleSource::Synthetic;
  img.meta.seed = seed;
  return img;
}

// --- MSTAR -------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct MstarHeader {
  std::map<std::string, std::string> keys;
  std::size_t data_offset = 0;
};

MstarHeader parse_mstar_header(std::span<const std::uint8_t> bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto marker = text.find(kMstarEndOfHeader);
  if (marker == std::string_view::npos) {
    throw FormatError("missing end-of-header marker", bytes.size());
  }
  MstarHeader header;
  std::istringstream lines{std::string(text.substr(0, marker))};
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    header.keys[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  std::size_t offset = marker + std::strlen(kMstarEndOfHeader);
  if (offset < text.size() && text[offset] == '\r') ++offset;
  if (offset < text.size() && text[offset] == '\n') ++offset;

  if (auto it = header.keys.find("PhoenixHeaderLength"); it != header.keys.end()) {
    std::size_t native = 0;
    try {
      offset = std::stoull(it->second);
      if (auto nt = header.keys.find("native_header_length"); nt != header.keys.end()) {
        native = std::stoull(nt->second);
      }
    } catch (const std::exception&) {
      throw FormatError("malformed header length field", marker);
    }
    offset += native;
  }
  header.data_offset = offset;
  return header;
}

std::uint64_t header_dim(const MstarHeader& header, const std::string& key) {
  const auto it = header.keys.find(key);
  if (it == header.keys.end()) throw FormatError("missing header key " + key, header.data_offset);
  try {
    const auto v = std::stoll(it->second);
    if (v < 1) throw FormatError("header key " + key + " must be positive", header.data_offset);
    return static_cast<std::uint64_t>(v);
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception&) {
    throw FormatError("header key " + key + " is not an integer", header.data_offset);
  }
}

float load_be_f32(const std::uint8_t* p) {
  std::uint32_t bits = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                       (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  return std::bit_cast<float>(bits);
}

void append_be_f32(std::vector<std::uint8_t>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<std::uint8_t>(bits >> 24));
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits));
}

std::vector<std::uint8_t> read_prefix(const fs::path& path, std::size_t max_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::File, "cannot open " + path.string());
  std::vector<std::uint8_t> buf(max_bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(max_bytes));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

}  // namespace

SlcImage parse_mstar(std::span<const std::uint8_t> bytes) {
  const MstarHeader header = parse_mstar_header(bytes);
  const std::uint64_t rows = header_dim(header, "NumberOfRows");
  const std::uint64_t cols = header_dim(header, "NumberOfColumns");
  const std::uint64_t n = rows * cols;
  const std::uint64_t block = 4 * n;
  const std::uint64_t begin = header.data_offset;
  const std::uint64_t available = bytes.size() > begin ? bytes.size() - begin : 0;

  bool has_phase = true;
  if (available < block) {
    throw FormatError("truncated magnitude block: need " + std::to_string(block) + " bytes, have " +
                          std::to_string(available),
                      bytes.size());
  } else if (available == block) {
    has_phase = false;
  } else if (available < 2 * block) {
    throw FormatError("truncated phase block: need " + std::to_string(block) + " bytes, have " +
                          std::to_string(available - block),
                      bytes.size());
  }

  SlcImage img{ImageF(rows, cols), ImageF(rows, cols), {}};
  for (std::uint64_t k = 0; k < n; ++k) {
    const std::uint64_t mag_off = begin + 4 * k;
    const float mag = load_be_f32(bytes.data() + mag_off);
    if (!std::isfinite(mag)) throw FormatError("non-finite magnitude", mag_off);
    float phase = 0.0f;
    if (has_phase) {
      const std::uint64_t ph_off = begin + block + 4 * k;
      phase = load_be_f32(bytes.data() + ph_off);
      if (!std::isfinite(phase)) throw FormatError("non-finite phase", ph_off);
    }
    const auto r = static_cast<Eigen::Index>(k / cols);
    const auto c = static_cast<Eigen::Index>(k % cols);
    img.real(r, c) = static_cast<float>(static_cast<double>(mag) * std::cos(static_cast<double>(phase)));
    img.imag(r, c) = static_cast<float>(static_cast<double>(mag) * std::sin(static_cast<double>(phase)));
  }
  img.meta.source = SampleSource::Mstar;
  if (auto it = header.keys.find("TargetType"); it != header.keys.end() && !it->second.empty()) {
    img.meta.class_label = it->second;
  }
  return img;
}

SlcImage ingest_mstar(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  SlcImage img;
  try {
    img = parse_mstar(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
  img.meta.id = sample_id_for(path);
  return img;
}

std::vector<std::uint8_t> encode_mstar(const SlcImage& img, const std::string& target_type,
                                       bool include_phase) {
  img.validate();
  std::ostringstream header;
  header << "[PhoenixHeaderVer01.04]\n"
         << "NumberOfColumns= " << img.cols() << "\n"
         << "NumberOfRows= " << img.rows() << "\n";
  if (!target_type.empty()) header << "TargetType= " << target_type << "\n";
  header << kMstarEndOfHeader << "\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + 8 * static_cast<std::size_t>(img.real.size()));
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      append_be_f32(out, static_cast<float>(std::hypot(double(img.real(r, c)), double(img.imag(r, c)))));
    }
  }
  if (include_phase) {
    for (Eigen::Index r = 0; r < img.rows(); ++r) {
      for (Eigen::Index c = 0; c < img.cols(); ++c) {
        append_be_f32(out, static_cast<float>(std::atan2(double(img.imag(r, c)), double(img.real(r, c)))));
      }
    }
  }
  return out;
}

void write_mstar(const fs::path& path, const SlcImage& img, const std::string& target_type,
                 bool include_phase) {
  write_file_bytes(path, encode_mstar(img, target_type, include_phase));
}

bool is_mstar_file(const fs::path& path) {
  const auto prefix = read_prefix(path, 1 << 16);
  const std::string_view text(reinterpret_cast<const char*>(prefix.data()), prefix.size());
  return text.find(kMstarEndOfHeader) != std::string_view::npos;
}

// --- SFET samples ------------------------------------------------------------------

void save_slc_sfet(const fs::path& path, const SlcImage& img) {
  img.validate();
  const std::array<std::uint64_t, 3> shape = {2, static_cast<std::uint64_t>(img.rows()),
                                              static_cast<std::uint64_t>(img.cols())};
  std::vector<float> values;
  values.reserve(2 * static_cast<std::size_t>(img.real.size()));
  values.insert(values.end(), img.real.data(), img.real.data() + img.real.size());
  values.insert(values.end(), img.imag.data(), img.imag.data() + img.imag.size());
  write_tensor(path, shape, values);
}

std::string sample_id_for(const fs::path& path) {
  if (path.extension() == ".sfet") return path.stem().string();
  return path.filename().string();
}

SlcImage load_sample(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::File, "no such sample file: " + path.string());
  if (!is_sfet_file(path)) return ingest_mstar(path);

  const TensorData t = read_tensor(path);
  SlcImage img;
  if (t.shape.size() == 3 && t.shape[0] == 2) {
    const auto rows = static_cast<Eigen::Index>(t.shape[1]);
    const auto cols = static_cast<Eigen::Index>(t.shape[2]);
    img.real = Eigen::Map<const ImageD>(t.values.data(), rows, cols).cast<float>();
    img.imag = Eigen::Map<const ImageD>(t.values.data() + rows * cols, rows, cols).cast<float>();
    img.meta.source = SampleSource::Synthetic;
  } else if (t.shape.size() == 2) {
    const auto rows = static_cast<Eigen::Index>(t.shape[0]);
    const auto cols = static_cast<Eigen::Index>(t.shape[1]);
    img.real = Eigen::Map<const ImageD>(t.values.data(), rows, cols).cast<float>();
    img.imag = ImageF::Zero(rows, cols);
    img.meta.source = SampleSource::Raw;
  } else {
    throw FormatError(path.string() + ": SFET sample must have shape [2,h,w] or [h,w]", 6);
  }
  img.meta.id = sample_id_for(path);
  img.validate();
  return img;
}

// --- manifest ----------------------------------------------------------------------

void DatasetManifest::finalize() {
  std::set<std::string> seen;
  class_counts.clear();
  for (const auto& e : entries) {
    if (e.id.empty()) throw Error(ErrorKind::InvalidData, "manifest entry with empty id");
    if (!seen.insert(e.id).second) throw Error(ErrorKind::DuplicateId, "id '" + e.id + "' appears twice");
    if (e.label) ++class_counts[*e.label];
  }
}

DatasetManifest build_manifest(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::File, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& de : fs::recursive_directory_iterator(dir)) {
    if (de.is_regular_file()) files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  const fs::path root = fs::weakly_canonical(dir);

  DatasetManifest m;
  for (const auto& path : files) {
    ManifestEntry entry;
    entry.path = path;
    entry.id = sample_id_for(path);
    const bool nested = fs::weakly_canonical(path.parent_path()) != root;
    if (is_sfet_file(path)) {
      entry.source = SampleSource::Synthetic;
    } else if (is_mstar_file(path)) {
      entry.source = SampleSource::Mstar;
      if (!nested) {
        const auto header = parse_mstar_header(read_prefix(path, 1 << 16));
        if (auto it = header.keys.find("TargetType"); it != header.keys.end() && !it->second.empty()) {
          entry.label = it->second;
        }
      }
    } else {
      continue;
    }
    if (nested) entry.label = path.parent_path().filename().string();
    m.entries.push_back(std::move(entry));
  }
  if (m.entries.empty()) throw Error(ErrorKind::EmptyDataset, "no ingestible files under " + dir.string());
  std::stable_sort(m.entries.begin(), m.entries.end(),
                   [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  m.finalize();
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest, const fs::path& relative_to) {
  nlohmann::ordered_json j;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json item;
    item["id"] = e.id;
    fs::path p = e.path;
    if (!relative_to.empty()) p = e.path.lexically_relative(relative_to);
    if (p.empty()) p = e.path;
    item["path"] = p.generic_string();
    item["label"] = e.label ? nlohmann::ordered_json(*e.label) : nlohmann::ordered_json(nullptr);
    item["source"] = to_string(e.source);
    j["entries"].push_back(std::move(item));
  }
  j["class_counts"] = nlohmann::ordered_json::object();
  for (const auto& [label, count] : manifest.class_counts) j["class_counts"][label] = count;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), e.byte);
  }
  DatasetManifest m;
  try {
    for (const auto& item : j.at("entries")) {
      ManifestEntry e;
      e.id = item.at("id").get<std::string>();
      fs::path p = item.at("path").get<std::string>();
      e.path = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
      if (item.contains("label") && !item.at("label").is_null()) e.label = item.at("label").get<std::string>();
      e.source = parse_sample_source(item.value("source", std::string("raw")));
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed manifest: ") + e.what());
  }
  m.finalize();
  if (j.contains("class_counts")) {
    std::map<std::string, std::uint64_t> stored = j.at("class_counts").get<std::map<std::string, std::uint64_t>>();
    if (stored != m.class_counts) {
      throw Error(ErrorKind::InvalidData, "manifest class_counts disagree with its entries");
    }
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const std::string text = manifest_to_json(manifest, path.parent_path());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest load_manifest(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

DatasetManifest synthesize_dataset(const fs::path& out, const SynthSpec& spec, bool force) {
  if (spec.per_class == 0 || spec.classes == 0) throw Error(ErrorKind::EmptyDataset, "synthetic dataset would be empty");
  if (spec.classes > kMaxSyntheticClasses) {
    throw Error(ErrorKind::Parameter, "at most " + std::to_string(kMaxSyntheticClasses) + " synthetic classes");
  }
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) throw Error(ErrorKind::File, "output directory " + out.string() + " is not empty (use --force)");
    fs::remove_all(out);
  }
  fs::create_directories(out);
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    const std::string name = synthetic_class_name(c);
    fs::create_directories(out / name);
    for (std::uint32_t i = 0; i < spec.per_class; ++i) {
      char file[96];
      std::snprintf(file, sizeof file, "%s_%04u.sfet", name.c_str(), i);
      const auto img = generate_synthetic(c, spec.rows, spec.cols, hash_keys({spec.seed, c, i}), spec.classes);
      save_slc_sfet(out / name / file, img);
    }
  }
  DatasetManifest m = build_manifest(out);
  save_manifest(out / "manifest.json", m);
  return m;
}

}  // namespace sarsfe
