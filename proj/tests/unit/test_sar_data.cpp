#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "sarsfe/error.hpp"
#include "sarsfe/sar_data.hpp"
#include "sarsfe/tensor_io.hpp"
#include "test_helpers.hpp"

using namespace sarsfe;
namespace fs = std::filesystem;

namespace {

SlcImage from_amplitude(const std::vector<std::vector<double>>& a) {
  SlcImage img{ImageF(a.size(), a[0].size()), ImageF::Zero(a.size(), a[0].size()), {}};
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) img.real(i, j) = static_cast<float>(a[i][j]);
  }
  return img;
}

SlcImage random_slc(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  SlcImage img{ImageF(rows, cols), ImageF(rows, cols), {}};
  for (Eigen::Index k = 0; k < img.real.size(); ++k) {
    img.real.data()[k] = g(gen);
    img.imag.data()[k] = g(gen);
  }
  return img;
}

void expect_format_error(const std::function<void()>& fn, std::uint64_t offset) {
  try {
    fn();
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == offset);
  }
}

void expect_kind(const std::function<void()>& fn, ErrorKind kind) {
  try {
    fn();
    FAIL("expected Error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("log normalization") {
  SUBCASE("constant image maps to zeros") {
    const auto out = log_normalize(from_amplitude({{5, 5}, {5, 5}}));
    CHECK(out.data.isZero());
  }
  SUBCASE("two-point image maps to its endpoints") {
    const auto out = log_normalize(from_amplitude({{1.0, std::numbers::e}}));
    CHECK(out.data(0, 0) == 0.0f);
    CHECK(out.data(0, 1) == 1.0f);
  }
  SUBCASE("random image matches a scalar reference") {
    const auto img = random_slc(16, 16, 3);
    const auto out = log_normalize(img);
    std::vector<double> logs;
    for (Eigen::Index k = 0; k < img.real.size(); ++k) {
      const double re = img.real.data()[k];
      const double im = img.imag.data()[k];
      logs.push_back(std::log(std::sqrt(re * re + im * im) + 1e-10));
    }
    const double lo = *std::min_element(logs.begin(), logs.end());
    const double hi = *std::max_element(logs.begin(), logs.end());
    for (Eigen::Index k = 0; k < img.real.size(); ++k) {
      CHECK(out.data.data()[k] == doctest::Approx((logs[k] - lo) / (hi - lo)).epsilon(1e-6));
    }
    CHECK(out.data.minCoeff() == 0.0f);
    CHECK(out.data.maxCoeff() == 1.0f);
  }
  SUBCASE("non-finite input is invalid data") {
    auto img = random_slc(4, 4, 1);
    img.imag(2, 2) = std::numeric_limits<float>::infinity();
    expect_kind([&] { log_normalize(img); }, ErrorKind::InvalidData);
  }
}

TEST_CASE("multilook matches a reflect-padded boxcar oracle") {
  const auto img = random_slc(9, 13, 8);
  std::vector<std::vector<double>> inten(9, std::vector<double>(13));
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 13; ++j) inten[i][j] = double(img.real(i, j)) * img.real(i, j) + double(img.imag(i, j)) * img.imag(i, j);
  }
  for (std::uint32_t looks : {1u, 2u, 3u, 4u, 5u}) {
    CAPTURE(looks);
    const auto pad = oracle::reflect_pad(inten, looks);
    const long lo = (long(looks) - 1) / 2;
    const auto ml = multilook_intensity(img, looks);
    for (long i = 0; i < 9; ++i) {
      for (long j = 0; j < 13; ++j) {
        double s = 0;
        for (long a = 0; a < long(looks); ++a) {
          for (long b = 0; b < long(looks); ++b) s += pad[i - lo + a + looks][j - lo + b + looks];
        }
        CHECK(ml(i, j) == doctest::Approx(s / (looks * looks)).epsilon(1e-12));
      }
    }
  }
  CHECK(multilook_despeckle(img, 1).data == log_normalize(img).data);
  expect_kind([&] { multilook_intensity(img, 0); }, ErrorKind::Parameter);
  SlcImage flat{ImageF::Constant(8, 8, 2.0f), ImageF::Zero(8, 8), {}};
  CHECK(multilook_despeckle(flat, 3).data.isZero());
  const MultilookDespeckler d(3);
  CHECK(d.despeckle(img).data == multilook_despeckle(img, 3).data);
}

TEST_CASE("reflect index matches a walking reflection") {
  for (long n : {1L, 2L, 3L, 7L}) {
    for (long i = -20; i < 20; ++i) CHECK(reflect_index(i, n) == oracle::bounce(i, n));
  }
}

TEST_CASE("synthetic speckle statistics") {
  // Clutter-only region of class 0: a 128x128 image has many pixels far from every scatterer.
  const auto img = generate_synthetic(0, 128, 128, 17);
  const ImageD sigma = reflectivity_map(0, 128, 128);
  const ImageD inten = img.intensity();
  double s = 0, s2 = 0;
  std::size_t n = 0;
  for (Eigen::Index k = 0; k < inten.size(); ++k) {
    if (sigma.data()[k] != kClutterFloor) continue;
    s += inten.data()[k];
    s2 += inten.data()[k] * inten.data()[k];
    ++n;
  }
  REQUIRE(n >= 10000);
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == doctest::Approx(kClutterFloor).epsilon(0.05));
  CHECK(var / (mean * mean) >= 0.9);
  CHECK(var / (mean * mean) <= 1.1);

  SUBCASE("multilook reduces intensity variance") {
    auto var_of = [&](const ImageD& m) {
      double a = 0, b = 0;
      std::size_t c = 0;
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        if (sigma.data()[k] != kClutterFloor) continue;
        a += m.data()[k];
        b += m.data()[k] * m.data()[k];
        ++c;
      }
      return b / c - (a / c) * (a / c);
    };
    CHECK(var_of(multilook_intensity(img, 5)) < var_of(multilook_intensity(img, 1)));
  }
}

TEST_CASE("synthetic generator contract") {
  const auto a = generate_synthetic(1, 32, 40, 5);
  const auto b = generate_synthetic(1, 32, 40, 5);
  CHECK(a.real == b.real);
  CHECK(a.imag == b.imag);
  CHECK(a.meta.class_label == synthetic_class_name(1));
  CHECK_FALSE(generate_synthetic(1, 32, 40, 6).real == a.real);
  CHECK_FALSE(reflectivity_map(0, 64, 64) == reflectivity_map(1, 64, 64));
  for (std::uint32_t c = 0; c < kDefaultSyntheticClasses; ++c) {
    for (std::uint32_t d = c + 1; d < kDefaultSyntheticClasses; ++d) {
      CHECK_FALSE(reflectivity_map(c, 64, 64) == reflectivity_map(d, 64, 64));
    }
  }
  expect_kind([] { generate_synthetic(4, 32, 32, 0); }, ErrorKind::Parameter);
  expect_kind([] { generate_synthetic(0, 8, 32, 0); }, ErrorKind::Parameter);
}

TEST_CASE("MSTAR parsing") {
  SUBCASE("unit magnitude, zero phase") {
    SlcImage img{ImageF::Ones(2, 2), ImageF::Zero(2, 2), {}};
    const auto back = parse_mstar(encode_mstar(img, "BMP2"));
    CHECK(back.real == img.real);
    CHECK(back.imag.isZero());
    CHECK(back.meta.class_label == "BMP2");
  }
  SUBCASE("phase pi/2 with magnitude 2") {
    SlcImage img{ImageF::Zero(2, 3), ImageF::Constant(2, 3, 2.0f), {}};
    const auto back = parse_mstar(encode_mstar(img, "T62"));
    CHECK(back.real.cwiseAbs().maxCoeff() < 1e-6);
    CHECK((back.imag.array() - 2.0f).abs().maxCoeff() < 1e-6);
  }
  SUBCASE("round trip within f32") {
    const auto img = random_slc(7, 5, 11);
    const auto back = parse_mstar(encode_mstar(img, "D7"));
    CHECK((back.real - img.real).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((back.imag - img.imag).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("magnitude-only file has zero phase") {
    const auto img = random_slc(3, 3, 2);
    const auto back = parse_mstar(encode_mstar(img, "D7", false));
    CHECK(back.imag.isZero());
    const ImageF mag = (img.real.array().square() + img.imag.array().square()).sqrt().matrix();
    CHECK((back.real - mag).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("truncation and missing keys") {
    SlcImage img{ImageF::Ones(2, 2), ImageF::Zero(2, 2), {}};
    const auto bytes = encode_mstar(img, "BMP2");
    const std::vector<std::uint8_t> half(bytes.begin(), bytes.end() - 20);
    expect_format_error([&] { parse_mstar(half); }, half.size());
    const std::vector<std::uint8_t> mid(bytes.begin(), bytes.end() - 4);
    expect_format_error([&] { parse_mstar(mid); }, mid.size());
    const std::string no_rows = "[PhoenixHeaderVer01.04]\nNumberOfColumns= 2\n[EndofPhoenixHeader]\n";
    CHECK_THROWS_AS(parse_mstar(std::vector<std::uint8_t>(no_rows.begin(), no_rows.end())), FormatError);
    const std::string no_end = "NumberOfColumns= 2\n";
    CHECK_THROWS_AS(parse_mstar(std::vector<std::uint8_t>(no_end.begin(), no_end.end())), FormatError);
  }
}

TEST_CASE("sample files and manifests") {
  testutil::TempDir dir("manifest");
  fs::create_directories(dir / "alpha");
  for (int i = 0; i < 3; ++i) {
    save_slc_sfet(dir.path() / "alpha" / ("a" + std::to_string(i) + ".sfet"), random_slc(16, 16, i));
  }
  write_mstar(dir / "HB001.000", random_slc(4, 4, 9), "ZIL131");
  std::ofstream(dir / "notes.txt") << "not a sample";

  const auto m = build_manifest(dir.path());
  REQUIRE(m.size() == 4);
  CHECK(m.class_counts.at("alpha") == 3);
  CHECK(m.class_counts.at("ZIL131") == 1);
  CHECK(m.entries[0].id == "HB001.000");
  CHECK(m.entries[0].source == SampleSource::Mstar);
  CHECK(m.entries[1].id == "a0");

  const auto loaded = load_sample(m.entries[1].path);
  CHECK(loaded.real == random_slc(16, 16, 0).real);

  const auto json = manifest_to_json(m, dir.path());
  const auto back = manifest_from_json(json, dir.path());
  REQUIRE(back.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back.entries[i].id == m.entries[i].id);
    CHECK(back.entries[i].label == m.entries[i].label);
    CHECK(fs::equivalent(back.entries[i].path, m.entries[i].path));
  }
  CHECK(manifest_to_json(build_manifest(dir.path()), dir.path()) == json);

  save_manifest(dir / "m.json", m);
  CHECK(load_manifest(dir / "m.json").size() == 4);

  fs::create_directories(dir / "beta");
  save_slc_sfet(dir.path() / "beta" / "a1.sfet", random_slc(16, 16, 1));
  expect_kind([&] { build_manifest(dir.path()); }, ErrorKind::DuplicateId);

  testutil::TempDir empty("empty");
  expect_kind([&] { build_manifest(empty.path()); }, ErrorKind::EmptyDataset);
}

TEST_CASE("MSTAR class layout yields the published counts") {
  const std::pair<const char*, int> table[] = {{"2S1", 1664}, {"BRDM_2", 1282}, {"BTR_60", 451},
                                               {"D7", 573},   {"T62", 572},     {"ZIL131", 573},
                                               {"ZSU_23_4", 1401}, {"SLICY", 2539}};
  testutil::TempDir dir("mstar_layout");
  SlcImage tiny{ImageF::Ones(2, 2), ImageF::Zero(2, 2), {}};
  int serial = 0;
  for (const auto& [cls, count] : table) {
    const auto bytes = encode_mstar(tiny, cls, false);
    fs::create_directories(dir.path() / "17_DEG" / cls);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "HB%05d.%03d", serial++, i % 1000);
      write_file_bytes(dir.path() / "17_DEG" / cls / name, bytes);
    }
  }
  const auto m = build_manifest(dir.path());
  CHECK(m.size() == 9055);
  for (const auto& [cls, count] : table) CHECK(m.class_counts.at(cls) == std::uint64_t(count));
}

TEST_CASE("synthesize_dataset writes one file per image and a manifest") {
  testutil::TempDir dir("synth");
  SynthSpec spec;
  spec.per_class = 3;
  spec.rows = spec.cols = 16;
  const auto m = synthesize_dataset(dir / "d", spec);
  CHECK(m.size() == 12);
  CHECK(fs::exists(dir / "d" / "manifest.json"));
  CHECK(m.class_counts.size() == 4);
  expect_kind([&] { synthesize_dataset(dir / "d", spec); }, ErrorKind::File);
  CHECK_NOTHROW(synthesize_dataset(dir / "d", spec, true));
  spec.per_class = 0;
  expect_kind([&] { synthesize_dataset(dir / "e", spec); }, ErrorKind::EmptyDataset);
}
