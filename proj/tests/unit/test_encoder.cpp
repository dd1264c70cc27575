#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sarsfe/error.hpp"
#include "sarsfe/encoder.hpp"
#include "test_helpers.hpp"

using namespace sarsfe;

TEST_CASE("token count follows floor(h/p) * floor(w/p) for every input size") {
  const auto cfg = EncoderConfig::desk();
  const auto params = ModelParams<float>::init(cfg, 3);
  std::mt19937_64 gen(1);
  const std::pair<int, int> sizes[] = {{16, 16}, {54, 54}, {64, 64}, {128, 128}, {192, 192}, {20, 44}, {8, 8}};
  for (auto [h, w] : sizes) {
    CAPTURE(h);
    CAPTURE(w);
    const auto img = testutil::random_amplitude(h, w, gen);
    const auto enc = patch_encode(img, params);
    CHECK(enc.tokens.rows() == 1 + (h / 8) * (w / 8));
    CHECK(cfg.token_count(h, w) == static_cast<std::uint32_t>((h / 8) * (w / 8)));
    const Vec<float> z = extract_feature(img, params);
    CHECK(z.size() == cfg.embed_dim);
    CHECK(z.allFinite());
  }
}

TEST_CASE("images smaller than a patch are rejected") {
  const auto params = ModelParams<float>::init(EncoderConfig::desk(), 1);
  std::mt19937_64 gen(1);
  CHECK_THROWS_AS(extract_feature(testutil::random_amplitude(7, 30, gen), params), Error);
}

TEST_CASE("trimming is centred and drops the border remainder") {
  const auto params = ModelParams<double>::init(EncoderConfig::desk(), 2);
  std::mt19937_64 gen(2);
  auto img = testutil::random_amplitude(54, 54, gen);
  const Vec<double> base = extract_feature(img, params);
  // 54 = 6 * 8 + 6: rows/cols 0..2 and 51..53 are outside the kept area.
  auto border = img;
  border.data(1, 20) = 0.123f;
  border.data(52, 52) = 0.987f;
  CHECK((extract_feature(border, params) - base).cwiseAbs().maxCoeff() == 0.0);
  auto inside = img;
  inside.data(3, 3) += 0.5f;
  CHECK((extract_feature(inside, params) - base).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("patch masks remove tokens from the sequence") {
  const auto params = ModelParams<float>::init(EncoderConfig::desk(), 1);
  std::mt19937_64 gen(4);
  const auto img = testutil::random_amplitude(32, 32, gen);
  PatchMask mask(16, false);
  mask[0] = mask[5] = mask[15] = true;
  const auto enc = patch_encode(img, params, &mask);
  CHECK(enc.tokens.rows() == 1 + 13);
  CHECK(enc.kept_indices.size() == 13);
  CHECK(std::find(enc.kept_indices.begin(), enc.kept_indices.end(), 5u) == enc.kept_indices.end());

  PatchMask wrong(15, false);
  CHECK_THROWS_AS(patch_encode(img, params, &wrong), Error);
  PatchMask all(16, true);
  CHECK_THROWS_AS(patch_encode(img, params, &all), Error);
}

TEST_CASE("2D sine-cosine table") {
  const auto pe = positional_encoding_2d<double>(3, 5, 16);
  CHECK(pe.rows() == 15);
  CHECK(pe.cols() == 16);
  // Grid origin: sines 0, cosines 1.
  for (int k = 0; k < 4; ++k) {
    CHECK(pe(0, k) == 0.0);
    CHECK(pe(0, 4 + k) == 1.0);
    CHECK(pe(0, 8 + k) == 0.0);
    CHECK(pe(0, 12 + k) == 1.0);
  }
  // Row-major patch order: patch (r=1, c=2) is row 7; its lowest frequency is 1 rad/step.
  CHECK(pe(7, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(pe(7, 8) == doctest::Approx(std::sin(2.0)));
  CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(positional_encoding_2d<double>(2, 2, 6), Error);
}

TEST_CASE("prototype softmax properties over random cases") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 2 + trial % 9;
    const Eigen::Index n = 2 + trial % 13;
    Vec<double> h(d);
    Mat<double> q(d, n);
    for (auto& x : h.reshaped()) x = g(gen);
    for (auto& x : q.reshaped()) x = g(gen);
    const double tau = u(gen) * 0.5;
    const auto p = prototype_prediction<double>(h, q, tau);
    CHECK(std::abs(p.p.sum() - 1.0) < 1e-6);
    CHECK((p.s.array().abs() <= 1.0 + 1e-12).all());

    const double c = std::exp(g(gen) * 3);
    const auto scaled = prototype_prediction<double>(Vec<double>(c * h), q, tau);
    CHECK((scaled.p - p.p).cwiseAbs().maxCoeff() < 1e-5);

    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Mat<double> qp(d, n);
    for (Eigen::Index l = 0; l < n; ++l) qp.col(l) = q.col(perm[l]);
    const auto pp = prototype_prediction<double>(h, qp, tau);
    for (Eigen::Index l = 0; l < n; ++l) CHECK(std::abs(pp.p(l) - p.p(perm[l])) < 1e-12);
  }
}

TEST_CASE("parameter naming and layout") {
  const auto cfg = testutil::toy_config(3);
  auto params = ModelParams<float>::init(cfg, 5);
  const auto t = params.named_tensors();
  CHECK(t.size() == 3 + 12 * 3 + 2 + 6 + 1);
  CHECK(t.front().name == "patch_embed.weight");
  CHECK(t[3].name == "blocks.0.norm1.weight");
  CHECK(t.back().name == "prototypes");
  std::size_t total = 0;
  for (const auto& x : t) total += x.value->size();
  CHECK(total == params.num_parameters());
  CHECK(params.all_finite());
  // LayerNorm scales start at one, biases at zero.
  CHECK(params.blocks[0].norm1_w.isOnes());
  CHECK(params.blocks[0].qkv_b.isZero());
  const auto d = params.cast<double>();
  CHECK(d.cast<float>().patch_w == params.patch_w);
  CHECK(ModelParams<float>::init(cfg, 5).patch_w == params.patch_w);
  CHECK_FALSE(ModelParams<float>::init(cfg, 6).patch_w == params.patch_w);
}

TEST_CASE("non-finite parameters raise a numerical error naming the layer") {
  const auto cfg = testutil::toy_config(2);
  auto params = ModelParams<float>::init(cfg, 1);
  params.blocks[1].fc2_b(0, 0) = std::numeric_limits<float>::quiet_NaN();
  std::mt19937_64 gen(1);
  const auto img = testutil::random_amplitude(12, 12, gen);
  try {
    forward<float>(img, params, nullptr, 0.1f);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.where() == "layer 2");
  }
}

TEST_CASE("configuration validation") {
  auto c = EncoderConfig::desk();
  CHECK_NOTHROW(c.validate());
  CHECK(EncoderConfig::full().depth == 12);
  CHECK(EncoderConfig::full().head_hidden == 2048);
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = EncoderConfig::desk();
  c.embed_dim = 190;
  CHECK_THROWS_AS(c.validate(), Error);
}
