#include "sarsfe/encoder.hpp"

#include <cmath>
#include <numbers>

#include "sarsfe/error.hpp"
#include "sarsfe/rng.hpp"

namespace sarsfe {

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::full() {
  EncoderConfig c;
  c.depth = 12;
  c.head_hidden = 2048;
  return c;
}

void EncoderConfig::validate() const {
  if (patch_size < 1) throw Error(ErrorKind::Parameter, "patch_size must be >= 1");
  if (embed_dim < 4 || embed_dim % 4 != 0) {
    throw Error(ErrorKind::Parameter, "embed_dim must be a positive multiple of 4 (2D sine-cosine table)");
  }
  if (n_heads < 1 || embed_dim % n_heads != 0) throw Error(ErrorKind::Parameter, "embed_dim must be divisible by n_heads");
  if (depth < 1) throw Error(ErrorKind::Parameter, "depth must be >= 1");
  if (mlp_hidden < 1 || head_hidden < 1) throw Error(ErrorKind::Parameter, "hidden widths must be >= 1");
  if (proj_dim < 2) throw Error(ErrorKind::Parameter, "proj_dim must be >= 2");
  if (n_prototypes < 2) throw Error(ErrorKind::Parameter, "n_prototypes must be >= 2");
}

std::uint32_t EncoderConfig::token_count(Eigen::Index rows, Eigen::Index cols) const {
  return static_cast<std::uint32_t>((rows / patch_size) * (cols / patch_size));
}

bool operator==(const EncoderConfig& a, const EncoderConfig& b) {
  return a.patch_size == b.patch_size && a.embed_dim == b.embed_dim && a.depth == b.depth &&
         a.n_heads == b.n_heads && a.mlp_hidden == b.mlp_hidden && a.head_hidden == b.head_hidden &&
         a.proj_dim == b.proj_dim && a.n_prototypes == b.n_prototypes && a.pooling == b.pooling;
}

// --- parameter containers ------------------------------------------------------------

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.embed_dim;
  const Eigen::Index pp = Eigen::Index(cfg.patch_size) * cfg.patch_size;
  const Eigen::Index hid = cfg.mlp_hidden;
  const Eigen::Index hh = cfg.head_hidden;
  ModelParams p;
  p.config = cfg;
  p.patch_w = Mat<T>::Zero(d, pp);
  p.patch_b = Mat<T>::Zero(d, 1);
  p.cls_token = Mat<T>::Zero(d, 1);
  p.blocks.resize(cfg.depth);
  for (auto& b : p.blocks) {
    b.norm1_w = Mat<T>::Zero(d, 1);
    b.norm1_b = Mat<T>::Zero(d, 1);
    b.qkv_w = Mat<T>::Zero(3 * d, d);
    b.qkv_b = Mat<T>::Zero(3 * d, 1);
    b.proj_w = Mat<T>::Zero(d, d);
    b.proj_b = Mat<T>::Zero(d, 1);
    b.norm2_w = Mat<T>::Zero(d, 1);
    b.norm2_b = Mat<T>::Zero(d, 1);
    b.fc1_w = Mat<T>::Zero(hid, d);
    b.fc1_b = Mat<T>::Zero(hid, 1);
    b.fc2_w = Mat<T>::Zero(d, hid);
    b.fc2_b = Mat<T>::Zero(d, 1);
  }
  p.norm_w = Mat<T>::Zero(d, 1);
  p.norm_b = Mat<T>::Zero(d, 1);
  p.head_w1 = Mat<T>::Zero(hh, d);
  p.head_b1 = Mat<T>::Zero(hh, 1);
  p.head_w2 = Mat<T>::Zero(hh, hh);
  p.head_b2 = Mat<T>::Zero(hh, 1);
  p.head_w3 = Mat<T>::Zero(cfg.proj_dim, hh);
  p.head_b3 = Mat<T>::Zero(cfg.proj_dim, 1);
  p.prototypes = Mat<T>::Zero(cfg.proj_dim, cfg.n_prototypes);
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const EncoderConfig& cfg, std::uint64_t seed) {
  ModelParams p = zeros(cfg);
  Rng rng(hash_keys({seed, 0x1417ULL}));
  // Truncated normal, std 0.02, cut at two standard deviations.
  auto trunc_normal = [&](Mat<T>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double x;
      do {
        x = rng.normal();
      } while (std::abs(x) > 2.0);
      m.data()[i] = static_cast<T>(0.02 * x);
    }
  };
  trunc_normal(p.patch_w);
  trunc_normal(p.cls_token);
  for (auto& b : p.blocks) {
    b.norm1_w.setOnes();
    b.norm2_w.setOnes();
    trunc_normal(b.qkv_w);
    trunc_normal(b.proj_w);
    trunc_normal(b.fc1_w);
    trunc_normal(b.fc2_w);
  }
  p.norm_w.setOnes();
  trunc_normal(p.head_w1);
  trunc_normal(p.head_w2);
  trunc_normal(p.head_w3);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.proj_dim));
  for (Eigen::Index i = 0; i < p.prototypes.size(); ++i) {
    p.prototypes.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  return p;
}

namespace {

template <typename Params, typename Tensor>
std::vector<NamedTensor<Tensor>> collect(Params& p) {
  std::vector<NamedTensor<Tensor>> out;
  out.push_back({"patch_embed.weight", &p.patch_w, false});
  out.push_back({"patch_embed.bias", &p.patch_b, true});
  out.push_back({"cls_token", &p.cls_token, true});
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "blocks." + std::to_string(i) + ".";
    out.push_back({pre + "norm1.weight", &b.norm1_w, true});
    out.push_back({pre + "norm1.bias", &b.norm1_b, true});
    out.push_back({pre + "attn.qkv.weight", &b.qkv_w, false});
    out.push_back({pre + "attn.qkv.bias", &b.qkv_b, true});
    out.push_back({pre + "attn.proj.weight", &b.proj_w, false});
    out.push_back({pre + "attn.proj.bias", &b.proj_b, true});
    out.push_back({pre + "norm2.weight", &b.norm2_w, true});
    out.push_back({pre + "norm2.bias", &b.norm2_b, true});
    out.push_back({pre + "mlp.fc1.weight", &b.fc1_w, false});
    out.push_back({pre + "mlp.fc1.bias", &b.fc1_b, true});
    out.push_back({pre + "mlp.fc2.weight", &b.fc2_w, false});
    out.push_back({pre + "mlp.fc2.bias", &b.fc2_b, true});
  }
  out.push_back({"norm.weight", &p.norm_w, true});
  out.push_back({"norm.bias", &p.norm_b, true});
  out.push_back({"head.fc1.weight", &p.head_w1, false});
  out.push_back({"head.fc1.bias", &p.head_b1, true});
  out.push_back({"head.fc2.weight", &p.head_w2, false});
  out.push_back({"head.fc2.bias", &p.head_b2, true});
  out.push_back({"head.fc3.weight", &p.head_w3, false});
  out.push_back({"head.fc3.bias", &p.head_b3, true});
  out.push_back({"prototypes", &p.prototypes, false});
  return out;
}

}  // namespace

template <typename T>
std::vector<NamedTensor<Mat<T>>> ModelParams<T>::named_tensors() {
  return collect<ModelParams<T>, Mat<T>>(*this);
}

template <typename T>
std::vector<NamedTensor<const Mat<T>>> ModelParams<T>::named_tensors() const {
  return collect<const ModelParams<T>, const Mat<T>>(*this);
}

template <typename T>
std::size_t ModelParams<T>::num_parameters() const {
  std::size_t n = 0;
  for (const auto& t : named_tensors()) n += static_cast<std::size_t>(t.value->size());
  return n;
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  for (const auto& t : named_tensors()) {
    if (!t.value->allFinite()) return false;
  }
  return true;
}

// --- layers ------------------------------------------------------------------------

namespace {

template <typename T>
constexpr T kLayerNormEps = T(1e-6);
template <typename T>
constexpr T kNormFloor = T(1e-12);

// y = x W^T + b, one row per token.
template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
  Mat<T> y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

template <typename T>
Mat<T> linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& dw, Mat<T>& db) {
  dw.noalias() += dy.transpose() * x;
  db.col(0) += dy.colwise().sum().transpose();
  return dy * w;
}

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta, LayerNormCache<T>& cache) {
  const Eigen::Index n = x.rows();
  const T d = static_cast<T>(x.cols());
  cache.xhat.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).sum() / d;
    const auto centred = (x.row(i).array() - mu).eval();
    const T var = centred.square().sum() / d;
    const T inv = T(1) / std::sqrt(var + kLayerNormEps<T>);
    cache.inv_std(i) = inv;
    cache.xhat.row(i) = centred * inv;
  }
  Mat<T> y = (cache.xhat.array().rowwise() * gamma.col(0).transpose().array()).matrix();
  y.rowwise() += beta.col(0).transpose();
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& cache, const Mat<T>& gamma,
                           Mat<T>& dgamma, Mat<T>& dbeta) {
  dgamma.col(0) += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbeta.col(0) += dy.colwise().sum().transpose();
  const Mat<T> dxhat = (dy.array().rowwise() * gamma.col(0).transpose().array()).matrix();
  const T d = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T sum = dxhat.row(i).sum();
    const T dot = dxhat.row(i).dot(cache.xhat.row(i));
    dx.row(i) = (cache.inv_std(i) / d) *
                (d * dxhat.row(i).array() - sum - cache.xhat.row(i).array() * dot).matrix();
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return gelu(v); });
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& dy, const Mat<T>& pre) {
  return (dy.array() * pre.unaryExpr([](T v) { return gelu_grad(v); }).array()).matrix();
}

template <typename T>
void softmax_rows(Mat<T>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const T mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

template <typename T>
void check_finite(const Mat<T>& m, const std::string& where) {
  if (!m.allFinite()) throw NumericalError("non-finite activations", where);
}

std::string layer_name(std::size_t index) { return "layer " + std::to_string(index); }

template <typename T>
Mat<T> block_forward(const Mat<T>& x, const BlockParams<T>& bp, std::uint32_t n_heads, BlockCache<T>& c) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  c.ln1_out = layer_norm(x, bp.norm1_w, bp.norm1_b, c.ln1);
  c.qkv = linear(c.ln1_out, bp.qkv_w, bp.qkv_b);
  c.attn.resize(n_heads);
  c.heads_out.resize(n, d);
  for (std::uint32_t h = 0; h < n_heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(d + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
    Mat<T> s = (q * k.transpose()) * scale;
    softmax_rows(s);
    c.heads_out.middleCols(h * dh, dh).noalias() = s * v;
    c.attn[h] = std::move(s);
  }
  Mat<T> x1 = x + linear(c.heads_out, bp.proj_w, bp.proj_b);

  c.ln2_out = layer_norm(x1, bp.norm2_w, bp.norm2_b, c.ln2);
  c.fc1_pre = linear(c.ln2_out, bp.fc1_w, bp.fc1_b);
  c.fc1_act = gelu(c.fc1_pre);
  return x1 + linear(c.fc1_act, bp.fc2_w, bp.fc2_b);
}

template <typename T>
Mat<T> block_backward(const Mat<T>& dy, const BlockParams<T>& bp, std::uint32_t n_heads,
                      const BlockCache<T>& c, BlockParams<T>& g) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  const Eigen::Index dh = d / n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  // MLP branch: x2 = x1 + fc2(gelu(fc1(ln2(x1))))
  Mat<T> dact = linear_backward(dy, c.fc1_act, bp.fc2_w, g.fc2_w, g.fc2_b);
  Mat<T> dpre = gelu_backward(dact, c.fc1_pre);
  Mat<T> dln2 = linear_backward(dpre, c.ln2_out, bp.fc1_w, g.fc1_w, g.fc1_b);
  Mat<T> dx1 = dy + layer_norm_backward(dln2, c.ln2, bp.norm2_w, g.norm2_w, g.norm2_b);

  // Attention branch: x1 = x + proj(attn(ln1(x)))
  Mat<T> dheads = linear_backward(dx1, c.heads_out, bp.proj_w, g.proj_w, g.proj_b);
  Mat<T> dqkv(n, 3 * d);
  for (std::uint32_t h = 0; h < n_heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(d + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
    const Mat<T>& a = c.attn[h];
    const auto dout = dheads.middleCols(h * dh, dh);
    Mat<T> da = dout * v.transpose();
    dqkv.middleCols(2 * d + h * dh, dh).noalias() = a.transpose() * dout;
    // Row-softmax backward.
    const Vec<T> rowdot = (da.array() * a.array()).rowwise().sum();
    Mat<T> ds = (a.array() * (da.array().colwise() - rowdot.array())).matrix() * scale;
    dqkv.middleCols(h * dh, dh).noalias() = ds * k;
    dqkv.middleCols(d + h * dh, dh).noalias() = ds.transpose() * q;
  }
  Mat<T> dln1 = linear_backward(dqkv, c.ln1_out, bp.qkv_w, g.qkv_w, g.qkv_b);
  return dx1 + layer_norm_backward(dln1, c.ln1, bp.norm1_w, g.norm1_w, g.norm1_b);
}

}  // namespace

template <typename T>
Mat<T> positional_encoding_2d(std::uint32_t grid_rows, std::uint32_t grid_cols, std::uint32_t dim) {
  if (dim % 4 != 0) throw Error(ErrorKind::Parameter, "positional encoding needs dim divisible by 4");
  const std::uint32_t quarter = dim / 4;
  Mat<T> pe(Eigen::Index(grid_rows) * grid_cols, dim);
  for (std::uint32_t r = 0; r < grid_rows; ++r) {
    for (std::uint32_t c = 0; c < grid_cols; ++c) {
      const Eigen::Index row = Eigen::Index(r) * grid_cols + c;
      for (std::uint32_t k = 0; k < quarter; ++k) {
        const double omega = std::pow(10000.0, -static_cast<double>(k) / quarter);
        pe(row, k) = static_cast<T>(std::sin(r * omega));
        pe(row, quarter + k) = static_cast<T>(std::cos(r * omega));
        pe(row, 2 * quarter + k) = static_cast<T>(std::sin(c * omega));
        pe(row, 3 * quarter + k) = static_cast<T>(std::cos(c * omega));
      }
    }
  }
  return pe;
}

template <typename T>
EncodedTokens<T> patch_encode(const AmplitudeImage& img, const ModelParams<T>& params, const PatchMask* mask) {
  const auto& cfg = params.config;
  const Eigen::Index ps = cfg.patch_size;
  if (img.rows() < ps || img.cols() < ps) {
    throw Error(ErrorKind::Size, "image " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                                     " is smaller than one " + std::to_string(ps) + "px patch");
  }
  EncodedTokens<T> out;
  out.grid_rows = static_cast<std::uint32_t>(img.rows() / ps);
  out.grid_cols = static_cast<std::uint32_t>(img.cols() / ps);
  const std::uint32_t total = out.grid_rows * out.grid_cols;
  if (mask != nullptr && mask->size() != total) {
    throw Error(ErrorKind::Size, "patch mask has " + std::to_string(mask->size()) + " entries for " +
                                     std::to_string(total) + " patches");
  }
  for (std::uint32_t k = 0; k < total; ++k) {
    if (mask == nullptr || !(*mask)[k]) out.kept_indices.push_back(k);
  }
  if (out.kept_indices.empty()) throw Error(ErrorKind::Size, "patch mask removes every patch");

  const Eigen::Index top = (img.rows() - Eigen::Index(out.grid_rows) * ps) / 2;
  const Eigen::Index left = (img.cols() - Eigen::Index(out.grid_cols) * ps) / 2;
  const auto kept = static_cast<Eigen::Index>(out.kept_indices.size());
  out.patches.resize(kept, ps * ps);
  for (Eigen::Index t = 0; t < kept; ++t) {
    const std::uint32_t k = out.kept_indices[t];
    const Eigen::Index r0 = top + Eigen::Index(k / out.grid_cols) * ps;
    const Eigen::Index c0 = left + Eigen::Index(k % out.grid_cols) * ps;
    for (Eigen::Index i = 0; i < ps; ++i) {
      for (Eigen::Index j = 0; j < ps; ++j) out.patches(t, i * ps + j) = static_cast<T>(img.data(r0 + i, c0 + j));
    }
  }

  const Mat<T> pe = positional_encoding_2d<T>(out.grid_rows, out.grid_cols, cfg.embed_dim);
  const Mat<T> embedded = linear(out.patches, params.patch_w, params.patch_b);
  out.tokens.resize(kept + 1, cfg.embed_dim);
  out.tokens.row(0) = params.cls_token.col(0).transpose();
  for (Eigen::Index t = 0; t < kept; ++t) out.tokens.row(t + 1) = embedded.row(t) + pe.row(out.kept_indices[t]);
  return out;
}

template <typename T>
Prediction<T> prototype_prediction(const Vec<T>& h, const Mat<T>& prototypes, T tau) {
  if (!(tau > T(0))) throw Error(ErrorKind::Parameter, "temperature must be positive");
  Prediction<T> pred;
  pred.h = h;
  pred.tau = tau;
  const T hn = std::max(h.norm(), kNormFloor<T>);
  const Vec<T> qn = prototypes.colwise().norm().transpose().cwiseMax(kNormFloor<T>);
  pred.s = ((prototypes.transpose() * h).array() / (qn.array() * hn)).matrix();
  Vec<T> logits = pred.s / tau;
  logits.array() -= logits.maxCoeff();
  pred.p = logits.array().exp();
  pred.p /= pred.p.sum();
  return pred;
}

template <typename T>
Prediction<T> forward(const AmplitudeImage& img, const ModelParams<T>& params, const PatchMask* mask, T tau,
                      ForwardCache<T>* cache) {
  if (!(tau > T(0))) throw Error(ErrorKind::Parameter, "temperature must be positive");
  const auto& cfg = params.config;
  ForwardCache<T> local;
  ForwardCache<T>& c = cache != nullptr ? *cache : local;

  c.encoded = patch_encode(img, params, mask);
  check_finite(c.encoded.tokens, layer_name(0));
  Mat<T> x = c.encoded.tokens;
  c.n_tokens = x.rows();
  c.blocks.resize(cfg.depth);
  for (std::uint32_t i = 0; i < cfg.depth; ++i) {
    x = block_forward(x, params.blocks[i], cfg.n_heads, c.blocks[i]);
    check_finite(x, layer_name(i + 1));
  }
  const Mat<T> f = layer_norm(x, params.norm_w, params.norm_b, c.final_ln);
  if (cfg.pooling == Pooling::ClassToken) {
    c.z = f.row(0);
  } else {
    c.z = f.bottomRows(f.rows() - 1).colwise().mean();
  }

  c.a1 = linear(c.z, params.head_w1, params.head_b1);
  c.g1 = gelu(c.a1);
  c.a2 = linear(c.g1, params.head_w2, params.head_b2);
  c.g2 = gelu(c.a2);
  c.h = linear(c.g2, params.head_w3, params.head_b3);
  check_finite(c.h, layer_name(cfg.depth + 1));

  Prediction<T> pred = prototype_prediction<T>(c.h.row(0).transpose(), params.prototypes, tau);
  pred.z = c.z.row(0).transpose();
  if (!pred.p.allFinite()) throw NumericalError("non-finite prediction", layer_name(cfg.depth + 1));
  c.h_norm = std::max(c.h.norm(), kNormFloor<T>);
  c.q_norm = params.prototypes.colwise().norm().transpose().cwiseMax(kNormFloor<T>);
  c.pred = pred;
  return pred;
}

template <typename T>
void backward(const ForwardCache<T>& c, const ModelParams<T>& params, const Vec<T>& dloss_dp, ModelParams<T>& g) {
  const auto& cfg = params.config;
  const Prediction<T>& pred = c.pred;
  if (dloss_dp.size() != pred.p.size()) throw Error(ErrorKind::Structural, "gradient length does not match n_prototypes");

  // p = softmax(s / tau)
  const T pdot = dloss_dp.dot(pred.p);
  const Vec<T> ds = (pred.p.array() * (dloss_dp.array() - pdot)).matrix() / pred.tau;

  // s_l = q_l . h / (|q_l| |h|)
  const Vec<T> h = pred.h;
  const T hn = c.h_norm;
  const Vec<T> ds_over_q = (ds.array() / c.q_norm.array()).matrix();
  const Vec<T> dh = (params.prototypes * ds_over_q) / hn - (ds.dot(pred.s) / (hn * hn)) * h;
  g.prototypes.noalias() += (h / hn) * ds_over_q.transpose();
  const Vec<T> col_scale = (ds.array() * pred.s.array() / c.q_norm.array().square()).matrix();
  g.prototypes -= (params.prototypes.array().rowwise() * col_scale.transpose().array()).matrix();

  // Projection head.
  Mat<T> d = dh.transpose();
  d = linear_backward(d, c.g2, params.head_w3, g.head_w3, g.head_b3);
  d = gelu_backward(d, c.a2);
  d = linear_backward(d, c.g1, params.head_w2, g.head_w2, g.head_b2);
  d = gelu_backward(d, c.a1);
  const Mat<T> dz = linear_backward(d, c.z, params.head_w1, g.head_w1, g.head_b1);

  Mat<T> df = Mat<T>::Zero(c.n_tokens, cfg.embed_dim);
  if (cfg.pooling == Pooling::ClassToken) {
    df.row(0) = dz.row(0);
  } else {
    df.bottomRows(c.n_tokens - 1).rowwise() = dz.row(0) / static_cast<T>(c.n_tokens - 1);
  }
  Mat<T> dx = layer_norm_backward(df, c.final_ln, params.norm_w, g.norm_w, g.norm_b);
  for (std::uint32_t i = cfg.depth; i-- > 0;) {
    dx = block_backward(dx, params.blocks[i], cfg.n_heads, c.blocks[i], g.blocks[i]);
  }

  g.cls_token.col(0) += dx.row(0).transpose();
  linear_backward<T>(dx.bottomRows(dx.rows() - 1), c.encoded.patches, params.patch_w, g.patch_w, g.patch_b);
}

template <typename T>
Vec<T> extract_feature(const AmplitudeImage& img, const ModelParams<T>& params) {
  return forward<T>(img, params, nullptr, T(1)).z;
}

#define SARSFE_INSTANTIATE(T)                                                                           \
  template struct ModelParams<T>;                                                                       \
  template Mat<T> positional_encoding_2d<T>(std::uint32_t, std::uint32_t, std::uint32_t);               \
  template EncodedTokens<T> patch_encode<T>(const AmplitudeImage&, const ModelParams<T>&, const PatchMask*); \
  template Prediction<T> prototype_prediction<T>(const Vec<T>&, const Mat<T>&, T);                      \
  template Prediction<T> forward<T>(const AmplitudeImage&, const ModelParams<T>&, const PatchMask*, T,  \
                                    ForwardCache<T>*);                                                  \
  template void backward<T>(const ForwardCache<T>&, const ModelParams<T>&, const Vec<T>&, ModelParams<T>&); \
  template Vec<T> extract_feature<T>(const AmplitudeImage&, const ModelParams<T>&);

SARSFE_INSTANTIATE(float)
SARSFE_INSTANTIATE(double)

}  // namespace sarsfe
