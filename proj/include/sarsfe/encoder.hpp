#pragma once

// Tiny Vision Transformer with a projection head and a prototype bank.
//
// Tokens are stored one per row: a sequence of N tokens of width d_e is an N x d_e
// matrix, row 0 being the class token. Every layer has a hand-written backward pass;
// the whole module is templated on the scalar so the float training path and the
// double verification path share one implementation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sarsfe/augment.hpp"
#include "sarsfe/error.hpp"
#include "sarsfe/sar_data.hpp"

namespace sarsfe {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Pooling { ClassToken, MeanPool };

struct EncoderConfig {
  std::uint32_t patch_size = 8;
  std::uint32_t embed_dim = 192;
  std::uint32_t depth = 4;
  std::uint32_t n_heads = 3;
  std::uint32_t mlp_hidden = 768;
  std::uint32_t head_hidden = 256;
  std::uint32_t proj_dim = 256;
  std::uint32_t n_prototypes = 256;
  Pooling pooling = Pooling::ClassToken;

  /// Defaults above: depth 4, head width 256.
  static EncoderConfig desk();
  /// ViT-Tiny/8: depth 12, d_e 192, 3 heads, head width 2048.
  static EncoderConfig full();

  void validate() const;
  /// floor(rows/patch) * floor(cols/patch).
  std::uint32_t token_count(Eigen::Index rows, Eigen::Index cols) const;
};

bool operator==(const EncoderConfig& a, const EncoderConfig& b);

template <typename T>
struct NamedTensor {
  std::string name;
  T* value;
  bool is_vector;  // stored as 1-D on disk
};

template <typename T>
struct BlockParams {
  Mat<T> norm1_w, norm1_b;
  Mat<T> qkv_w, qkv_b;    // 3d x d, packed [q; k; v]
  Mat<T> proj_w, proj_b;
  Mat<T> norm2_w, norm2_b;
  Mat<T> fc1_w, fc1_b;
  Mat<T> fc2_w, fc2_b;
};

/// All learnable tensors of one network. Linear weights are out x in; biases and norm
/// parameters are column vectors.
template <typename T>
struct ModelParams {
  EncoderConfig config;
  Mat<T> patch_w, patch_b;  // d_e x patch^2, d_e
  Mat<T> cls_token;         // d_e
  std::vector<BlockParams<T>> blocks;
  Mat<T> norm_w, norm_b;
  Mat<T> head_w1, head_b1;  // head_hidden x d_e
  Mat<T> head_w2, head_b2;  // head_hidden x head_hidden
  Mat<T> head_w3, head_b3;  // proj_dim x head_hidden
  Mat<T> prototypes;        // proj_dim x n_prototypes

  static ModelParams zeros(const EncoderConfig& cfg);
  static ModelParams init(const EncoderConfig& cfg, std::uint64_t seed);

  /// Stable, ordered list of every tensor with its checkpoint name.
  std::vector<NamedTensor<Mat<T>>> named_tensors();
  std::vector<NamedTensor<const Mat<T>>> named_tensors() const;

  std::size_t num_parameters() const;
  bool all_finite() const;

  template <typename U>
  ModelParams<U> cast() const;
};

/// Throws Structural when the two parameter sets differ in any tensor shape.
template <typename T>
void check_same_shape(const ModelParams<T>& a, const ModelParams<T>& b);

template <typename T>
struct EncodedTokens {
  Mat<T> tokens;                     // (1 + kept) x d_e, class token first
  std::vector<std::uint32_t> kept_indices;
  std::uint32_t grid_rows = 0;
  std::uint32_t grid_cols = 0;
  Mat<T> patches;                    // kept x patch^2, raw pixels (for the backward pass)
};

template <typename T>
struct Prediction {
  Vec<T> z;  // encoder feature, d_e
  Vec<T> h;  // projection, d_h
  Vec<T> s;  // cosine scores, n
  Vec<T> p;  // softmax(s / tau)
  T tau{};
};

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  Vec<T> inv_std;
};

template <typename T>
struct BlockCache {
  LayerNormCache<T> ln1;
  Mat<T> qkv;
  std::vector<Mat<T>> attn;  // per-head row-softmax weights
  Mat<T> heads_out;          // concatenated head outputs, N x d
  LayerNormCache<T> ln2;
  Mat<T> ln2_out;
  Mat<T> fc1_pre;            // before GELU
  Mat<T> fc1_act;
  Mat<T> ln1_out;
};

/// Intermediate values retained by forward() for backward().
template <typename T>
struct ForwardCache {
  EncodedTokens<T> encoded;
  std::vector<BlockCache<T>> blocks;
  LayerNormCache<T> final_ln;
  Eigen::Index n_tokens = 0;
  Mat<T> z, a1, g1, a2, g2, h;  // 1 x width rows
  Vec<T> q_norm;
  T h_norm{};
  Prediction<T> pred;
};

/// 2D fixed sine-cosine table for a grid_rows x grid_cols patch grid (row-major patch order).
template <typename T>
Mat<T> positional_encoding_2d(std::uint32_t grid_rows, std::uint32_t grid_cols, std::uint32_t dim);

/// Centre-trims to whole patches, embeds, adds the positional table, drops masked
/// patches and prepends the class token.
template <typename T>
EncodedTokens<T> patch_encode(const AmplitudeImage& img, const ModelParams<T>& params,
                              const PatchMask* mask = nullptr);

/// Cosine scores against every prototype column and p = softmax(s / tau).
template <typename T>
Prediction<T> prototype_prediction(const Vec<T>& h, const Mat<T>& prototypes, T tau);

template <typename T>
Prediction<T> forward(const AmplitudeImage& img, const ModelParams<T>& params, const PatchMask* mask,
                      T tau, ForwardCache<T>* cache = nullptr);

/// Accumulates dL/dparams into `grads` given dL/dp for a cached forward pass.
template <typename T>
void backward(const ForwardCache<T>& cache, const ModelParams<T>& params, const Vec<T>& dloss_dp,
              ModelParams<T>& grads);

/// Unmasked forward returning z only.
template <typename T>
Vec<T> extract_feature(const AmplitudeImage& img, const ModelParams<T>& params);

// --- template members ------------------------------------------------------------

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out = ModelParams<U>::zeros(config);
  auto dst = out.named_tensors();
  auto src = named_tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<U>();
  return out;
}

template <typename T>
void check_same_shape(const ModelParams<T>& a, const ModelParams<T>& b) {
  const auto ta = a.named_tensors();
  const auto tb = b.named_tensors();
  if (ta.size() != tb.size()) throw Error(ErrorKind::Structural, "parameter sets differ in tensor count");
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].value->rows() != tb[i].value->rows() ||
        ta[i].value->cols() != tb[i].value->cols()) {
      throw Error(ErrorKind::Structural, "parameter shape mismatch at " + ta[i].name);
    }
  }
}

}  // namespace sarsfe
