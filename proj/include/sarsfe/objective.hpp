#pragma once

#include <cstddef>
#include <span>

#include "sarsfe/augment.hpp"
#include "sarsfe/encoder.hpp"

namespace sarsfe {

struct LossConfig {
  float tau_student = 0.1f;
  float tau_teacher = 0.04f;
  float lambda = 1.0f;

  void validate() const;
};

/// Probabilities for one batch. Student rows are image-major: rows
/// [i * views_per_image, (i + 1) * views_per_image) belong to image i.
template <typename T>
struct BatchPredictions {
  Mat<T> teacher;  // b x n
  Mat<T> student;  // b * (k - 1) x n
  std::size_t views_per_image = 1;

  std::size_t batch_size() const { return static_cast<std::size_t>(teacher.rows()); }
  /// Throws on inconsistent shapes, negative / non-finite entries or rows not summing to 1.
  void validate() const;
};

inline constexpr double kLogFloor = 1e-12;

/// Cross-entropy of every student view against its image's teacher row, averaged over
/// the b(k-1) pairs. Teacher rows are constants.
template <typename T>
T similarity_loss(const BatchPredictions<T>& bp);

/// Entropy of the mean student prediction.
template <typename T>
T entropy_regularizer(const BatchPredictions<T>& bp);

template <typename T>
struct LossValue {
  T loss{};
  T l_sim{};
  T r{};
};

/// L = L_sim - lambda * R.
template <typename T>
LossValue<T> total_loss(const BatchPredictions<T>& bp, T lambda);
template <typename T>
T total_loss(const BatchPredictions<T>& bp, const LossConfig& cfg) {
  return total_loss(bp, static_cast<T>(cfg.lambda)).loss;
}

/// dL/dp for every student row (same layout as bp.student).
template <typename T>
Mat<T> student_probability_gradient(const BatchPredictions<T>& bp, T lambda);

template <typename T>
struct LossGradients {
  LossValue<T> value;
  ModelParams<T> grads;  // student parameters only
  BatchPredictions<T> predictions;
};

/// Forward of teacher views (tau_teacher, no masks, detached) and student views
/// (tau_student, masked), loss, and backpropagation into the student parameters.
/// Per-view gradients are reduced in a fixed grouping so the result does not depend
/// on the number of worker threads.
template <typename T>
LossGradients<T> loss_gradients(std::span<const ViewSet> batch, const ModelParams<T>& student,
                                const ModelParams<T>& teacher, const LossConfig& cfg,
                                unsigned threads = 0);

/// Loss only, same forward path as loss_gradients (used by finite-difference checks).
template <typename T>
LossValue<T> evaluate_loss(std::span<const ViewSet> batch, const ModelParams<T>& student,
                           const ModelParams<T>& teacher, const LossConfig& cfg);

}  // namespace sarsfe
