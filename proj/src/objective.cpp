#include "sarsfe/objective.hpp"

#include <algorithm>
#include <cmath>

#include "sarsfe/error.hpp"
#include "sarsfe/parallel.hpp"

namespace sarsfe {

void LossConfig::validate() const {
  if (!(tau_teacher > 0.0f)) throw Error(ErrorKind::Parameter, "tau_teacher must be positive");
  if (!(tau_teacher < tau_student)) throw Error(ErrorKind::Parameter, "tau_teacher must be smaller than tau_student");
  if (!(lambda >= 0.0f)) throw Error(ErrorKind::Parameter, "lambda must be non-negative");
}

template <typename T>
void BatchPredictions<T>::validate() const {
  if (teacher.rows() < 1 || views_per_image < 1) throw Error(ErrorKind::Structural, "empty batch predictions");
  if (student.rows() != teacher.rows() * static_cast<Eigen::Index>(views_per_image) ||
      student.cols() != teacher.cols()) {
    throw Error(ErrorKind::Structural, "student predictions must be b*(k-1) x n");
  }
  const T tol = std::is_same_v<T, float> ? T(1e-4) : T(1e-9);
  for (const Mat<T>* m : {&teacher, &student}) {
    if (!m->allFinite()) throw Error(ErrorKind::Numerical, "non-finite probability");
    if ((m->array() < T(0)).any()) throw Error(ErrorKind::Numerical, "negative probability");
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      if (std::abs(m->row(i).sum() - T(1)) > tol) throw Error(ErrorKind::InvalidData, "probability row does not sum to 1");
    }
  }
}

namespace {

template <typename T>
T floored_log(T x) {
  return std::log(std::max(x, static_cast<T>(kLogFloor)));
}

template <typename T>
Vec<T> mean_student(const BatchPredictions<T>& bp) {
  return bp.student.colwise().mean().transpose();
}

}  // namespace

template <typename T>
T similarity_loss(const BatchPredictions<T>& bp) {
  bp.validate();
  T total = 0;
  for (Eigen::Index r = 0; r < bp.student.rows(); ++r) {
    const Eigen::Index i = r / static_cast<Eigen::Index>(bp.views_per_image);
    for (Eigen::Index l = 0; l < bp.student.cols(); ++l) {
      total -= bp.teacher(i, l) * floored_log(bp.student(r, l));
    }
  }
  return total / static_cast<T>(bp.student.rows());
}

template <typename T>
T entropy_regularizer(const BatchPredictions<T>& bp) {
  bp.validate();
  const Vec<T> mean = mean_student(bp);
  T r = 0;
  for (Eigen::Index l = 0; l < mean.size(); ++l) r -= mean(l) * floored_log(mean(l));
  return r;
}

template <typename T>
LossValue<T> total_loss(const BatchPredictions<T>& bp, T lambda) {
  LossValue<T> v;
  v.l_sim = similarity_loss(bp);
  v.r = entropy_regularizer(bp);
  v.loss = v.l_sim - lambda * v.r;
  return v;
}

template <typename T>
Mat<T> student_probability_gradient(const BatchPredictions<T>& bp, T lambda) {
  bp.validate();
  const auto rows = bp.student.rows();
  const T inv_pairs = T(1) / static_cast<T>(rows);
  const T floor = static_cast<T>(kLogFloor);
  const Vec<T> mean = mean_student(bp);
  // dR/dmean_l = -(log mean_l + 1) above the floor, -log(floor) below it.
  Vec<T> dr(mean.size());
  for (Eigen::Index l = 0; l < mean.size(); ++l) {
    dr(l) = mean(l) > floor ? -(std::log(mean(l)) + T(1)) : -std::log(floor);
  }
  Mat<T> g(rows, bp.student.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index i = r / static_cast<Eigen::Index>(bp.views_per_image);
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      const T p = bp.student(r, l);
      const T dsim = p > floor ? -bp.teacher(i, l) / p : T(0);
      g(r, l) = inv_pairs * (dsim - lambda * dr(l));
    }
  }
  return g;
}

namespace {

// Fixed number of gradient accumulators; the grouping depends only on the view count.
constexpr std::size_t kGradientGroups = 8;

template <typename T>
struct StudentSlot {
  const AmplitudeImage* image;
  const PatchMask* mask;
};

template <typename T>
std::vector<StudentSlot<T>> student_slots(std::span<const ViewSet> batch) {
  if (batch.empty()) throw Error(ErrorKind::Parameter, "empty batch");
  const std::size_t per_image = batch.front().student_views.size();
  if (per_image == 0) throw Error(ErrorKind::Structural, "view set without student views");
  std::vector<StudentSlot<T>> slots;
  for (const auto& vs : batch) {
    if (vs.student_views.size() != per_image) throw Error(ErrorKind::Structural, "view sets differ in view count");
    for (std::size_t j = 0; j < per_image; ++j) {
      const PatchMask* mask = nullptr;
      if (j < vs.student_patch_masks.size() && vs.student_patch_masks[j]) mask = &*vs.student_patch_masks[j];
      slots.push_back({&vs.student_views[j], mask});
    }
  }
  return slots;
}

template <typename T>
Mat<T> teacher_probabilities(std::span<const ViewSet> batch, const ModelParams<T>& teacher, T tau,
                             unsigned threads) {
  Mat<T> out(static_cast<Eigen::Index>(batch.size()), teacher.config.n_prototypes);
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = forward<T>(batch[i].teacher_view, teacher, nullptr, tau).p.transpose();
  });
  return out;
}

}  // namespace

template <typename T>
LossValue<T> evaluate_loss(std::span<const ViewSet> batch, const ModelParams<T>& student,
                           const ModelParams<T>& teacher, const LossConfig& cfg) {
  cfg.validate();
  const auto slots = student_slots<T>(batch);
  BatchPredictions<T> bp;
  bp.views_per_image = batch.front().student_views.size();
  bp.teacher = teacher_probabilities<T>(batch, teacher, static_cast<T>(cfg.tau_teacher), 1);
  bp.student.resize(static_cast<Eigen::Index>(slots.size()), student.config.n_prototypes);
  for (std::size_t v = 0; v < slots.size(); ++v) {
    bp.student.row(static_cast<Eigen::Index>(v)) =
        forward<T>(*slots[v].image, student, slots[v].mask, static_cast<T>(cfg.tau_student)).p.transpose();
  }
  return total_loss(bp, static_cast<T>(cfg.lambda));
}

template <typename T>
LossGradients<T> loss_gradients(std::span<const ViewSet> batch, const ModelParams<T>& student,
                                const ModelParams<T>& teacher, const LossConfig& cfg, unsigned threads) {
  cfg.validate();
  check_same_shape(student, teacher);
  const auto slots = student_slots<T>(batch);
  const T tau_s = static_cast<T>(cfg.tau_student);

  LossGradients<T> out;
  auto& bp = out.predictions;
  bp.views_per_image = batch.front().student_views.size();
  bp.teacher = teacher_probabilities<T>(batch, teacher, static_cast<T>(cfg.tau_teacher), threads);

  std::vector<ForwardCache<T>> caches(slots.size());
  bp.student.resize(static_cast<Eigen::Index>(slots.size()), student.config.n_prototypes);
  parallel_for(slots.size(), threads, [&](std::size_t v) {
    bp.student.row(static_cast<Eigen::Index>(v)) =
        forward<T>(*slots[v].image, student, slots[v].mask, tau_s, &caches[v]).p.transpose();
  });

  out.value = total_loss(bp, static_cast<T>(cfg.lambda));
  const Mat<T> dp = student_probability_gradient(bp, static_cast<T>(cfg.lambda));

  const std::size_t groups = std::min(kGradientGroups, slots.size());
  std::vector<ModelParams<T>> partial(groups);
  parallel_for(groups, threads, [&](std::size_t g) {
    partial[g] = ModelParams<T>::zeros(student.config);
    const std::size_t begin = slots.size() * g / groups;
    const std::size_t end = slots.size() * (g + 1) / groups;
    for (std::size_t v = begin; v < end; ++v) {
      backward<T>(caches[v], student, dp.row(static_cast<Eigen::Index>(v)).transpose(), partial[g]);
      caches[v] = ForwardCache<T>{};
    }
  });

  out.grads = std::move(partial[0]);
  auto acc = out.grads.named_tensors();
  for (std::size_t g = 1; g < groups; ++g) {
    const auto part = std::as_const(partial[g]).named_tensors();
    for (std::size_t t = 0; t < acc.size(); ++t) *acc[t].value += *part[t].value;
  }
  for (const auto& t : acc) {
    if (!t.value->allFinite()) throw NumericalError("non-finite gradient", t.name);
  }
  return out;
}

#define SARSFE_INSTANTIATE(T)                                                                   \
  template struct BatchPredictions<T>;                                                          \
  template T similarity_loss<T>(const BatchPredictions<T>&);                                    \
  template T entropy_regularizer<T>(const BatchPredictions<T>&);                                \
  template LossValue<T> total_loss<T>(const BatchPredictions<T>&, T);                           \
  template Mat<T> student_probability_gradient<T>(const BatchPredictions<T>&, T);               \
  template LossGradients<T> loss_gradients<T>(std::span<const ViewSet>, const ModelParams<T>&, \
                                              const ModelParams<T>&, const LossConfig&, unsigned); \
  template LossValue<T> evaluate_loss<T>(std::span<const ViewSet>, const ModelParams<T>&,       \
                                         const ModelParams<T>&, const LossConfig&);

SARSFE_INSTANTIATE(float)
SARSFE_INSTANTIATE(double)

}  // namespace sarsfe
