#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sarsfe/encoder.hpp"
#include "sarsfe/sar_data.hpp"

namespace sarsfe {

enum class DistanceMetric { Cosine, Euclidean };
const char* to_string(DistanceMetric metric);
DistanceMetric parse_distance_metric(const std::string& name);

struct EvalConfig {
  std::uint32_t k = 2;
  DistanceMetric metric = DistanceMetric::Cosine;
  std::vector<std::uint32_t> shots{1, 2, 5, 10, 20, 50, 100};
  std::uint32_t repeats = 5;
  std::uint32_t pca_resize = 150;
  std::uint32_t pca_dim = 128;
  float perplexity = 30.0f;
  std::uint32_t tsne_iters = 1000;

  void validate() const;
};

struct FeatureRecord {
  std::string id;
  std::optional<std::string> label;
  std::vector<float> z;
};

using FeatureSet = std::vector<FeatureRecord>;

/// Throws InvalidData when a vector is non-finite or lengths differ.
void validate_features(const FeatureSet& features);

/// CSV `id,label,z0..z{d-1}` with 9 significant digits; an empty label means unlabeled.
std::string features_to_csv(const FeatureSet& features);
FeatureSet features_from_csv(const std::string& text);
void write_features(const std::filesystem::path& path, const FeatureSet& features);
FeatureSet read_features(const std::filesystem::path& path);

/// Student features for every manifest entry, in manifest order. Unreadable samples are
/// skipped with a warning; more than 10% skipped aborts.
FeatureSet extract_all(const DatasetManifest& manifest, const ModelParams<float>& student,
                       unsigned threads = 0);

struct KnnResult {
  std::vector<std::string> predictions;
  std::size_t correct = 0;
  std::size_t evaluated = 0;  // queries carrying a label
  std::optional<double> accuracy;
};

/// Majority vote among the k nearest support points. Equal distances are ordered by
/// support index; a vote tie goes to the tied label whose nearest member is closest.
KnnResult knn_classify(const FeatureSet& support, const FeatureSet& query, std::uint32_t k,
                       DistanceMetric metric = DistanceMetric::Cosine);

/// Indices into the labeled items used for the split.
struct FewShotSplit {
  std::uint32_t shots_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> support;
  std::vector<std::string> query;
};

/// `labels[i]` belongs to `ids[i]`; unlabeled items take part in neither side.
FewShotSplit make_split(const std::vector<std::string>& ids,
                        const std::vector<std::optional<std::string>>& labels, std::uint32_t shots,
                        std::uint64_t seed);
FewShotSplit make_split(const DatasetManifest& manifest, std::uint32_t shots, std::uint64_t seed);
FewShotSplit make_split(const FeatureSet& features, std::uint32_t shots, std::uint64_t seed);

struct CurvePoint {
  std::uint32_t shots = 0;
  double mean_accuracy = 0;
  double std_accuracy = 0;  // population standard deviation over repeats
  std::vector<double> accuracies;
};

/// For each shot count, `repeats` splits seeded seed + r, each classified with k-NN.
std::vector<CurvePoint> few_shot_curve(const FeatureSet& features, const std::vector<std::uint32_t>& shots,
                                       std::uint32_t repeats, std::uint32_t k, std::uint64_t seed,
                                       DistanceMetric metric = DistanceMetric::Cosine);
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

// --- PCA baseline ----------------------------------------------------------------------

/// Bilinear resampling with half-pixel centres.
ImageD resize_bilinear(const ImageD& img, Eigen::Index rows, Eigen::Index cols);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // dim x D, orthonormal rows
  Eigen::VectorXd variances;   // eigenvalues of the covariance, descending
};

/// Principal directions of the rows of X. Each direction is signed so that its largest
/// magnitude entry is positive.
PcaModel pca_fit(const Eigen::MatrixXd& X, std::uint32_t dim);
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X);

/// log-normalize -> resize x resize -> flatten -> PCA coefficients.
FeatureSet pca_baseline(const DatasetManifest& manifest, std::uint32_t resize = 150,
                        std::uint32_t dim = 128, unsigned threads = 0);

// --- t-SNE -------------------------------------------------------------------------------

struct TsneConfig {
  float perplexity = 30.0f;
  std::uint32_t iters = 1000;
  std::uint64_t seed = 0;
  float learning_rate = 200.0f;
  float exaggeration = 12.0f;
  std::uint32_t exaggeration_iters = 250;
  std::uint32_t kl_every = 50;
};

struct TsneResult {
  Eigen::MatrixXd embedding;  // N x 2
  std::vector<std::pair<std::uint32_t, double>> kl_trace;  // (iteration, KL) after that many iterations
  double final_kl = 0;
  double perplexity_used = 0;
};

/// Exact t-SNE on the rows of X.
TsneResult tsne(const Eigen::MatrixXd& X, const TsneConfig& cfg, unsigned threads = 0);

struct ProjectedPoint {
  std::string id;
  std::optional<std::string> label;
  double x = 0;
  double y = 0;
};

std::vector<ProjectedPoint> project_2d(const FeatureSet& features, const TsneConfig& cfg,
                                       TsneResult* result = nullptr, unsigned threads = 0);
std::string projection_to_csv(const std::vector<ProjectedPoint>& points);

Eigen::MatrixXd feature_matrix(const FeatureSet& features);

}  // namespace sarsfe
