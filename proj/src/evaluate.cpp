#include "sarsfe/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "sarsfe/error.hpp"
#include "sarsfe/log.hpp"
#include "sarsfe/parallel.hpp"
#include "sarsfe/rng.hpp"
#include "sarsfe/tensor_io.hpp"

namespace sarsfe {

namespace fs = std::filesystem;

const char* to_string(DistanceMetric metric) {
  return metric == DistanceMetric::Cosine ? "cosine" : "euclidean";
}

DistanceMetric parse_distance_metric(const std::string& name) {
  if (name == "cosine") return DistanceMetric::Cosine;
  if (name == "euclidean") return DistanceMetric::Euclidean;
  throw Error(ErrorKind::Parameter, "unknown distance metric '" + name + "'");
}

void EvalConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::Parameter, "k must be >= 1");
  if (repeats < 1) throw Error(ErrorKind::Parameter, "repeats must be >= 1");
  for (auto s : shots) {
    if (s < 1) throw Error(ErrorKind::Parameter, "shot counts must be >= 1");
  }
  if (pca_resize < 1 || pca_dim < 1) throw Error(ErrorKind::Parameter, "pca_resize and pca_dim must be >= 1");
  if (!(perplexity > 0.0f)) throw Error(ErrorKind::Parameter, "perplexity must be positive");
  if (tsne_iters < 1) throw Error(ErrorKind::Parameter, "tsne_iters must be >= 1");
}

void validate_features(const FeatureSet& features) {
  if (features.empty()) return;
  const std::size_t d = features.front().z.size();
  std::set<std::string> ids;
  for (const auto& f : features) {
    if (f.z.size() != d) throw Error(ErrorKind::InvalidData, "feature length differs for " + f.id);
    for (float v : f.z) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidData, "non-finite feature for " + f.id);
    }
    if (!ids.insert(f.id).second) throw Error(ErrorKind::DuplicateId, "duplicate feature id " + f.id);
  }
}

// --- CSV ---------------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorKind::Format, "unterminated quote on CSV line " + std::to_string(line_no));
  out.push_back(std::move(cur));
  return out;
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::string features_to_csv(const FeatureSet& features) {
  validate_features(features);
  const std::size_t d = features.empty() ? 0 : features.front().z.size();
  std::string out = "id,label";
  for (std::size_t i = 0; i < d; ++i) out += ",z" + std::to_string(i);
  out += "\n";
  for (const auto& f : features) {
    out += csv_field(f.id) + "," + csv_field(f.label.value_or(""));
    for (float v : f.z) out += "," + fmt9(v);
    out += "\n";
  }
  return out;
}

FeatureSet features_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line, 1);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw Error(ErrorKind::Format, "feature file header must start with id,label");
  }
  const std::size_t d = header.size() - 2;
  FeatureSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_csv_line(line, line_no);
    if (cols.size() != d + 2) {
      throw Error(ErrorKind::Format, "feature file line " + std::to_string(line_no) + " has " +
                                         std::to_string(cols.size()) + " fields, expected " + std::to_string(d + 2));
    }
    FeatureRecord r;
    r.id = cols[0];
    if (!cols[1].empty()) r.label = cols[1];
    r.z.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
      try {
        std::size_t used = 0;
        r.z.push_back(std::stof(cols[i + 2], &used));
        if (used != cols[i + 2].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(ErrorKind::Format, "bad number on feature file line " + std::to_string(line_no));
      }
    }
    out.push_back(std::move(r));
  }
  validate_features(out);
  return out;
}

void write_features(const fs::path& path, const FeatureSet& features) { write_text(path, features_to_csv(features)); }

FeatureSet read_features(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::File, "feature file not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  return features_from_csv(std::string(bytes.begin(), bytes.end()));
}

// --- extraction --------------------------------------------------------------------------

namespace {

// Runs fn over every manifest entry in parallel; failures are logged and dropped, and
// more than 10% failures abort.
template <typename R, typename Fn>
std::vector<std::pair<std::size_t, R>> map_samples(const DatasetManifest& manifest, unsigned threads, Fn fn) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<R>> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      results[i] = fn(load_sample(manifest.entries[i].path));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<std::pair<std::size_t, R>> out;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      out.emplace_back(i, std::move(*results[i]));
    } else {
      ++failed;
      log_warn("skipping " + manifest.entries[i].id + ": " + errors[i]);
    }
  }
  if (failed * 10 > n) throw Error(ErrorKind::Protocol, "more than 10% of the samples failed");
  return out;
}

}  // namespace

FeatureSet extract_all(const DatasetManifest& manifest, const ModelParams<float>& student, unsigned threads) {
  if (manifest.entries.empty()) throw Error(ErrorKind::EmptyDataset, "manifest is empty");
  auto feats = map_samples<Vec<float>>(manifest, threads, [&](const SlcImage& img) {
    return extract_feature<float>(log_normalize(img), student);
  });
  FeatureSet out;
  out.reserve(feats.size());
  for (auto& [i, z] : feats) {
    const auto& e = manifest.entries[i];
    out.push_back({e.id, e.label, std::vector<float>(z.data(), z.data() + z.size())});
  }
  return out;
}

// --- k-NN --------------------------------------------------------------------------------

KnnResult knn_classify(const FeatureSet& support, const FeatureSet& query, std::uint32_t k, DistanceMetric metric) {
  if (support.empty()) throw Error(ErrorKind::Parameter, "empty support set");
  if (k < 1 || k > support.size()) {
    throw Error(ErrorKind::Parameter, "k = " + std::to_string(k) + " exceeds the support size " +
                                          std::to_string(support.size()));
  }
  const std::size_t d = support.front().z.size();
  for (const auto& s : support) {
    if (!s.label) throw Error(ErrorKind::Protocol, "support item " + s.id + " has no label");
    if (s.z.size() != d) throw Error(ErrorKind::InvalidData, "feature length differs for " + s.id);
  }
  for (const auto& q : query) {
    if (q.z.size() != d) throw Error(ErrorKind::InvalidData, "feature length differs for " + q.id);
  }

  const Eigen::MatrixXd S = feature_matrix(support);
  Eigen::VectorXd s_norm = S.rowwise().norm().cwiseMax(1e-12);

  KnnResult res;
  res.predictions.resize(query.size());
  parallel_for(query.size(), 0, [&](std::size_t qi) {
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXf>(query[qi].z.data(), d).cast<double>();
    Eigen::VectorXd dist;
    if (metric == DistanceMetric::Cosine) {
      dist = (1.0 - (S * q).array() / (s_norm.array() * std::max(q.norm(), 1e-12))).matrix();
    } else {
      dist = (S.rowwise() - q.transpose()).rowwise().norm();
    }
    std::vector<std::size_t> idx(support.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
      return dist(a) < dist(b) || (dist(a) == dist(b) && a < b);
    });
    // label -> (votes, rank of its nearest member)
    std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> votes;
    for (std::uint32_t r = 0; r < k; ++r) {
      auto [it, fresh] = votes.try_emplace(*support[idx[r]].label, 0u, r);
      ++it->second.first;
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second.first > best->second.first ||
          (it->second.first == best->second.first && it->second.second < best->second.second)) {
        best = it;
      }
    }
    res.predictions[qi] = best->first;
  });
  for (std::size_t i = 0; i < query.size(); ++i) {
    if (!query[i].label) continue;
    ++res.evaluated;
    if (*query[i].label == res.predictions[i]) ++res.correct;
  }
  if (res.evaluated > 0) res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.evaluated);
  return res;
}

// --- splits ------------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

FewShotSplit make_split(const std::vector<std::string>& ids, const std::vector<std::optional<std::string>>& labels,
                        std::uint32_t shots, std::uint64_t seed) {
  if (ids.size() != labels.size()) throw Error(ErrorKind::Parameter, "ids and labels differ in length");
  if (shots < 1) throw Error(ErrorKind::Parameter, "shots must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (labels[i]) by_class[*labels[i]].push_back(i);
  }
  if (by_class.empty()) throw Error(ErrorKind::Protocol, "no labeled items to split");

  FewShotSplit split;
  split.shots_per_class = shots;
  split.seed = seed;
  std::vector<bool> in_support(ids.size(), false);
  for (auto& [label, members] : by_class) {
    Rng rng(hash_keys({seed, fnv1a(label)}));
    const std::size_t take = std::min<std::size_t>(shots, members.size());
    // Partial Fisher-Yates over the class members.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(members.size() - i));
      std::swap(members[i], members[j]);
      in_support[members[i]] = true;
      split.support.push_back(ids[members[i]]);
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (labels[i] && !in_support[i]) split.query.push_back(ids[i]);
  }
  return split;
}

FewShotSplit make_split(const DatasetManifest& manifest, std::uint32_t shots, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::vector<std::optional<std::string>> labels;
  for (const auto& e : manifest.entries) {
    ids.push_back(e.id);
    labels.push_back(e.label);
  }
  return make_split(ids, labels, shots, seed);
}

FewShotSplit make_split(const FeatureSet& features, std::uint32_t shots, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::vector<std::optional<std::string>> labels;
  for (const auto& f : features) {
    ids.push_back(f.id);
    labels.push_back(f.label);
  }
  return make_split(ids, labels, shots, seed);
}

std::vector<CurvePoint> few_shot_curve(const FeatureSet& features, const std::vector<std::uint32_t>& shots,
                                       std::uint32_t repeats, std::uint32_t k, std::uint64_t seed,
                                       DistanceMetric metric) {
  if (repeats < 1) throw Error(ErrorKind::Parameter, "repeats must be >= 1");
  validate_features(features);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < features.size(); ++i) index[features[i].id] = i;

  std::vector<CurvePoint> curve;
  for (std::uint32_t s : shots) {
    CurvePoint pt;
    pt.shots = s;
    for (std::uint32_t r = 0; r < repeats; ++r) {
      const FewShotSplit split = make_split(features, s, seed + r);
      if (split.query.empty()) throw Error(ErrorKind::Protocol, "no query items left at " + std::to_string(s) + " shots");
      FeatureSet sup;
      FeatureSet qry;
      for (const auto& id : split.support) sup.push_back(features[index.at(id)]);
      for (const auto& id : split.query) qry.push_back(features[index.at(id)]);
      pt.accuracies.push_back(*knn_classify(sup, qry, k, metric).accuracy);
    }
    const double n = static_cast<double>(pt.accuracies.size());
    pt.mean_accuracy = std::accumulate(pt.accuracies.begin(), pt.accuracies.end(), 0.0) / n;
    double var = 0;
    for (double a : pt.accuracies) var += (a - pt.mean_accuracy) * (a - pt.mean_accuracy);
    pt.std_accuracy = std::sqrt(var / n);
    curve.push_back(std::move(pt));
  }
  return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "shots,mean_acc,std_acc\n";
  for (const auto& p : curve) out += std::to_string(p.shots) + "," + fmt9(p.mean_accuracy) + "," + fmt9(p.std_accuracy) + "\n";
  return out;
}

// --- PCA ---------------------------------------------------------------------------------

ImageD resize_bilinear(const ImageD& img, Eigen::Index rows, Eigen::Index cols) {
  if (img.size() == 0 || rows < 1 || cols < 1) throw Error(ErrorKind::Parameter, "resize of an empty image");
  auto axis = [](Eigen::Index out_i, Eigen::Index in_n, Eigen::Index out_n) {
    double src = (static_cast<double>(out_i) + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
    const auto i0 = static_cast<Eigen::Index>(std::floor(src));
    const Eigen::Index i1 = std::min(i0 + 1, in_n - 1);
    return std::tuple{i0, i1, src - static_cast<double>(i0)};
  };
  ImageD out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto [r0, r1, fr] = axis(i, img.rows(), rows);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto [c0, c1, fc] = axis(j, img.cols(), cols);
      const double top = img(r0, c0) * (1 - fc) + img(r0, c1) * fc;
      const double bot = img(r1, c0) * (1 - fc) + img(r1, c1) * fc;
      out(i, j) = top * (1 - fr) + bot * fr;
    }
  }
  return out;
}

PcaModel pca_fit(const Eigen::MatrixXd& X, std::uint32_t dim) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 2) throw Error(ErrorKind::Protocol, "PCA needs at least two samples");
  if (dim < 1 || dim > std::min(n, d)) {
    throw Error(ErrorKind::Parameter, "PCA dim " + std::to_string(dim) + " exceeds min(samples, features) = " +
                                          std::to_string(std::min(n, d)));
  }
  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd Xc = X.rowwise() - model.mean.transpose();
  model.components = Eigen::MatrixXd::Zero(dim, d);
  model.variances = Eigen::VectorXd::Zero(dim);
  const double scale = 1.0 / static_cast<double>(n - 1);

  if (n <= d) {
    // Gram route: eigenvectors u of Xc Xc^T give directions Xc^T u / sqrt(lambda).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xc * Xc.transpose());
    if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "eigendecomposition failed");
    const double tiny = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0) * 1e-12;
    for (std::uint32_t c = 0; c < dim; ++c) {
      const Eigen::Index src = n - 1 - c;
      const double lambda = es.eigenvalues()(src);
      if (lambda <= tiny) continue;  // zero-variance direction: row left at zero
      model.components.row(c) = (Xc.transpose() * es.eigenvectors().col(src)).transpose() / std::sqrt(lambda);
      model.variances(c) = lambda * scale;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xc.transpose() * Xc);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "eigendecomposition failed");
    for (std::uint32_t c = 0; c < dim; ++c) {
      const Eigen::Index src = d - 1 - c;
      model.components.row(c) = es.eigenvectors().col(src).transpose();
      model.variances(c) = std::max(es.eigenvalues()(src), 0.0) * scale;
    }
  }
  for (std::uint32_t c = 0; c < dim; ++c) {
    Eigen::Index at = 0;
    model.components.row(c).cwiseAbs().maxCoeff(&at);
    if (model.components(c, at) < 0) model.components.row(c) *= -1.0;
  }
  return model;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.mean.size()) throw Error(ErrorKind::InvalidData, "PCA input width mismatch");
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

FeatureSet pca_baseline(const DatasetManifest& manifest, std::uint32_t resize, std::uint32_t dim, unsigned threads) {
  if (manifest.entries.empty()) throw Error(ErrorKind::EmptyDataset, "manifest is empty");
  if (resize < 1) throw Error(ErrorKind::Parameter, "resize must be >= 1");
  const Eigen::Index side = resize;
  auto rows = map_samples<Eigen::VectorXd>(manifest, threads, [&](const SlcImage& img) {
    const ImageD a = log_normalize(img).data.cast<double>();
    const ImageD r = resize_bilinear(a, side, side);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), r.size()));
  });
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), side * side);
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = rows[i].second.transpose();
  const PcaModel model = pca_fit(X, dim);
  const Eigen::MatrixXd coeff = pca_project(model, X);
  FeatureSet out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& e = manifest.entries[rows[i].first];
    FeatureRecord r{e.id, e.label, std::vector<float>(dim)};
    for (std::uint32_t c = 0; c < dim; ++c) r.z[c] = static_cast<float>(coeff(static_cast<Eigen::Index>(i), c));
    out.push_back(std::move(r));
  }
  return out;
}

Eigen::MatrixXd feature_matrix(const FeatureSet& features) {
  const Eigen::Index d = features.empty() ? 0 : static_cast<Eigen::Index>(features.front().z.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(features.size()), d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (static_cast<Eigen::Index>(features[i].z.size()) != d) {
      throw Error(ErrorKind::InvalidData, "feature length differs for " + features[i].id);
    }
    for (Eigen::Index j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), j) = features[i].z[j];
  }
  return X;
}

}  // namespace sarsfe
