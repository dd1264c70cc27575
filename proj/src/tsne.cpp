// Exact t-SNE (quadratic in the number of points).

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sarsfe/error.hpp"
#include "sarsfe/evaluate.hpp"
#include "sarsfe/log.hpp"
#include "sarsfe/parallel.hpp"
#include "sarsfe/rng.hpp"

namespace sarsfe {

namespace {

constexpr double kPerplexityTol = 1e-5;
constexpr int kPerplexitySteps = 50;
constexpr double kMinProb = 1e-12;

// Conditional affinities p_{j|i} with the precision searched so that the row entropy
// matches log(perplexity).
void conditional_row(const Eigen::MatrixXd& d2, Eigen::Index i, double log_perp, Eigen::MatrixXd& P) {
  const Eigen::Index n = d2.rows();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, d2(i, j));
  }
  double beta = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kPerplexitySteps; ++it) {
    double sum = 0;
    double weighted = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double shifted = d2(i, j) - dmin;
      const double p = std::exp(-shifted * beta);
      P(i, j) = p;
      sum += p;
      weighted += shifted * p;
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    const double diff = entropy - log_perp;
    if (std::abs(diff) < kPerplexityTol) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
    } else {
      hi = beta;
      beta = std::isinf(lo) ? beta / 2 : (beta + lo) / 2;
    }
  }
  double sum = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != i) sum += P(i, j);
  }
  for (Eigen::Index j = 0; j < n; ++j) P(i, j) = j == i ? 0.0 : P(i, j) / sum;
}

double kl_divergence(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y, unsigned threads) {
  const Eigen::Index n = Y.rows();
  std::vector<double> row_sum(n);
  parallel_for(n, threads, [&](std::size_t i) {
    double s = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != static_cast<Eigen::Index>(i)) s += 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
    }
    row_sum[i] = s;
  });
  double z = 0;
  for (double s : row_sum) z += s;
  std::vector<double> row_kl(n);
  parallel_for(n, threads, [&](std::size_t i) {
    double kl = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == static_cast<Eigen::Index>(i)) continue;
      const double q = std::max(1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm()) / z, kMinProb);
      const double p = P(i, j);
      kl += p * std::log(p / q);
    }
    row_kl[i] = kl;
  });
  double kl = 0;
  for (double v : row_kl) kl += v;
  return kl;
}

}  // namespace

TsneResult tsne(const Eigen::MatrixXd& X, const TsneConfig& cfg, unsigned threads) {
  const Eigen::Index n = X.rows();
  if (n < 3) throw Error(ErrorKind::Protocol, "t-SNE needs at least 3 points");
  if (!(cfg.perplexity > 0.0f)) throw Error(ErrorKind::Parameter, "perplexity must be positive");
  if (cfg.iters < 1) throw Error(ErrorKind::Parameter, "iters must be >= 1");

  TsneResult res;
  res.perplexity_used = cfg.perplexity;
  const double max_perp = static_cast<double>(n - 1) / 3.0;
  if (res.perplexity_used > max_perp) {
    std::ostringstream msg;
    msg << "perplexity " << cfg.perplexity << " too large for " << n << " points; using " << max_perp;
    log_warn(msg.str());
    res.perplexity_used = max_perp;
  }

  Eigen::MatrixXd d2(n, n);
  parallel_for(n, threads, [&](std::size_t i) {
    for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (X.row(i) - X.row(j)).squaredNorm();
  });
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  const double log_perp = std::log(res.perplexity_used);
  parallel_for(n, threads, [&](std::size_t i) { conditional_row(d2, static_cast<Eigen::Index>(i), log_perp, P); });
  d2.resize(0, 0);
  P = P + P.transpose().eval();
  P /= P.sum();
  P = P.cwiseMax(kMinProb);
  P.diagonal().setZero();

  Rng rng(cfg.seed);
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < 2; ++c) Y(i, c) = rng.normal() * 1e-2;
  }
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  std::vector<double> row_sum(n);

  for (std::uint32_t it = 0; it < cfg.iters; ++it) {
    const bool early = it < cfg.exaggeration_iters;
    const double exag = early ? cfg.exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;

    parallel_for(n, threads, [&](std::size_t i) {
      double s = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != static_cast<Eigen::Index>(i)) s += 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
      }
      row_sum[i] = s;
    });
    double z = 0;
    for (double s : row_sum) z += s;
    parallel_for(n, threads, [&](std::size_t i) {
      double gx = 0;
      double gy = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == static_cast<Eigen::Index>(i)) continue;
        const double dx = Y(i, 0) - Y(j, 0);
        const double dy = Y(i, 1) - Y(j, 1);
        const double num = 1.0 / (1.0 + dx * dx + dy * dy);
        const double w = (exag * P(i, j) - num / z) * num;
        gx += w * dx;
        gy += w * dy;
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    });
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        double& g = gains(i, c);
        g = (grad(i, c) > 0) != (update(i, c) > 0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        update(i, c) = momentum * update(i, c) - cfg.learning_rate * g * grad(i, c);
      }
    }
    Y += update;
    Y.rowwise() -= Y.colwise().mean();

    const std::uint32_t done = it + 1;
    if ((cfg.kl_every > 0 && done % cfg.kl_every == 0) || done == cfg.exaggeration_iters || done == cfg.iters) {
      res.kl_trace.emplace_back(done, kl_divergence(P, Y, threads));
    }
  }
  res.final_kl = res.kl_trace.back().second;
  res.embedding = std::move(Y);
  return res;
}

std::vector<ProjectedPoint> project_2d(const FeatureSet& features, const TsneConfig& cfg, TsneResult* result,
                                       unsigned threads) {
  validate_features(features);
  TsneResult r = tsne(feature_matrix(features), cfg, threads);
  std::vector<ProjectedPoint> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.push_back({features[i].id, features[i].label, r.embedding(static_cast<Eigen::Index>(i), 0),
                   r.embedding(static_cast<Eigen::Index>(i), 1)});
  }
  if (result != nullptr) *result = std::move(r);
  return out;
}

std::string projection_to_csv(const std::vector<ProjectedPoint>& points) {
  std::string out = "id,label,x,y\n";
  char buf[64];
  for (const auto& p : points) {
    auto field = [](const std::string& s) {
      if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) {
        if (c == '"') q += '"';
        q += c;
      }
      return q + "\"";
    };
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g\n", p.x, p.y);
    out += field(p.id) + "," + field(p.label.value_or("")) + buf;
  }
  return out;
}

}  // namespace sarsfe
