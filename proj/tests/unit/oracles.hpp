#pragma once

// Independent reference implementations used only by the tests. They are written for
// clarity, not speed, and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using Grid = std::vector<std::vector<cd>>;

/// Direct O(n^2) 2D DFT, unnormalized forward, 1/(hw)-normalized inverse.
inline Grid dft2(const Grid& x, bool inverse) {
  const std::size_t h = x.size();
  const std::size_t w = x[0].size();
  const double sign = inverse ? 1.0 : -1.0;
  Grid out(h, std::vector<cd>(w));
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      cd acc = 0;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double ang = sign * 2.0 * std::numbers::pi *
                             (static_cast<double>(u * i) / h + static_cast<double>(v * j) / w);
          acc += x[i][j] * cd(std::cos(ang), std::sin(ang));
        }
      }
      out[u][v] = inverse ? acc / static_cast<double>(h * w) : acc;
    }
  }
  return out;
}

/// fftshift-style centring: the zero frequency moves to index n/2.
inline Grid fftshift(const Grid& x) {
  const std::size_t h = x.size();
  const std::size_t w = x[0].size();
  Grid out(h, std::vector<cd>(w));
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[(i + h / 2) % h][(j + w / 2) % w] = x[i][j];
  }
  return out;
}

inline Grid ifftshift(const Grid& x) {
  const std::size_t h = x.size();
  const std::size_t w = x[0].size();
  Grid out(h, std::vector<cd>(w));
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i][j] = x[(i + h / 2) % h][(j + w / 2) % w];
  }
  return out;
}

/// Subband reference written straight from the recipe: shift, keep the central
/// ceil(rho h) x ceil(rho w) block, unshift, inverse, magnitude, level compensation, clip.
inline std::vector<std::vector<double>> subband(const std::vector<std::vector<double>>& img, double rho) {
  const std::size_t h = img.size();
  const std::size_t w = img[0].size();
  Grid x(h, std::vector<cd>(w));
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) x[i][j] = img[i][j];
  }
  const Grid centred = fftshift(dft2(x, false));
  const auto mh = static_cast<std::size_t>(std::ceil(rho * h));
  const auto mw = static_cast<std::size_t>(std::ceil(rho * w));
  const std::size_t top = h / 2 - mh / 2;
  const std::size_t left = w / 2 - mw / 2;
  Grid block(mh, std::vector<cd>(mw));
  for (std::size_t i = 0; i < mh; ++i) {
    for (std::size_t j = 0; j < mw; ++j) block[i][j] = centred[top + i][left + j];
  }
  const Grid y = dft2(ifftshift(block), true);
  const double comp = (static_cast<double>(mh) / h) * (static_cast<double>(mw) / w);
  std::vector<std::vector<double>> out(mh, std::vector<double>(mw));
  for (std::size_t i = 0; i < mh; ++i) {
    for (std::size_t j = 0; j < mw; ++j) out[i][j] = std::clamp(std::abs(y[i][j]) * comp, 0.0, 1.0);
  }
  return out;
}

/// Index reached by walking |i| steps from the nearest edge and bouncing off the
/// borders without repeating the edge sample (numpy.pad mode="reflect").
inline long bounce(long i, long n) {
  if (n == 1) return 0;
  long pos = i < 0 ? 0 : n - 1;
  long steps = i < 0 ? -i : i - (n - 1);
  long dir = i < 0 ? 1 : -1;
  if (i >= 0 && i < n) return i;
  while (steps-- > 0) {
    if (pos + dir < 0 || pos + dir >= n) dir = -dir;
    pos += dir;
  }
  return pos;
}

inline std::vector<std::vector<double>> reflect_pad(const std::vector<std::vector<double>>& a, std::size_t pad) {
  const long h = static_cast<long>(a.size());
  const long w = static_cast<long>(a[0].size());
  const long p = static_cast<long>(pad);
  std::vector<std::vector<double>> out(h + 2 * pad, std::vector<double>(w + 2 * pad));
  for (long i = 0; i < h + 2 * p; ++i) {
    for (long j = 0; j < w + 2 * p; ++j) out[i][j] = a[bounce(i - p, h)][bounce(j - p, w)];
  }
  return out;
}

/// Cross-entropy and entropy by explicit loops over (image, view, prototype).
struct LossParts {
  double l_sim;
  double r;
};

inline LossParts loss(const std::vector<std::vector<double>>& teacher,
                      const std::vector<std::vector<std::vector<double>>>& student) {
  const std::size_t b = teacher.size();
  const std::size_t views = student[0].size();
  const std::size_t n = teacher[0].size();
  double sim = 0;
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < views; ++j) {
      for (std::size_t l = 0; l < n; ++l) {
        sim += -teacher[i][l] * std::log(std::max(student[i][j][l], 1e-12));
        mean[l] += student[i][j][l];
      }
    }
  }
  sim /= static_cast<double>(b * views);
  double r = 0;
  for (std::size_t l = 0; l < n; ++l) {
    const double m = mean[l] / static_cast<double>(b * views);
    r += -m * std::log(std::max(m, 1e-12));
  }
  return {sim, r};
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major n x n).
/// Returns eigenvalues descending and eigenvectors as columns of `vecs`.
inline void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& vals,
                         std::vector<std::vector<double>>& vecs) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  double total = 0;
  for (const auto& row : a) {
    for (double x : row) total += x * x;
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off <= 1e-30 * total) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  vals.assign(n, 0.0);
  vecs.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    vals[c] = a[order[c]][order[c]];
    for (std::size_t k = 0; k < n; ++k) vecs[k][c] = v[k][order[c]];
  }
}

/// All-pairs k-NN: sort every support point by (distance, index), count votes of the
/// first k, break vote ties by the earliest-ranked label among the tied ones.
inline std::string knn_predict(const std::vector<std::vector<double>>& support, const std::vector<std::string>& labels,
                               const std::vector<double>& q, std::size_t k, bool cosine) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t s = 0; s < support.size(); ++s) {
    double dist = 0;
    if (cosine) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t t = 0; t < q.size(); ++t) {
        dot += support[s][t] * q[t];
        na += support[s][t] * support[s][t];
        nb += q[t] * q[t];
      }
      dist = 1 - dot / (std::max(std::sqrt(na), 1e-12) * std::max(std::sqrt(nb), 1e-12));
    } else {
      for (std::size_t t = 0; t < q.size(); ++t) dist += (support[s][t] - q[t]) * (support[s][t] - q[t]);
      dist = std::sqrt(dist);
    }
    d.emplace_back(dist, s);
  }
  std::sort(d.begin(), d.end());
  std::map<std::string, int> votes;
  for (std::size_t r = 0; r < k; ++r) votes[labels[d[r].second]]++;
  int best = 0;
  for (const auto& [l, v] : votes) best = std::max(best, v);
  for (std::size_t r = 0; r < k; ++r) {
    if (votes[labels[d[r].second]] == best) return labels[d[r].second];
  }
  return {};
}

}  // namespace oracle
