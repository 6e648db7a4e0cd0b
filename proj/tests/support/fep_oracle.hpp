#pragma once

// Straight-line enumeration oracles for the free-energy quantities plus a
// randomized model generator. Nothing here calls into the library except to
// build inputs, so agreement is an independent check.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "gksim/fep_math.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // [x][o]

inline double xlogy_ratio(double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; }

inline double kl(const std::vector<double>& q, const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += xlogy_ratio(q[i], p[i]);
  return s;
}

inline double entropy(const std::vector<double>& q) {
  double s = 0.0;
  for (double v : q) {
    if (v > 0.0) s -= v * std::log(v);
  }
  return s;
}

inline std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t x = 0; x < m.size(); ++x) {
    for (double v : m[x]) out[x] += v;
  }
  return out;
}

inline std::vector<double> col_sums(const Matrix& m) {
  std::vector<double> out(m.front().size(), 0.0);
  for (const auto& row : m) {
    for (std::size_t o = 0; o < row.size(); ++o) out[o] += row[o];
  }
  return out;
}

/// -sum_x q(x) ln p(x, o) - H[q]
inline double vfe(const std::vector<double>& q, const Matrix& p, std::size_t o) {
  double s = 0.0;
  for (std::size_t x = 0; x < q.size(); ++x) {
    if (q[x] > 0.0) s -= q[x] * std::log(p[x][o]);
  }
  return s - entropy(q);
}

struct Terms {
  double total = 0.0;
  double extrinsic = 0.0;
  double epistemic = 0.0;
};

/// total = sum q(x,o) [ln q(x) - ln pt(x,o)], extrinsic = sum q(x,o) ln pt(o),
/// epistemic = sum q(x,o) ln(q(x|o)/q(x)).
inline Terms efe(const Matrix& q, const Matrix& pt) {
  const auto qx = row_sums(q);
  const auto qo = col_sums(q);
  const auto po = col_sums(pt);
  Terms t;
  for (std::size_t x = 0; x < q.size(); ++x) {
    for (std::size_t o = 0; o < q[x].size(); ++o) {
      const double w = q[x][o];
      if (w <= 0.0) continue;
      t.total += w * (std::log(qx[x]) - std::log(pt[x][o]));
      t.extrinsic += w * std::log(po[o]);
      t.epistemic += w * std::log((w / qo[o]) / qx[x]);
    }
  }
  return t;
}

/// total = sum q(x,o) [ln q(x|o) - ln pt(x,o)], extrinsic = sum q(x,o) ln pt(o|x).
inline Terms fef(const Matrix& q, const Matrix& pt) {
  const auto qx = row_sums(q);
  const auto qo = col_sums(q);
  const auto px = row_sums(pt);
  Terms t;
  for (std::size_t x = 0; x < q.size(); ++x) {
    for (std::size_t o = 0; o < q[x].size(); ++o) {
      const double w = q[x][o];
      if (w <= 0.0) continue;
      t.total += w * (std::log(w / qo[o]) - std::log(pt[x][o]));
      t.extrinsic += w * std::log(pt[x][o] / px[x]);
      t.epistemic += w * std::log((w / qo[o]) / qx[x]);
    }
  }
  return t;
}

/// sum_x q(x) KL[q(o|x) || q(o)]
inline double information_gain(const Matrix& q) {
  const auto qx = row_sums(q);
  const auto qo = col_sums(q);
  double s = 0.0;
  for (std::size_t x = 0; x < q.size(); ++x) {
    for (std::size_t o = 0; o < q[x].size(); ++o) {
      if (q[x][o] > 0.0) s += q[x][o] * std::log((q[x][o] / qx[x]) / qo[o]);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Randomized inputs
// ---------------------------------------------------------------------------

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  /// Random normalized vector; with zero_prob some entries are exactly zero
  /// (at least one entry stays positive).
  std::vector<double> simplex(std::size_t n, double zero_prob = 0.0) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& v : w) {
      v = uniform(0.0, 1.0) < zero_prob ? 0.0 : uniform(0.05, 1.0);
      sum += v;
    }
    if (sum == 0.0) {
      w[size(0, n - 1)] = 1.0;
      sum = 1.0;
    }
    for (auto& v : w) v /= sum;
    return w;
  }

  Matrix joint(std::size_t nx, std::size_t no, double zero_prob = 0.0) {
    const auto flat = simplex(nx * no, zero_prob);
    Matrix m(nx, std::vector<double>(no));
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t o = 0; o < no; ++o) m[x][o] = flat[x * no + o];
    }
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

/// Library model holding exactly the oracle matrix (renormalized by the
/// library's own validation tolerance, which the generator satisfies).
inline gksim::fep::JointModel to_model(const Matrix& m) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return gksim::fep::JointModel(m.size(), m.front().size(), std::move(flat));
}

inline Matrix from_model(const gksim::fep::JointModel& m) {
  Matrix out(m.n_states(), std::vector<double>(m.n_observations()));
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    for (std::size_t o = 0; o < m.n_observations(); ++o) out[x][o] = m(x, o);
  }
  return out;
}

}  // namespace oracle
