#include <algorithm>
#include <cmath>
#include <limits>

#include "paddle/error.hpp"
#include "paddle/models.hpp"

namespace paddle {

namespace {

constexpr double kTau = 1e-12;

struct Smo {
  std::span<const double> k;  // full kernel matrix, row-major
  std::span<const int> y;
  std::span<const double> upper;
  std::size_t n;
  std::vector<double> alpha;
  std::vector<double> grad;

  double q(std::size_t i, std::size_t j) const {
    return static_cast<double>(y[i] * y[j]) * k[i * n + j];
  }
  bool at_upper(std::size_t i) const { return alpha[i] >= upper[i]; }
  bool at_lower(std::size_t i) const { return alpha[i] <= 0; }

  // Maximal violating i, then j by second-order gain. False when optimal.
  bool select(double eps, std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gi = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!at_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          gi = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        gi = static_cast<std::ptrdiff_t>(t);
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      double diff = 0;
      if (y[j] == 1) {
        if (at_lower(j)) continue;
        gmax2 = std::max(gmax2, grad[j]);
        diff = gmax + grad[j];
      } else {
        if (at_upper(j)) continue;
        gmax2 = std::max(gmax2, -grad[j]);
        diff = gmax - grad[j];
      }
      if (gi < 0 || diff <= 0) continue;
      const auto i = static_cast<std::size_t>(gi);
      // K_ii + K_jj - 2 K_ij, whatever the labels.
      double quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
      if (quad <= 0) quad = kTau;
      const double obj = -(diff * diff) / quad;
      if (obj <= best) {
        best = obj;
        gj = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (gi < 0 || gj < 0 || gmax + gmax2 < eps) return false;
    out_i = static_cast<std::size_t>(gi);
    out_j = static_cast<std::size_t>(gj);
    return true;
  }

  void step(std::size_t i, std::size_t j) {
    const double ci = upper[i], cj = upper[j];
    const double oi = alpha[i], oj = alpha[j];
    double ai = oi, aj = oj;
    if (y[i] != y[j]) {
      double quad = k[i * n + i] + k[j * n + j] + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) {
          ai = ci;
          aj = ci - diff;
        }
      } else if (aj > cj) {
        aj = cj;
        ai = cj + diff;
      }
    } else {
      double quad = k[i * n + i] + k[j * n + j] - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) {
          ai = ci;
          aj = sum - ci;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) {
          aj = cj;
          ai = sum - cj;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double di = ai - oi, dj = aj - oj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0;
    std::size_t free = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yg = y[i] * grad[i];
      if (at_upper(i)) {
        if (y[i] == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(i)) {
        if (y[i] == 1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free;
        sum_free += yg;
      }
    }
    return free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  }
};

}  // namespace

SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y,
                    std::span<const double> p, std::span<const double> upper,
                    std::vector<double> alpha0, double eps) {
  const std::size_t n = y.size();
  if (kernel.size() != n * n || p.size() != n || upper.size() != n || alpha0.size() != n)
    throw Error(ErrorCode::InvalidArgument, "SMO input sizes disagree", "models");
  Smo s{kernel, y, upper, n, std::move(alpha0), std::vector<double>(p.begin(), p.end())};
  for (std::size_t i = 0; i < n; ++i)
    if (s.alpha[i] != 0)
      for (std::size_t t = 0; t < n; ++t) s.grad[t] += s.alpha[i] * s.q(i, t);

  const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n);
  std::size_t iter = 0;
  std::size_t i = 0, j = 0;
  while (iter < max_iter && s.select(eps, i, j)) {
    ++iter;
    s.step(i, j);
  }
  const double rho = s.rho();
  return {std::move(s.alpha), rho, iter};
}

double SvmParams::decision(std::span<const double> z) const {
  double f = 0;
  const std::size_t m = coef.size();
  for (std::size_t s = 0; s < m; ++s) {
    const double* sv = support.data() + s * dims;
    double d2 = 0;
    for (std::size_t c = 0; c < dims; ++c) {
      const double d = sv[c] - z[c];
      d2 += d * d;
    }
    f += coef[s] * std::exp(-gamma * d2);
  }
  return f - rho;
}

}  // namespace paddle
