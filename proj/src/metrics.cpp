#include "mpcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpcc {

ContingencyTable build_contingency(const std::vector<int>& pred,
                                   const std::vector<int>& truth, long k, long c) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("contingency: prediction/label count mismatch");
  ContingencyTable t;
  t.k = k;
  t.c = c;
  t.counts.assign(k * c, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= k || truth[i] < 0 || truth[i] >= c)
      throw std::invalid_argument("contingency: index out of range");
    t.counts[pred[i] * c + truth[i]] += 1;
  }
  t.total = static_cast<long>(pred.size());
  return t;
}

// Classic potentials formulation; cost is n x n row-major.
std::vector<long> hungarian_min_cost(const std::vector<double>& cost, long n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<long> p(n + 1, 0), way(n + 1, 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const long i0 = p[j0];
      double delta = inf;
      long j1 = 0;
      for (long j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const long j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<long> row_to_col(n, -1);
  for (long j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double clustering_accuracy(const ContingencyTable& table) {
  if (table.total < 1 || table.k < 1 || table.c < 1)
    throw std::invalid_argument("clustering_accuracy: empty table");
  const long n = std::max(table.k, table.c);
  // pad to square; padded cells carry zero counts
  std::vector<double> cost(n * n, 0.0);
  for (long i = 0; i < table.k; ++i)
    for (long j = 0; j < table.c; ++j)
      cost[i * n + j] = -static_cast<double>(table.counts[i * table.c + j]);
  const auto assign = hungarian_min_cost(cost, n);
  double matched = 0.0;
  for (long i = 0; i < table.k; ++i) {
    const long j = assign[i];
    if (j >= 0 && j < table.c) matched += static_cast<double>(table.counts[i * table.c + j]);
  }
  return matched / static_cast<double>(table.total);
}

std::vector<int> argmax_rows(const Tensor& rows) {
  const long n = rows.shape()[0], k = rows.shape()[1];
  std::vector<int> out(n);
  for (long i = 0; i < n; ++i) {
    long best = 0;
    double bv = rows.values()[i * k];
    for (long j = 1; j < k; ++j) {
      const double v = rows.values()[i * k + j];
      if (v > bv) {  // strict: ties keep the lowest index
        bv = v;
        best = j;
      }
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> assign_clusters(const GmmPrior& prior, const ParameterStore& store,
                                 const NetworkSet& nets, const Tensor& x) {
  Tape tape;
  auto [mu, log_var] = encoder_forward(tape, store, nets, x);
  (void)log_var;
  Tensor lm = log_membership(tape, prior, mu);
  tape.clear();
  return argmax_rows(lm);
}

double latent_mse(const Tensor& mu, const Tensor& z) {
  if (mu.shape() != z.shape())
    throw std::invalid_argument("latent_mse: shape mismatch " +
                                shape_str(mu.shape()) + " vs " +
                                shape_str(z.shape()));
  double s = 0.0;
  for (long i = 0; i < mu.numel(); ++i) {
    const double d = mu.values()[i] - z.values()[i];
    s += d * d;
  }
  return s / static_cast<double>(mu.numel());
}

namespace {
double kernel_mix(const double* a, const double* b, long dim,
                  const std::vector<double>& bw) {
  double d2 = 0.0;
  for (long j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  double k = 0.0;
  for (double s : bw) k += std::exp(-d2 / (2.0 * s * s));
  return k / static_cast<double>(bw.size());
}
}  // namespace

double mmd_rbf(const std::vector<double>& real, const std::vector<double>& fake,
               long dim, const std::vector<double>& bandwidths) {
  if (dim < 1 || real.size() % dim || fake.size() % dim)
    throw std::invalid_argument("mmd: sample arrays are not multiples of dim");
  const long m = static_cast<long>(real.size()) / dim;
  const long n = static_cast<long>(fake.size()) / dim;
  if (m < 2 || n < 2)
    throw std::invalid_argument("mmd: need at least 2 samples per side");
  if (bandwidths.empty()) throw std::invalid_argument("mmd: no bandwidths");

  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (long i = 0; i < m; ++i)
    for (long j = i + 1; j < m; ++j)
      kxx += kernel_mix(&real[i * dim], &real[j * dim], dim, bandwidths);
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j)
      kyy += kernel_mix(&fake[i * dim], &fake[j * dim], dim, bandwidths);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j)
      kxy += kernel_mix(&real[i * dim], &fake[j * dim], dim, bandwidths);

  const double mxx = 2.0 * kxx / (static_cast<double>(m) * (m - 1));
  const double myy = 2.0 * kyy / (static_cast<double>(n) * (n - 1));
  const double mxy = 2.0 * kxy / (static_cast<double>(m) * n);
  return mxx + myy - mxy;
}

std::vector<double> median_heuristic_bandwidths(const std::vector<double>& real,
                                                const std::vector<double>& fake,
                                                long dim) {
  std::vector<double> pooled = real;
  pooled.insert(pooled.end(), fake.begin(), fake.end());
  const long n = static_cast<long>(pooled.size()) / dim;
  if (n < 2) throw std::invalid_argument("median heuristic: need >= 2 samples");
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (long q = 0; q < dim; ++q) {
        const double t = pooled[i * dim + q] - pooled[j * dim + q];
        d2 += t * t;
      }
      d.push_back(std::sqrt(d2));
    }
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  double med = d[d.size() / 2];
  if (med <= 0.0) med = 1.0;
  return {0.5 * med, med, 2.0 * med};
}

double mode_coverage(const std::vector<double>& fake, long dim,
                     const std::vector<double>& centers, long n_centers,
                     double radius, long min_hits) {
  if (n_centers < 1) throw std::invalid_argument("mode_coverage: no centers");
  const long n = static_cast<long>(fake.size()) / dim;
  const double r2 = radius * radius;
  long covered = 0;
  for (long c = 0; c < n_centers; ++c) {
    long hits = 0;
    for (long i = 0; i < n && hits < min_hits; ++i) {
      double d2 = 0.0;
      for (long q = 0; q < dim; ++q) {
        const double t = fake[i * dim + q] - centers[c * dim + q];
        d2 += t * t;
      }
      if (d2 <= r2) ++hits;
    }
    if (hits >= min_hits) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(n_centers);
}

}  // namespace mpcc
