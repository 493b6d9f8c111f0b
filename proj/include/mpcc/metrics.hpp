#pragma once

#include <vector>

#include "mpcc/networks.hpp"
#include "mpcc/prior.hpp"
#include "mpcc/tensor.hpp"

namespace mpcc {

// Predicted-cluster x true-class count matrix.
struct ContingencyTable {
  long k = 0, c = 0;
  std::vector<long> counts;  // k x c, row-major
  long total = 0;
};

ContingencyTable build_contingency(const std::vector<int>& pred,
                                   const std::vector<int>& truth, long k, long c);

// Best one-to-one cluster-to-class matching score in [0,1], found by optimal
// assignment. Unmatched clusters (K > C) contribute nothing.
double clustering_accuracy(const ContingencyTable& table);

// Minimum-cost assignment of a square cost matrix (O(n^3) potentials method).
// Returns col index assigned to each row.
std::vector<long> hungarian_min_cost(const std::vector<double>& cost, long n);

// c_i = argmax_k q(y=k | z = encoder mean of x_i); ties to the lowest index.
std::vector<int> assign_clusters(const GmmPrior& prior, const ParameterStore& store,
                                 const NetworkSet& nets, const Tensor& x);

std::vector<int> argmax_rows(const Tensor& rows);

// mean squared entry-wise difference.
double latent_mse(const Tensor& mu, const Tensor& z);

// Unbiased squared MMD with a mixture (mean) of RBF kernels
// k(a,b) = mean_s exp(-|a-b|^2 / (2 s^2)).
double mmd_rbf(const std::vector<double>& real, const std::vector<double>& fake,
               long dim, const std::vector<double>& bandwidths);

// Median pairwise distance on the pooled sample, times {0.5, 1, 2}.
std::vector<double> median_heuristic_bandwidths(const std::vector<double>& real,
                                                const std::vector<double>& fake,
                                                long dim);

// Fraction of centers with at least min_hits samples within radius.
double mode_coverage(const std::vector<double>& fake, long dim,
                     const std::vector<double>& centers, long n_centers,
                     double radius, long min_hits = 1);

// One evaluation snapshot; mode_coverage is -1 when no mode centers are known.
struct MetricsRecord {
  long iteration = 0;
  double d_loss = 0, g_adv_loss = 0, enc_nll = 0, cluster_ce = 0, prior_reg = 0;
  double acc = 0;
  double latent_mse = 0;
  double mmd = 0;
  double mode_coverage = -1;
};

}  // namespace mpcc
