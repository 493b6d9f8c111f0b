#pragma once

#include <vector>

#include "mpcc/param_store.hpp"
#include "mpcc/rng.hpp"
#include "mpcc/tensor.hpp"

namespace mpcc {

enum class PriorInit { Gaussian, Orthogonal };

// Learnable mixture latent prior: uniform fixed weights, one diagonal
// Gaussian component per cluster. mu and log_sigma are K x J leaf parameters
// registered in the ParameterStore under "prior.mu" / "prior.log_sigma".
struct GmmPrior {
  long K = 0;
  long J = 0;
  std::vector<double> phi;  // fixed at 1/K, not learnable
  Tensor mu;                // K x J
  Tensor log_sigma;         // K x J
  double sigma_min = 0.5;
  double log_sigma_floor = 0.0;  // log(sigma_min), nudged so exp() >= sigma_min
};

GmmPrior make_prior(ParameterStore& store, long k, long j, double sigma_min,
                    PriorInit init, Rng& rng);

// Smallest double L with exp(L) >= s.
double sigma_floor_log(double s);

struct LatentDraw {
  std::vector<int> y;  // cluster index per sample
  Tensor eps;          // n x J standard normal, constant
  Tensor z;            // n x J, z = mu_y + sigma_y (.) eps, on tape
};

// i.i.d. draws from Categorical(phi).
std::vector<int> sample_y(const GmmPrior& prior, long n, Rng& rng);

// Reparameterized draw; gradient flows to mu and log_sigma through z.
LatentDraw sample_z_given_y(Tape& tape, const GmmPrior& prior,
                            const std::vector<int>& y, Rng& rng);

// Same reparameterization with injected noise (used to rebuild a draw on a
// fresh tape, and by tests with eps = 0).
Tensor reparameterize(Tape& tape, const GmmPrior& prior,
                      const std::vector<int>& y, const Tensor& eps);

// log q(y = m | z) for every component, one row per z sample (n x K).
// Stable in the underflow regime: rows are normalized through a max-shifted
// log-sum-exp, so exp(rows) always sums to 1.
Tensor log_membership(Tape& tape, const GmmPrior& prior, const Tensor& z);

// sum_k phi_k [ log phi_k - sigma_scale * sum_j (1/2 + 1/2 log(2 pi s^2_kj)) ].
// sigma_scale = 1 gives the raw value; training passes 1/J.
Tensor prior_regularizer(Tape& tape, const GmmPrior& prior,
                         double sigma_scale = 1.0);

// Clamps every sigma below sigma_min up to exactly sigma_min. Returns the
// number of clamped entries. Idempotent.
long project_sigma_floor(GmmPrior& prior);

}  // namespace mpcc
