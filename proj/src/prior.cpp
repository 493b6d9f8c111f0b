#include "mpcc/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpcc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Rows of a (rows x cols) Gaussian matrix orthonormalized against each other
// (modified Gram-Schmidt on the leading min(rows, cols) square block of a
// larger Gaussian draw, then cropped).
std::vector<double> orthogonal_matrix(long rows, long cols, Rng& rng) {
  const long n = std::max(rows, cols);
  std::vector<double> q(n * n);
  for (auto& v : q) v = rng.normal();
  for (long i = 0; i < n; ++i) {
    for (long p = 0; p < i; ++p) {
      double dot = 0.0;
      for (long j = 0; j < n; ++j) dot += q[i * n + j] * q[p * n + j];
      for (long j = 0; j < n; ++j) q[i * n + j] -= dot * q[p * n + j];
    }
    double norm = 0.0;
    for (long j = 0; j < n; ++j) norm += q[i * n + j] * q[i * n + j];
    norm = std::sqrt(norm);
    if (norm < 1e-12) norm = 1.0;
    for (long j = 0; j < n; ++j) q[i * n + j] /= norm;
  }
  std::vector<double> out(rows * cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) out[i * cols + j] = q[i * n + j];
  return out;
}

}  // namespace

double sigma_floor_log(double s) {
  double l = std::log(s);
  while (std::exp(l) < s) l = std::nextafter(l, std::numeric_limits<double>::infinity());
  return l;
}

GmmPrior make_prior(ParameterStore& store, long k, long j, double sigma_min,
                    PriorInit init, Rng& rng) {
  if (k < 1 || j < 1)
    throw std::invalid_argument("prior: K and J must be >= 1");
  GmmPrior p;
  p.K = k;
  p.J = j;
  p.sigma_min = sigma_min;
  p.log_sigma_floor = sigma_floor_log(sigma_min);
  p.phi.assign(k, 1.0 / static_cast<double>(k));

  std::vector<double> mu(k * j);
  if (init == PriorInit::Orthogonal) {
    mu = orthogonal_matrix(k, j, rng);
  } else {
    for (auto& v : mu) v = rng.normal();
  }
  p.mu = store.add("prior.mu", Tensor::from({k, j}, std::move(mu), true));
  p.log_sigma = store.add("prior.log_sigma", Tensor::zeros({k, j}, true));
  return p;
}

std::vector<int> sample_y(const GmmPrior& prior, long n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_y: n must be >= 1");
  std::vector<int> y(n);
  for (long i = 0; i < n; ++i) {
    // inverse-cdf over phi; uniform phi reduces to an even split of [0,1)
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = static_cast<int>(prior.K) - 1;
    for (long m = 0; m < prior.K; ++m) {
      acc += prior.phi[m];
      if (u < acc) {
        pick = static_cast<int>(m);
        break;
      }
    }
    y[i] = pick;
  }
  return y;
}

Tensor reparameterize(Tape& tape, const GmmPrior& prior,
                      const std::vector<int>& y, const Tensor& eps) {
  const long n = static_cast<long>(y.size());
  if (eps.shape() != Shape{n, prior.J})
    throw std::invalid_argument("reparameterize: eps shape " +
                                shape_str(eps.shape()) + " does not match " +
                                std::to_string(n) + "x" + std::to_string(prior.J));
  Tensor h = one_hot(y, prior.K);  // validates the index range
  Tensor mu_y = tape.matmul(h, prior.mu);
  Tensor sigma_y = tape.matmul(h, tape.exp(prior.log_sigma));
  return tape.add(mu_y, tape.mul(sigma_y, eps));
}

LatentDraw sample_z_given_y(Tape& tape, const GmmPrior& prior,
                            const std::vector<int>& y, Rng& rng) {
  const long n = static_cast<long>(y.size());
  std::vector<double> e(n * prior.J);
  for (auto& v : e) v = rng.normal();
  LatentDraw draw;
  draw.y = y;
  draw.eps = Tensor::from({n, prior.J}, std::move(e));
  draw.z = reparameterize(tape, prior, y, draw.eps);
  return draw;
}

Tensor log_membership(Tape& tape, const GmmPrior& prior, const Tensor& z) {
  if (z.rank() != 2 || z.shape()[1] != prior.J)
    throw std::invalid_argument("log_membership: z shape " +
                                shape_str(z.shape()) + " does not match latent dim " +
                                std::to_string(prior.J));
  // log N(z | mu_m, s_m^2) expanded so all K components come out of two
  // matmuls:  -1/2 z^2 . iv_m + z . (mu_m iv_m) - 1/2 mu_m^2 . iv_m
  //           - sum_j log s_mj - J/2 log 2pi,   iv = 1/s^2 = exp(-2 log s)
  Tensor iv = tape.exp(tape.mul(prior.log_sigma, Tensor::scalar(-2.0)));
  Tensor quad = tape.matmul(tape.square(z), iv, false, true);        // n x K
  Tensor cross = tape.matmul(z, tape.mul(prior.mu, iv), false, true);  // n x K
  Tensor msq = tape.sum_axis(tape.mul(tape.square(prior.mu), iv), 1);  // K
  Tensor logdet = tape.sum_axis(prior.log_sigma, 1);                   // K
  Tensor row_const = tape.sub(tape.mul(msq, Tensor::scalar(-0.5)), logdet);
  Tensor comp = tape.add(tape.add(tape.mul(quad, Tensor::scalar(-0.5)), cross),
                         row_const);
  comp = tape.add(comp, Tensor::scalar(-0.5 * kLog2Pi * static_cast<double>(prior.J)));
  Tensor lse = tape.logsumexp(comp, /*keepdim=*/true);  // n x 1
  return tape.sub(comp, lse);
}

Tensor prior_regularizer(Tape& tape, const GmmPrior& prior, double sigma_scale) {
  // phi entropy part is constant (phi fixed); it is still added so reported
  // values match the closed form.
  double phi_term = 0.0;
  for (double p : prior.phi) phi_term += p * std::log(p);
  // per-component entropy: sum_j (1/2 + 1/2 log 2pi + log s_kj)
  Tensor per_entry = tape.add(prior.log_sigma, Tensor::scalar(0.5 + 0.5 * kLog2Pi));
  Tensor per_comp = tape.sum_axis(per_entry, 1);  // K
  Tensor phiT = Tensor::from({1, prior.K}, prior.phi);
  Tensor weighted =
      tape.matmul(phiT, tape.reshape(per_comp, {prior.K, 1}));  // 1 x 1
  Tensor sig_term = tape.mul(tape.reshape(weighted, {1}), Tensor::scalar(-sigma_scale));
  return tape.add(sig_term, Tensor::scalar(phi_term));
}

long project_sigma_floor(GmmPrior& prior) {
  long clamped = 0;
  auto& ls = prior.log_sigma.values();
  for (auto& v : ls) {
    if (v < prior.log_sigma_floor) {
      v = prior.log_sigma_floor;
      ++clamped;
    }
  }
  return clamped;
}

}  // namespace mpcc
