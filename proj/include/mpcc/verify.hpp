#pragma once

#include <string>
#include <vector>

#include "mpcc/rng.hpp"

namespace mpcc {

// Explicit probability table over finite supports, generation-side ordering
// p[x][z][y] (x-major). Entries are non-negative and sum to 1.
struct DiscreteJoint {
  long nx = 0, nz = 0, ny = 0;
  std::vector<double> p;
  double& at(long x, long z, long y) { return p[(x * nz + z) * ny + y]; }
  double at(long x, long z, long y) const { return p[(x * nz + z) * ny + y]; }
};

// Generation-side factors: p(x,z,y) = p(y) p(z|y) p(x|z,y).
struct GenFactors {
  long nx = 0, nz = 0, ny = 0;
  std::vector<double> py;          // ny
  std::vector<double> pz_given_y;  // ny x nz
  std::vector<double> px_given_zy; // (nz*ny) x nx, index (z*ny + y)*nx + x
};

// Inference-side factors: q(x,z,y) = q(y|z) q(z|x) q(x).
struct InfFactors {
  long nx = 0, nz = 0, ny = 0;
  std::vector<double> qx;          // nx
  std::vector<double> qz_given_x;  // nx x nz
  std::vector<double> qy_given_z;  // nz x ny
};

// VaDE-style factors: p(x,z,y) = p(y) p(z|y) p(x|z); q = q(y|x) q(z|x) q(x).
struct VadeGenFactors {
  long nx = 0, nz = 0, ny = 0;
  std::vector<double> py;          // ny
  std::vector<double> pz_given_y;  // ny x nz
  std::vector<double> px_given_z;  // nz x nx
};
struct VadeInfFactors {
  long nx = 0, nz = 0, ny = 0;
  std::vector<double> qx;          // nx
  std::vector<double> qz_given_x;  // nx x nz
  std::vector<double> qy_given_x;  // nx x ny
};

DiscreteJoint assemble(const GenFactors& f);
DiscreteJoint assemble(const InfFactors& f);
DiscreteJoint assemble(const VadeGenFactors& f);
DiscreteJoint assemble(const VadeInfFactors& f);

// All conditional rows drawn from Dirichlet(1,...,1).
GenFactors random_gen_factors(long nx, long nz, long ny, Rng& rng);
InfFactors random_inf_factors(long nx, long nz, long ny, Rng& rng);
VadeGenFactors random_vade_gen_factors(long nx, long nz, long ny, Rng& rng);
VadeInfFactors random_vade_inf_factors(long nx, long nz, long ny, Rng& rng);

// sum p log(p/q) with 0 log(0/q) = 0. Rejects p>0 where q=0, naming the cell.
double kl_discrete(const std::vector<double>& p, const std::vector<double>& q);

struct IdentityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
  bool pass = false;
  std::string detail;
};

// Reverse KL over three variables:
// KL(p(x,z,y)||q(x,z,y)) = E_{p(z,y)} KL(p(x|z,y)||q(x|z,y))
//                        + E_{p(y)} KL(p(z|y)||q(z|y)) + KL(p(y)||q(y)).
// The left side is one direct sum over the assembled joints; the right side
// marginalizes the factor representation with its own loops.
IdentityReport verify_three_var_reverse(const GenFactors& p, const InfFactors& q,
                                        double tol);

// Same left side against the three-term loss split:
// Loss I  = E_{p(z,y)} KL(p(x|z,y)||q(x))
// Loss II = E_p[-log q(z|x) - log q(y|z)]
// Loss III= E_p[ log p(y) + log p(z|y)].
IdentityReport verify_loss_decomposition(const GenFactors& p, const InfFactors& q,
                                         double tol);
// Loss II + Loss III alone, for the dropped-term counterexample.
double loss_two_three_only(const GenFactors& p, const InfFactors& q);

// Forward KL over two variables, and its ELBO form:
// KL(q(z,x)||p(z,x)) = E_{q(x)} KL(q(z|x)||p(z|x)) + KL(q(x)||p(x))
//                    = E_q[-ELBO] + E_q[log q(x)].
struct TwoVarGen {
  long nx = 0, nz = 0;
  std::vector<double> pz;          // nz
  std::vector<double> px_given_z;  // nz x nx
};
struct TwoVarInf {
  long nx = 0, nz = 0;
  std::vector<double> qx;          // nx
  std::vector<double> qz_given_x;  // nx x nz
};
TwoVarGen random_two_var_gen(long nx, long nz, Rng& rng);
TwoVarInf random_two_var_inf(long nx, long nz, Rng& rng);
IdentityReport verify_two_var_forward(const TwoVarGen& p, const TwoVarInf& q,
                                      double tol);

// Reverse KL over two variables and its three-term expansion
// E_{p(z)}E_{p(x|z)}[-log q(z|x)] + E_{p(z)} KL(p(x|z)||q(x)) + E_{p(z)}[log p(z)].
IdentityReport verify_two_var_reverse(const TwoVarGen& p, const TwoVarInf& q,
                                      double tol);
// Expansion with the E[log p(z)] entropy term dropped (counterexample hook).
double two_var_reverse_without_entropy(const TwoVarGen& p, const TwoVarInf& q);

// Forward KL with VaDE structure:
// KL(q(x,z,y)||p(x,z,y)) = E_{q(x)}[log q(x) - L_vade(x)], with
// L_vade(x) = E_{q(z,y|x)}[log p(x|z) - log q(z|x) - log q(y|x)
//                          + log p(z|y) + log p(y)].
IdentityReport verify_vade_identity(const VadeGenFactors& p,
                                    const VadeInfFactors& q, double tol);
// Posterior split used inside the VaDE derivation, checked per (z,x):
// KL(q(y|x)||p(y|z,x)) = E_{q(y|x)}[log q(y|x) - log p(z|y) - log p(y)] + log p(z).
IdentityReport verify_vade_posterior_term(const VadeGenFactors& p,
                                          const VadeInfFactors& q, double tol);

// Monte Carlo cross-entropy between diagonal Gaussians against the closed
// form, n_draws samples, pass iff within 3 standard errors.
struct McReport {
  double estimate = 0.0;
  double exact = 0.0;
  double stderr_ = 0.0;
  bool pass = false;
};
McReport mc_estimate_check(const std::vector<double>& mu_p,
                           const std::vector<double>& sigma_p,
                           const std::vector<double>& mu_q,
                           const std::vector<double>& sigma_q, long n_draws,
                           Rng& rng);

// Runs `trials` randomized instances of every identity at tolerance tol.
struct SuiteResult {
  std::string name;
  long trials = 0;
  double worst_abs_diff = 0.0;
  bool pass = false;
};
std::vector<SuiteResult> run_identity_suites(long trials, double tol,
                                             std::uint64_t seed);

}  // namespace mpcc
