#include "mpcc/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace mpcc {

namespace {

std::vector<double> dirichlet_row(long n, Rng& rng) {
  std::vector<double> r(n);
  double s = 0.0;
  for (auto& v : r) {
    v = rng.exponential();
    s += v;
  }
  for (auto& v : r) v /= s;
  return r;
}

void fill_rows(std::vector<double>& m, long rows, long cols, Rng& rng) {
  m.resize(rows * cols);
  for (long i = 0; i < rows; ++i) {
    auto r = dirichlet_row(cols, rng);
    std::copy(r.begin(), r.end(), m.begin() + i * cols);
  }
}

double xlogx_ratio(double p, double q) {
  if (p == 0.0) return 0.0;
  return p * std::log(p / q);
}

}  // namespace

DiscreteJoint assemble(const GenFactors& f) {
  DiscreteJoint j;
  j.nx = f.nx;
  j.nz = f.nz;
  j.ny = f.ny;
  j.p.assign(f.nx * f.nz * f.ny, 0.0);
  for (long x = 0; x < f.nx; ++x)
    for (long z = 0; z < f.nz; ++z)
      for (long y = 0; y < f.ny; ++y)
        j.at(x, z, y) = f.py[y] * f.pz_given_y[y * f.nz + z] *
                        f.px_given_zy[(z * f.ny + y) * f.nx + x];
  return j;
}

DiscreteJoint assemble(const InfFactors& f) {
  DiscreteJoint j;
  j.nx = f.nx;
  j.nz = f.nz;
  j.ny = f.ny;
  j.p.assign(f.nx * f.nz * f.ny, 0.0);
  for (long x = 0; x < f.nx; ++x)
    for (long z = 0; z < f.nz; ++z)
      for (long y = 0; y < f.ny; ++y)
        j.at(x, z, y) = f.qx[x] * f.qz_given_x[x * f.nz + z] *
                        f.qy_given_z[z * f.ny + y];
  return j;
}

DiscreteJoint assemble(const VadeGenFactors& f) {
  DiscreteJoint j;
  j.nx = f.nx;
  j.nz = f.nz;
  j.ny = f.ny;
  j.p.assign(f.nx * f.nz * f.ny, 0.0);
  for (long x = 0; x < f.nx; ++x)
    for (long z = 0; z < f.nz; ++z)
      for (long y = 0; y < f.ny; ++y)
        j.at(x, z, y) = f.py[y] * f.pz_given_y[y * f.nz + z] *
                        f.px_given_z[z * f.nx + x];
  return j;
}

DiscreteJoint assemble(const VadeInfFactors& f) {
  DiscreteJoint j;
  j.nx = f.nx;
  j.nz = f.nz;
  j.ny = f.ny;
  j.p.assign(f.nx * f.nz * f.ny, 0.0);
  for (long x = 0; x < f.nx; ++x)
    for (long z = 0; z < f.nz; ++z)
      for (long y = 0; y < f.ny; ++y)
        j.at(x, z, y) = f.qx[x] * f.qz_given_x[x * f.nz + z] *
                        f.qy_given_x[x * f.ny + y];
  return j;
}

GenFactors random_gen_factors(long nx, long nz, long ny, Rng& rng) {
  GenFactors f;
  f.nx = nx;
  f.nz = nz;
  f.ny = ny;
  f.py = dirichlet_row(ny, rng);
  fill_rows(f.pz_given_y, ny, nz, rng);
  fill_rows(f.px_given_zy, nz * ny, nx, rng);
  return f;
}

InfFactors random_inf_factors(long nx, long nz, long ny, Rng& rng) {
  InfFactors f;
  f.nx = nx;
  f.nz = nz;
  f.ny = ny;
  f.qx = dirichlet_row(nx, rng);
  fill_rows(f.qz_given_x, nx, nz, rng);
  fill_rows(f.qy_given_z, nz, ny, rng);
  return f;
}

VadeGenFactors random_vade_gen_factors(long nx, long nz, long ny, Rng& rng) {
  VadeGenFactors f;
  f.nx = nx;
  f.nz = nz;
  f.ny = ny;
  f.py = dirichlet_row(ny, rng);
  fill_rows(f.pz_given_y, ny, nz, rng);
  fill_rows(f.px_given_z, nz, nx, rng);
  return f;
}

VadeInfFactors random_vade_inf_factors(long nx, long nz, long ny, Rng& rng) {
  VadeInfFactors f;
  f.nx = nx;
  f.nz = nz;
  f.ny = ny;
  f.qx = dirichlet_row(nx, rng);
  fill_rows(f.qz_given_x, nx, nz, rng);
  fill_rows(f.qy_given_x, nx, ny, rng);
  return f;
}

double kl_discrete(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kl_discrete: table size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0)
      throw std::invalid_argument(
          "kl_discrete: absolute continuity violated at cell " +
          std::to_string(i) + " (p=" + std::to_string(p[i]) + ", q=0)");
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

IdentityReport verify_three_var_reverse(const GenFactors& p, const InfFactors& q,
                                        double tol) {
  IdentityReport r;
  r.name = "three_var_reverse";

  // Left side: one direct sum over the assembled joint tables.
  const DiscreteJoint pj = assemble(p);
  const DiscreteJoint qj = assemble(q);
  r.lhs = kl_discrete(pj.p, qj.p);

  // Right side: built from the factors with local marginalization.
  const long nx = p.nx, nz = p.nz, ny = p.ny;
  std::vector<double> qz(nz, 0.0);
  for (long z = 0; z < nz; ++z)
    for (long x = 0; x < nx; ++x) qz[z] += q.qx[x] * q.qz_given_x[x * nz + z];
  std::vector<double> qy(ny, 0.0);
  for (long y = 0; y < ny; ++y)
    for (long z = 0; z < nz; ++z) qy[y] += qz[z] * q.qy_given_z[z * ny + y];

  double term_x = 0.0;  // E_{p(z,y)} KL(p(x|z,y) || q(x|z,y))
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y) {
      const double pzy = p.py[y] * p.pz_given_y[y * nz + z];
      if (pzy == 0.0) continue;
      double kl = 0.0;
      for (long x = 0; x < nx; ++x) {
        const double px = p.px_given_zy[(z * ny + y) * nx + x];
        // q(x|z,y) = q(x,z,y) / q(z,y); the q(y|z) factor cancels
        const double qxzy = q.qx[x] * q.qz_given_x[x * nz + z] / qz[z];
        kl += xlogx_ratio(px, qxzy);
      }
      term_x += pzy * kl;
    }

  double term_z = 0.0;  // E_{p(y)} KL(p(z|y) || q(z|y))
  for (long y = 0; y < ny; ++y) {
    if (p.py[y] == 0.0) continue;
    double kl = 0.0;
    for (long z = 0; z < nz; ++z) {
      const double qzy = qz[z] * q.qy_given_z[z * ny + y] / qy[y];
      kl += xlogx_ratio(p.pz_given_y[y * nz + z], qzy);
    }
    term_z += p.py[y] * kl;
  }

  double term_y = 0.0;  // KL(p(y) || q(y))
  for (long y = 0; y < ny; ++y) term_y += xlogx_ratio(p.py[y], qy[y]);

  r.rhs = term_x + term_z + term_y;
  r.abs_diff = std::fabs(r.lhs - r.rhs);
  r.pass = r.abs_diff < tol;
  return r;
}

namespace {

// Loss II + Loss III of the decomposition, shared by the identity check and
// the dropped-term counterexample.
double loss_terms_23(const GenFactors& p, const InfFactors& q) {
  const long nx = p.nx, nz = p.nz, ny = p.ny;
  double loss2 = 0.0, loss3 = 0.0;
  for (long y = 0; y < ny; ++y)
    for (long z = 0; z < nz; ++z) {
      const double pzy = p.py[y] * p.pz_given_y[y * nz + z];
      if (pzy == 0.0) continue;
      loss3 += pzy * (std::log(p.py[y]) + std::log(p.pz_given_y[y * nz + z]));
      for (long x = 0; x < nx; ++x) {
        const double pxzy = pzy * p.px_given_zy[(z * ny + y) * nx + x];
        if (pxzy == 0.0) continue;
        loss2 += pxzy * (-std::log(q.qz_given_x[x * nz + z]) -
                         std::log(q.qy_given_z[z * ny + y]));
      }
    }
  return loss2 + loss3;
}

}  // namespace

IdentityReport verify_loss_decomposition(const GenFactors& p, const InfFactors& q,
                                         double tol) {
  IdentityReport r;
  r.name = "loss_decomposition";
  const DiscreteJoint pj = assemble(p);
  const DiscreteJoint qj = assemble(q);
  r.lhs = kl_discrete(pj.p, qj.p);

  const long nx = p.nx, nz = p.nz, ny = p.ny;
  double loss1 = 0.0;  // E_{p(z,y)} KL(p(x|z,y) || q(x))
  for (long y = 0; y < ny; ++y)
    for (long z = 0; z < nz; ++z) {
      const double pzy = p.py[y] * p.pz_given_y[y * nz + z];
      if (pzy == 0.0) continue;
      double kl = 0.0;
      for (long x = 0; x < nx; ++x)
        kl += xlogx_ratio(p.px_given_zy[(z * ny + y) * nx + x], q.qx[x]);
      loss1 += pzy * kl;
    }
  r.rhs = loss1 + loss_terms_23(p, q);
  r.abs_diff = std::fabs(r.lhs - r.rhs);
  r.pass = r.abs_diff < tol;
  return r;
}

double loss_two_three_only(const GenFactors& p, const InfFactors& q) {
  return loss_terms_23(p, q);
}

TwoVarGen random_two_var_gen(long nx, long nz, Rng& rng) {
  TwoVarGen f;
  f.nx = nx;
  f.nz = nz;
  f.pz = dirichlet_row(nz, rng);
  fill_rows(f.px_given_z, nz, nx, rng);
  return f;
}

TwoVarInf random_two_var_inf(long nx, long nz, Rng& rng) {
  TwoVarInf f;
  f.nx = nx;
  f.nz = nz;
  f.qx = dirichlet_row(nx, rng);
  fill_rows(f.qz_given_x, nx, nz, rng);
  return f;
}

IdentityReport verify_two_var_forward(const TwoVarGen& p, const TwoVarInf& q,
                                      double tol) {
  IdentityReport r;
  r.name = "two_var_forward";
  const long nx = p.nx, nz = p.nz;

  // joints, q(z,x) and p(z,x)
  std::vector<double> qj(nx * nz), pj(nx * nz);
  for (long x = 0; x < nx; ++x)
    for (long z = 0; z < nz; ++z) {
      qj[x * nz + z] = q.qx[x] * q.qz_given_x[x * nz + z];
      pj[x * nz + z] = p.pz[z] * p.px_given_z[z * nx + x];
    }
  r.lhs = kl_discrete(qj, pj);

  std::vector<double> px(nx, 0.0);
  for (long x = 0; x < nx; ++x)
    for (long z = 0; z < nz; ++z) px[x] += pj[x * nz + z];

  // conditional-in-latent-space + marginal-in-data-space form
  double rhs1 = 0.0;
  for (long x = 0; x < nx; ++x) {
    if (q.qx[x] == 0.0) continue;
    double kl = 0.0;
    for (long z = 0; z < nz; ++z)
      kl += xlogx_ratio(q.qz_given_x[x * nz + z], pj[x * nz + z] / px[x]);
    rhs1 += q.qx[x] * (kl + std::log(q.qx[x] / px[x]));
  }

  // E_q[-ELBO] + E_q[log q(x)]
  double rhs2 = 0.0;
  for (long x = 0; x < nx; ++x) {
    if (q.qx[x] == 0.0) continue;
    double elbo = 0.0;
    for (long z = 0; z < nz; ++z) {
      const double qzx = q.qz_given_x[x * nz + z];
      if (qzx == 0.0) continue;
      elbo += qzx * (std::log(p.px_given_z[z * nx + x]) -
                     std::log(qzx / p.pz[z]));
    }
    rhs2 += q.qx[x] * (-elbo + std::log(q.qx[x]));
  }

  r.rhs = rhs1;
  r.abs_diff = std::max(std::fabs(r.lhs - rhs1), std::fabs(r.lhs - rhs2));
  r.pass = r.abs_diff < tol;
  return r;
}

IdentityReport verify_two_var_reverse(const TwoVarGen& p, const TwoVarInf& q,
                                      double tol) {
  IdentityReport r;
  r.name = "two_var_reverse";
  const long nx = p.nx, nz = p.nz;

  std::vector<double> qj(nx * nz), pj(nx * nz);
  for (long x = 0; x < nx; ++x)
    for (long z = 0; z < nz; ++z) {
      qj[x * nz + z] = q.qx[x] * q.qz_given_x[x * nz + z];
      pj[x * nz + z] = p.pz[z] * p.px_given_z[z * nx + x];
    }
  r.lhs = kl_discrete(pj, qj);

  std::vector<double> qz(nz, 0.0);
  for (long x = 0; x < nx; ++x)
    for (long z = 0; z < nz; ++z) qz[z] += qj[x * nz + z];

  // E_{p(z)} KL(p(x|z)||q(x|z)) + KL(p(z)||q(z))
  double rhs1 = 0.0;
  for (long z = 0; z < nz; ++z) {
    if (p.pz[z] == 0.0) continue;
    double kl = 0.0;
    for (long x = 0; x < nx; ++x)
      kl += xlogx_ratio(p.px_given_z[z * nx + x], qj[x * nz + z] / qz[z]);
    rhs1 += p.pz[z] * kl;
  }
  for (long z = 0; z < nz; ++z) rhs1 += xlogx_ratio(p.pz[z], qz[z]);

  r.rhs = rhs1;
  const double rhs2 = two_var_reverse_without_entropy(p, q) + [&] {
    double e = 0.0;
    for (long z = 0; z < nz; ++z)
      if (p.pz[z] > 0.0) e += p.pz[z] * std::log(p.pz[z]);
    return e;
  }();
  r.abs_diff = std::max(std::fabs(r.lhs - rhs1), std::fabs(r.lhs - rhs2));
  r.pass = r.abs_diff < tol;
  return r;
}

double two_var_reverse_without_entropy(const TwoVarGen& p, const TwoVarInf& q) {
  const long nx = p.nx, nz = p.nz;
  double enc_term = 0.0;  // E_{p(z)} E_{p(x|z)} [-log q(z|x)]
  double marg_term = 0.0; // E_{p(z)} KL(p(x|z) || q(x))
  for (long z = 0; z < nz; ++z) {
    if (p.pz[z] == 0.0) continue;
    double enc = 0.0, kl = 0.0;
    for (long x = 0; x < nx; ++x) {
      const double pxz = p.px_given_z[z * nx + x];
      if (pxz == 0.0) continue;
      enc += pxz * (-std::log(q.qz_given_x[x * nz + z]));
      kl += xlogx_ratio(pxz, q.qx[x]);
    }
    enc_term += p.pz[z] * enc;
    marg_term += p.pz[z] * kl;
  }
  return enc_term + marg_term;
}

IdentityReport verify_vade_identity(const VadeGenFactors& p,
                                    const VadeInfFactors& q, double tol) {
  IdentityReport r;
  r.name = "vade_identity";
  const DiscreteJoint pj = assemble(p);
  const DiscreteJoint qj = assemble(q);
  r.lhs = kl_discrete(qj.p, pj.p);  // forward KL: inference side first

  const long nx = p.nx, nz = p.nz, ny = p.ny;
  double rhs = 0.0;
  for (long x = 0; x < nx; ++x) {
    if (q.qx[x] == 0.0) continue;
    double lvade = 0.0;
    for (long z = 0; z < nz; ++z)
      for (long y = 0; y < ny; ++y) {
        const double w = q.qz_given_x[x * nz + z] * q.qy_given_x[x * ny + y];
        if (w == 0.0) continue;
        lvade += w * (std::log(p.px_given_z[z * nx + x]) -
                      std::log(q.qz_given_x[x * nz + z]) -
                      std::log(q.qy_given_x[x * ny + y]) +
                      std::log(p.pz_given_y[y * nz + z]) + std::log(p.py[y]));
      }
    rhs += q.qx[x] * (std::log(q.qx[x]) - lvade);
  }
  r.rhs = rhs;
  r.abs_diff = std::fabs(r.lhs - r.rhs);
  r.pass = r.abs_diff < tol;
  return r;
}

IdentityReport verify_vade_posterior_term(const VadeGenFactors& p,
                                          const VadeInfFactors& q, double tol) {
  IdentityReport r;
  r.name = "vade_posterior_term";
  const long nx = p.nx, nz = p.nz, ny = p.ny;
  std::vector<double> pz(nz, 0.0);
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y) pz[z] += p.py[y] * p.pz_given_y[y * nz + z];

  double worst = 0.0;
  for (long z = 0; z < nz; ++z)
    for (long x = 0; x < nx; ++x) {
      // direct: KL(q(y|x) || p(y|z,x)), with p(y|z,x) = p(z|y)p(y)/p(z)
      double direct = 0.0, decomposed = 0.0;
      for (long y = 0; y < ny; ++y) {
        const double qy = q.qy_given_x[x * ny + y];
        if (qy == 0.0) continue;
        const double post = p.pz_given_y[y * nz + z] * p.py[y] / pz[z];
        direct += qy * std::log(qy / post);
        decomposed += qy * (std::log(qy) - std::log(p.pz_given_y[y * nz + z]) -
                            std::log(p.py[y]));
      }
      decomposed += std::log(pz[z]);
      worst = std::max(worst, std::fabs(direct - decomposed));
    }
  r.lhs = worst;
  r.rhs = 0.0;
  r.abs_diff = worst;
  r.pass = worst < tol;
  return r;
}

McReport mc_estimate_check(const std::vector<double>& mu_p,
                           const std::vector<double>& sigma_p,
                           const std::vector<double>& mu_q,
                           const std::vector<double>& sigma_q, long n_draws,
                           Rng& rng) {
  const std::size_t j = mu_p.size();
  if (sigma_p.size() != j || mu_q.size() != j || sigma_q.size() != j)
    throw std::invalid_argument("mc_estimate_check: dimension mismatch");
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;

  McReport r;
  // closed-form cross entropy of diagonal Gaussians
  for (std::size_t d = 0; d < j; ++d) {
    const double vq = sigma_q[d] * sigma_q[d];
    const double dm = mu_p[d] - mu_q[d];
    r.exact += 0.5 * (kLog2Pi + 2.0 * std::log(sigma_q[d])) +
               (sigma_p[d] * sigma_p[d] + dm * dm) / (2.0 * vq);
  }

  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n_draws; ++i) {
    double nll = 0.0;
    for (std::size_t d = 0; d < j; ++d) {
      const double z = mu_p[d] + sigma_p[d] * rng.normal();
      const double dz = z - mu_q[d];
      nll += 0.5 * (kLog2Pi + 2.0 * std::log(sigma_q[d])) +
             dz * dz / (2.0 * sigma_q[d] * sigma_q[d]);
    }
    sum += nll;
    sumsq += nll * nll;
  }
  r.estimate = sum / static_cast<double>(n_draws);
  const double var =
      std::max(0.0, sumsq / static_cast<double>(n_draws) - r.estimate * r.estimate);
  r.stderr_ = std::sqrt(var / static_cast<double>(n_draws));
  r.pass = std::fabs(r.estimate - r.exact) <= 3.0 * r.stderr_ + 1e-12;
  return r;
}

std::vector<SuiteResult> run_identity_suites(long trials, double tol,
                                             std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x1d3));
  std::vector<SuiteResult> out;

  auto sizes3 = [&rng]() {
    return std::array<long, 3>{2 + rng.below(4), 2 + rng.below(4),
                               2 + rng.below(2)};
  };

  {
    SuiteResult s{"three_var_reverse", trials, 0.0, true};
    for (long t = 0; t < trials; ++t) {
      const auto [nx, nz, ny] = sizes3();
      auto rep = verify_three_var_reverse(random_gen_factors(nx, nz, ny, rng),
                                          random_inf_factors(nx, nz, ny, rng), tol);
      s.worst_abs_diff = std::max(s.worst_abs_diff, rep.abs_diff);
      s.pass = s.pass && rep.pass;
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"loss_decomposition", trials, 0.0, true};
    for (long t = 0; t < trials; ++t) {
      const auto [nx, nz, ny] = sizes3();
      auto rep = verify_loss_decomposition(random_gen_factors(nx, nz, ny, rng),
                                           random_inf_factors(nx, nz, ny, rng), tol);
      s.worst_abs_diff = std::max(s.worst_abs_diff, rep.abs_diff);
      s.pass = s.pass && rep.pass;
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"two_var_forward", trials, 0.0, true};
    for (long t = 0; t < trials; ++t) {
      const long nx = 2 + rng.below(5), nz = 2 + rng.below(5);
      auto rep = verify_two_var_forward(random_two_var_gen(nx, nz, rng),
                                        random_two_var_inf(nx, nz, rng), tol);
      s.worst_abs_diff = std::max(s.worst_abs_diff, rep.abs_diff);
      s.pass = s.pass && rep.pass;
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"two_var_reverse", trials, 0.0, true};
    for (long t = 0; t < trials; ++t) {
      const long nx = 2 + rng.below(5), nz = 2 + rng.below(5);
      auto rep = verify_two_var_reverse(random_two_var_gen(nx, nz, rng),
                                        random_two_var_inf(nx, nz, rng), tol);
      s.worst_abs_diff = std::max(s.worst_abs_diff, rep.abs_diff);
      s.pass = s.pass && rep.pass;
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"vade_identity", trials, 0.0, true};
    for (long t = 0; t < trials; ++t) {
      const auto [nx, nz, ny] = sizes3();
      auto p = random_vade_gen_factors(nx, nz, ny, rng);
      auto q = random_vade_inf_factors(nx, nz, ny, rng);
      auto rep = verify_vade_identity(p, q, tol);
      auto rep2 = verify_vade_posterior_term(p, q, tol);
      s.worst_abs_diff =
          std::max({s.worst_abs_diff, rep.abs_diff, rep2.abs_diff});
      s.pass = s.pass && rep.pass && rep2.pass;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace mpcc
