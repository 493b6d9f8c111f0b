#pragma once

#include <vector>

#include "mpcc/prior.hpp"
#include "mpcc/tensor.hpp"

namespace mpcc {

// Scalar summary of one training iteration. prior_reg is the weighted value
// lambda_p * L_p with the entropy term already scaled by 1/J.
struct LossBreakdown {
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  double enc_nll = 0.0;
  double cluster_ce = 0.0;
  double prior_reg = 0.0;
};

// mean(max(0, 1 - o_real)) + mean(max(0, 1 + o_fake)).
Tensor hinge_d_loss(Tape& tape, const Tensor& o_real, const Tensor& o_fake);

// -mean(o_fake).
Tensor hinge_g_loss(Tape& tape, const Tensor& o_fake);

// (1/data_dim) * mean_i sum_j [ 1/2 log(2 pi var_ij) + (z - mu)^2 / (2 var) ].
// var must be strictly positive; z is treated as a constant by the caller.
Tensor encoder_nll(Tape& tape, const Tensor& mu, const Tensor& var,
                   const Tensor& z, long data_dim);

// Same quantity parameterized by log var (what the encoder head emits).
Tensor encoder_nll_from_log_var(Tape& tape, const Tensor& mu,
                                const Tensor& log_var, const Tensor& z,
                                long data_dim);

// -mean_i log q(y = y_i | z_i), rows of log_memb must be log-probabilities.
Tensor cluster_ce(Tape& tape, const std::vector<int>& y, const Tensor& log_memb);

}  // namespace mpcc
