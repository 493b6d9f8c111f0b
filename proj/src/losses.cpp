#include "mpcc/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mpcc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_scores(const char* op, const Tensor& o) {
  if (o.numel() < 1)
    throw std::invalid_argument(std::string(op) + ": empty score batch");
  for (double v : o.values())
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(op) + ": non-finite score");
}
}  // namespace

Tensor hinge_d_loss(Tape& tape, const Tensor& o_real, const Tensor& o_fake) {
  check_scores("hinge_d_loss", o_real);
  check_scores("hinge_d_loss", o_fake);
  Tensor one = Tensor::scalar(1.0);
  Tensor real_term = tape.mean(tape.relu(tape.sub(one, o_real)));
  Tensor fake_term = tape.mean(tape.relu(tape.add(one, o_fake)));
  return tape.add(real_term, fake_term);
}

Tensor hinge_g_loss(Tape& tape, const Tensor& o_fake) {
  check_scores("hinge_g_loss", o_fake);
  return tape.negate(tape.mean(o_fake));
}

Tensor encoder_nll(Tape& tape, const Tensor& mu, const Tensor& var,
                   const Tensor& z, long data_dim) {
  if (mu.shape() != var.shape() || mu.shape() != z.shape() || mu.rank() != 2)
    throw std::invalid_argument("encoder_nll: shape mismatch " +
                                shape_str(mu.shape()) + " / " +
                                shape_str(var.shape()) + " / " +
                                shape_str(z.shape()));
  for (double v : var.values())
    if (!(v > 0.0))
      throw std::invalid_argument("encoder_nll: non-positive variance " +
                                  std::to_string(v));
  return encoder_nll_from_log_var(tape, mu, tape.log(var), z, data_dim);
}

Tensor encoder_nll_from_log_var(Tape& tape, const Tensor& mu,
                                const Tensor& log_var, const Tensor& z,
                                long data_dim) {
  if (mu.shape() != log_var.shape() || mu.shape() != z.shape() || mu.rank() != 2)
    throw std::invalid_argument("encoder_nll: shape mismatch " +
                                shape_str(mu.shape()) + " / " +
                                shape_str(log_var.shape()) + " / " +
                                shape_str(z.shape()));
  if (data_dim < 1)
    throw std::invalid_argument("encoder_nll: data_dim must be >= 1");
  Tensor half = Tensor::scalar(0.5);
  Tensor log_term =
      tape.mul(tape.add(log_var, Tensor::scalar(kLog2Pi)), half);
  Tensor quad = tape.mul(
      tape.mul(tape.square(tape.sub(z, mu)), tape.exp(tape.negate(log_var))),
      half);
  Tensor per_sample = tape.sum_axis(tape.add(log_term, quad), 1);  // n
  return tape.mul(tape.mean(per_sample),
                  Tensor::scalar(1.0 / static_cast<double>(data_dim)));
}

Tensor cluster_ce(Tape& tape, const std::vector<int>& y, const Tensor& log_memb) {
  if (log_memb.rank() != 2 ||
      log_memb.shape()[0] != static_cast<long>(y.size()))
    throw std::invalid_argument("cluster_ce: membership shape " +
                                shape_str(log_memb.shape()) + " does not match " +
                                std::to_string(y.size()) + " labels");
  const long k = log_memb.shape()[1];
  // row sanity: finite log-probabilities, none above zero (tiny slack)
  for (double v : log_memb.values())
    if (!std::isfinite(v) || v > 1e-9)
      throw std::invalid_argument(
          "cluster_ce: rows are not valid log-probabilities");
  Tensor picked = tape.sum_axis(tape.mul(one_hot(y, k), log_memb), 1);  // n
  return tape.negate(tape.mean(picked));
}

}  // namespace mpcc
