#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mpcc {

enum class Conditioning { ZOnly, Embed };

// Every training hyperparameter, with defaults that reproduce the reference
// regime (hinge GAN, dual learning rates, sigma floor, EMA after warmup).
// An empty config file is valid.
struct TrainConfig {
  long k = 5;              // clusters
  long j = 2;              // latent dimensionality
  long d_steps = 4;        // discriminator updates per iteration
  long e_steps = 4;        // encoder updates per iteration
  double eta = 2e-4;       // learning rate for networks
  double eta_p = 6e-4;     // learning rate for prior parameters
  double lambda_p = 0.01;  // weight of the prior regularizer
  long batch_size = 50;
  long total_iters = 20000;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double ema_decay = 0.9999;
  long ema_start_iter = 1000;
  double sigma_min = 0.5;
  std::uint64_t seed = 1;
  Conditioning conditioning = Conditioning::ZOnly;
  long embed_dim = 0;  // 0 = use j (only read in embed mode)
  bool share_trunk = true;
  long trunk_depth = -1;  // -1 = all but the last hidden layer
  std::string prior_init = "gaussian";  // gaussian | orthogonal
  std::vector<long> gen_hidden = {32, 32};
  std::vector<long> de_hidden = {32, 32};  // discriminator/encoder stack
  long eval_interval = 500;
  long checkpoint_interval = 5000;
  long eval_samples = 2000;
  std::string data = "gmm2d c=5 n_per=2000 sep=6 noise=1";
};

// Flat `key = value` text, one pair per line, '#' starts a comment.
// Unknown keys, duplicate keys and malformed values are rejected with the
// line number. An empty file yields the defaults above.
TrainConfig config_parse_text(const std::string& text);
TrainConfig config_parse(const std::string& path);

// Canonical text form; parse(serialize(c)) == c, bit for bit.
std::string config_serialize(const TrainConfig& c);

bool config_equal(const TrainConfig& a, const TrainConfig& b);

}  // namespace mpcc
