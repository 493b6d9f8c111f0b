#pragma once

#include <string>
#include <vector>

#include "mpcc/config.hpp"
#include "mpcc/param_store.hpp"
#include "mpcc/rng.hpp"
#include "mpcc/tensor.hpp"

namespace mpcc {

enum class Head { Tanh, Linear, LinearPair };

// A fully connected stack described by store keys, so two networks can
// reference the same trunk arrays. Hidden layers use leaky-ReLU(0.2).
struct MlpNet {
  struct Layer {
    std::string w, b;
    bool hidden = true;  // apply the hidden activation after this layer
  };
  std::vector<Layer> layers;
  Head head = Head::Linear;
  long in_dim = 0;
  long out_dim = 0;  // head width; LinearPair emits two out_dim/2 halves
};

// Generator p(x|z,y), encoder q(z|x) and discriminator D as MLPs.
// With share_trunk, the first trunk_depth discriminator/encoder layers are
// the same arrays and appear exactly once in the store.
struct NetworkSet {
  MlpNet gen, disc, enc;
  std::vector<std::string> theta_g, theta_d, theta_e;
  bool share_trunk = true;
  long trunk_depth = 0;
  Conditioning conditioning = Conditioning::ZOnly;
  std::string embed_key;  // K x E table, part of theta_g in embed mode
  long K = 0, J = 0, data_dim = 0, embed_dim = 0;
};

NetworkSet build_networks(ParameterStore& store, const TrainConfig& cfg,
                          long data_dim, Rng& rng);

// Stack application up to and including the head.
Tensor mlp_forward(Tape& tape, const ParameterStore& store, const MlpNet& net,
                   const Tensor& x);

// x_tilde in (-1,1)^D via the tanh head. In embed mode a learnable embedding
// row per cluster is concatenated to z.
Tensor generator_forward(Tape& tape, const ParameterStore& store,
                         const NetworkSet& nets, const Tensor& z,
                         const std::vector<int>& y);

// (mu_tilde, log var_tilde), both n x J.
std::pair<Tensor, Tensor> encoder_forward(Tape& tape, const ParameterStore& store,
                                          const NetworkSet& nets, const Tensor& x);

// Unbounded score per sample, shape {n}.
Tensor discriminator_forward(Tape& tape, const ParameterStore& store,
                             const NetworkSet& nets, const Tensor& x);

}  // namespace mpcc
