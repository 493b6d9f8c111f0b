#include "mpcc/networks.hpp"

#include <stdexcept>

namespace mpcc {

namespace {

constexpr double kWeightStd = 0.02;

Tensor gaussian_tensor(Shape shape, double std, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  for (auto& v : t.values()) v = std * rng.normal();
  return t;
}

// Registers w/b for one linear layer and returns the store keys.
MlpNet::Layer add_layer(ParameterStore& store, const std::string& prefix,
                        int idx, long in, long out, bool hidden, Rng& rng) {
  MlpNet::Layer l;
  l.w = prefix + ".w" + std::to_string(idx);
  l.b = prefix + ".b" + std::to_string(idx);
  l.hidden = hidden;
  store.add(l.w, gaussian_tensor({in, out}, kWeightStd, rng));
  store.add(l.b, Tensor::zeros({out}, true));
  return l;
}

void collect_keys(const MlpNet& net, std::vector<std::string>& out) {
  for (const auto& l : net.layers) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
}

}  // namespace

NetworkSet build_networks(ParameterStore& store, const TrainConfig& cfg,
                          long data_dim, Rng& rng) {
  if (data_dim < 1) throw std::invalid_argument("networks: data_dim must be >= 1");
  NetworkSet nets;
  nets.K = cfg.k;
  nets.J = cfg.j;
  nets.data_dim = data_dim;
  nets.conditioning = cfg.conditioning;
  nets.share_trunk = cfg.share_trunk;
  nets.embed_dim = cfg.embed_dim > 0 ? cfg.embed_dim : cfg.j;

  // generator: z (+ embedding) -> hidden stack -> tanh head of width D
  long gin = cfg.j;
  if (cfg.conditioning == Conditioning::Embed) {
    gin += nets.embed_dim;
    nets.embed_key = "g.emb";
    store.add(nets.embed_key,
              gaussian_tensor({cfg.k, nets.embed_dim}, kWeightStd, rng));
  }
  nets.gen.in_dim = gin;
  nets.gen.out_dim = data_dim;
  nets.gen.head = Head::Tanh;
  {
    long in = gin;
    int idx = 0;
    for (long h : cfg.gen_hidden) {
      nets.gen.layers.push_back(add_layer(store, "g", idx++, in, h, true, rng));
      in = h;
    }
    nets.gen.layers.push_back(add_layer(store, "g", idx, in, data_dim, false, rng));
  }

  // discriminator / encoder: optionally shared trunk, then private branches
  const long n_hidden = static_cast<long>(cfg.de_hidden.size());
  long trunk = 0;
  if (cfg.share_trunk) {
    trunk = cfg.trunk_depth >= 0 ? cfg.trunk_depth : n_hidden - 1;
    if (trunk < 0) trunk = 0;
    if (trunk > n_hidden) trunk = n_hidden;
  }
  nets.trunk_depth = trunk;

  std::vector<MlpNet::Layer> trunk_layers;
  {
    long in = data_dim;
    for (long i = 0; i < trunk; ++i) {
      trunk_layers.push_back(
          add_layer(store, "de", static_cast<int>(i), in, cfg.de_hidden[i], true, rng));
      in = cfg.de_hidden[i];
    }
  }
  const long trunk_out = trunk > 0 ? cfg.de_hidden[trunk - 1] : data_dim;

  auto build_branch = [&](const std::string& prefix, long head_width) {
    MlpNet net;
    net.in_dim = data_dim;
    net.out_dim = head_width;
    net.layers = trunk_layers;
    long in = trunk_out;
    int idx = 0;
    for (long i = trunk; i < n_hidden; ++i) {
      net.layers.push_back(add_layer(store, prefix, idx++, in, cfg.de_hidden[i], true, rng));
      in = cfg.de_hidden[i];
    }
    net.layers.push_back(add_layer(store, prefix, idx, in, head_width, false, rng));
    return net;
  };

  nets.disc = build_branch("d", 1);
  nets.disc.head = Head::Linear;
  nets.enc = build_branch("e", 2 * cfg.j);
  nets.enc.head = Head::LinearPair;

  collect_keys(nets.gen, nets.theta_g);
  if (!nets.embed_key.empty()) nets.theta_g.push_back(nets.embed_key);
  collect_keys(nets.disc, nets.theta_d);
  collect_keys(nets.enc, nets.theta_e);
  return nets;
}

Tensor mlp_forward(Tape& tape, const ParameterStore& store, const MlpNet& net,
                   const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != net.in_dim)
    throw std::invalid_argument("mlp: input shape " + shape_str(x.shape()) +
                                " does not match expected width " +
                                std::to_string(net.in_dim));
  Tensor h = x;
  for (const auto& l : net.layers) {
    h = tape.add(tape.matmul(h, store.get(l.w)), store.get(l.b));
    if (l.hidden) h = tape.leaky_relu(h);
  }
  if (net.head == Head::Tanh) h = tape.tanh(h);
  return h;
}

Tensor generator_forward(Tape& tape, const ParameterStore& store,
                         const NetworkSet& nets, const Tensor& z,
                         const std::vector<int>& y) {
  Tensor in = z;
  if (nets.conditioning == Conditioning::Embed) {
    Tensor emb = tape.matmul(one_hot(y, nets.K), store.get(nets.embed_key));
    in = tape.concat(z, emb);
  }
  return mlp_forward(tape, store, nets.gen, in);
}

std::pair<Tensor, Tensor> encoder_forward(Tape& tape, const ParameterStore& store,
                                          const NetworkSet& nets, const Tensor& x) {
  Tensor out = mlp_forward(tape, store, nets.enc, x);
  Tensor mu = tape.slice(out, 0, nets.J);
  Tensor log_var = tape.slice(out, nets.J, 2 * nets.J);
  return {mu, log_var};
}

Tensor discriminator_forward(Tape& tape, const ParameterStore& store,
                             const NetworkSet& nets, const Tensor& x) {
  Tensor out = mlp_forward(tape, store, nets.disc, x);  // n x 1
  return tape.reshape(out, {out.shape()[0]});
}

}  // namespace mpcc
