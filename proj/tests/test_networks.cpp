#include <cmath>

#include "doctest.h"
#include "mpcc/grad_check.hpp"
#include "mpcc/networks.hpp"
#include "mpcc/prior.hpp"

using namespace mpcc;

namespace {
TrainConfig small_cfg() {
  TrainConfig c;
  c.k = 3;
  c.j = 2;
  c.gen_hidden = {6, 5};
  c.de_hidden = {6, 5};
  return c;
}

void zero_group(ParameterStore& store, const std::vector<std::string>& names) {
  for (const auto& n : names)
    for (auto& v : store.get(n).values()) v = 0.0;
}
}  // namespace

TEST_CASE("generator with zero weights emits tanh(0) = 0") {
  ParameterStore store;
  Rng rng(1);
  auto nets = build_networks(store, small_cfg(), 4, rng);
  zero_group(store, nets.theta_g);
  Tape t;
  Tensor z = Tensor::full({3, 2}, 0.7);
  Tensor x = generator_forward(t, store, nets, z, {0, 1, 2});
  REQUIRE(x.shape() == Shape{3, 4});
  for (double v : x.values()) CHECK(v == 0.0);
}

TEST_CASE("generator outputs are bounded by the tanh head") {
  ParameterStore store;
  Rng rng(2);
  auto nets = build_networks(store, small_cfg(), 4, rng);
  Tape t;
  // saturating inputs never escape [-1, 1]
  Tensor z = Tensor::full({2, 2}, 1e6);
  Tensor x = generator_forward(t, store, nets, z, {0, 1});
  for (double v : x.values()) CHECK(std::fabs(v) <= 1.0);
  // moderate inputs stay strictly inside
  Tensor z2 = Tensor::full({2, 2}, 0.5);
  Tensor x2 = generator_forward(t, store, nets, z2, {0, 1});
  for (double v : x2.values()) CHECK(std::fabs(v) < 1.0);
}

TEST_CASE("gradient reaches the prior means through generated samples") {
  ParameterStore store;
  Rng rng(3);
  TrainConfig cfg = small_cfg();
  auto nets = build_networks(store, cfg, 4, rng);
  GmmPrior prior = make_prior(store, cfg.k, cfg.j, 0.5, PriorInit::Gaussian, rng);

  Tensor eps = Tensor::zeros({4, 2});
  for (auto& v : eps.values()) v = rng.normal();
  const std::vector<int> y = {0, 1, 2, 0};

  std::vector<std::string> names = nets.theta_g;
  names.push_back("prior.mu");
  names.push_back("prior.log_sigma");
  auto f = [&](Tape& tape) {
    Tensor z = reparameterize(tape, prior, y, eps);
    return tape.mean(generator_forward(tape, store, nets, z, y));
  };
  auto rep = finite_difference_check(f, store, names, 1e-5, 1e-4);
  CHECK(rep.pass);

  // and the analytic gradient w.r.t. mu is not identically zero
  store.zero_grads();
  Tape tape;
  tape.backward(f(tape));
  double norm = 0;
  for (double g : *store.get("prior.mu").grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("encoder with zero weights returns its biases; variance positive") {
  ParameterStore store;
  Rng rng(4);
  auto nets = build_networks(store, small_cfg(), 4, rng);
  zero_group(store, nets.theta_e);
  // biases live in theta_e too; set the head bias to something visible
  Tape t;
  Tensor x = Tensor::full({2, 4}, 0.3);
  auto [mu, log_var] = encoder_forward(t, store, nets, x);
  for (double v : mu.values()) CHECK(v == 0.0);
  for (double v : log_var.values()) CHECK(v == 0.0);
  // sigma^2 = exp(log var) > 0 whatever the head emits
  Tensor var = t.exp(log_var);
  for (double v : var.values()) CHECK(v > 0.0);
}

TEST_CASE("discriminator returns one unbounded score per sample") {
  ParameterStore store;
  Rng rng(5);
  auto nets = build_networks(store, small_cfg(), 4, rng);
  Tape t;
  Tensor x = Tensor::full({7, 4}, 0.1);
  Tensor o = discriminator_forward(t, store, nets, x);
  CHECK(o.shape() == Shape{7});
  CHECK_THROWS_AS(discriminator_forward(t, store, nets, Tensor::full({2, 3}, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("shared trunk arrays appear once and feed both branches") {
  ParameterStore store;
  Rng rng(6);
  TrainConfig cfg = small_cfg();
  cfg.share_trunk = true;
  auto nets = build_networks(store, cfg, 4, rng);

  // trunk key present once, referenced by both branch nets
  CHECK(store.has("de.w0"));
  CHECK(nets.disc.layers[0].w == "de.w0");
  CHECK(nets.enc.layers[0].w == "de.w0");

  // perturbing a trunk weight changes both outputs
  Tape t;
  Tensor x = Tensor::full({1, 4}, 0.25);
  const double d0 = discriminator_forward(t, store, nets, x).value();
  auto mu0 = encoder_forward(t, store, nets, x).first.values();
  store.get("de.w0").values()[1] += 0.5;
  const double d1 = discriminator_forward(t, store, nets, x).value();
  auto mu1 = encoder_forward(t, store, nets, x).first.values();
  CHECK(d0 != d1);
  CHECK(mu0 != mu1);
}

TEST_CASE("trunk accumulates gradients from both discriminator and encoder") {
  ParameterStore store;
  Rng rng(7);
  TrainConfig cfg = small_cfg();
  auto nets = build_networks(store, cfg, 4, rng);
  Tensor x = Tensor::full({3, 4}, 0.2);

  auto grad_trunk = [&](bool disc, bool enc) {
    store.zero_grads();
    Tape t;
    Tensor loss = Tensor::scalar(0.0);
    if (disc) loss = t.add(loss, t.mean(discriminator_forward(t, store, nets, x)));
    if (enc) loss = t.add(loss, t.mean(encoder_forward(t, store, nets, x).first));
    t.backward(loss);
    return *store.get("de.w0").grad();
  };
  auto gd = grad_trunk(true, false);
  auto ge = grad_trunk(false, true);
  auto gboth = grad_trunk(true, true);
  for (std::size_t i = 0; i < gd.size(); ++i)
    CHECK(gboth[i] == doctest::Approx(gd[i] + ge[i]).epsilon(1e-12));
}

TEST_CASE("unshared mode keeps discriminator and encoder stacks disjoint") {
  ParameterStore store;
  Rng rng(8);
  TrainConfig cfg = small_cfg();
  cfg.share_trunk = false;
  auto nets = build_networks(store, cfg, 4, rng);
  CHECK_FALSE(store.has("de.w0"));
  for (const auto& kd : nets.theta_d)
    for (const auto& ke : nets.theta_e) CHECK(kd != ke);
}

TEST_CASE("zero embedding table reduces embed mode to padded z-only") {
  ParameterStore store;
  Rng rng(9);
  TrainConfig cfg = small_cfg();
  cfg.conditioning = Conditioning::Embed;
  cfg.embed_dim = 3;
  auto nets = build_networks(store, cfg, 4, rng);
  for (auto& v : store.get("g.emb").values()) v = 0.0;

  Tape t;
  Tensor z = Tensor::from({2, 2}, {0.3, -0.4, 0.9, 0.1});
  Tensor via_embed = generator_forward(t, store, nets, z, {1, 2});

  // same weights driven by [z, 0-padding] directly
  Tensor padded = t.concat(z, Tensor::zeros({2, 3}));
  Tensor direct = mlp_forward(t, store, nets.gen, padded);
  CHECK(via_embed.values() == direct.values());
}

TEST_CASE("networks are deterministic given the init seed") {
  auto build_vals = [](std::uint64_t seed) {
    ParameterStore store;
    Rng rng(seed);
    auto nets = build_networks(store, small_cfg(), 4, rng);
    (void)nets;
    std::vector<double> all;
    for (const auto& e : store.entries())
      all.insert(all.end(), e.tensor.values().begin(), e.tensor.values().end());
    return all;
  };
  CHECK(build_vals(11) == build_vals(11));
  CHECK(build_vals(11) != build_vals(12));
}
