#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mpcc/checkpoint.hpp"
#include "mpcc/trainer.hpp"

using namespace mpcc;

namespace {

TrainConfig tiny_cfg() {
  TrainConfig c;
  c.k = 3;
  c.j = 2;
  c.batch_size = 16;
  c.gen_hidden = {8, 8};
  c.de_hidden = {8, 8};
  c.eval_samples = 64;
  c.seed = 11;
  c.data = "gmm2d c=3 n_per=200 sep=6 noise=0.7 seed=5";
  return c;
}

Dataset tiny_data() { return make_dataset(tiny_cfg().data, 5); }

std::vector<double> all_values(const ParameterStore& store) {
  std::vector<double> v;
  for (const auto& e : store.entries())
    v.insert(v.end(), e.tensor.values().begin(), e.tensor.values().end());
  return v;
}

bool in_group(const std::vector<std::string>& g, const std::string& name) {
  return std::find(g.begin(), g.end(), name) != g.end();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST_CASE("zero learning rates leave every parameter bit-identical") {
  TrainConfig cfg = tiny_cfg();
  cfg.eta = 0.0;
  cfg.eta_p = 0.0;
  Trainer t(cfg, tiny_data());
  const auto before = all_values(t.model().store);
  for (int i = 0; i < 3; ++i) t.train_iteration();
  CHECK(all_values(t.model().store) == before);
}

TEST_CASE("gradient flow partition: each sub-step touches only its group") {
  Trainer t(tiny_cfg(), tiny_data());
  const auto& nets = t.model().nets;
  const auto& theta_c = t.model().theta_c;

  long checked = 0;
  t.set_substep_observer([&](Substep s, const ModelState& m) {
    std::vector<std::string> designated;
    switch (s) {
      case Substep::Disc: designated = nets.theta_d; break;
      case Substep::Gen:
        designated = nets.theta_g;
        designated.insert(designated.end(), theta_c.begin(), theta_c.end());
        break;
      case Substep::Enc: designated = nets.theta_e; break;
      case Substep::Prior: designated = theta_c; break;
    }
    for (const auto& e : m.store.entries()) {
      const auto* g = e.tensor.grad();
      if (in_group(designated, e.name)) {
        CHECK(g != nullptr);
      } else if (g != nullptr) {
        for (double v : *g) CHECK(v == 0.0);
      }
      ++checked;
    }
  });
  t.train_iteration();
  CHECK(checked > 0);
}

TEST_CASE("sub-steps run in the prescribed order") {
  TrainConfig cfg = tiny_cfg();
  cfg.d_steps = 2;
  cfg.e_steps = 3;
  Trainer t(cfg, tiny_data());

  std::vector<Substep> order;
  std::vector<std::uint64_t> stamps;
  t.set_substep_observer([&](Substep s, const ModelState& m) {
    order.push_back(s);
    stamps.push_back(m.store.global_stamp());
  });
  t.train_iteration();

  const std::vector<Substep> expect = {Substep::Disc, Substep::Disc, Substep::Gen,
                                       Substep::Enc,  Substep::Prior, Substep::Enc,
                                       Substep::Enc};
  CHECK(order == expect);
  for (std::size_t i = 1; i < stamps.size(); ++i) CHECK(stamps[i] > stamps[i - 1]);

  // theta_c was updated by both the generator and the prior sub-steps
  CHECK(t.model().store.entry("prior.mu").version == 2);
  // discriminator branch params updated once per d-step
  CHECK(t.model().store.entry("d.w0").version == 2);
  CHECK(t.model().store.entry("e.w0").version == 3);
}

TEST_CASE("sigma floor holds after every iteration under an aggressive rate") {
  TrainConfig cfg = tiny_cfg();
  cfg.eta_p = 1e-2;
  Trainer t(cfg, tiny_data());
  for (int i = 0; i < 100; ++i) {
    t.train_iteration();
    for (double ls : t.model().prior.log_sigma.values())
      CHECK(std::exp(ls) >= 0.5);
  }
}

TEST_CASE("ema shadow equals the generator before the start iteration") {
  TrainConfig cfg = tiny_cfg();
  cfg.ema_start_iter = 1000;
  Trainer t(cfg, tiny_data());
  for (int i = 0; i < 3; ++i) t.train_iteration();
  for (const auto& name : t.model().nets.theta_g)
    CHECK(t.model().ema.values(name) == t.model().store.get(name).values());
}

TEST_CASE("training is deterministic given seed, config and dataset") {
  Trainer a(tiny_cfg(), tiny_data());
  Trainer b(tiny_cfg(), tiny_data());
  for (int i = 0; i < 5; ++i) {
    a.train_iteration();
    b.train_iteration();
  }
  CHECK(all_values(a.model().store) == all_values(b.model().store));
  const auto ra = a.evaluate();
  const auto rb = b.evaluate();
  CHECK(ra.acc == rb.acc);
  CHECK(ra.mmd == rb.mmd);
  CHECK(ra.latent_mse == rb.latent_mse);
}

TEST_CASE("run writes byte-identical outputs for identical seeds") {
  namespace fs = std::filesystem;
  TrainConfig cfg = tiny_cfg();
  cfg.total_iters = 30;
  cfg.eval_interval = 10;
  cfg.checkpoint_interval = 0;
  const std::string d1 = (fs::temp_directory_path() / "mpcc_run_a").string();
  const std::string d2 = (fs::temp_directory_path() / "mpcc_run_b").string();
  Trainer(cfg, tiny_data()).run(d1);
  Trainer(cfg, tiny_data()).run(d2);
  CHECK(slurp(d1 + "/metrics.csv") == slurp(d2 + "/metrics.csv"));
  CHECK(slurp(d1 + "/final.mpcc") == slurp(d2 + "/final.mpcc"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("a zero-iteration run checkpoints the initialization") {
  namespace fs = std::filesystem;
  TrainConfig cfg = tiny_cfg();
  cfg.total_iters = 0;
  const std::string dir = (fs::temp_directory_path() / "mpcc_run_zero").string();
  Trainer t(cfg, tiny_data());
  const auto init_vals = all_values(t.model().store);
  t.run(dir);
  ModelState loaded = load_checkpoint(dir + "/final.mpcc");
  CHECK(loaded.iteration == 0);
  CHECK(all_values(loaded.store) == init_vals);
  fs::remove_all(dir);
}

TEST_CASE("checkpoints restore the full training state") {
  TrainConfig cfg = tiny_cfg();
  Trainer t(cfg, tiny_data());
  for (int i = 0; i < 4; ++i) t.train_iteration();

  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "mpcc_resume.mpcc").string();
  save_checkpoint(path, t.model());
  ModelState loaded = load_checkpoint(path);
  CHECK(all_values(loaded.store) == all_values(t.model().store));
  CHECK(loaded.iteration == 4);
  std::remove(path.c_str());
}

TEST_CASE("divergence aborts with the iteration index") {
  TrainConfig cfg = tiny_cfg();
  cfg.eta = 1e154;  // overflows the score pipeline within a step or two
  Trainer t(cfg, tiny_data());
  bool aborted = false;
  for (int i = 0; i < 50 && !aborted; ++i) {
    try {
      t.train_iteration();
    } catch (const NumericAbort& e) {
      aborted = true;
      CHECK(e.iteration >= 1);
      CHECK(!e.term.empty());
    }
  }
  CHECK(aborted);
}

TEST_CASE("losses stay finite and accuracy beats chance on an easy problem") {
  TrainConfig cfg = tiny_cfg();
  cfg.batch_size = 50;
  Trainer t(cfg, tiny_data());
  LossBreakdown lb{};
  for (int i = 0; i < 800; ++i) {
    lb = t.train_iteration();
    REQUIRE(std::isfinite(lb.d_loss));
    REQUIRE(std::isfinite(lb.g_adv_loss));
    REQUIRE(std::isfinite(lb.enc_nll));
    REQUIRE(std::isfinite(lb.cluster_ce));
    REQUIRE(std::isfinite(lb.prior_reg));
  }
  const auto rec = t.evaluate();
  CHECK(rec.acc > 0.45);  // chance for three balanced classes is 1/3
  CHECK(rec.mode_coverage >= 0.0);
}

TEST_CASE("embed conditioning trains the embedding table") {
  TrainConfig cfg = tiny_cfg();
  cfg.conditioning = Conditioning::Embed;
  cfg.embed_dim = 3;
  Trainer t(cfg, tiny_data());
  REQUIRE(t.model().store.has("g.emb"));
  const auto before = t.model().store.get("g.emb").values();
  for (int i = 0; i < 2; ++i) t.train_iteration();
  CHECK(t.model().store.get("g.emb").values() != before);
  CHECK(t.model().store.entry("g.emb").version == 2);
}

TEST_CASE("evaluation works from the ema overlay") {
  Trainer t(tiny_cfg(), tiny_data());
  t.train_iteration();
  Rng rng(3);
  Tape tape;
  std::vector<int> y = {0, 1, 2};
  auto draw = sample_z_given_y(tape, t.model().prior, y, rng);
  Tensor x = ema_generator_forward(tape, t.model(), draw.z, y);
  CHECK(x.shape() == Shape{3, 2});
  for (double v : x.values()) CHECK(std::isfinite(v));
}
