#include "mpcc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mpcc/checkpoint.hpp"

namespace mpcc {

namespace {
constexpr std::uint64_t kInitTag = 0x11a7;
constexpr std::uint64_t kTrainTag = 0x77a1;
constexpr std::uint64_t kEvalTag = 0xe7a1;
}  // namespace

ModelState init_model(const TrainConfig& cfg, long data_dim) {
  ModelState m;
  m.cfg = cfg;
  m.data_dim = data_dim;
  m.iteration = 0;
  Rng init_rng(Rng::mix(cfg.seed, kInitTag));
  m.nets = build_networks(m.store, cfg, data_dim, init_rng);
  const PriorInit pinit =
      cfg.prior_init == "orthogonal" ? PriorInit::Orthogonal : PriorInit::Gaussian;
  m.prior = make_prior(m.store, cfg.k, cfg.j, cfg.sigma_min, pinit, init_rng);
  m.theta_c = {"prior.mu", "prior.log_sigma"};
  m.opt_d = AdamOptimizer(cfg.eta, cfg.beta1, cfg.beta2, cfg.eps_adam);
  m.opt_g = AdamOptimizer(cfg.eta, cfg.beta1, cfg.beta2, cfg.eps_adam);
  m.opt_e = AdamOptimizer(cfg.eta, cfg.beta1, cfg.beta2, cfg.eps_adam);
  m.opt_c = AdamOptimizer(cfg.eta_p, cfg.beta1, cfg.beta2, cfg.eps_adam);
  m.ema.init(m.store, m.nets.theta_g);
  return m;
}

Tensor ema_generator_forward(Tape& tape, const ModelState& m, const Tensor& z,
                             const std::vector<int>& y) {
  // overlay store: shadow values for theta_g, live tensors for the rest
  ParameterStore overlay;
  for (const auto& e : m.store.entries()) {
    const bool is_g = std::find(m.nets.theta_g.begin(), m.nets.theta_g.end(),
                                e.name) != m.nets.theta_g.end();
    if (is_g)
      overlay.add(e.name, Tensor::from(e.tensor.shape(), m.ema.values(e.name)));
    else
      overlay.add(e.name, e.tensor);
  }
  return generator_forward(tape, overlay, m.nets, z, y);
}

MetricsRecord evaluate_model(const ModelState& m, const Dataset& data,
                             long eval_samples, Rng& rng) {
  MetricsRecord rec;
  rec.iteration = m.iteration;

  // clustering accuracy on the full dataset
  if (!data.labels.empty()) {
    Tensor x = Tensor::from({data.n, data.d}, data.x);
    const auto pred = assign_clusters(m.prior, m.store, m.nets, x);
    const auto table =
        build_contingency(pred, data.labels, m.cfg.k, data.num_classes);
    rec.acc = clustering_accuracy(table);
  } else {
    rec.acc = -1.0;
  }

  // latent cycle and generation-quality proxies on EMA samples
  const long n = std::max<long>(2, eval_samples);
  Tape tape;
  const auto y = sample_y(m.prior, n, rng);
  const auto draw = sample_z_given_y(tape, m.prior, y, rng);
  Tensor fake = ema_generator_forward(tape, m, draw.z, y);
  auto [mu, log_var] = encoder_forward(tape, m.store, m.nets, fake);
  (void)log_var;
  rec.latent_mse = latent_mse(mu, draw.z);
  tape.clear();

  std::vector<double> real(n * data.d);
  for (long i = 0; i < n; ++i) {
    const long pick = rng.below(data.n);
    for (long q = 0; q < data.d; ++q) real[i * data.d + q] = data.x[pick * data.d + q];
  }
  const auto bw = median_heuristic_bandwidths(real, fake.values(), data.d);
  // the unbiased estimate can dip below zero; the record keeps it at >= 0
  rec.mmd = std::max(0.0, mmd_rbf(real, fake.values(), data.d, bw));

  if (!data.centers.empty()) {
    const double radius = 3.0 * std::max(data.noise_scaled, 1e-6);
    rec.mode_coverage = mode_coverage(fake.values(), data.d, data.centers,
                                      data.num_classes, radius);
  } else {
    rec.mode_coverage = -1.0;
  }
  return rec;
}

Trainer::Trainer(const TrainConfig& cfg, Dataset data)
    : m_(init_model(cfg, data.d)),
      data_(std::move(data)),
      train_rng_(Rng::mix(cfg.seed, kTrainTag)) {
  if (data_.n < 1) throw std::invalid_argument("trainer: empty dataset");
}

Tensor Trainer::real_batch(long n) {
  std::vector<double> b(n * data_.d);
  for (long i = 0; i < n; ++i) {
    const long pick = train_rng_.below(data_.n);
    for (long q = 0; q < data_.d; ++q) b[i * data_.d + q] = data_.x[pick * data_.d + q];
  }
  return Tensor::from({n, data_.d}, std::move(b));
}

void Trainer::check_finite(double v, const char* term) const {
  if (!std::isfinite(v)) throw NumericAbort(m_.iteration, term);
}

void Trainer::check_tensor_finite(const Tensor& t, const char* term) const {
  for (double v : t.values())
    if (!std::isfinite(v)) throw NumericAbort(m_.iteration, term);
}

LossBreakdown Trainer::train_iteration() {
  const TrainConfig& cfg = m_.cfg;
  const long n = cfg.batch_size;
  ParameterStore& store = m_.store;
  m_.iteration += 1;

  auto notify = [&](Substep s) {
    if (observer_) observer_(s, m_);
  };

  // (a) discriminator updates, fresh real and generated batches each time
  for (long s = 0; s < cfg.d_steps; ++s) {
    store.zero_grads();
    store.thaw_only(m_.nets.theta_d);
    Tape tape;
    Tensor xr = real_batch(n);
    const auto y = sample_y(m_.prior, n, train_rng_);
    const auto draw = sample_z_given_y(tape, m_.prior, y, train_rng_);
    Tensor xf = generator_forward(tape, store, m_.nets, draw.z, y);
    Tensor o_real = discriminator_forward(tape, store, m_.nets, xr);
    Tensor o_fake = discriminator_forward(tape, store, m_.nets, xf);
    check_tensor_finite(o_real, "d_scores");
    check_tensor_finite(o_fake, "d_scores");
    Tensor loss = hinge_d_loss(tape, o_real, o_fake);
    last_.d_loss = loss.value();
    check_finite(last_.d_loss, "d_loss");
    tape.backward(loss);
    tape.clear();
    m_.opt_d.step(store, m_.nets.theta_d);
    notify(Substep::Disc);
  }

  // (b) one generator update of (theta_g, theta_c) at rate eta
  {
    store.zero_grads();
    std::vector<std::string> group = m_.nets.theta_g;
    group.insert(group.end(), m_.theta_c.begin(), m_.theta_c.end());
    store.thaw_only(group);
    Tape tape;
    const auto y = sample_y(m_.prior, n, train_rng_);
    const auto draw = sample_z_given_y(tape, m_.prior, y, train_rng_);
    Tensor xf = generator_forward(tape, store, m_.nets, draw.z, y);
    Tensor o_fake = discriminator_forward(tape, store, m_.nets, xf);
    check_tensor_finite(o_fake, "g_scores");
    Tensor loss = hinge_g_loss(tape, o_fake);
    last_.g_adv_loss = loss.value();
    check_finite(last_.g_adv_loss, "g_adv_loss");
    tape.backward(loss);
    tape.clear();
    m_.opt_g.step(store, group);
    notify(Substep::Gen);
    if (project_sigma_floor(m_.prior) > 0) store.note_update("prior.log_sigma");
    m_.ema.update(store, m_.iteration, cfg.ema_decay, cfg.ema_start_iter);
  }

  // (c) encoder updates; (d) prior update rides the first one
  for (long s = 0; s < cfg.e_steps; ++s) {
    store.zero_grads();
    store.thaw_only(m_.nets.theta_e);
    Tape tape;
    const auto y = sample_y(m_.prior, n, train_rng_);
    const auto draw = sample_z_given_y(tape, m_.prior, y, train_rng_);
    Tensor xf = generator_forward(tape, store, m_.nets, draw.z, y);
    auto [mu, log_var] = encoder_forward(tape, store, m_.nets, xf);
    Tensor loss = encoder_nll_from_log_var(tape, mu, log_var, draw.z, data_.d);
    last_.enc_nll = loss.value();
    check_finite(last_.enc_nll, "enc_nll");
    tape.backward(loss);
    tape.clear();
    m_.opt_e.step(store, m_.nets.theta_e);
    notify(Substep::Enc);

    if (s == 0) {
      // same y and eps as the encoder step, rebuilt with theta_c live
      store.zero_grads();
      store.thaw_only(m_.theta_c);
      Tape ptape;
      Tensor z = reparameterize(ptape, m_.prior, y, draw.eps);
      Tensor lm = log_membership(ptape, m_.prior, z);
      check_tensor_finite(lm, "membership");
      Tensor ce = cluster_ce(ptape, y, lm);
      Tensor reg = prior_regularizer(ptape, m_.prior,
                                     1.0 / static_cast<double>(cfg.j));
      Tensor weighted = ptape.mul(reg, Tensor::scalar(cfg.lambda_p));
      Tensor loss_c = ptape.add(ce, weighted);
      last_.cluster_ce = ce.value();
      last_.prior_reg = weighted.value();
      check_finite(last_.cluster_ce, "cluster_ce");
      check_finite(last_.prior_reg, "prior_reg");
      ptape.backward(loss_c);
      ptape.clear();
      m_.opt_c.step(store, m_.theta_c);
      notify(Substep::Prior);
      if (project_sigma_floor(m_.prior) > 0) store.note_update("prior.log_sigma");
    }
  }

  store.set_all_requires_grad(true);
  return last_;
}

MetricsRecord Trainer::evaluate() {
  Rng eval_rng(Rng::mix(m_.cfg.seed, Rng::mix(kEvalTag, m_.iteration)));
  MetricsRecord rec = evaluate_model(m_, data_, m_.cfg.eval_samples, eval_rng);
  rec.d_loss = last_.d_loss;
  rec.g_adv_loss = last_.g_adv_loss;
  rec.enc_nll = last_.enc_nll;
  rec.cluster_ce = last_.cluster_ce;
  rec.prior_reg = last_.prior_reg;
  return rec;
}

void Trainer::run(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  MetricsLog log(out_dir + "/metrics.csv");

  const TrainConfig& cfg = m_.cfg;
  if (cfg.total_iters == 0) {
    save_checkpoint(out_dir + "/final.mpcc", m_);
    return;
  }
  for (long it = 1; it <= cfg.total_iters; ++it) {
    train_iteration();
    const bool at_eval =
        cfg.eval_interval > 0 &&
        (it % cfg.eval_interval == 0 || it == cfg.total_iters);
    if (at_eval) log.append(evaluate());
    if (cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 &&
        it != cfg.total_iters) {
      char name[64];
      std::snprintf(name, sizeof(name), "/ckpt_%08ld.mpcc", it);
      save_checkpoint(out_dir + name, m_);
    }
  }
  save_checkpoint(out_dir + "/final.mpcc", m_);
}

}  // namespace mpcc
