#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mpcc/config.hpp"
#include "mpcc/data.hpp"
#include "mpcc/losses.hpp"
#include "mpcc/metrics.hpp"
#include "mpcc/networks.hpp"
#include "mpcc/optim.hpp"
#include "mpcc/param_store.hpp"
#include "mpcc/prior.hpp"
#include "mpcc/rng.hpp"

namespace mpcc {

// Thrown when a loss term goes non-finite; the CLI maps it to exit code 2.
struct NumericAbort : std::runtime_error {
  long iteration;
  std::string term;
  NumericAbort(long it, std::string t)
      : std::runtime_error("non-finite " + t + " at iteration " + std::to_string(it)),
        iteration(it),
        term(std::move(t)) {}
};

// Everything that defines a trained model: parameters, prior, EMA shadow and
// the four optimizer states (discriminator, generator, encoder, prior).
struct ModelState {
  TrainConfig cfg;
  long data_dim = 0;
  long iteration = 0;
  ParameterStore store;
  GmmPrior prior;
  NetworkSet nets;
  EmaShadow ema;
  AdamOptimizer opt_d, opt_g, opt_e, opt_c;
  std::vector<std::string> theta_c;  // prior parameter group
};

ModelState init_model(const TrainConfig& cfg, long data_dim);

// Generator forward pass through the EMA shadow parameters.
Tensor ema_generator_forward(Tape& tape, const ModelState& m, const Tensor& z,
                             const std::vector<int>& y);

// ACC / latent MSE / MMD / mode coverage on a dataset, sampling with `rng`.
MetricsRecord evaluate_model(const ModelState& m, const Dataset& data,
                             long eval_samples, Rng& rng);

enum class Substep { Disc, Gen, Enc, Prior };

// One training iteration:
//   D_steps discriminator updates, one generator update of (theta_g, theta_c)
//   at rate eta, E_steps encoder updates at rate eta, and on the first
//   encoder step one prior update of theta_c at rate eta_p followed by the
//   sigma floor projection. The EMA shadow refreshes after the generator
//   update. Each sub-step thaws exactly its designated parameter group, so
//   gradient buffers outside that group stay untouched.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, Dataset data);

  LossBreakdown train_iteration();
  MetricsRecord evaluate();

  // Full run: metrics row every eval_interval iterations, periodic and final
  // checkpoints, deterministic for a fixed (seed, config, dataset).
  void run(const std::string& out_dir);

  ModelState& model() { return m_; }
  const Dataset& dataset() const { return data_; }
  long iteration() const { return m_.iteration; }

  // Called after each sub-step's backward and optimizer update, while the
  // sub-step's gradient buffers are still intact.
  using Observer = std::function<void(Substep, const ModelState&)>;
  void set_substep_observer(Observer obs) { observer_ = std::move(obs); }

 private:
  Tensor real_batch(long n);
  void check_finite(double v, const char* term) const;
  void check_tensor_finite(const Tensor& t, const char* term) const;

  ModelState m_;
  Dataset data_;
  Rng train_rng_;
  Observer observer_;
  LossBreakdown last_;
};

}  // namespace mpcc
