#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mpcc/checkpoint.hpp"
#include "mpcc/config.hpp"
#include "mpcc/data.hpp"
#include "mpcc/trainer.hpp"
#include "mpcc/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerify = 3;

// --seed flag first, then MPCC_SEED, then the fallback (config or checkpoint).
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MPCC_SEED")) return std::strtoull(env, nullptr, 10);
  return fallback;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed_flag) {
  mpcc::TrainConfig cfg;
  try {
    cfg = mpcc::config_parse(config_path);
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitUsage;
  }
  cfg.seed = resolve_seed(seed_flag, cfg.seed);
  try {
    mpcc::Dataset data =
        mpcc::make_dataset(cfg.data, mpcc::Rng::mix(cfg.seed, 0xd474));
    mpcc::Trainer trainer(cfg, std::move(data));
    trainer.run(out_dir);
  } catch (const mpcc::NumericAbort& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitUsage;
  }
  std::cout << "wrote " << out_dir << "/final.mpcc and " << out_dir
            << "/metrics.csv\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_spec,
             const std::optional<std::uint64_t>& seed_flag, long eval_n) {
  try {
    mpcc::ModelState m = mpcc::load_checkpoint(ckpt_path);
    const std::uint64_t seed = resolve_seed(seed_flag, m.cfg.seed);
    mpcc::Dataset data =
        mpcc::make_dataset(data_spec, mpcc::Rng::mix(seed, 0xd474));
    if (data.d != m.data_dim) {
      std::cerr << "eval: dataset dimensionality " << data.d
                << " does not match checkpoint " << m.data_dim << "\n";
      return kExitUsage;
    }
    mpcc::Rng rng(mpcc::Rng::mix(seed, 0xe7a1));
    const long n = eval_n > 0 ? eval_n : m.cfg.eval_samples;
    mpcc::MetricsRecord rec = mpcc::evaluate_model(m, data, n, rng);
    std::printf("iteration     %ld\n", rec.iteration);
    std::printf("acc           %.6f\n", rec.acc);
    std::printf("latent_mse    %.6g\n", rec.latent_mse);
    std::printf("mmd2          %.6g\n", rec.mmd);
    if (rec.mode_coverage >= 0.0)
      std::printf("mode_coverage %.6f\n", rec.mode_coverage);
    std::cout << mpcc::MetricsLog::header() << "\n"
              << mpcc::MetricsLog::format_row(rec) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_sample(const std::string& ckpt_path, long cluster, bool all, long n,
               const std::string& out_path,
               const std::optional<std::uint64_t>& seed_flag) {
  try {
    mpcc::ModelState m = mpcc::load_checkpoint(ckpt_path);
    if (!all && (cluster < 0 || cluster >= m.cfg.k)) {
      std::cerr << "sample: cluster " << cluster << " outside [0, " << m.cfg.k
                << ")\n";
      return kExitUsage;
    }
    const std::uint64_t seed = resolve_seed(seed_flag, m.cfg.seed);
    mpcc::Rng rng(mpcc::Rng::mix(seed, 0x5a3e));

    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + out_path);
    for (long q = 0; q < m.data_dim; ++q) f << 'x' << q << ',';
    f << "cluster\n";

    auto emit = [&](long k) {
      if (n == 0) return;
      std::vector<int> y(n, static_cast<int>(k));
      mpcc::Tape tape;
      auto draw = mpcc::sample_z_given_y(tape, m.prior, y, rng);
      mpcc::Tensor x = mpcc::ema_generator_forward(tape, m, draw.z, y);
      tape.clear();
      char buf[64];
      for (long i = 0; i < n; ++i) {
        for (long q = 0; q < m.data_dim; ++q) {
          std::snprintf(buf, sizeof(buf), "%.17g", x.values()[i * m.data_dim + q]);
          f << buf << ',';
        }
        f << k << '\n';
      }
    };
    if (all)
      for (long k = 0; k < m.cfg.k; ++k) emit(k);
    else
      emit(cluster);
  } catch (const std::exception& e) {
    std::cerr << "sample: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_verify(long trials, double tol, std::uint64_t seed) {
  bool all_pass = true;
  double worst = 0.0;
  const auto suites = mpcc::run_identity_suites(trials, tol, seed);
  for (const auto& s : suites) {
    std::printf("%-22s trials=%-4ld worst=%.3e  %s\n", s.name.c_str(), s.trials,
                s.worst_abs_diff, s.pass ? "PASS" : "FAIL");
    all_pass = all_pass && s.pass;
    worst = std::max(worst, s.worst_abs_diff);
  }
  // Monte Carlo cross-entropy consistency on random diagonal Gaussian pairs.
  {
    mpcc::Rng rng(mpcc::Rng::mix(seed, 0x3c3));
    bool pass = true;
    double worst_sigmas = 0.0;
    for (int t = 0; t < 10; ++t) {
      const long j = 1 + rng.below(4);
      std::vector<double> mp(j), sp(j), mq(j), sq(j);
      for (long d = 0; d < j; ++d) {
        mp[d] = 2.0 * rng.normal();
        mq[d] = 2.0 * rng.normal();
        sp[d] = 0.5 + rng.uniform();
        sq[d] = 0.5 + rng.uniform();
      }
      auto rep = mpcc::mc_estimate_check(mp, sp, mq, sq, 100000, rng);
      pass = pass && rep.pass;
      if (rep.stderr_ > 0)
        worst_sigmas = std::max(
            worst_sigmas, std::fabs(rep.estimate - rep.exact) / rep.stderr_);
    }
    std::printf("%-22s trials=%-4d worst=%.2f sigma  %s\n", "mc_cross_entropy",
                10, worst_sigmas, pass ? "PASS" : "FAIL");
    all_pass = all_pass && pass;
  }
  if (!all_pass) {
    std::printf("verification FAILED (worst identity gap %.3e, tol %.1e)\n",
                worst, tol);
    return kExitVerify;
  }
  std::printf("all identities hold (worst gap %.3e, tol %.1e)\n", worst, tol);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPCC: GAN-based clustering with a learnable mixture prior"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::string ckpt_path, data_spec, out_path = "samples.csv";
  std::optional<std::uint64_t> seed_flag;
  long cluster = -1, n = 1000, eval_n = 0, trials = 100;
  bool all = false;
  double tol = 1e-10;
  std::uint64_t verify_seed = 12345;

  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed_flag, "seed override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_spec, "dataset spec")->required();
  eval->add_option("--n", eval_n, "evaluation sample count");
  eval->add_option("--seed", seed_flag, "seed override");

  auto* sample = app.add_subcommand("sample", "draw conditional samples");
  sample->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  sample->add_option("--cluster", cluster, "cluster index");
  sample->add_flag("--all", all, "sample every cluster");
  sample->add_option("--n", n, "samples per cluster");
  sample->add_option("--out", out_path, "output csv");
  sample->add_option("--seed", seed_flag, "seed override");

  auto* verify = app.add_subcommand("verify", "run the identity suites");
  verify->add_option("--trials", trials, "instances per identity");
  verify->add_option("--tol", tol, "tolerance on |lhs - rhs|");
  verify->add_option("--seed", verify_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (app.got_subcommand(train)) return cmd_train(config_path, out_dir, seed_flag);
  if (app.got_subcommand(eval)) return cmd_eval(ckpt_path, data_spec, seed_flag, eval_n);
  if (app.got_subcommand(sample))
    return cmd_sample(ckpt_path, cluster, all, n, out_path, seed_flag);
  if (app.got_subcommand(verify)) return cmd_verify(trials, tol, verify_seed);
  return kExitUsage;
}
