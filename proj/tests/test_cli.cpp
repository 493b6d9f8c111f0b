#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mpcc/checkpoint.hpp"
#include "mpcc/data.hpp"
#include "mpcc/metrics.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = MPCC_BIN;

int run_cmd(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

int run_cmd_env(const std::string& env, const std::string& args) {
  const std::string cmd = env + " " + kBin + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
}

long count_lines(const std::string& path) {
  std::ifstream f(path);
  long n = 0;
  std::string line;
  while (std::getline(f, line)) ++n;
  return n;
}

const char* kTinyCfg =
    "k = 3\n"
    "j = 2\n"
    "batch_size = 16\n"
    "gen_hidden = 8 8\n"
    "de_hidden = 8 8\n"
    "total_iters = 25\n"
    "eval_interval = 5\n"
    "checkpoint_interval = 10\n"
    "eval_samples = 64\n"
    "data = gmm2d c=3 n_per=100 sep=6 noise=0.7 seed=5\n";

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cmd("") == 1);
  CHECK(run_cmd("train") == 1);  // --config required
  CHECK(run_cmd("train --config /nonexistent/cfg") == 1);
  CHECK(run_cmd("frobnicate") == 1);
  CHECK(run_cmd("--help") == 0);
}

TEST_CASE("invalid config keys are reported and exit nonzero") {
  TmpDir tmp("mpcc_cli_badcfg");
  write_file(tmp / "cfg", "mystery_knob = 3\n");
  CHECK(run_cmd("train --config " + (tmp / "cfg")) == 1);
}

TEST_CASE("train writes checkpoints and a metrics log") {
  TmpDir tmp("mpcc_cli_train");
  write_file(tmp / "cfg", kTinyCfg);
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out") +
                " --seed 3") == 0);
  CHECK(fs::exists(tmp / "out/final.mpcc"));
  CHECK(fs::exists(tmp / "out/ckpt_00000010.mpcc"));
  CHECK(fs::exists(tmp / "out/ckpt_00000020.mpcc"));
  const auto rows = mpcc::MetricsLog::parse(tmp / "out/metrics.csv");
  CHECK(rows.size() == 5);
  CHECK(rows.back().iteration == 25);
}

TEST_CASE("a zero-iteration run still writes the initial checkpoint") {
  TmpDir tmp("mpcc_cli_zero");
  write_file(tmp / "cfg",
             "k = 3\nj = 2\ngen_hidden = 8 8\nde_hidden = 8 8\n"
             "total_iters = 0\ndata = gmm2d c=3 n_per=50 sep=6 noise=0.7 seed=5\n");
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out")) == 0);
  const auto m = mpcc::load_checkpoint(tmp / "out/final.mpcc");
  CHECK(m.iteration == 0);
}

TEST_CASE("identical seeds reproduce the outputs byte for byte") {
  TmpDir tmp("mpcc_cli_repro");
  write_file(tmp / "cfg", kTinyCfg);
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "a") +
                " --seed 9") == 0);
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "b") +
                " --seed 9") == 0);
  CHECK(slurp(tmp / "a/metrics.csv") == slurp(tmp / "b/metrics.csv"));
  CHECK(slurp(tmp / "a/final.mpcc") == slurp(tmp / "b/final.mpcc"));

  // a different seed diverges
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "c") +
                " --seed 10") == 0);
  CHECK(slurp(tmp / "a/metrics.csv") != slurp(tmp / "c/metrics.csv"));
}

TEST_CASE("MPCC_SEED acts as the fallback seed") {
  TmpDir tmp("mpcc_cli_envseed");
  write_file(tmp / "cfg", kTinyCfg);
  CHECK(run_cmd_env("MPCC_SEED=9", "train --config " + (tmp / "cfg") + " --out " +
                                       (tmp / "env")) == 0);
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "flag") +
                " --seed 9") == 0);
  CHECK(slurp(tmp / "env/final.mpcc") == slurp(tmp / "flag/final.mpcc"));
}

TEST_CASE("eval prints a machine row consistent with a recomputation") {
  TmpDir tmp("mpcc_cli_eval");
  write_file(tmp / "cfg", kTinyCfg);
  REQUIRE(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out") +
                  " --seed 3") == 0);
  const std::string data_spec = "\"gmm2d c=3 n_per=100 sep=6 noise=0.7 seed=5\"";
  const std::string out_file = tmp / "eval.txt";
  const std::string cmd = kBin + " eval --checkpoint " + (tmp / "out/final.mpcc") +
                          " --data " + data_spec + " > " + out_file + " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);

  // last two lines are the header and the machine-readable row
  std::ifstream f(out_file);
  std::string line, header, row;
  while (std::getline(f, line)) {
    if (line.rfind("iteration,", 0) == 0) {
      header = line;
      std::getline(f, row);
    }
  }
  CHECK(header == mpcc::MetricsLog::header());
  REQUIRE(!row.empty());

  // offline recomputation of ACC from the checkpoint must agree
  const auto m = mpcc::load_checkpoint(tmp / "out/final.mpcc");
  const auto data = mpcc::make_dataset("gmm2d c=3 n_per=100 sep=6 noise=0.7 seed=5", 0);
  mpcc::Tensor x = mpcc::Tensor::from({data.n, data.d}, data.x);
  const auto pred = mpcc::assign_clusters(m.prior, m.store, m.nets, x);
  const auto table = mpcc::build_contingency(pred, data.labels, m.cfg.k, 3);
  const double acc = mpcc::clustering_accuracy(table);
  // parse the acc column (7th field)
  std::istringstream rs(row);
  std::string tok;
  for (int i = 0; i < 7; ++i) std::getline(rs, tok, ',');
  CHECK(std::stod(tok) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("sample emits csv with a cluster column") {
  TmpDir tmp("mpcc_cli_sample");
  write_file(tmp / "cfg", kTinyCfg);
  REQUIRE(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out") +
                  " --seed 3") == 0);
  const std::string ckpt = tmp / "out/final.mpcc";

  // n = 0 gives a header-only file
  CHECK(run_cmd("sample --checkpoint " + ckpt + " --cluster 0 --n 0 --out " +
                (tmp / "s0.csv")) == 0);
  CHECK(count_lines(tmp / "s0.csv") == 1);
  CHECK(slurp(tmp / "s0.csv") == "x0,x1,cluster\n");

  // --all emits K * n rows
  CHECK(run_cmd("sample --checkpoint " + ckpt + " --all --n 10 --out " +
                (tmp / "all.csv")) == 0);
  CHECK(count_lines(tmp / "all.csv") == 1 + 3 * 10);

  // cluster out of range
  CHECK(run_cmd("sample --checkpoint " + ckpt + " --cluster 3 --n 1 --out " +
                (tmp / "bad.csv")) == 1);
  CHECK(run_cmd("sample --checkpoint " + ckpt + " --cluster -1 --n 1 --out " +
                (tmp / "bad.csv")) == 1);
}

TEST_CASE("per-cluster sample means separate on a trained model") {
  TmpDir tmp("mpcc_cli_means");
  write_file(tmp / "cfg",
             "k = 3\nj = 2\nbatch_size = 50\ngen_hidden = 16 16\nde_hidden = 16 16\n"
             "total_iters = 400\neval_interval = 0\ncheckpoint_interval = 0\n"
             "data = gmm2d c=3 n_per=300 sep=6 noise=0.7 seed=5\n");
  REQUIRE(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out") +
                  " --seed 2") == 0);
  REQUIRE(run_cmd("sample --checkpoint " + (tmp / "out/final.mpcc") +
                  " --all --n 200 --out " + (tmp / "s.csv")) == 0);

  // mean of each cluster's emitted samples
  std::ifstream f(tmp / "s.csv");
  std::string line;
  std::getline(f, line);  // header
  double mx[3][2] = {};
  long cnt[3] = {};
  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string a, b, c;
    std::getline(is, a, ',');
    std::getline(is, b, ',');
    std::getline(is, c, ',');
    const int k = std::stoi(c);
    mx[k][0] += std::stod(a);
    mx[k][1] += std::stod(b);
    cnt[k] += 1;
  }
  for (int k = 0; k < 3; ++k) {
    REQUIRE(cnt[k] == 200);
    mx[k][0] /= cnt[k];
    mx[k][1] /= cnt[k];
  }
  double max_gap = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const double dx = mx[a][0] - mx[b][0], dy = mx[a][1] - mx[b][1];
      max_gap = std::max(max_gap, std::sqrt(dx * dx + dy * dy));
    }
  CHECK(max_gap > 0.005);
}

TEST_CASE("eval accepts held-out data from a different seed") {
  TmpDir tmp("mpcc_cli_dim");
  write_file(tmp / "cfg", kTinyCfg);
  REQUIRE(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out") +
                  " --seed 3") == 0);
  CHECK(run_cmd("eval --checkpoint " + (tmp / "out/final.mpcc") +
                " --data \"gmm2d c=3 n_per=10 sep=6 noise=0.5 seed=1\"") == 0);
  CHECK(run_cmd("eval --checkpoint " + (tmp / "out/final.mpcc") +
                " --data \"bogus\"") == 1);
}

TEST_CASE("verify exits 0 on the default tolerance and 3 on an impossible one") {
  CHECK(run_cmd("verify --trials 25") == 0);
  CHECK(run_cmd("verify --trials 5 --tol 1e-300") == 3);
  CHECK(run_cmd("verify --trials 1") == 0);
}

TEST_CASE("numerical divergence exits with code 2") {
  TmpDir tmp("mpcc_cli_nan");
  write_file(tmp / "cfg",
             "k = 3\nj = 2\ngen_hidden = 8 8\nde_hidden = 8 8\n"
             "eta = 1e154\ntotal_iters = 50\neval_interval = 0\n"
             "data = gmm2d c=3 n_per=50 sep=6 noise=0.7 seed=5\n");
  CHECK(run_cmd("train --config " + (tmp / "cfg") + " --out " + (tmp / "out")) == 2);
}
