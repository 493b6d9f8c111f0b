#include "mpcc/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mpcc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void line_error(int line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + msg);
}

long parse_long(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    line_error(line, "expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    line_error(line, "expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  line_error(line, "expected true/false, got '" + v + "'");
}

std::vector<long> parse_long_list(const std::string& v, int line) {
  std::vector<long> out;
  std::istringstream is(v);
  std::string tok;
  while (is >> tok) out.push_back(parse_long(tok, line));
  if (out.empty()) line_error(line, "expected a list of integers");
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig config_parse_text(const std::string& text) {
  TrainConfig c;
  using Setter = std::function<void(const std::string&, int)>;
  const std::map<std::string, Setter> setters = {
      {"k", [&](const std::string& v, int l) { c.k = parse_long(v, l); }},
      {"j", [&](const std::string& v, int l) { c.j = parse_long(v, l); }},
      {"d_steps", [&](const std::string& v, int l) { c.d_steps = parse_long(v, l); }},
      {"e_steps", [&](const std::string& v, int l) { c.e_steps = parse_long(v, l); }},
      {"eta", [&](const std::string& v, int l) { c.eta = parse_double(v, l); }},
      {"eta_p", [&](const std::string& v, int l) { c.eta_p = parse_double(v, l); }},
      {"lambda_p", [&](const std::string& v, int l) { c.lambda_p = parse_double(v, l); }},
      {"batch_size", [&](const std::string& v, int l) { c.batch_size = parse_long(v, l); }},
      {"total_iters", [&](const std::string& v, int l) { c.total_iters = parse_long(v, l); }},
      {"beta1", [&](const std::string& v, int l) { c.beta1 = parse_double(v, l); }},
      {"beta2", [&](const std::string& v, int l) { c.beta2 = parse_double(v, l); }},
      {"eps_adam", [&](const std::string& v, int l) { c.eps_adam = parse_double(v, l); }},
      {"ema_decay", [&](const std::string& v, int l) { c.ema_decay = parse_double(v, l); }},
      {"ema_start_iter",
       [&](const std::string& v, int l) { c.ema_start_iter = parse_long(v, l); }},
      {"sigma_min", [&](const std::string& v, int l) { c.sigma_min = parse_double(v, l); }},
      {"seed",
       [&](const std::string& v, int l) {
         c.seed = static_cast<std::uint64_t>(parse_long(v, l));
       }},
      {"conditioning",
       [&](const std::string& v, int l) {
         if (v == "z_only")
           c.conditioning = Conditioning::ZOnly;
         else if (v == "embed")
           c.conditioning = Conditioning::Embed;
         else
           line_error(l, "conditioning must be z_only or embed, got '" + v + "'");
       }},
      {"embed_dim", [&](const std::string& v, int l) { c.embed_dim = parse_long(v, l); }},
      {"share_trunk", [&](const std::string& v, int l) { c.share_trunk = parse_bool(v, l); }},
      {"trunk_depth", [&](const std::string& v, int l) { c.trunk_depth = parse_long(v, l); }},
      {"prior_init",
       [&](const std::string& v, int l) {
         if (v != "gaussian" && v != "orthogonal")
           line_error(l, "prior_init must be gaussian or orthogonal, got '" + v + "'");
         c.prior_init = v;
       }},
      {"gen_hidden", [&](const std::string& v, int l) { c.gen_hidden = parse_long_list(v, l); }},
      {"de_hidden", [&](const std::string& v, int l) { c.de_hidden = parse_long_list(v, l); }},
      {"eval_interval", [&](const std::string& v, int l) { c.eval_interval = parse_long(v, l); }},
      {"checkpoint_interval",
       [&](const std::string& v, int l) { c.checkpoint_interval = parse_long(v, l); }},
      {"eval_samples", [&](const std::string& v, int l) { c.eval_samples = parse_long(v, l); }},
      {"data", [&](const std::string& v, int) { c.data = v; }},
  };

  std::map<std::string, int> seen;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) line_error(line, "expected 'key = value'");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) line_error(line, "unknown key '" + key + "'");
    if (seen.count(key))
      line_error(line, "duplicate key '" + key + "' (first set on line " +
                           std::to_string(seen[key]) + ")");
    seen[key] = line;
    it->second(value, line);
  }

  if (c.k < 1 || c.j < 1) throw std::invalid_argument("config: k and j must be >= 1");
  if (c.d_steps < 1 || c.e_steps < 1)
    throw std::invalid_argument("config: d_steps and e_steps must be >= 1");
  if (c.eta <= 0 || c.eta_p <= 0)
    throw std::invalid_argument("config: learning rates must be > 0");
  if (c.ema_decay < 0 || c.ema_decay >= 1)
    throw std::invalid_argument("config: ema_decay must be in [0, 1)");
  if (c.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (c.gen_hidden.empty() || c.de_hidden.empty())
    throw std::invalid_argument("config: networks need at least one hidden layer");
  return c;
}

TrainConfig config_parse(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_parse_text(ss.str());
}

std::string config_serialize(const TrainConfig& c) {
  std::ostringstream os;
  auto list = [](const std::vector<long>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s << ' ';
      s << v[i];
    }
    return s.str();
  };
  os << "k = " << c.k << '\n';
  os << "j = " << c.j << '\n';
  os << "d_steps = " << c.d_steps << '\n';
  os << "e_steps = " << c.e_steps << '\n';
  os << "eta = " << fmt_double(c.eta) << '\n';
  os << "eta_p = " << fmt_double(c.eta_p) << '\n';
  os << "lambda_p = " << fmt_double(c.lambda_p) << '\n';
  os << "batch_size = " << c.batch_size << '\n';
  os << "total_iters = " << c.total_iters << '\n';
  os << "beta1 = " << fmt_double(c.beta1) << '\n';
  os << "beta2 = " << fmt_double(c.beta2) << '\n';
  os << "eps_adam = " << fmt_double(c.eps_adam) << '\n';
  os << "ema_decay = " << fmt_double(c.ema_decay) << '\n';
  os << "ema_start_iter = " << c.ema_start_iter << '\n';
  os << "sigma_min = " << fmt_double(c.sigma_min) << '\n';
  os << "seed = " << c.seed << '\n';
  os << "conditioning = " << (c.conditioning == Conditioning::ZOnly ? "z_only" : "embed")
     << '\n';
  os << "embed_dim = " << c.embed_dim << '\n';
  os << "share_trunk = " << (c.share_trunk ? "true" : "false") << '\n';
  os << "trunk_depth = " << c.trunk_depth << '\n';
  os << "prior_init = " << c.prior_init << '\n';
  os << "gen_hidden = " << list(c.gen_hidden) << '\n';
  os << "de_hidden = " << list(c.de_hidden) << '\n';
  os << "eval_interval = " << c.eval_interval << '\n';
  os << "checkpoint_interval = " << c.checkpoint_interval << '\n';
  os << "eval_samples = " << c.eval_samples << '\n';
  os << "data = " << c.data << '\n';
  return os.str();
}

bool config_equal(const TrainConfig& a, const TrainConfig& b) {
  return config_serialize(a) == config_serialize(b);
}

}  // namespace mpcc
