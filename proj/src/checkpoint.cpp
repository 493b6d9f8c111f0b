#include "mpcc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mpcc {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'C', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  f.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  f.write(reinterpret_cast<char*>(b), 8);
}

void write_f64(std::ostream& f, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(f, bits);
}

void write_string(std::ostream& f, const std::string& s) {
  write_u32(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& f) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& f) {
  unsigned char b[8];
  if (!f.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& f) {
  const std::uint64_t bits = read_u64(f);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

std::string read_string(std::istream& f) {
  const std::uint32_t n = read_u32(f);
  std::string s(n, '\0');
  if (n && !f.read(s.data(), n))
    throw std::runtime_error("checkpoint: truncated string");
  return s;
}

struct Section {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

void write_section(std::ostream& f, const std::string& name, const Shape& shape,
                   const std::vector<double>& data) {
  write_string(f, name);
  write_u32(f, static_cast<std::uint32_t>(shape.size()));
  for (long d : shape) write_u64(f, static_cast<std::uint64_t>(d));
  for (double v : data) write_f64(f, v);
}

Section read_section(std::istream& f) {
  Section s;
  s.name = read_string(f);
  const std::uint32_t nd = read_u32(f);
  s.shape.resize(nd);
  long numel = 1;
  for (std::uint32_t i = 0; i < nd; ++i) {
    s.shape[i] = static_cast<long>(read_u64(f));
    numel *= s.shape[i];
  }
  s.data.resize(numel);
  for (long i = 0; i < numel; ++i) s.data[i] = read_f64(f);
  return s;
}

void append_adam_sections(std::vector<Section>& out, const std::string& tag,
                          const AdamOptimizer& opt, const ModelState& m) {
  out.push_back({"adam/" + tag + "/t", {1}, {static_cast<double>(opt.t())}});
  for (const auto& e : m.store.entries()) {
    const auto* mom = opt.moments(e.name);
    if (!mom) continue;
    out.push_back({"adam/" + tag + "/m/" + e.name, e.tensor.shape(), mom->m});
    out.push_back({"adam/" + tag + "/v/" + e.name, e.tensor.shape(), mom->v});
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u64(f, static_cast<std::uint64_t>(m.iteration));
  write_u64(f, m.cfg.seed);
  write_u64(f, static_cast<std::uint64_t>(m.data_dim));
  write_string(f, config_serialize(m.cfg));

  std::vector<Section> sections;
  for (const auto& e : m.store.entries())
    sections.push_back({"param/" + e.name, e.tensor.shape(), e.tensor.values()});
  sections.push_back(
      {"prior/phi", {static_cast<long>(m.prior.phi.size())}, m.prior.phi});
  for (const auto& name : m.ema.names())
    sections.push_back(
        {"ema/" + name, m.store.get(name).shape(), m.ema.values(name)});
  append_adam_sections(sections, "d", m.opt_d, m);
  append_adam_sections(sections, "g", m.opt_g, m);
  append_adam_sections(sections, "e", m.opt_e, m);
  append_adam_sections(sections, "c", m.opt_c, m);

  write_u32(f, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) write_section(f, s.name, s.shape, s.data);
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(f);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  const long iteration = static_cast<long>(read_u64(f));
  const std::uint64_t seed = read_u64(f);
  const long data_dim = static_cast<long>(read_u64(f));
  const std::string cfg_text = read_string(f);
  TrainConfig cfg = config_parse_text(cfg_text);
  cfg.seed = seed;

  ModelState m = init_model(cfg, data_dim);
  m.iteration = iteration;

  const std::uint32_t n_sections = read_u32(f);
  auto opt_for = [&m](const std::string& tag) -> AdamOptimizer& {
    if (tag == "d") return m.opt_d;
    if (tag == "g") return m.opt_g;
    if (tag == "e") return m.opt_e;
    if (tag == "c") return m.opt_c;
    throw std::runtime_error("checkpoint: unknown optimizer tag " + tag);
  };
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    Section s = read_section(f);
    if (s.name.rfind("param/", 0) == 0) {
      Tensor& t = m.store.get(s.name.substr(6));
      if (t.shape() != s.shape)
        throw std::runtime_error("checkpoint: shape mismatch for " + s.name);
      t.values() = s.data;
    } else if (s.name == "prior/phi") {
      m.prior.phi = s.data;
    } else if (s.name.rfind("ema/", 0) == 0) {
      m.ema.values_mut(s.name.substr(4)) = s.data;
    } else if (s.name.rfind("adam/", 0) == 0) {
      const std::string rest = s.name.substr(5);
      const auto slash = rest.find('/');
      const std::string tag = rest.substr(0, slash);
      const std::string what = rest.substr(slash + 1);
      AdamOptimizer& opt = opt_for(tag);
      if (what == "t") {
        opt.set_t(static_cast<long>(s.data[0]));
      } else if (what.rfind("m/", 0) == 0) {
        opt.moments_mut(what.substr(2)).m = s.data;
      } else if (what.rfind("v/", 0) == 0) {
        opt.moments_mut(what.substr(2)).v = s.data;
      } else {
        throw std::runtime_error("checkpoint: unknown adam section " + s.name);
      }
    } else {
      throw std::runtime_error("checkpoint: unknown section " + s.name);
    }
  }
  return m;
}

MetricsLog::MetricsLog(const std::string& path) : path_(path) {
  std::ofstream f(path_, std::ios::trunc);
  if (!f) throw std::runtime_error("metrics log: cannot open " + path_);
  f << header() << '\n';
}

std::string MetricsLog::header() {
  return "iteration,d_loss,g_adv_loss,enc_nll,cluster_ce,prior_reg,acc,"
         "latent_mse,mmd,mode_coverage";
}

std::string MetricsLog::format_row(const MetricsRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                r.iteration, r.d_loss, r.g_adv_loss, r.enc_nll, r.cluster_ce,
                r.prior_reg, r.acc, r.latent_mse, r.mmd, r.mode_coverage);
  return buf;
}

void MetricsLog::append(const MetricsRecord& rec) {
  if (rec.iteration <= last_iteration_)
    throw std::invalid_argument("metrics log: iterations must be strictly increasing");
  last_iteration_ = rec.iteration;
  std::ofstream f(path_, std::ios::app);
  if (!f) throw std::runtime_error("metrics log: cannot open " + path_);
  f << format_row(rec) << '\n';
}

std::vector<MetricsRecord> MetricsLog::parse(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("metrics log: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != header())
    throw std::runtime_error("metrics log: bad header in " + path);
  std::vector<MetricsRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    std::istringstream is(line);
    std::string tok;
    auto next = [&]() {
      if (!std::getline(is, tok, ','))
        throw std::runtime_error("metrics log: short row in " + path);
      return tok;
    };
    r.iteration = std::stol(next());
    r.d_loss = std::stod(next());
    r.g_adv_loss = std::stod(next());
    r.enc_nll = std::stod(next());
    r.cluster_ce = std::stod(next());
    r.prior_reg = std::stod(next());
    r.acc = std::stod(next());
    r.latent_mse = std::stod(next());
    r.mmd = std::stod(next());
    r.mode_coverage = std::stod(next());
    out.push_back(r);
  }
  return out;
}

}  // namespace mpcc
