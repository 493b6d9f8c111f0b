#include "mpcc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mpcc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Affine map sending the global min/max of `x` onto [-1, 1]; applied to the
// centers too so they stay aligned with the samples. Returns the scale.
double rescale_all(std::vector<double>& x, std::vector<double>& centers) {
  double lo = x[0], hi = x[0];
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    for (auto& v : x) v = 0.0;
    for (auto& v : centers) v = 0.0;
    return 0.0;
  }
  const double scale = 2.0 / (hi - lo);
  for (auto& v : x) v = (v - lo) * scale - 1.0;
  for (auto& v : centers) v = (v - lo) * scale - 1.0;
  return scale;
}

Dataset blobs_on_circle(const std::string& name, long c, long n, double radius,
                        double noise, std::uint64_t seed, bool round_robin,
                        long n_per) {
  if (c < 1) throw std::invalid_argument(name + ": need at least one component");
  Rng rng(Rng::mix(seed, 0xda7a));
  Dataset ds;
  ds.name = name;
  ds.d = 2;
  ds.num_classes = c;
  ds.n = round_robin ? n : c * n_per;

  std::vector<double> cx(c), cy(c);
  for (long m = 0; m < c; ++m) {
    const double a = kTwoPi * static_cast<double>(m) / static_cast<double>(c);
    cx[m] = radius * std::cos(a);
    cy[m] = radius * std::sin(a);
  }

  ds.x.resize(ds.n * 2);
  ds.labels.resize(ds.n);
  for (long i = 0; i < ds.n; ++i) {
    const long m = round_robin ? (i % c) : (i / n_per);
    ds.labels[i] = static_cast<int>(m);
    ds.x[i * 2] = cx[m] + noise * rng.normal();
    ds.x[i * 2 + 1] = cy[m] + noise * rng.normal();
  }

  ds.centers.resize(c * 2);
  for (long m = 0; m < c; ++m) {
    ds.centers[m * 2] = cx[m];
    ds.centers[m * 2 + 1] = cy[m];
  }
  const double scale = rescale_all(ds.x, ds.centers);
  ds.noise_scaled = noise * scale;
  return ds;
}

std::uint32_t read_be32(std::ifstream& f, const std::string& path, long offset) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(path + ": truncated at byte " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset gen_gmm2d(long c, long n_per, double separation, double noise,
                  std::uint64_t seed) {
  return blobs_on_circle("gmm2d", c, 0, c == 1 ? 0.0 : separation, noise, seed,
                         false, n_per);
}

Dataset gen_ring(long modes, long n, double noise, std::uint64_t seed) {
  return blobs_on_circle("ring", modes, n, modes == 1 ? 0.0 : 1.0, noise, seed,
                         true, 0);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 long limit, long downsample) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw std::runtime_error("load_idx: cannot open " + images_path);
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw std::runtime_error("load_idx: cannot open " + labels_path);

  const std::uint32_t magic_i = read_be32(fi, images_path, 0);
  if (magic_i != 0x00000803u)
    throw std::runtime_error(images_path + ": bad image magic at byte 0, got " +
                             std::to_string(magic_i));
  const long n_img = read_be32(fi, images_path, 4);
  const long rows = read_be32(fi, images_path, 8);
  const long cols = read_be32(fi, images_path, 12);

  const std::uint32_t magic_l = read_be32(fl, labels_path, 0);
  if (magic_l != 0x00000801u)
    throw std::runtime_error(labels_path + ": bad label magic at byte 0, got " +
                             std::to_string(magic_l));
  const long n_lab = read_be32(fl, labels_path, 4);
  if (n_img != n_lab)
    throw std::runtime_error("load_idx: image count " + std::to_string(n_img) +
                             " != label count " + std::to_string(n_lab));

  long n = n_img;
  if (limit > 0) n = std::min(n, limit);
  if (downsample < 1) throw std::invalid_argument("load_idx: downsample must be >= 1");
  if (rows % downsample || cols % downsample)
    throw std::invalid_argument("load_idx: image size " + std::to_string(rows) +
                                "x" + std::to_string(cols) +
                                " not divisible by downsample factor " +
                                std::to_string(downsample));
  const long dr = rows / downsample, dc = cols / downsample;

  Dataset ds;
  ds.name = "idx";
  ds.n = n;
  ds.d = dr * dc;
  ds.num_classes = 10;
  ds.x.resize(n * ds.d);
  ds.labels.resize(n);

  std::vector<unsigned char> buf(rows * cols);
  for (long i = 0; i < n; ++i) {
    if (!fi.read(reinterpret_cast<char*>(buf.data()), rows * cols))
      throw std::runtime_error(images_path + ": truncated at byte " +
                               std::to_string(16 + i * rows * cols));
    double* out = &ds.x[i * ds.d];
    for (long r = 0; r < dr; ++r)
      for (long cc = 0; cc < dc; ++cc) {
        double acc = 0.0;
        for (long a = 0; a < downsample; ++a)
          for (long b = 0; b < downsample; ++b)
            acc += buf[(r * downsample + a) * cols + cc * downsample + b];
        acc /= static_cast<double>(downsample * downsample);
        out[r * dc + cc] = acc / 127.5 - 1.0;
      }
    unsigned char lab;
    if (!fl.read(reinterpret_cast<char*>(&lab), 1))
      throw std::runtime_error(labels_path + ": truncated at byte " +
                               std::to_string(8 + i));
    ds.labels[i] = lab;
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  for (long j = 0; j < ds.d; ++j) f << 'x' << j << ',';
  f << "label\n";
  char buf[64];
  for (long i = 0; i < ds.n; ++i) {
    for (long j = 0; j < ds.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x[i * ds.d + j]);
      f << buf << ',';
    }
    f << (ds.labels.empty() ? -1 : ds.labels[i]) << '\n';
  }
}

Dataset make_dataset(const std::string& spec, std::uint64_t default_seed) {
  std::istringstream is(spec);
  std::string kind;
  is >> kind;
  std::map<std::string, std::string> kv;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("dataset spec: expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto get_long = [&](const std::string& k, long dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stol(it->second);
  };
  auto get_double = [&](const std::string& k, double dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  };
  const std::uint64_t seed =
      static_cast<std::uint64_t>(get_long("seed", static_cast<long>(default_seed)));

  if (kind == "gmm2d")
    return gen_gmm2d(get_long("c", 5), get_long("n_per", 2000),
                     get_double("sep", 6.0), get_double("noise", 1.0), seed);
  if (kind == "ring")
    return gen_ring(get_long("modes", 8), get_long("n", 10000),
                    get_double("noise", 0.05), seed);
  if (kind == "idx") {
    auto need = [&](const std::string& k) {
      auto it = kv.find(k);
      if (it == kv.end())
        throw std::invalid_argument("dataset spec: idx requires " + k + "=...");
      return it->second;
    };
    return load_idx(need("images"), need("labels"), get_long("limit", 0),
                    get_long("downsample", 1));
  }
  throw std::invalid_argument("dataset spec: unknown kind '" + kind + "'");
}

}  // namespace mpcc
