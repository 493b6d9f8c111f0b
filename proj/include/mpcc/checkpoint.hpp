#pragma once

#include <string>
#include <vector>

#include "mpcc/metrics.hpp"
#include "mpcc/trainer.hpp"

namespace mpcc {

// Binary checkpoint, format version 1:
//   "MPCC" | u32 version | u64 iteration | u64 seed | u64 data_dim
//   | config echo (length-prefixed canonical text) | u32 section count
//   | sections: name, u32 ndim, dims..., little-endian f64 payload.
// Sections hold every parameter, phi, the EMA shadow and all Adam moments,
// so load(save(m)) is bit-identical.
void save_checkpoint(const std::string& path, const ModelState& m);
ModelState load_checkpoint(const std::string& path);

// Append-only CSV of MetricsRecord rows. Doubles are printed with %.17g so
// rows parse back losslessly.
class MetricsLog {
 public:
  explicit MetricsLog(const std::string& path);
  void append(const MetricsRecord& rec);
  static std::string header();
  static std::string format_row(const MetricsRecord& rec);
  static std::vector<MetricsRecord> parse(const std::string& path);

 private:
  std::string path_;
  long last_iteration_ = -1;
};

}  // namespace mpcc
