#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpcc/rng.hpp"

namespace mpcc {

// N x D samples rescaled to [-1, 1], with optional class labels and, for the
// synthetic generators, the component centers in rescaled coordinates.
struct Dataset {
  std::string name;
  long n = 0, d = 0;
  long num_classes = 0;
  std::vector<double> x;        // n x d
  std::vector<int> labels;      // n, empty if unlabeled
  std::vector<double> centers;  // num_classes x d (empty when unknown)
  double noise_scaled = 0.0;    // generator noise after rescaling
};

// C isotropic Gaussian blobs on a circle of radius `separation`, rescaled so
// the global coordinate range is exactly [-1, 1].
Dataset gen_gmm2d(long c, long n_per, double separation, double noise,
                  std::uint64_t seed);

// Ring of `modes` blobs on the unit circle (pre-rescale); samples are dealt
// round-robin so every mode holds exactly n/modes +- 1 points.
Dataset gen_ring(long modes, long n, double noise, std::uint64_t seed);

// IDX-format loader (big-endian magic 0x803 for images, 0x801 for labels).
// Pixels map through x/127.5 - 1; downsample > 1 average-pools square blocks.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 long limit = 0, long downsample = 1);

// x columns then label, one row per sample.
void write_csv(const Dataset& ds, const std::string& path);

// Compact one-line description:
//   "gmm2d c=5 n_per=2000 sep=6 noise=1 [seed=7]"
//   "ring modes=8 n=10000 noise=0.05 [seed=7]"
//   "idx images=... labels=... [limit=N] [downsample=F]"
// default_seed is used when the spec carries no seed of its own.
Dataset make_dataset(const std::string& spec, std::uint64_t default_seed);

}  // namespace mpcc
