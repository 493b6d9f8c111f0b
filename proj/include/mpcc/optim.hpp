#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpcc/param_store.hpp"

namespace mpcc {

// Adam with bias correction. One shared step counter per optimizer instance;
// first/second moments are kept per parameter. Multiple optimizers may own
// disjoint views of the same arrays (each with independent state).
class AdamOptimizer {
 public:
  struct Moments {
    std::vector<double> m, v;
  };

  AdamOptimizer() = default;
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update to every listed parameter using its grad buffer.
  // A listed parameter without an accumulated gradient is an error.
  void step(ParameterStore& store, const std::vector<std::string>& names);

  double lr() const { return lr_; }
  long t() const { return t_; }
  const Moments* moments(const std::string& name) const;
  Moments& moments_mut(const std::string& name) { return state_[name]; }
  void set_t(long t) { t_ = t; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

// Exponentially averaged copy of a parameter group, used for sampling and
// evaluation. Before start_iter the shadow tracks the live values exactly.
class EmaShadow {
 public:
  void init(const ParameterStore& store, const std::vector<std::string>& names);
  void update(const ParameterStore& store, long iter, double decay,
              long start_iter);
  const std::vector<double>& values(const std::string& name) const;
  std::vector<double>& values_mut(const std::string& name);
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::vector<double>> shadow_;
};

}  // namespace mpcc
