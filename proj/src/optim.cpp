#include "mpcc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mpcc {

void AdamOptimizer::step(ParameterStore& store,
                         const std::vector<std::string>& names) {
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : names) {
    Tensor& p = store.get(name);
    const auto* g = p.grad();
    if (!g)
      throw std::invalid_argument("adam: no gradient accumulated for parameter " +
                                  name);
    auto& mom = state_[name];
    if (mom.m.empty()) {
      mom.m.assign(p.numel(), 0.0);
      mom.v.assign(p.numel(), 0.0);
    }
    auto& vals = p.values();
    for (long i = 0; i < p.numel(); ++i) {
      const double gi = (*g)[i];
      mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * gi;
      mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      vals[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    store.note_update(name);
  }
}

const AdamOptimizer::Moments* AdamOptimizer::moments(
    const std::string& name) const {
  auto it = state_.find(name);
  return it == state_.end() ? nullptr : &it->second;
}

void EmaShadow::init(const ParameterStore& store,
                     const std::vector<std::string>& names) {
  names_ = names;
  shadow_.clear();
  for (const auto& n : names_) shadow_[n] = store.get(n).values();
}

void EmaShadow::update(const ParameterStore& store, long iter, double decay,
                       long start_iter) {
  for (const auto& n : names_) {
    const auto& live = store.get(n).values();
    auto& sh = shadow_.at(n);
    if (iter < start_iter) {
      sh = live;
    } else {
      for (std::size_t i = 0; i < sh.size(); ++i)
        sh[i] = decay * sh[i] + (1.0 - decay) * live[i];
    }
  }
}

const std::vector<double>& EmaShadow::values(const std::string& name) const {
  auto it = shadow_.find(name);
  if (it == shadow_.end())
    throw std::invalid_argument("ema: unknown parameter " + name);
  return it->second;
}

std::vector<double>& EmaShadow::values_mut(const std::string& name) {
  auto it = shadow_.find(name);
  if (it == shadow_.end())
    throw std::invalid_argument("ema: unknown parameter " + name);
  return it->second;
}

}  // namespace mpcc
