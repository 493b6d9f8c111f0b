#include "mpcc/param_store.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpcc {

Tensor& ParameterStore::add(const std::string& name, Tensor t) {
  if (index_.count(name))
    throw std::invalid_argument("parameter store: duplicate name " + name);
  if (!t.defined())
    throw std::invalid_argument("parameter store: undefined tensor for " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(t), 0, 0});
  return entries_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("parameter store: unknown name " + name);
  return entries_[it->second].tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("parameter store: unknown name " + name);
  return entries_[it->second].tensor;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("parameter store: unknown name " + name);
  return entries_[it->second];
}

void ParameterStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::set_all_requires_grad(bool b) {
  for (auto& e : entries_) e.tensor.set_requires_grad(b);
}

void ParameterStore::thaw_only(const std::vector<std::string>& names) {
  set_all_requires_grad(false);
  for (const auto& n : names) get(n).set_requires_grad(true);
}

void ParameterStore::note_update(const std::string& name) {
  auto& e = entry(name);
  e.version += 1;
  e.stamp = ++stamp_counter_;
}

long ParameterStore::total_parameters() const {
  long n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

}  // namespace mpcc
