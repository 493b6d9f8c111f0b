#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpcc/tensor.hpp"

namespace mpcc {

// Named leaf tensors with their gradient buffers. Iteration order is
// insertion order, which keeps checkpoints and logs reproducible.
// Each entry carries a version stamp bumped on every in-place update, so
// tests can assert the update ordering of a training iteration.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    std::uint64_t version = 0;  // per-parameter update count
    std::uint64_t stamp = 0;    // global sequence number of the last update
  };

  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  Entry& entry(const std::string& name);

  void zero_grads();
  void set_all_requires_grad(bool b);
  // Thaws exactly `names`, freezes everything else.
  void thaw_only(const std::vector<std::string>& names);

  // Marks an in-place value update of `name`.
  void note_update(const std::string& name);
  std::uint64_t global_stamp() const { return stamp_counter_; }

  long total_parameters() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t stamp_counter_ = 0;
};

}  // namespace mpcc
