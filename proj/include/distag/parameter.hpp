#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <unordered_map>

#include "distag/tensor.hpp"

namespace distag {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value
  // Frozen parameters enter a tape as constants and receive no gradient.
  bool frozen = false;
};

// Named parameters with stable addresses; names are unique.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Tensor value);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();
  void set_frozen(const std::string& prefix, bool frozen);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace distag
