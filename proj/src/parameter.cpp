#include "distag/parameter.hpp"

#include "distag/errors.hpp"

namespace distag {

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name: " + name);
  Tensor grad(value.shape(), 0.0);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{name, std::move(value), std::move(grad), false});
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterSet::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& p : params_) {
    if (p.name.rfind(prefix, 0) == 0) p.frozen = frozen;
  }
}

}  // namespace distag
