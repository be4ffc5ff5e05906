#include "uffia/numerics/adam.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

Adam::Adam(const ParamList& params, AdamConfig config) : config_(config) {
  if (config.learning_rate <= 0 || config.beta1 < 0 || config.beta1 >= 1 || config.beta2 < 0 ||
      config.beta2 >= 1 || config.epsilon <= 0) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  for (const auto& p : params.entries()) {
    if (!p.tensor.requires_grad()) continue;
    params_.push_back(p.tensor);
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.has_grad()) throw ContractError("Adam step on a parameter without a gradient buffer");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i];
    auto values = p.mutable_values();
    const auto& grad = p.node()->grad_buffer();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double update = config_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
      values[j] = static_cast<Real>(values[j] - update);
    }
    p.zero_grad();
  }
}

UFFIA_NAMESPACE_END
