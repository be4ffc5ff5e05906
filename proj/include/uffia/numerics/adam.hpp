#pragma once

#include <vector>

#include "uffia/numerics/nn.hpp"

UFFIA_NAMESPACE_BEGIN

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over the trainable entries of a ParamList.
class Adam {
 public:
  Adam(const ParamList& params, AdamConfig config);

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step();

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

UFFIA_NAMESPACE_END
