#include "uffia/model/step.hpp"

UFFIA_NAMESPACE_BEGIN

double supervised_step(const Classifier& model, std::span<const Example> batch, Adam& adam, Rng& rng) {
  if (batch.empty()) throw InputError("empty training batch");
  const Real weight = Real(1) / static_cast<Real>(batch.size());
  double total = 0;
  for (const auto& ex : batch) {
    const Mode mode = model.training_mode(rng);
    const int label[1] = {ex.label};
    const Tensor loss = scale(cross_entropy(model.forward(ex.input, mode), label), weight);
    total += static_cast<double>(loss.item());
    backward(loss);
  }
  adam.step();
  return total;
}

UFFIA_NAMESPACE_END
