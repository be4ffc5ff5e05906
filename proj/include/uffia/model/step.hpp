#pragma once

#include <span>

#include "uffia/model/classifier.hpp"
#include "uffia/numerics/adam.hpp"

UFFIA_NAMESPACE_BEGIN

struct Example {
  ClipInput input;
  int label = 0;
};

/// One optimiser step over a batch: per-sample graphs, gradients of the batch
/// mean cross-entropy accumulated, then Adam. Each sample's mode comes from
/// `model.training_mode(rng)`. Returns the batch mean loss.
double supervised_step(const Classifier& model, std::span<const Example> batch, Adam& adam, Rng& rng);

UFFIA_NAMESPACE_END
