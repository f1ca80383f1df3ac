#pragma once

#include <span>
#include <vector>

#include "htc/models.hpp"

namespace htc {

struct BatchLoss {
  double topic_sum = 0;
  double keyword_sum = 0;
  std::size_t topic_count = 0;    // B * outputs
  std::size_t keyword_count = 0;  // labeled token positions in the batch
  // alpha * topic_sum / topic_count + beta * keyword_sum / keyword_count
  double loss(const LossWeights& w) const;
};

struct BatchOptions {
  LossWeights weights;
  double pos_weight = 1.0;
  // The batch is cut into this many contiguous chunks regardless of the
  // thread count, and chunk gradients are summed in chunk order, so the
  // parallel result does not depend on scheduling.
  int chunks = 8;
};

// Reference: one pass over the batch in order into a single buffer.
// `grads` is overwritten with the gradient of BatchLoss::loss.
BatchLoss batch_gradient_serial(const Model& model, std::span<const Sample* const> batch, const BatchOptions& options,
                                GradientSet& grads);

// OpenMP over chunks. Agrees with the serial kernel up to summation order.
BatchLoss batch_gradient_parallel(const Model& model, std::span<const Sample* const> batch,
                                  const BatchOptions& options, GradientSet& grads);

// Inference over many samples; OpenMP over samples when `parallel`.
std::vector<Prediction> predict_all(const Model& model, std::span<const Sample> samples, bool parallel = true);

// Loss of the model over a whole sample set (evaluated like one batch).
BatchLoss evaluate_loss(const Model& model, std::span<const Sample> samples, double pos_weight = 1.0,
                        bool parallel = true);

}  // namespace htc
