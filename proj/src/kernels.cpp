#include "htc/kernels.hpp"

#include <omp.h>

namespace htc {

double BatchLoss::loss(const LossWeights& w) const {
  const double l1 = topic_count ? topic_sum / static_cast<double>(topic_count) : 0.0;
  const double l2 = keyword_count ? keyword_sum / static_cast<double>(keyword_count) : 0.0;
  return combined_loss(l1, l2, w);
}

namespace {

struct Scales {
  double topic, keyword;
  std::size_t topic_count, keyword_count;
};

Scales scales_for(const Model& model, std::span<const Sample* const> batch, const LossWeights& w) {
  Scales s{};
  s.topic_count = batch.size() * static_cast<std::size_t>(model.spec().outputs);
  if (model.keyword_head())
    for (const Sample* x : batch) s.keyword_count += x->z.size();
  s.topic = s.topic_count ? w.alpha / static_cast<double>(s.topic_count) : 0.0;
  s.keyword = s.keyword_count ? w.beta / static_cast<double>(s.keyword_count) : 0.0;
  return s;
}

void add_loss(BatchLoss& total, const ExampleLoss& l) {
  total.topic_sum += l.topic_sum;
  total.keyword_sum += l.keyword_sum;
}

}  // namespace

BatchLoss batch_gradient_serial(const Model& model, std::span<const Sample* const> batch, const BatchOptions& options,
                                GradientSet& grads) {
  const Scales s = scales_for(model, batch, options.weights);
  grads.zero();
  BatchLoss total;
  total.topic_count = s.topic_count;
  total.keyword_count = s.keyword_count;
  for (const Sample* x : batch) add_loss(total, model.accumulate(*x, s.topic, s.keyword, options.pos_weight, grads));
  return total;
}

BatchLoss batch_gradient_parallel(const Model& model, std::span<const Sample* const> batch,
                                  const BatchOptions& options, GradientSet& grads) {
  const Scales s = scales_for(model, batch, options.weights);
  const int chunks = std::max(1, options.chunks);
  const std::size_t n = batch.size();
  std::vector<GradientSet> partial(static_cast<std::size_t>(chunks));
  std::vector<BatchLoss> losses(static_cast<std::size_t>(chunks));

#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < chunks; ++c) {
    const std::size_t lo = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks);
    const std::size_t hi = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(chunks);
    auto& g = partial[static_cast<std::size_t>(c)];
    g = model.make_gradients();
    for (std::size_t i = lo; i < hi; ++i)
      add_loss(losses[static_cast<std::size_t>(c)], model.accumulate(*batch[i], s.topic, s.keyword, options.pos_weight, g));
  }

  grads.zero();
  BatchLoss total;
  total.topic_count = s.topic_count;
  total.keyword_count = s.keyword_count;
  for (int c = 0; c < chunks; ++c) {
    grads.add(partial[static_cast<std::size_t>(c)]);
    add_loss(total, {losses[static_cast<std::size_t>(c)].topic_sum, losses[static_cast<std::size_t>(c)].keyword_sum, 0});
  }
  return total;
}

std::vector<Prediction> predict_all(const Model& model, std::span<const Sample> samples, bool parallel) {
  std::vector<Prediction> out(samples.size());
  const auto n = static_cast<long>(samples.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = model.predict(samples[static_cast<std::size_t>(i)]);
  return out;
}

BatchLoss evaluate_loss(const Model& model, std::span<const Sample> samples, double pos_weight, bool parallel) {
  const auto preds = predict_all(model, samples, parallel);
  BatchLoss total;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = preds[i];
    const auto& s = samples[i];
    total.topic_sum += bce_sum({p.topics.data(), static_cast<std::size_t>(p.topics.size())}, s.y, pos_weight);
    total.topic_count += s.y.size();
    if (model.keyword_head() && !s.z.empty()) {
      total.keyword_sum += bce_sum({p.keywords.data(), s.z.size()}, s.z, 1.0);
      total.keyword_count += s.z.size();
    }
  }
  return total;
}

}  // namespace htc
