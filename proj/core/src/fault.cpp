#include "faultguard/fault.hpp"

#include <algorithm>
#include <bit>

#include "faultguard/errors.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/rng.hpp"

namespace fg {

float flip_bit(float x, int bit) {
  const uint32_t bits = std::bit_cast<uint32_t>(x) ^ (uint32_t{1} << bit);
  return std::bit_cast<float>(bits);
}

void FaultSpec::validate(const ModelGraph& model) const {
  if (n_flips < 0) throw SpecError("n_flips must be non-negative");
  if (bit_lo < 0 || bit_hi > 31 || bit_lo > bit_hi)
    throw SpecError("bit range [" + std::to_string(bit_lo) + "," + std::to_string(bit_hi) +
                    "] must be within [0,31]");
  const auto injectable = model.injectable_layers();
  for (int id : eligible_layers) {
    if (std::find(injectable.begin(), injectable.end(), id) == injectable.end())
      throw SpecError("eligible layer " + std::to_string(id) +
                      " is not an injectable layer of the model");
  }
}

std::vector<int> FaultSpec::resolve_eligible(const ModelGraph& model) const {
  if (!eligible_layers.empty()) return eligible_layers;
  return model.injectable_layers();
}

namespace {

// Per-layer slot counts: elements of the target tensor times bits in range.
std::vector<int64_t> slot_counts(const FaultSpec& spec, const ModelGraph& model,
                                 const std::vector<int>& eligible) {
  std::vector<int64_t> counts;
  counts.reserve(eligible.size());
  const auto shapes = model.layer_shapes();
  const int64_t nbits = spec.bit_hi - spec.bit_lo + 1;
  for (int id : eligible) {
    int64_t elems = 0;
    if (spec.target == FaultTarget::LayerOutputs) {
      elems = Tensor::shape_numel(shapes[static_cast<size_t>(id)]);
    } else {
      elems = model.layers[static_cast<size_t>(id)].weight.numel();
    }
    counts.push_back(elems * nbits);
  }
  return counts;
}

}  // namespace

FaultRealization sample_realization(const FaultSpec& spec, const ModelGraph& model,
                                    uint64_t trial_id) {
  spec.validate(model);
  const auto eligible = spec.resolve_eligible(model);
  const auto counts = slot_counts(spec, model, eligible);
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  if (spec.n_flips > total)
    throw SpecError("n_flips " + std::to_string(spec.n_flips) + " exceeds the " +
                    std::to_string(total) + " eligible (element,bit) slots");

  FaultRealization real;
  real.trial_id = trial_id;
  real.target = spec.target;
  if (spec.n_flips == 0) return real;

  // Floyd's algorithm: n distinct slots, deterministic in (seed, trial).
  SplitMix64 rng(seed_mix({spec.campaign_seed, trial_id, 0xfa17ull}));
  std::vector<uint64_t> chosen;
  chosen.reserve(static_cast<size_t>(spec.n_flips));
  const uint64_t n = static_cast<uint64_t>(spec.n_flips);
  const uint64_t total_u = static_cast<uint64_t>(total);
  for (uint64_t i = total_u - n; i < total_u; ++i) {
    const uint64_t j = rng.next_below(i + 1);
    if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) {
      chosen.push_back(i);
    } else {
      chosen.push_back(j);
    }
  }

  const int64_t nbits = spec.bit_hi - spec.bit_lo + 1;
  for (uint64_t slot : chosen) {
    int64_t rem = static_cast<int64_t>(slot);
    size_t li = 0;
    while (rem >= counts[li]) {
      rem -= counts[li];
      ++li;
    }
    FlipSite site;
    site.layer_id = eligible[li];
    site.element = rem / nbits;
    site.bit = spec.bit_lo + static_cast<int>(rem % nbits);
    real.flips.push_back(site);
  }
  return real;
}

std::vector<std::vector<FlipSite>> flips_by_layer(const ModelGraph& model,
                                                  const FaultRealization& realization) {
  std::vector<std::vector<FlipSite>> grouped(model.layers.size());
  for (const FlipSite& site : realization.flips) {
    if (site.layer_id < 0 || site.layer_id >= static_cast<int>(model.layers.size()))
      throw ConsistencyError("realization names layer " + std::to_string(site.layer_id) +
                             " absent from the model");
    grouped[static_cast<size_t>(site.layer_id)].push_back(site);
  }
  return grouped;
}

Tensor faulty_forward(const ModelGraph& model, const Tensor& input,
                      const FaultRealization& realization, OpCount& counter) {
  const auto grouped = flips_by_layer(model, realization);

  if (realization.target == FaultTarget::Weights) {
    // Transient copy of the affected weights for this pass only.
    ModelGraph patched = model;
    for (const FlipSite& site : realization.flips) {
      Tensor& w = patched.layers[static_cast<size_t>(site.layer_id)].weight;
      if (site.element < 0 || site.element >= w.numel())
        throw ConsistencyError("flip element " + std::to_string(site.element) +
                               " out of bounds for layer " + std::to_string(site.layer_id) +
                               " weights " + shape_str(w.shape));
      float& v = w.data[static_cast<size_t>(site.element)];
      v = flip_bit(v, site.bit);
    }
    return forward(patched, input, counter);
  }

  LayerHook hook = [&](int layer_id, Tensor& out) {
    for (const FlipSite& site : grouped[static_cast<size_t>(layer_id)]) {
      if (site.element < 0 || site.element >= out.numel())
        throw ConsistencyError("flip element " + std::to_string(site.element) +
                               " out of bounds for layer " + std::to_string(site.layer_id) +
                               " output " + shape_str(out.shape));
      float& v = out.data[static_cast<size_t>(site.element)];
      v = flip_bit(v, site.bit);
    }
  };
  return forward(model, input, counter, hook);
}

}  // namespace fg
