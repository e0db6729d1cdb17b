#pragma once

#include <cstdint>
#include <vector>

#include "faultguard/layers.hpp"
#include "faultguard/tensor.hpp"

namespace fg {

enum class FaultTarget { LayerOutputs, Weights };

/// Seeded description of a bit-flip campaign: how many flips per trial,
/// where they may land, and which bits are in play.
struct FaultSpec {
  int n_flips = 1;
  FaultTarget target = FaultTarget::LayerOutputs;
  std::vector<int> eligible_layers;  // empty = all Conv2D/FullyConnected
  int bit_lo = 0;
  int bit_hi = 31;
  uint64_t campaign_seed = 0;

  void validate(const ModelGraph& model) const;
  std::vector<int> resolve_eligible(const ModelGraph& model) const;
};

struct FlipSite {
  int layer_id = -1;
  int64_t element = 0;  // flat index into the target tensor
  int bit = 0;
};

/// Concrete sampled flip set for one trial; a pure function of
/// (campaign_seed, trial_id). `target` records which tensor space the
/// element indices refer to.
struct FaultRealization {
  uint64_t trial_id = 0;
  FaultTarget target = FaultTarget::LayerOutputs;
  std::vector<FlipSite> flips;
};

/// XORs one bit of the IEEE-754-32 pattern; involutive.
float flip_bit(float x, int bit);

/// Uniform over (eligible layer, element, bit) triples, sampled without
/// replacement. SpecError if n_flips exceeds the total slot count.
FaultRealization sample_realization(const FaultSpec& spec, const ModelGraph& model,
                                    uint64_t trial_id);

/// Forward pass with the realization applied. LayerOutputs flips are XORed
/// into the producing layer's output before the next layer consumes it;
/// Weights flips act on a transient copy, never the model itself.
Tensor faulty_forward(const ModelGraph& model, const Tensor& input,
                      const FaultRealization& realization, OpCount& counter);

/// Flips grouped per layer, for callers that apply them inside protected
/// kernels. Bounds are checked against the target tensor sizes.
std::vector<std::vector<FlipSite>> flips_by_layer(const ModelGraph& model,
                                                  const FaultRealization& realization);

}  // namespace fg
