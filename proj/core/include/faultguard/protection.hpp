#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "faultguard/layers.hpp"
#include "faultguard/tensor.hpp"

namespace fg {

enum class PolicyKind { NoProtect, AbftStrict, AbftRelaxed, Tmr };

const char* policy_kind_name(PolicyKind k);

/// Per-layer protection choice. `tau` only matters for AbftRelaxed; strict
/// ABFT is relaxed ABFT at the floating-point detection floor.
struct ProtectionPolicy {
  PolicyKind kind = PolicyKind::NoProtect;
  double tau = 0.0;

  static ProtectionPolicy none() { return {PolicyKind::NoProtect, 0.0}; }
  static ProtectionPolicy abft_strict() { return {PolicyKind::AbftStrict, 0.0}; }
  static ProtectionPolicy abft_relaxed(double tau) { return {PolicyKind::AbftRelaxed, tau}; }
  static ProtectionPolicy tmr() { return {PolicyKind::Tmr, 0.0}; }

  bool is_abft() const {
    return kind == PolicyKind::AbftStrict || kind == PolicyKind::AbftRelaxed;
  }
};

/// Detection/recovery cost ledger. Detection covers checksum encode/verify
/// (and TMR votes); recovery covers corrections, recomputations, and TMR
/// replicas. Additive across layers and inputs.
struct ProtectionLedger {
  int64_t detect_adds = 0;
  int64_t detect_muls = 0;
  int64_t recover_adds = 0;
  int64_t recover_muls = 0;
  int64_t corrections = 0;
  int64_t recomputes = 0;

  void merge(const ProtectionLedger& o) {
    detect_adds += o.detect_adds;
    detect_muls += o.detect_muls;
    recover_adds += o.recover_adds;
    recover_muls += o.recover_muls;
    corrections += o.corrections;
    recomputes += o.recomputes;
  }

  int64_t detect_total() const { return detect_adds + detect_muls; }
  int64_t recover_total() const { return recover_adds + recover_muls; }
  int64_t total() const { return detect_total() + recover_total(); }
};

/// Checksum-discrepancy magnitude below which mismatches are attributed to
/// rounding: eps_abs + eps_rel * (k * max|A| * max|B|).
double detection_floor(int64_t k, double max_abs_a, double max_abs_b);

struct Diagnosis {
  enum Kind { Clean, SingleCell, Inconsistent } kind = Clean;
  int64_t row = -1;
  int64_t col = -1;
  double delta = 0.0;
};

/// Mismatch set = indices where |observed - predicted| > tau_effective
/// (NaN discrepancies always mismatch). SingleCell iff exactly one row and
/// one column mismatch and their deltas agree within `agree_floor`.
Diagnosis verify_and_locate(const Tensor& c, const std::vector<double>& predicted_row,
                            const std::vector<double>& predicted_col, double tau_effective,
                            double agree_floor);

/// Mutates the GEMM result in place, standing in for transient datapath
/// faults landing in C.
using CellFaultHook = std::function<void(Tensor& c)>;

/// Full-checksum protected GEMM. Computes C = A*B (base cost on `counter`),
/// lets `fault_hook` corrupt it, then detects/corrects:
///   - row checksums predicted as A*(B*1), column checksums as (1^T*A)*B
///   - a single located cell is recomputed exactly (ascending-k order)
///   - anything else triggers one fault-free full recomputation
/// Encode/verify costs land in detect_*, correction/recompute in recover_*.
Tensor abft_gemm(const Tensor& a, const Tensor& b, const ProtectionPolicy& policy,
                 const CellFaultHook& fault_hook, OpCount& counter, ProtectionLedger& ledger,
                 int layer_id = -1);

/// May corrupt each replica independently; `replica` is 0..2.
using ReplicaFaultHook = std::function<void(int replica, Tensor& out)>;

/// Three executions and a per-element bit-equality two-of-three vote; if any
/// element has three distinct patterns, one extra fault-free run replaces
/// the output. Replicas 2 and 3 (and the fallback run) count as recover_*,
/// votes as detect_adds.
Tensor tmr_execute(const std::function<Tensor(OpCount&)>& layer_compute,
                   const ReplicaFaultHook& fault_hook, OpCount& counter,
                   ProtectionLedger& ledger);

/// Applies the policy to one layer. ABFT covers Conv2D/FullyConnected via
/// im2col (bias add and activations stay outside the checksummed region);
/// TMR applies to any layer; NoProtect passes faults through to the output.
/// Fault sites index the layer's output tensor.
Tensor protected_layer_forward(const LayerSpec& layer, const Tensor& input,
                               const ProtectionPolicy& policy,
                               const std::vector<struct FlipSite>& flips, OpCount& counter,
                               ProtectionLedger& ledger, int layer_id = -1);

/// Detection cost of strict/relaxed ABFT on an (m,k,n) GEMM; depends only on
/// the dimensions, never on faults.
void abft_detect_cost(int64_t m, int64_t k, int64_t n, int64_t& adds, int64_t& muls);

}  // namespace fg
