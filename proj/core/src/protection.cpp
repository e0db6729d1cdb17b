#include "faultguard/protection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "faultguard/errors.hpp"
#include "faultguard/fault.hpp"
#include "faultguard/nn.hpp"

namespace fg {

namespace {

constexpr double kEpsAbs = 1e-3;
constexpr double kEpsRel = 1e-5;

double max_abs(const std::vector<float>& v) {
  double m = 0.0;
  for (float x : v) {
    const double a = std::fabs(static_cast<double>(x));
    if (a > m) m = a;
  }
  return m;
}

// true when the discrepancy counts as a mismatch (NaN included)
bool mismatch(double delta, double tau) { return !(std::fabs(delta) <= tau); }

}  // namespace

const char* policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::NoProtect: return "none";
    case PolicyKind::AbftStrict: return "abft_strict";
    case PolicyKind::AbftRelaxed: return "abft_relaxed";
    case PolicyKind::Tmr: return "tmr";
  }
  return "?";
}

double detection_floor(int64_t k, double max_abs_a, double max_abs_b) {
  return kEpsAbs + kEpsRel * (static_cast<double>(k) * max_abs_a * max_abs_b);
}

void abft_detect_cost(int64_t m, int64_t k, int64_t n, int64_t& adds, int64_t& muls) {
  // encode: B*1 (k*(n-1)), A*(B*1) (m*(k-1)), 1^T*A (k*(m-1)), (1^T*A)*B ((k-1)*n)
  // verify: row sums of C (m*(n-1)), col sums of C ((m-1)*n), m+n compares,
  //         max|A| and max|B| scans (m*k + k*n compares)
  adds = k * (n - 1) + m * (k - 1) + k * (m - 1) + (k - 1) * n + m * (n - 1) + (m - 1) * n +
         m + n + m * k + k * n;
  muls = m * k + k * n;
}

Diagnosis verify_and_locate(const Tensor& c, const std::vector<double>& predicted_row,
                            const std::vector<double>& predicted_col, double tau_effective,
                            double agree_floor) {
  const int64_t m = c.rows(), n = c.cols();
  if (static_cast<int64_t>(predicted_row.size()) != m ||
      static_cast<int64_t>(predicted_col.size()) != n)
    throw ShapeError("checksum vector lengths do not match the matrix");

  int64_t row_hit = -1, col_hit = -1;
  int row_hits = 0, col_hits = 0;
  double row_delta = 0.0, col_delta = 0.0;

  for (int64_t i = 0; i < m; ++i) {
    double sum = 0.0;
    const float* crow = c.data.data() + i * n;
    for (int64_t j = 0; j < n; ++j) sum += static_cast<double>(crow[j]);
    const double delta = sum - predicted_row[static_cast<size_t>(i)];
    if (mismatch(delta, tau_effective)) {
      ++row_hits;
      row_hit = i;
      row_delta = delta;
    }
  }
  for (int64_t j = 0; j < n; ++j) {
    double sum = 0.0;
    for (int64_t i = 0; i < m; ++i) sum += static_cast<double>(c.data[static_cast<size_t>(i * n + j)]);
    const double delta = sum - predicted_col[static_cast<size_t>(j)];
    if (mismatch(delta, tau_effective)) {
      ++col_hits;
      col_hit = j;
      col_delta = delta;
    }
  }

  Diagnosis d;
  if (row_hits == 0 && col_hits == 0) {
    d.kind = Diagnosis::Clean;
    return d;
  }
  if (row_hits == 1 && col_hits == 1 && std::fabs(row_delta - col_delta) <= agree_floor) {
    d.kind = Diagnosis::SingleCell;
    d.row = row_hit;
    d.col = col_hit;
    d.delta = row_delta;
    return d;
  }
  d.kind = Diagnosis::Inconsistent;
  return d;
}

Tensor abft_gemm(const Tensor& a, const Tensor& b, const ProtectionPolicy& policy,
                 const CellFaultHook& fault_hook, OpCount& counter, ProtectionLedger& ledger,
                 int layer_id) {
  if (!policy.is_abft()) throw PlanError("abft_gemm requires an ABFT policy");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();

  Tensor c = gemm(a, b, counter, layer_id);
  if (fault_hook) fault_hook(c);

  // Encode predicted checksums from the inputs (double accumulators).
  std::vector<double> b_rowsum(static_cast<size_t>(k), 0.0);
  for (int64_t t = 0; t < k; ++t) {
    double s = 0.0;
    const float* brow = b.data.data() + t * n;
    for (int64_t j = 0; j < n; ++j) s += static_cast<double>(brow[j]);
    b_rowsum[static_cast<size_t>(t)] = s;
  }
  std::vector<double> pred_row(static_cast<size_t>(m), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    const float* arow = a.data.data() + i * k;
    for (int64_t t = 0; t < k; ++t) s += static_cast<double>(arow[t]) * b_rowsum[static_cast<size_t>(t)];
    pred_row[static_cast<size_t>(i)] = s;
  }
  std::vector<double> a_colsum(static_cast<size_t>(k), 0.0);
  for (int64_t t = 0; t < k; ++t) {
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += static_cast<double>(a.data[static_cast<size_t>(i * k + t)]);
    a_colsum[static_cast<size_t>(t)] = s;
  }
  std::vector<double> pred_col(static_cast<size_t>(n), 0.0);
  for (int64_t t = 0; t < k; ++t) {
    const double at = a_colsum[static_cast<size_t>(t)];
    const float* brow = b.data.data() + t * n;
    for (int64_t j = 0; j < n; ++j) pred_col[static_cast<size_t>(j)] += at * static_cast<double>(brow[j]);
  }

  int64_t d_adds = 0, d_muls = 0;
  abft_detect_cost(m, k, n, d_adds, d_muls);
  ledger.detect_adds += d_adds;
  ledger.detect_muls += d_muls;

  const double floor = detection_floor(k, max_abs(a.data), max_abs(b.data));
  const double tau_eff =
      policy.kind == PolicyKind::AbftStrict ? floor : std::max(policy.tau, floor);

  const Diagnosis diag = verify_and_locate(c, pred_row, pred_col, tau_eff, floor);
  switch (diag.kind) {
    case Diagnosis::Clean:
      break;
    case Diagnosis::SingleCell: {
      // Exact correction: recompute the located cell in the pinned order.
      c.data[static_cast<size_t>(diag.row * n + diag.col)] =
          gemm_cell(a.data.data(), b.data.data(), k, n, diag.row, diag.col);
      ledger.recover_muls += k;
      ledger.recover_adds += k - 1;
      ledger.corrections += 1;
      break;
    }
    case Diagnosis::Inconsistent: {
      // One full fault-free recomputation; transient faults cannot recur.
      gemm_raw(a.data.data(), b.data.data(), c.data.data(), m, k, n);
      ledger.recover_muls += m * n * k;
      ledger.recover_adds += m * n * (k - 1);
      ledger.recomputes += 1;
      break;
    }
  }
  return c;
}

Tensor tmr_execute(const std::function<Tensor(OpCount&)>& layer_compute,
                   const ReplicaFaultHook& fault_hook, OpCount& counter,
                   ProtectionLedger& ledger) {
  Tensor r0 = layer_compute(counter);
  if (fault_hook) fault_hook(0, r0);

  OpCount extra;
  Tensor r1 = layer_compute(extra);
  if (fault_hook) fault_hook(1, r1);
  Tensor r2 = layer_compute(extra);
  if (fault_hook) fault_hook(2, r2);
  ledger.recover_adds += extra.adds;
  ledger.recover_muls += extra.muls;

  Tensor out = r0;
  bool all_differ = false;
  for (size_t e = 0; e < out.data.size(); ++e) {
    uint32_t b0, b1, b2;
    std::memcpy(&b0, &r0.data[e], 4);
    std::memcpy(&b1, &r1.data[e], 4);
    std::memcpy(&b2, &r2.data[e], 4);
    if (b0 == b1 || b0 == b2) {
      out.data[e] = r0.data[e];
    } else if (b1 == b2) {
      out.data[e] = r1.data[e];
    } else {
      all_differ = true;
    }
  }
  // two bit-equality votes per element
  ledger.detect_adds += 2 * static_cast<int64_t>(out.data.size());

  if (all_differ) {
    OpCount redo;
    out = layer_compute(redo);  // fault-free by the transient model
    ledger.recover_adds += redo.adds;
    ledger.recover_muls += redo.muls;
    ledger.recomputes += 1;
  }
  return out;
}

Tensor protected_layer_forward(const LayerSpec& layer, const Tensor& input,
                               const ProtectionPolicy& policy, const std::vector<FlipSite>& flips,
                               OpCount& counter, ProtectionLedger& ledger, int layer_id) {
  auto apply_flips = [&flips](Tensor& t) {
    for (const FlipSite& site : flips) {
      if (site.element < 0 || site.element >= t.numel())
        throw ConsistencyError("flip element " + std::to_string(site.element) +
                               " out of bounds for protected layer output");
      float& v = t.data[static_cast<size_t>(site.element)];
      v = flip_bit(v, site.bit);
    }
  };

  auto plain_compute = [&](OpCount& cnt) -> Tensor {
    switch (layer.kind) {
      case LayerKind::Conv2D:
        return conv2d_forward(input, layer, cnt, layer_id);
      case LayerKind::FullyConnected:
        return fully_connected_forward(input, layer, cnt, layer_id);
      case LayerKind::MaxPool2D:
        return maxpool2d_forward(input, layer);
      case LayerKind::ReLU:
        return relu_forward(input);
      case LayerKind::Flatten: {
        Tensor t = input;
        t.shape = {t.numel()};
        return t;
      }
      case LayerKind::Softmax:
        return softmax_forward(input);
    }
    throw ShapeError("unreachable layer kind");
  };

  switch (policy.kind) {
    case PolicyKind::NoProtect: {
      Tensor out = plain_compute(counter);
      apply_flips(out);
      return out;
    }
    case PolicyKind::AbftStrict:
    case PolicyKind::AbftRelaxed: {
      if (!layer.has_params())
        throw PlanError(std::string("ABFT requested on non-GEMM layer kind ") +
                        layer_kind_name(layer.kind));
      CellFaultHook hook;
      if (!flips.empty()) hook = apply_flips;

      if (layer.kind == LayerKind::Conv2D) {
        const auto out_shape = layer.output_shape(input.shape);
        const Tensor cols = im2col(input, layer.kernel, layer.stride);
        Tensor a;
        a.shape = {layer.out_channels, layer.in_channels * layer.kernel * layer.kernel};
        a.data = layer.weight.data;
        Tensor c = abft_gemm(a, cols, policy, hook, counter, ledger, layer_id);
        // bias add is outside the checksummed region
        const int64_t np = out_shape[1] * out_shape[2];
        for (int64_t oc = 0; oc < layer.out_channels; ++oc) {
          const float bv = layer.bias.data[static_cast<size_t>(oc)];
          float* row = c.data.data() + oc * np;
          for (int64_t p = 0; p < np; ++p) row[p] += bv;
        }
        counter.record(layer_id, layer.out_channels * np, 0);
        c.shape = out_shape;
        return c;
      }
      // FullyConnected
      if (input.numel() != layer.in_features)
        throw ShapeError("fully_connected input " + shape_str(input.shape) +
                         " does not match spec");
      Tensor x;
      x.shape = {layer.in_features, 1};
      x.data = input.data;
      Tensor c = abft_gemm(layer.weight, x, policy, hook, counter, ledger, layer_id);
      for (int64_t o = 0; o < layer.out_features; ++o)
        c.data[static_cast<size_t>(o)] += layer.bias.data[static_cast<size_t>(o)];
      counter.record(layer_id, layer.out_features, 0);
      c.shape = {layer.out_features};
      return c;
    }
    case PolicyKind::Tmr: {
      // The transient fault hits one point in time: replica 0.
      ReplicaFaultHook hook = [&](int replica, Tensor& out) {
        if (replica == 0) apply_flips(out);
      };
      return tmr_execute(plain_compute, hook, counter, ledger);
    }
  }
  throw PlanError("unreachable policy kind");
}

}  // namespace fg
