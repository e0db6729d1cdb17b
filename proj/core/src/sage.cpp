#include "faultguard/sage.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "faultguard/errors.hpp"
#include "faultguard/rng.hpp"

namespace fg {

namespace {

using Matrix = std::vector<std::vector<double>>;

void init_layer(SageLayerParams& l, int in, int out, SplitMix64& rng) {
  l.in = in;
  l.out = out;
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  l.w_self.resize(static_cast<size_t>(in) * out);
  l.w_neigh.resize(static_cast<size_t>(in) * out);
  l.bias.assign(static_cast<size_t>(out), 0.0);
  for (double& w : l.w_self) w = rng.next_uniform(-a, a);
  for (double& w : l.w_neigh) w = rng.next_uniform(-a, a);
}

/// rows of `out` = W * rows of `in` summed per node: out[v] = M * x_v
void matvec_rows(const std::vector<double>& w, int in, int out, const Matrix& x, Matrix& y) {
  for (size_t v = 0; v < x.size(); ++v) {
    for (int o = 0; o < out; ++o) {
      const double* wrow = w.data() + static_cast<size_t>(o) * in;
      double acc = 0.0;
      for (int t = 0; t < in; ++t) acc += wrow[t] * x[v][static_cast<size_t>(t)];
      y[v][static_cast<size_t>(o)] = acc;
    }
  }
}

Matrix neighbor_means(const GraphSample& g, const Matrix& h, int width, OpCount* counter) {
  const size_t n = g.num_nodes();
  Matrix m(n, std::vector<double>(static_cast<size_t>(width), 0.0));
  int64_t adds = 0, muls = 0;
  std::vector<double> gathered;
  for (size_t v = 0; v < n; ++v) {
    std::vector<int> neigh;
    for (size_t u = 0; u < n; ++u) {
      if (g.adjacency[v][u]) neigh.push_back(static_cast<int>(u));
    }
    const int64_t deg = static_cast<int64_t>(neigh.size());
    if (deg == 0) continue;  // isolated nodes keep the zero vector
    const double inv = 1.0 / static_cast<double>(deg);
    for (int t = 0; t < width; ++t) {
      gathered.clear();
      for (int u : neigh) gathered.push_back(h[static_cast<size_t>(u)][static_cast<size_t>(t)]);
      // value-sorted summation: the mean is a pure function of the
      // neighbor-value multiset, so node relabeling permutes outputs exactly
      std::sort(gathered.begin(), gathered.end());
      double sum = 0.0;
      for (double x : gathered) sum += x;
      m[v][static_cast<size_t>(t)] = sum * inv;
    }
    adds += (deg - 1) * width;
    muls += width;
  }
  if (counter) counter->record(-1, adds, muls);
  return m;
}

struct LayerCache {
  Matrix input;  // H_{k-1}
  Matrix mean;   // neighbor means of input
  Matrix z;      // pre-activation
};

Matrix sage_layer_forward(const SageLayerParams& l, const GraphSample& g, const Matrix& h,
                          OpCount* counter, LayerCache* cache) {
  const size_t n = g.num_nodes();
  Matrix m = neighbor_means(g, h, l.in, counter);
  Matrix zs(n, std::vector<double>(static_cast<size_t>(l.out), 0.0));
  Matrix zn(n, std::vector<double>(static_cast<size_t>(l.out), 0.0));
  matvec_rows(l.w_self, l.in, l.out, h, zs);
  matvec_rows(l.w_neigh, l.in, l.out, m, zn);
  Matrix out(n, std::vector<double>(static_cast<size_t>(l.out), 0.0));
  for (size_t v = 0; v < n; ++v) {
    for (int o = 0; o < l.out; ++o) {
      const double z = zs[v][static_cast<size_t>(o)] + zn[v][static_cast<size_t>(o)] +
                       l.bias[static_cast<size_t>(o)];
      out[v][static_cast<size_t>(o)] = z;
    }
  }
  if (counter) {
    const int64_t nn = static_cast<int64_t>(n);
    counter->record(-1, 2 * nn * l.out * (l.in - 1) + 2 * nn * l.out,
                    2 * nn * l.out * l.in);
  }
  if (cache) {
    cache->input = h;
    cache->mean = std::move(m);
    cache->z = out;
  }
  for (auto& row : out) {
    for (double& z : row) z = std::max(z, 0.0);
  }
  return out;
}

}  // namespace

size_t GnnModel::param_count() const {
  return l1.w_self.size() + l1.w_neigh.size() + l1.bias.size() + l2.w_self.size() +
         l2.w_neigh.size() + l2.bias.size() + l3.w_self.size() + l3.w_neigh.size() +
         l3.bias.size() + w_cls.size() + b_cls.size();
}

void GnnModel::check() const {
  if (l1.in != feat_dim || l1.out != hidden || l2.in != hidden || l2.out != hidden ||
      l3.in != hidden || l3.out != hidden)
    throw ShapeError("GNN layer dimensions do not chain");
  if (w_cls.size() != static_cast<size_t>(classes) * hidden ||
      b_cls.size() != static_cast<size_t>(classes))
    throw ShapeError("GNN classifier dimensions do not match");
}

GnnModel gnn_init(int feat_dim, int hidden, int classes, uint64_t seed) {
  GnnModel g;
  g.feat_dim = feat_dim;
  g.hidden = hidden;
  g.classes = classes;
  g.init_seed = seed;
  SplitMix64 rng(seed_mix({seed, 0x59a9ull}));
  init_layer(g.l1, feat_dim, hidden, rng);
  init_layer(g.l2, hidden, hidden, rng);
  init_layer(g.l3, hidden, hidden, rng);
  const double a = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  g.w_cls.resize(static_cast<size_t>(classes) * hidden);
  g.b_cls.assign(static_cast<size_t>(classes), 0.0);
  for (double& w : g.w_cls) w = rng.next_uniform(-a, a);
  return g;
}

std::vector<std::vector<double>> sage_forward(const GnnModel& gnn, const GraphSample& graph,
                                              OpCount* counter) {
  graph.check();
  if (graph.feature_dim() != static_cast<size_t>(gnn.feat_dim))
    throw ShapeError("graph feature width " + std::to_string(graph.feature_dim()) +
                     " does not match model feat_dim " + std::to_string(gnn.feat_dim));
  Matrix h = graph.node_features;
  h = sage_layer_forward(gnn.l1, graph, h, counter, nullptr);
  h = sage_layer_forward(gnn.l2, graph, h, counter, nullptr);
  h = sage_layer_forward(gnn.l3, graph, h, counter, nullptr);

  const size_t n = graph.num_nodes();
  Matrix scores(n, std::vector<double>(static_cast<size_t>(gnn.classes), 0.0));
  matvec_rows(gnn.w_cls, gnn.hidden, gnn.classes, h, scores);
  for (size_t v = 0; v < n; ++v) {
    for (int c = 0; c < gnn.classes; ++c)
      scores[v][static_cast<size_t>(c)] += gnn.b_cls[static_cast<size_t>(c)];
  }
  if (counter) {
    const int64_t nn = static_cast<int64_t>(n);
    counter->record(-1, nn * gnn.classes * (gnn.hidden - 1) + nn * gnn.classes,
                    nn * gnn.classes * gnn.hidden);
  }
  return scores;
}

int64_t predictor_forward_macs(int64_t n, int64_t d, int64_t h, int64_t c) {
  // chain graph of n >= 2 nodes: every node has a neighbor
  return n * (d + 2 * h * d + 2 * h + 4 * h * h + c * h);
}

GnnGradient zero_like(const GnnModel& gnn) {
  GnnGradient g;
  auto zero_layer = [](const SageLayerParams& src, SageLayerParams& dst) {
    dst.in = src.in;
    dst.out = src.out;
    dst.w_self.assign(src.w_self.size(), 0.0);
    dst.w_neigh.assign(src.w_neigh.size(), 0.0);
    dst.bias.assign(src.bias.size(), 0.0);
  };
  zero_layer(gnn.l1, g.l1);
  zero_layer(gnn.l2, g.l2);
  zero_layer(gnn.l3, g.l3);
  g.w_cls.assign(gnn.w_cls.size(), 0.0);
  g.b_cls.assign(gnn.b_cls.size(), 0.0);
  return g;
}

std::vector<std::span<double>> param_blocks(GnnModel& gnn) {
  return {gnn.l1.w_self, gnn.l1.w_neigh, gnn.l1.bias, gnn.l2.w_self, gnn.l2.w_neigh,
          gnn.l2.bias,   gnn.l3.w_self, gnn.l3.w_neigh, gnn.l3.bias, gnn.w_cls, gnn.b_cls};
}

std::vector<std::span<double>> grad_blocks(GnnGradient& g) {
  return {g.l1.w_self, g.l1.w_neigh, g.l1.bias, g.l2.w_self, g.l2.w_neigh,
          g.l2.bias,   g.l3.w_self, g.l3.w_neigh, g.l3.bias, g.w_cls, g.b_cls};
}

double gnn_loss_and_grad(const GnnModel& gnn, std::span<const GraphSample> samples,
                         std::span<const double> class_weights, GnnGradient* grad) {
  gnn.check();
  double total_loss = 0.0;

  for (const GraphSample& graph : samples) {
    graph.check();
    const size_t n = graph.num_nodes();

    LayerCache c1, c2, c3;
    Matrix h0 = graph.node_features;
    Matrix h1 = sage_layer_forward(gnn.l1, graph, h0, nullptr, &c1);
    Matrix h2 = sage_layer_forward(gnn.l2, graph, h1, nullptr, &c2);
    Matrix h3 = sage_layer_forward(gnn.l3, graph, h2, nullptr, &c3);

    Matrix scores(n, std::vector<double>(static_cast<size_t>(gnn.classes), 0.0));
    matvec_rows(gnn.w_cls, gnn.hidden, gnn.classes, h3, scores);
    for (size_t v = 0; v < n; ++v)
      for (int c = 0; c < gnn.classes; ++c)
        scores[v][static_cast<size_t>(c)] += gnn.b_cls[static_cast<size_t>(c)];

    // weighted CE over labeled nodes
    Matrix dscores(n, std::vector<double>(static_cast<size_t>(gnn.classes), 0.0));
    for (size_t v = 0; v < n; ++v) {
      const int y = graph.labels.empty() ? -1 : graph.labels[v];
      if (y < 0) continue;
      if (y >= gnn.classes)
        throw TrainingError("label " + std::to_string(y) + " out of range for " +
                            std::to_string(gnn.classes) + " classes");
      const double wc = class_weights.empty() ? 1.0 : class_weights[static_cast<size_t>(y)];
      double mx = -std::numeric_limits<double>::infinity();
      for (double s : scores[v]) mx = std::max(mx, s);
      double z = 0.0;
      for (double s : scores[v]) z += std::exp(s - mx);
      const double log_z = std::log(z) + mx;
      total_loss += wc * (log_z - scores[v][static_cast<size_t>(y)]);
      if (grad) {
        for (int c = 0; c < gnn.classes; ++c) {
          const double p = std::exp(scores[v][static_cast<size_t>(c)] - log_z);
          dscores[v][static_cast<size_t>(c)] = wc * (p - (c == y ? 1.0 : 0.0));
        }
      }
    }
    if (!grad) continue;

    // classifier backward
    Matrix dh3(n, std::vector<double>(static_cast<size_t>(gnn.hidden), 0.0));
    for (size_t v = 0; v < n; ++v) {
      for (int c = 0; c < gnn.classes; ++c) {
        const double g = dscores[v][static_cast<size_t>(c)];
        if (g == 0.0) continue;
        grad->b_cls[static_cast<size_t>(c)] += g;
        double* wrow = grad->w_cls.data() + static_cast<size_t>(c) * gnn.hidden;
        const double* wsrc = gnn.w_cls.data() + static_cast<size_t>(c) * gnn.hidden;
        for (int t = 0; t < gnn.hidden; ++t) {
          wrow[t] += g * h3[v][static_cast<size_t>(t)];
          dh3[v][static_cast<size_t>(t)] += g * wsrc[t];
        }
      }
    }

    // SAGE layers backward, deepest first
    auto layer_backward = [&graph, n](const SageLayerParams& l, const LayerCache& cache,
                                      const Matrix& dh_out, SageLayerParams& lg) -> Matrix {
      Matrix dz = dh_out;
      for (size_t v = 0; v < n; ++v)
        for (int o = 0; o < l.out; ++o)
          if (cache.z[v][static_cast<size_t>(o)] <= 0.0) dz[v][static_cast<size_t>(o)] = 0.0;

      for (size_t v = 0; v < n; ++v) {
        for (int o = 0; o < l.out; ++o) {
          const double g = dz[v][static_cast<size_t>(o)];
          if (g == 0.0) continue;
          lg.bias[static_cast<size_t>(o)] += g;
          double* ws = lg.w_self.data() + static_cast<size_t>(o) * l.in;
          double* wn = lg.w_neigh.data() + static_cast<size_t>(o) * l.in;
          for (int t = 0; t < l.in; ++t) {
            ws[t] += g * cache.input[v][static_cast<size_t>(t)];
            wn[t] += g * cache.mean[v][static_cast<size_t>(t)];
          }
        }
      }

      Matrix dh_in(n, std::vector<double>(static_cast<size_t>(l.in), 0.0));
      // through W_self
      for (size_t v = 0; v < n; ++v) {
        for (int o = 0; o < l.out; ++o) {
          const double g = dz[v][static_cast<size_t>(o)];
          if (g == 0.0) continue;
          const double* wrow = l.w_self.data() + static_cast<size_t>(o) * l.in;
          for (int t = 0; t < l.in; ++t) dh_in[v][static_cast<size_t>(t)] += g * wrow[t];
        }
      }
      // through W_neigh and the mean: each u in N(v) receives 1/deg(v)
      for (size_t v = 0; v < n; ++v) {
        int64_t deg = 0;
        for (size_t u = 0; u < n; ++u) deg += graph.adjacency[v][u];
        if (deg == 0) continue;
        std::vector<double> gm(static_cast<size_t>(l.in), 0.0);
        bool any = false;
        for (int o = 0; o < l.out; ++o) {
          const double g = dz[v][static_cast<size_t>(o)];
          if (g == 0.0) continue;
          any = true;
          const double* wrow = l.w_neigh.data() + static_cast<size_t>(o) * l.in;
          for (int t = 0; t < l.in; ++t) gm[static_cast<size_t>(t)] += g * wrow[t];
        }
        if (!any) continue;
        const double inv = 1.0 / static_cast<double>(deg);
        for (size_t u = 0; u < n; ++u) {
          if (!graph.adjacency[v][u]) continue;
          for (int t = 0; t < l.in; ++t)
            dh_in[u][static_cast<size_t>(t)] += inv * gm[static_cast<size_t>(t)];
        }
      }
      return dh_in;
    };

    Matrix dh2 = layer_backward(gnn.l3, c3, dh3, grad->l3);
    Matrix dh1 = layer_backward(gnn.l2, c2, dh2, grad->l2);
    (void)layer_backward(gnn.l1, c1, dh1, grad->l1);
  }
  return total_loss;
}

GnnTrainResult gnn_train(std::span<const GraphSample> samples, const GnnTrainConfig& cfg) {
  if (samples.empty()) throw TrainingError("no labeled samples");
  const int feat_dim = static_cast<int>(samples[0].feature_dim());

  std::vector<double> weights = cfg.class_weights;
  if (weights.empty()) weights.assign(static_cast<size_t>(cfg.classes), 1.0);
  if (weights.size() != static_cast<size_t>(cfg.classes))
    throw TrainingError("class_weights length does not match class count");

  GnnTrainResult result;
  result.model = gnn_init(feat_dim, cfg.hidden, cfg.classes, cfg.seed);
  GnnModel& gnn = result.model;

  GnnGradient vel = zero_like(gnn);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    GnnGradient grad = zero_like(gnn);
    const double loss = gnn_loss_and_grad(gnn, samples, weights, &grad);
    if (!std::isfinite(loss))
      throw TrainingError("GNN loss diverged (non-finite) at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(loss);

    auto params = param_blocks(gnn);
    auto grads = grad_blocks(grad);
    auto vels = grad_blocks(vel);
    for (size_t b = 0; b < params.size(); ++b) {
      for (size_t i = 0; i < params[b].size(); ++i) {
        vels[b][i] = cfg.momentum * vels[b][i] - cfg.lr * grads[b][i];
        params[b][i] += vels[b][i];
      }
    }
  }
  return result;
}

GnnPrediction gnn_predict(const GnnModel& gnn, const GraphSample& graph) {
  const auto scores = sage_forward(gnn, graph);
  GnnPrediction pred;
  pred.probs.reserve(scores.size());
  pred.labels.reserve(scores.size());
  for (const auto& row : scores) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double s : row) mx = std::max(mx, s);
    std::vector<double> p(row.size());
    double z = 0.0;
    for (size_t c = 0; c < row.size(); ++c) {
      p[c] = std::exp(row[c] - mx);
      z += p[c];
    }
    for (double& v : p) v /= z;
    int best = 0;
    for (size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = static_cast<int>(c);
    }
    pred.labels.push_back(best);
    pred.probs.push_back(std::move(p));
  }
  return pred;
}

double gradient_check(const GnnModel& gnn, const GraphSample& graph,
                      const std::vector<int>& labels) {
  GraphSample g = graph;
  g.labels = labels;
  std::vector<double> weights(static_cast<size_t>(gnn.classes), 1.0);
  const std::span<const GraphSample> span_one(&g, 1);

  GnnGradient analytic = zero_like(gnn);
  gnn_loss_and_grad(gnn, span_one, weights, &analytic);

  GnnModel probe = gnn;
  auto params = param_blocks(probe);
  GnnGradient analytic_copy = analytic;
  auto grads = grad_blocks(analytic_copy);

  const double h = 1e-4;
  double worst = 0.0;
  for (size_t b = 0; b < params.size(); ++b) {
    for (size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + h;
      const double lp = gnn_loss_and_grad(probe, span_one, weights, nullptr);
      params[b][i] = saved - h;
      const double lm = gnn_loss_and_grad(probe, span_one, weights, nullptr);
      params[b][i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double rel = std::fabs(grads[b][i] - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

namespace {
constexpr char kGnnMagic[4] = {'F', 'G', 'N', 'N'};
}

void save_gnn(const GnnModel& gnn, const std::string& path) {
  gnn.check();
  nlohmann::json header;
  header["feat_dim"] = gnn.feat_dim;
  header["hidden"] = gnn.hidden;
  header["classes"] = gnn.classes;
  header["init_seed"] = gnn.init_seed;
  header["param_count"] = gnn.param_count();
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write GNN parameter file: " + path);
  f.write(kGnnMagic, 4);
  const uint32_t len = static_cast<uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  GnnModel copy = gnn;
  for (auto block : param_blocks(copy)) {
    for (double v : block) {
      const float fv = static_cast<float>(v);
      f.write(reinterpret_cast<const char*>(&fv), 4);
    }
  }
}

GnnModel load_gnn(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open GNN parameter file: " + path);
  char magic[4];
  uint32_t len = 0;
  if (!f.read(magic, 4) || std::memcmp(magic, kGnnMagic, 4) != 0)
    throw FormatError("bad GNN file magic in " + path);
  if (!f.read(reinterpret_cast<char*>(&len), 4))
    throw FormatError("truncated GNN file: " + path);
  std::string hs(len, '\0');
  if (!f.read(hs.data(), len)) throw FormatError("truncated GNN file: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("bad GNN header in " + path + ": " + e.what());
  }

  GnnModel gnn = gnn_init(header.at("feat_dim").get<int>(), header.at("hidden").get<int>(),
                          header.at("classes").get<int>(), header.at("init_seed").get<uint64_t>());
  size_t expected = header.at("param_count").get<size_t>();
  if (expected != gnn.param_count())
    throw FormatError("GNN param count mismatch in " + path);
  for (auto block : param_blocks(gnn)) {
    for (double& v : block) {
      float fv = 0.0f;
      if (!f.read(reinterpret_cast<char*>(&fv), 4))
        throw FormatError("truncated GNN parameter blob: " + path);
      v = static_cast<double>(fv);
    }
  }
  return gnn;
}

}  // namespace fg
