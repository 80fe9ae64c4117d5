#pragma once

#include "localgcl/common.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/loss.hpp"
#include "localgcl/rng.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace localgcl {

// Minimal dense encoder: 1-3 layer GCN or MLP with ReLU between layers,
// nothing on the output, then a row l2-normalization feeding the loss.
// Gradients are hand-written reverse mode; the optimizer is Adam with
// decoupled weight decay.

enum class EncoderKind { kGcn, kMlp };
enum class ApproxKind { kRff, kSorf };

struct Layer {
  Matrix weight;  // f_in x f_out
  Vector bias;    // f_out
};

struct EncoderParams {
  EncoderKind kind = EncoderKind::kGcn;
  std::vector<Layer> layers;

  void check_shapes(Index input_dim) const {
    require(!layers.empty(), "EncoderParams: no layers");
    Index d = input_dim;
    for (size_t k = 0; k < layers.size(); ++k) {
      require(layers[k].weight.rows() == d,
              "EncoderParams: layer " + std::to_string(k) +
                  " input dim mismatch");
      require(layers[k].bias.size() == layers[k].weight.cols(),
              "EncoderParams: layer " + std::to_string(k) +
                  " bias dim mismatch");
      d = layers[k].weight.cols();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }
};

/// GCN propagation operator D^{-1/2} (A + I) D^{-1/2} with self-loops added
/// internally (independent of the loss's neighborhood, which never includes
/// self). Isolated nodes are fine here: they propagate only to themselves.
inline Matrix gcn_propagation_matrix(const Graph& g) {
  Vector inv_sqrt(g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  Matrix p = Matrix::Zero(g.num_nodes, g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i) {
    p(i, i) = inv_sqrt[i] * inv_sqrt[i];
    for (Index j : g.neighbors(i)) p(i, j) = inv_sqrt[i] * inv_sqrt[j];
  }
  return p;
}

struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to each layer, post-propagation
  std::vector<Matrix> preacts;       // pre-activation output of each layer
  Matrix pre_norm;                   // final pre-normalization embeddings
  Matrix z;                          // row-normalized embeddings
  Vector row_norms;
};

/// Forward pass. `prop` is the propagation matrix for GCN encoders and is
/// ignored for MLPs.
inline ForwardCache encoder_forward(const EncoderParams& params,
                                    const Matrix* prop, const Matrix& x) {
  params.check_shapes(x.cols());
  const bool gcn = params.kind == EncoderKind::kGcn;
  if (gcn) {
    require(prop != nullptr, "encoder_forward: GCN needs a propagation matrix");
    require(prop->rows() == x.rows(),
            "encoder_forward: propagation matrix row mismatch");
  }
  ForwardCache cache;
  const size_t nl = params.layers.size();
  cache.layer_inputs.reserve(nl);
  cache.preacts.reserve(nl);
  Matrix h = x;
  for (size_t k = 0; k < nl; ++k) {
    Matrix hin = gcn ? Matrix(*prop * h) : h;
    Matrix a = hin * params.layers[k].weight;
    a.rowwise() += params.layers[k].bias.transpose();
    require(a.allFinite(), "encoder_forward: non-finite activations at layer " +
                               std::to_string(k));
    cache.layer_inputs.push_back(std::move(hin));
    cache.preacts.push_back(a);
    h = (k + 1 < nl) ? a.cwiseMax(0.0) : a;
  }
  cache.pre_norm = h;
  cache.z.resize(h.rows(), h.cols());
  cache.row_norms.resize(h.rows());
  for (Index i = 0; i < h.rows(); ++i) {
    const double n = h.row(i).norm();
    require(n > 0.0, "encoder_forward: zero embedding row " +
                         std::to_string(i));
    cache.row_norms[i] = n;
    cache.z.row(i) = h.row(i) / n;
  }
  return cache;
}

struct EncoderGrads {
  std::vector<Matrix> d_weight;
  std::vector<Vector> d_bias;
};

/// Reverse-mode gradients of the composed map given d(loss)/d(pre_norm).
inline EncoderGrads encoder_backward(const EncoderParams& params,
                                     const Matrix* prop,
                                     const ForwardCache& cache,
                                     const Matrix& d_pre_norm) {
  const size_t nl = params.layers.size();
  require(cache.preacts.size() == nl && cache.layer_inputs.size() == nl,
          "encoder_backward: cache does not match parameters");
  require(d_pre_norm.rows() == cache.pre_norm.rows() &&
              d_pre_norm.cols() == cache.pre_norm.cols(),
          "encoder_backward: upstream gradient shape mismatch");
  const bool gcn = params.kind == EncoderKind::kGcn;

  EncoderGrads grads;
  grads.d_weight.resize(nl);
  grads.d_bias.resize(nl);
  Matrix da = d_pre_norm;
  for (size_t k = nl; k-- > 0;) {
    grads.d_weight[k] = cache.layer_inputs[k].transpose() * da;
    grads.d_bias[k] = da.colwise().sum();
    if (k == 0) break;
    Matrix dh = da * params.layers[k].weight.transpose();
    if (gcn) dh = *prop * dh;  // prop is symmetric
    da = (cache.preacts[k - 1].array() > 0.0).cast<double>() * dh.array();
  }
  return grads;
}

/// Glorot/Xavier uniform init: entries uniform in +-sqrt(6/(f_in+f_out)).
inline Matrix glorot_init(Index rows, Index cols, std::uint64_t seed) {
  require(rows > 0 && cols > 0, "glorot_init: empty shape");
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      m(i, j) = a * (2.0 * rng.uniform() - 1.0);
  return m;
}

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  long step = 0;

  static AdamState init(const EncoderParams& params, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const auto& l : params.layers) {
      s.m_w.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      s.v_w.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      s.m_b.push_back(Vector::Zero(l.bias.size()));
      s.v_b.push_back(Vector::Zero(l.bias.size()));
    }
    return s;
  }
};

namespace detail {

template <class T>
void adam_update(T& param, T& m, T& v, const T& grad, const AdamConfig& cfg,
                 double bc1, double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= cfg.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.eps);
  if (cfg.weight_decay != 0.0)
    param.array() -= cfg.lr * cfg.weight_decay * param.array();
}

}  // namespace detail

/// One Adam step with bias correction and decoupled weight decay.
/// Non-finite gradients abort the step.
inline void adam_step(AdamState& state, EncoderParams& params,
                      const EncoderGrads& grads) {
  require(grads.d_weight.size() == params.layers.size(),
          "adam_step: gradient count mismatch");
  for (size_t k = 0; k < params.layers.size(); ++k) {
    require(grads.d_weight[k].allFinite() && grads.d_bias[k].allFinite(),
            "adam_step: non-finite gradient at layer " + std::to_string(k));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, state.step);
  for (size_t k = 0; k < params.layers.size(); ++k) {
    detail::adam_update(params.layers[k].weight, state.m_w[k], state.v_w[k],
                        grads.d_weight[k], state.cfg, bc1, bc2);
    detail::adam_update(params.layers[k].bias, state.m_b[k], state.v_b[k],
                        grads.d_bias[k], state.cfg, bc1, bc2);
  }
}

struct TrainConfig {
  Index steps = 50;
  double lr = 5e-4;
  double weight_decay = 0.0;
  Index dim = 512;       // embedding (and hidden) width
  Index proj_dim = 4096; // random-feature count D for the approx path
  double tau = 0.5;
  Index layers = 2;
  EncoderKind encoder = EncoderKind::kGcn;
  NegativeMode negatives = NegativeMode::kExact;
  PositiveVariant positive = PositiveVariant::kMean;
  ApproxKind approx = ApproxKind::kSorf;
  std::uint64_t seed = 0;
  bool strict = true;
  double clamp_floor = 1e-9;
  bool include_constant = true;

  void validate() const {
    require(steps >= 0, "TrainConfig: steps must be >= 0");
    require(lr > 0.0, "TrainConfig: lr must be positive");
    require(weight_decay >= 0.0, "TrainConfig: wd must be >= 0");
    require(dim >= 1, "TrainConfig: dim must be >= 1");
    require(proj_dim >= 1, "TrainConfig: proj-dim must be >= 1");
    require(tau > 0.0, "TrainConfig: tau must be positive");
    require(layers >= 1 && layers <= 3, "TrainConfig: layers must be 1..3");
  }

  LossConfig loss_config() const {
    LossConfig c;
    c.tau = tau;
    c.variant = positive;
    c.negatives = negatives;
    c.clamp_floor = clamp_floor;
    c.include_constant = include_constant;
    return c;
  }
};

struct TrainResult {
  EncoderParams params;
  Matrix embeddings;  // row-normalized
  Matrix pre_norm;
  std::vector<double> loss_trace;  // steps+1 entries, including final loss
  bool diverged = false;
  Index clamp_events = 0;
};

inline EncoderParams init_encoder(EncoderKind kind, Index input_dim,
                                  Index width, Index num_layers,
                                  std::uint64_t seed) {
  EncoderParams params;
  params.kind = kind;
  Index d_in = input_dim;
  for (Index k = 0; k < num_layers; ++k) {
    Layer l;
    l.weight = glorot_init(d_in, width, derive_seed(seed, static_cast<std::uint64_t>(k)));
    l.bias = Vector::Zero(width);
    params.layers.push_back(std::move(l));
    d_in = width;
  }
  return params;
}

/// Full-graph self-supervised training: no mini-batching, loss over all
/// nodes each step. Deterministic per seed. A non-finite loss stops the
/// loop and flags the result instead of throwing.
inline TrainResult train(const Graph& g, const Matrix& x,
                         const TrainConfig& cfg) {
  cfg.validate();
  require(x.rows() == g.num_nodes, "train: feature rows != num_nodes");
  detail::check_degrees(g, "train");

  TrainResult res;
  res.params = init_encoder(cfg.encoder, x.cols(), cfg.dim, cfg.layers,
                            derive_seed(cfg.seed, 0xec0de));
  std::optional<Matrix> prop;
  if (cfg.encoder == EncoderKind::kGcn) prop = gcn_propagation_matrix(g);
  const Matrix* prop_ptr = prop ? &*prop : nullptr;

  std::optional<RffMap> rff;
  std::optional<SorfMap> sorf;
  if (cfg.negatives == NegativeMode::kApprox) {
    const std::uint64_t ms = derive_seed(cfg.seed, 0xfea7);
    if (cfg.approx == ApproxKind::kRff)
      rff.emplace(cfg.dim, cfg.proj_dim, cfg.tau, ms);
    else
      sorf.emplace(cfg.dim, cfg.proj_dim, cfg.tau, ms);
  }
  const LossConfig lcfg = cfg.loss_config();

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  AdamState adam = AdamState::init(res.params, acfg);

  auto evaluate = [&](const Matrix& pre_norm) {
    if (rff) return loss_with_gradient(pre_norm, g, &*rff, lcfg);
    if (sorf) return loss_with_gradient(pre_norm, g, &*sorf, lcfg);
    return loss_with_gradient<RffMap>(pre_norm, g, nullptr, lcfg);
  };

  ForwardCache cache = encoder_forward(res.params, prop_ptr, x);
  for (Index step = 0; step < cfg.steps; ++step) {
    LossValue loss = evaluate(cache.pre_norm);
    res.loss_trace.push_back(loss.total);
    res.clamp_events += loss.clamp_count;
    if (!std::isfinite(loss.total)) {
      res.diverged = true;
      break;
    }
    // Chain through normalization happened inside the loss; caches feed the
    // encoder backward pass. Exploding parameters surface as non-finite
    // activations or gradients before the loss itself goes non-finite, so
    // those aborts are folded into the divergence flag with the trace kept.
    try {
      EncoderGrads grads =
          encoder_backward(res.params, prop_ptr, cache, *loss.gradient);
      adam_step(adam, res.params, grads);
      cache = encoder_forward(res.params, prop_ptr, x);
    } catch (const invalid_input&) {
      res.diverged = true;
      break;
    } catch (const numeric_error&) {
      res.diverged = true;
      break;
    }
  }
  if (!res.diverged) {
    const LossValue final_loss = evaluate(cache.pre_norm);
    res.loss_trace.push_back(final_loss.total);
    res.clamp_events += final_loss.clamp_count;
  }
  res.pre_norm = cache.pre_norm;
  res.embeddings = cache.z;
  return res;
}

}  // namespace localgcl
