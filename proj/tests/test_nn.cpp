#include "localgcl/nn.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace localgcl;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

Graph connected_random_graph(Index n, double p, std::uint64_t seed) {
  Rng rng(seed);
  EdgeList edges;
  for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return build_graph(edges, n);
}

}  // namespace

TEST(GcnPropagation, ClosedForms) {
  Graph lone;
  lone.num_nodes = 1;
  lone.row_offsets = {0, 0};
  const Matrix p1 = gcn_propagation_matrix(lone);
  EXPECT_DOUBLE_EQ(p1(0, 0), 1.0);

  const Graph edge = build_graph({{0, 1}}, 2);
  const Matrix p2 = gcn_propagation_matrix(edge);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(p2(i, j), 0.5, 1e-15);
}

TEST(GcnPropagation, MatchesDenseOracle) {
  const Graph g = connected_random_graph(15, 0.3, 61);
  const Matrix p = gcn_propagation_matrix(g);
  Matrix a_hat = Matrix::Identity(15, 15);
  for (Index i = 0; i < 15; ++i)
    for (Index j : g.neighbors(i)) a_hat(i, j) = 1.0;
  const Vector dinv = a_hat.rowwise().sum().array().rsqrt();
  const Matrix oracle = dinv.asDiagonal() * a_hat * dinv.asDiagonal();
  EXPECT_LT((p - oracle).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EncoderForward, IdentityMlpNormalizesInput) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  params.layers.push_back({Matrix::Identity(4, 4), Vector::Zero(4)});
  const Matrix x = random_matrix(6, 4, 63);
  const ForwardCache cache = encoder_forward(params, nullptr, x);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_NEAR(cache.z.row(i).norm(), 1.0, 1e-12);
    const Vector expected = x.row(i) / x.row(i).norm();
    EXPECT_LT((cache.z.row(i).transpose() - expected).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(EncoderForward, ZeroWeightsLeaveBiasRows) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  Vector bias(3);
  bias << 1.0, 2.0, -2.0;
  params.layers.push_back({Matrix::Zero(5, 3), bias});
  const Matrix x = random_matrix(4, 5, 64);
  const ForwardCache cache = encoder_forward(params, nullptr, x);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_LT((cache.pre_norm.row(i).transpose() - bias).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_LT((cache.z.row(i) - cache.z.row(0)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(EncoderForward, MatchesStraightLineReimplementation) {
  const Index n = 12, f = 5, h = 7, d = 4;
  const Graph g = connected_random_graph(n, 0.3, 65);
  const Matrix x = random_matrix(n, f, 66);
  EncoderParams params;
  params.kind = EncoderKind::kGcn;
  params.layers.push_back({random_matrix(f, h, 67) * 0.3,
                           random_matrix(h, 1, 68).col(0) * 0.1});
  params.layers.push_back({random_matrix(h, d, 69) * 0.3,
                           random_matrix(d, 1, 70).col(0) * 0.1});
  const Matrix prop = gcn_propagation_matrix(g);
  const ForwardCache cache = encoder_forward(params, &prop, x);

  // Scalar-loop re-evaluation of the same composition.
  auto matmul = [](const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index k = 0; k < a.cols(); ++k)
        for (Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
  };
  Matrix h1 = matmul(matmul(prop, x), params.layers[0].weight);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < h; ++j)
      h1(i, j) = std::max(0.0, h1(i, j) + params.layers[0].bias[j]);
  Matrix h2 = matmul(matmul(prop, h1), params.layers[1].weight);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) h2(i, j) += params.layers[1].bias[j];
  EXPECT_LT((cache.pre_norm - h2).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 0; i < n; ++i) {
    const double norm = h2.row(i).norm();
    EXPECT_LT((cache.z.row(i) - h2.row(i) / norm).cwiseAbs().maxCoeff(),
              1e-10);
  }
}

TEST(EncoderBackward, LinearModelClosedForm) {
  // Quadratic test loss L = |H|_F^2 / 2 on a 1-layer linear MLP:
  // dL/dW = X' H, dL/db = column sums of H.
  const Matrix x = random_matrix(9, 4, 71);
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  params.layers.push_back({random_matrix(4, 3, 72), Vector::Zero(3)});
  const ForwardCache cache = encoder_forward(params, nullptr, x);
  const Matrix upstream = cache.pre_norm;  // dL/dH for L = |H|^2/2
  const EncoderGrads grads = encoder_backward(params, nullptr, cache, upstream);
  EXPECT_LT((grads.d_weight[0] - x.transpose() * cache.pre_norm)
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_LT((grads.d_bias[0].transpose() - cache.pre_norm.colwise().sum())
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
}

TEST(EncoderBackward, ZeroUpstreamGivesZeroGrads) {
  const Graph g = connected_random_graph(8, 0.4, 73);
  const Matrix prop = gcn_propagation_matrix(g);
  EncoderParams params;
  params.kind = EncoderKind::kGcn;
  params.layers.push_back({random_matrix(5, 6, 74), Vector::Zero(6)});
  params.layers.push_back({random_matrix(6, 3, 75), Vector::Zero(3)});
  const Matrix x = random_matrix(8, 5, 76);
  const ForwardCache cache = encoder_forward(params, &prop, x);
  const EncoderGrads grads = encoder_backward(
      params, &prop, cache, Matrix::Zero(8, 3));
  for (size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(grads.d_weight[k].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grads.d_bias[k].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(EncoderBackward, EndToEndFiniteDifferences) {
  // 2-layer GCN feeding the full contrastive loss on a 10-node graph.
  const Index n = 10, f = 4, d = 3;
  const Graph g = connected_random_graph(n, 0.35, 77);
  const Matrix prop = gcn_propagation_matrix(g);
  const Matrix x = random_matrix(n, f, 78);
  EncoderParams params;
  params.kind = EncoderKind::kGcn;
  params.layers.push_back(
      {random_matrix(f, 5, 79) * 0.5, random_matrix(5, 1, 80).col(0) * 0.1});
  params.layers.push_back(
      {random_matrix(5, d, 81) * 0.5, random_matrix(d, 1, 82).col(0) * 0.1});
  LossConfig cfg;
  cfg.tau = 0.6;

  const ForwardCache cache = encoder_forward(params, &prop, x);
  const LossValue loss =
      loss_with_gradient<RffMap>(cache.pre_norm, g, nullptr, cfg);
  const EncoderGrads grads =
      encoder_backward(params, &prop, cache, *loss.gradient);

  auto loss_value = [&](const EncoderParams& p) {
    const ForwardCache c = encoder_forward(p, &prop, x);
    Matrix z(n, d);
    for (Index i = 0; i < n; ++i)
      z.row(i) = c.pre_norm.row(i) / c.pre_norm.row(i).norm();
    return local_gcl_loss({z, true}, g, cfg).total;
  };
  const double h = 1e-5;
  for (size_t k = 0; k < params.layers.size(); ++k) {
    Matrix fd(params.layers[k].weight.rows(), params.layers[k].weight.cols());
    for (Index i = 0; i < fd.rows(); ++i)
      for (Index j = 0; j < fd.cols(); ++j) {
        EncoderParams p = params;
        p.layers[k].weight(i, j) += h;
        const double up = loss_value(p);
        p.layers[k].weight(i, j) -= 2.0 * h;
        const double down = loss_value(p);
        fd(i, j) = (up - down) / (2.0 * h);
      }
    const double scale = std::max(1e-12, fd.cwiseAbs().maxCoeff());
    EXPECT_LT((grads.d_weight[k] - fd).cwiseAbs().maxCoeff() / scale, 1e-4)
        << "layer " << k;
    Vector fdb(params.layers[k].bias.size());
    for (Index j = 0; j < fdb.size(); ++j) {
      EncoderParams p = params;
      p.layers[k].bias[j] += h;
      const double up = loss_value(p);
      p.layers[k].bias[j] -= 2.0 * h;
      const double down = loss_value(p);
      fdb[j] = (up - down) / (2.0 * h);
    }
    const double bscale = std::max(1e-12, fdb.cwiseAbs().maxCoeff());
    EXPECT_LT((grads.d_bias[k] - fdb).cwiseAbs().maxCoeff() / bscale, 1e-4)
        << "layer " << k << " bias";
  }
}

TEST(GlorotInit, DeterministicBoundedAndScaled) {
  const Matrix a = glorot_init(20, 30, 5);
  const Matrix b = glorot_init(20, 30, 5);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);

  const Matrix big = glorot_init(1000, 1000, 6);
  const double bound = std::sqrt(6.0 / 2000.0);
  EXPECT_LE(big.cwiseAbs().maxCoeff(), bound);
  const double var = big.array().square().mean();
  EXPECT_NEAR(var, 2.0 / 2000.0, 0.05 * 2.0 / 2000.0);

  const Matrix tiny = glorot_init(1, 1, 7);
  EXPECT_LE(std::abs(tiny(0, 0)), std::sqrt(3.0));
}

TEST(AdamStep, ZeroGradientIsNoOp) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  params.layers.push_back({random_matrix(3, 2, 8), Vector::Zero(2)});
  const Matrix before = params.layers[0].weight;
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamState state = AdamState::init(params, cfg);
  EncoderGrads grads;
  grads.d_weight.push_back(Matrix::Zero(3, 2));
  grads.d_bias.push_back(Vector::Zero(2));
  adam_step(state, params, grads);
  EXPECT_EQ((params.layers[0].weight - before).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  params.layers.push_back({Matrix::Zero(2, 2), Vector::Zero(2)});
  AdamConfig cfg;
  cfg.lr = 0.01;
  AdamState state = AdamState::init(params, cfg);
  EncoderGrads grads;
  Matrix g(2, 2);
  g << 3.7, -1.2, 0.4, -9.9;
  grads.d_weight.push_back(g);
  grads.d_bias.push_back(Vector::Zero(2));
  adam_step(state, params, grads);
  // Bias-corrected m/sqrt(v) is sign(g) on step one, up to eps.
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      EXPECT_NEAR(params.layers[0].weight(i, j),
                  -cfg.lr * (g(i, j) > 0 ? 1.0 : -1.0), 1e-6);
}

TEST(AdamStep, ScalarQuadraticConverges) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  Matrix w(1, 1);
  w << 1.0;
  params.layers.push_back({w, Vector::Zero(1)});
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState state = AdamState::init(params, cfg);
  for (int step = 0; step < 200; ++step) {
    EncoderGrads grads;
    grads.d_weight.push_back(2.0 * params.layers[0].weight);
    grads.d_bias.push_back(Vector::Zero(1));
    adam_step(state, params, grads);
  }
  EXPECT_LT(std::abs(params.layers[0].weight(0, 0)), 1e-2);
}

TEST(AdamStep, RejectsNonFiniteGradients) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  params.layers.push_back({Matrix::Zero(2, 2), Vector::Zero(2)});
  AdamState state = AdamState::init(params, {});
  EncoderGrads grads;
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = std::numeric_limits<double>::quiet_NaN();
  grads.d_weight.push_back(g);
  grads.d_bias.push_back(Vector::Zero(2));
  EXPECT_THROW(adam_step(state, params, grads), invalid_input);
}

namespace {

TrainConfig small_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.lr = 1e-2;
  cfg.dim = 64;
  cfg.layers = 2;
  cfg.tau = 0.5;
  cfg.encoder = EncoderKind::kGcn;
  cfg.negatives = NegativeMode::kExact;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Train, ZeroStepsReturnsInitialLossOnly) {
  const Graph g = sbm_generate({20, 20}, 0.3, 0.05, 90);
  const Matrix x = Matrix::Identity(40, 40);
  TrainConfig cfg = small_train_config(1);
  cfg.steps = 0;
  const TrainResult res = train(g, x, cfg);
  EXPECT_EQ(res.loss_trace.size(), 1u);
  EXPECT_FALSE(res.diverged);
  EXPECT_EQ(res.embeddings.rows(), 40);
  for (Index i = 0; i < 40; ++i)
    EXPECT_NEAR(res.embeddings.row(i).norm(), 1.0, 1e-6);
}

TEST(Train, LossImprovesOnSbm) {
  // Median over 5 seeds of (final - initial) must be an improvement.
  std::vector<double> deltas;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Graph g = sbm_generate({100, 100}, 0.1, 0.01, derive_seed(200, s));
    const Matrix x = Matrix::Identity(200, 200);
    const TrainResult res = train(g, x, small_train_config(s));
    ASSERT_FALSE(res.diverged);
    ASSERT_EQ(res.loss_trace.size(), 51u);
    deltas.push_back(res.loss_trace.back() - res.loss_trace.front());
  }
  std::sort(deltas.begin(), deltas.end());
  EXPECT_LT(deltas[2], 0.0);
}

TEST(Train, ExactAndSorfLandClose) {
  const Graph g = sbm_generate({100, 100}, 0.1, 0.01, 300);
  const Matrix x = Matrix::Identity(200, 200);
  TrainConfig exact_cfg = small_train_config(4);
  const TrainResult exact = train(g, x, exact_cfg);
  TrainConfig approx_cfg = exact_cfg;
  approx_cfg.negatives = NegativeMode::kApprox;
  approx_cfg.approx = ApproxKind::kSorf;
  approx_cfg.proj_dim = 4096;
  const TrainResult approx = train(g, x, approx_cfg);
  ASSERT_FALSE(exact.diverged);
  ASSERT_FALSE(approx.diverged);
  const double rel = std::abs(exact.loss_trace.back() -
                              approx.loss_trace.back()) /
                     std::abs(exact.loss_trace.back());
  EXPECT_LT(rel, 0.10);
}

TEST(Train, DeterministicPerSeed) {
  const Graph g = sbm_generate({15, 15}, 0.3, 0.05, 301);
  const Matrix x = Matrix::Identity(30, 30);
  TrainConfig cfg = small_train_config(9);
  cfg.steps = 10;
  cfg.dim = 8;
  const TrainResult a = train(g, x, cfg);
  const TrainResult b = train(g, x, cfg);
  ASSERT_EQ(a.loss_trace.size(), b.loss_trace.size());
  for (size_t i = 0; i < a.loss_trace.size(); ++i)
    EXPECT_EQ(a.loss_trace[i], b.loss_trace[i]);
  EXPECT_EQ((a.embeddings - b.embeddings).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Train, DoesNotMutateInputs) {
  const Graph g = sbm_generate({10, 10}, 0.4, 0.1, 302);
  const std::vector<Index> offsets = g.row_offsets;
  const std::vector<Index> cols = g.col_indices;
  const Matrix x = Matrix::Identity(20, 20);
  const Matrix x_copy = x;
  TrainConfig cfg = small_train_config(2);
  cfg.steps = 5;
  cfg.dim = 6;
  (void)train(g, x, cfg);
  EXPECT_EQ(g.row_offsets, offsets);
  EXPECT_EQ(g.col_indices, cols);
  EXPECT_EQ((x - x_copy).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Train, RejectsIsolatedNodes) {
  const Graph g = build_graph({{0, 1}}, 3);
  const Matrix x = Matrix::Identity(3, 3);
  EXPECT_THROW(train(g, x, small_train_config(0)), invalid_input);
}

TEST(Train, AbsurdLearningRateFlagsDivergence) {
  const Graph g = sbm_generate({8, 8}, 0.5, 0.1, 303);
  const Matrix x = Matrix::Identity(16, 16);
  TrainConfig cfg = small_train_config(3);
  cfg.steps = 50;
  cfg.dim = 4;
  cfg.lr = 1e12;
  const TrainResult res = train(g, x, cfg);
  EXPECT_TRUE(res.diverged);
  EXPECT_FALSE(res.loss_trace.empty());
}

TEST(EncoderForward, RejectsNonFiniteActivations) {
  EncoderParams params;
  params.kind = EncoderKind::kMlp;
  Matrix w = Matrix::Constant(2, 2, 1e308);
  params.layers.push_back({w, Vector::Zero(2)});
  Matrix x(1, 2);
  x << 1e308, 1e308;
  EXPECT_THROW(encoder_forward(params, nullptr, x), invalid_input);
}
