// Command-line surface: dataset generation/loading, training, probing,
// verification suites, scaling benchmarks. Every command emits one
// schema-versioned JSON record on stdout (and to --out when given) and uses
// exit codes 0 = success, 1 = check failure, 2 = usage error.

#include "localgcl/localgcl.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/resource.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace localgcl;

namespace {

constexpr int kSchemaVersion = 1;

double now_sec() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

long peak_memory_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss * 1024L;  // ru_maxrss is in KiB on Linux
}

json metrics_skeleton(const std::string& command) {
  json m;
  m["schema_version"] = kSchemaVersion;
  m["command"] = command;
  return m;
}

void emit(const json& metrics, const std::string& out_path) {
  const std::string text = metrics.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f.good()) throw invalid_input("cannot write " + out_path);
    f << text;
  }
}

std::vector<Index> parse_index_list(const std::string& csv) {
  std::vector<Index> out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    const size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!tok.empty()) out.push_back(std::stoll(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  require(!out.empty(), "expected a comma-separated list of integers");
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    const size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  require(!out.empty(), "expected a comma-separated list of numbers");
  return out;
}

EncoderKind parse_encoder(const std::string& s) {
  if (s == "gcn") return EncoderKind::kGcn;
  if (s == "mlp") return EncoderKind::kMlp;
  throw invalid_input("encoder must be gcn or mlp");
}

NegativeMode parse_negatives(const std::string& s) {
  if (s == "exact") return NegativeMode::kExact;
  if (s == "approx") return NegativeMode::kApprox;
  if (s == "exclude") return NegativeMode::kExcludeNeighbors;
  throw invalid_input("negatives must be exact, approx or exclude");
}

PositiveVariant parse_positive(const std::string& s) {
  if (s == "mean") return PositiveVariant::kMean;
  if (s == "max") return PositiveVariant::kMax;
  if (s == "weight") return PositiveVariant::kWeight;
  throw invalid_input("positive must be mean, max or weight");
}

ApproxKind parse_approx(const std::string& s) {
  if (s == "sorf") return ApproxKind::kSorf;
  if (s == "rff") return ApproxKind::kRff;
  throw invalid_input("approx must be sorf or rff");
}

Dataset load_dataset_checked(const std::string& dir, bool drop_isolated,
                             json* info) {
  require(fs::exists(fs::path(dir) / "meta.json"),
          "dataset not found at " + dir);
  LoadReport report;
  Dataset ds = load_dataset(dir, drop_isolated, &report);
  if (info) {
    (*info)["num_nodes"] = ds.graph.num_nodes;
    (*info)["num_edges"] = ds.graph.num_directed_edges() / 2;
    (*info)["feature_dim"] =
        ds.graph.features ? ds.graph.features->cols() : 0;
    (*info)["num_classes"] = ds.graph.num_classes;
    (*info)["isolated_nodes"] = report.isolated.size();
    (*info)["dropped_isolated"] = report.dropped_isolated;
  }
  if (!report.isolated.empty() && !drop_isolated) {
    std::cerr << "note: dataset has " << report.isolated.size()
              << " isolated node(s); pass --drop-isolated to remove them\n";
  }
  return ds;
}

// ---------------------------------------------------------------------------
// gen-sbm
// ---------------------------------------------------------------------------

struct GenSbmArgs {
  std::string blocks;
  double p_in = 0.1;
  double p_out = 0.01;
  std::uint64_t seed = 0;
  std::string features = "identity";
  Index feat_dim = 0;
  std::string split;
  std::string out;
};

int run_gen_sbm(const GenSbmArgs& args) {
  const double t0 = now_sec();
  const std::vector<Index> blocks = parse_index_list(args.blocks);
  Graph g = sbm_generate(blocks, args.p_in, args.p_out, args.seed);

  if (args.features == "identity") {
    g.features = Matrix::Identity(g.num_nodes, g.num_nodes);
  } else if (args.features == "gaussian") {
    const Index f = args.feat_dim > 0 ? args.feat_dim : 128;
    Rng rng(derive_seed(args.seed, 0xf0));
    Matrix x(g.num_nodes, f);
    for (Index i = 0; i < g.num_nodes; ++i)
      for (Index j = 0; j < f; ++j) x(i, j) = rng.gaussian();
    g.features = x;
  } else if (args.features != "none") {
    throw invalid_input("features must be identity, gaussian or none");
  }

  std::optional<Split> split;
  if (!args.split.empty()) {
    const std::vector<double> fracs = parse_double_list(args.split);
    require(fracs.size() == 3, "--split needs train,val,test fractions");
    require(fracs[0] > 0 && fracs[1] >= 0 && fracs[2] > 0 &&
                fracs[0] + fracs[1] + fracs[2] <= 1.0 + 1e-9,
            "--split fractions must be positive and sum to at most 1");
    std::vector<Index> order(static_cast<size_t>(g.num_nodes));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(args.seed, 0x511));
    for (Index i = g.num_nodes - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[rng.below(static_cast<std::uint64_t>(i + 1))]);
    const Index n_train = static_cast<Index>(fracs[0] * g.num_nodes);
    const Index n_val = static_cast<Index>(fracs[1] * g.num_nodes);
    Split s;
    for (Index i = 0; i < g.num_nodes; ++i) {
      if (i < n_train)
        s.train.push_back(order[static_cast<size_t>(i)]);
      else if (i < n_train + n_val)
        s.val.push_back(order[static_cast<size_t>(i)]);
      else
        s.test.push_back(order[static_cast<size_t>(i)]);
    }
    split = std::move(s);
  }

  json extra;
  extra["homophily"] = homophily_ratio(g);
  extra["generator"] = {{"kind", "sbm"},
                        {"blocks", blocks},
                        {"p_in", args.p_in},
                        {"p_out", args.p_out},
                        {"seed", args.seed}};
  save_dataset(args.out, g, split, extra);

  json m = metrics_skeleton("gen-sbm");
  m["config"] = {{"blocks", blocks},     {"p_in", args.p_in},
                 {"p_out", args.p_out},  {"seed", args.seed},
                 {"features", args.features}, {"out", args.out}};
  m["num_nodes"] = g.num_nodes;
  m["num_edges"] = g.num_directed_edges() / 2;
  m["homophily"] = extra["homophily"];
  m["timings_sec"] = {{"total", now_sec() - t0}};
  m["peak_memory_bytes"] = peak_memory_bytes();
  emit(m, "");
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  bool drop_isolated = false;
  TrainConfig cfg;
  std::string encoder = "gcn";
  std::string negatives = "exact";
  std::string positive = "mean";
  std::string approx = "sorf";
  std::string out;
};

int run_train(const TrainArgs& args) {
  const double t0 = now_sec();
  TrainConfig cfg = args.cfg;
  cfg.encoder = parse_encoder(args.encoder);
  cfg.negatives = parse_negatives(args.negatives);
  cfg.positive = parse_positive(args.positive);
  cfg.approx = parse_approx(args.approx);
  cfg.validate();

  json m = metrics_skeleton("train");
  json dataset_info;
  const Dataset ds =
      load_dataset_checked(args.dataset, args.drop_isolated, &dataset_info);
  m["dataset"] = dataset_info;
  require(ds.graph.features.has_value() && ds.graph.features->cols() > 0,
          "train: dataset has no features");
  const std::vector<Index> isolated = ds.graph.isolated_nodes();
  require(isolated.empty(),
          "train: dataset has isolated nodes (node " +
              (isolated.empty() ? std::string("?")
                                : std::to_string(isolated.front())) +
              "); rerun with --drop-isolated");
  const double t_loaded = now_sec();

  const TrainResult res = train(ds.graph, *ds.graph.features, cfg);
  const double t_trained = now_sec();

  json config_echo = {{"steps", cfg.steps},
                      {"layers", cfg.layers},
                      {"lr", cfg.lr},
                      {"wd", cfg.weight_decay},
                      {"dim", cfg.dim},
                      {"proj_dim", cfg.proj_dim},
                      {"tau", cfg.tau},
                      {"encoder", args.encoder},
                      {"negatives", args.negatives},
                      {"positive", args.positive},
                      {"approx", args.approx},
                      {"seed", cfg.seed},
                      {"strict", cfg.strict},
                      {"dataset", args.dataset}};
  m["config"] = config_echo;
  m["loss_trace"] = res.loss_trace;
  m["diverged"] = res.diverged;
  m["clamp_events"] = res.clamp_events;

  if (!res.diverged) {
    fs::create_directories(args.out);
    const fs::path ckpt = fs::path(args.out) / "checkpoint.bin";
    const fs::path emb = fs::path(args.out) / "embeddings.f32";
    save_checkpoint(ckpt, res.params, config_echo, cfg.seed);
    save_embeddings_f32(emb, res.embeddings);
    m["outputs"] = {{"checkpoint", ckpt.string()},
                    {"embeddings", emb.string()},
                    {"embedding_dim", res.embeddings.cols()}};
  }
  m["timings_sec"] = {{"load", t_loaded - t0},
                      {"train", t_trained - t_loaded},
                      {"total", now_sec() - t0}};
  m["peak_memory_bytes"] = peak_memory_bytes();
  emit(m, args.out.empty() || res.diverged
              ? ""
              : (fs::path(args.out) / "metrics.json").string());
  return res.diverged ? 1 : 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string embeddings;
  std::string dataset;
  ProbeConfig cfg;
  std::string out;
};

int run_probe(const ProbeArgs& args) {
  const double t0 = now_sec();
  json m = metrics_skeleton("probe");
  json dataset_info;
  const Dataset ds = load_dataset_checked(args.dataset, false, &dataset_info);
  m["dataset"] = dataset_info;
  require(ds.graph.labels.has_value(), "probe: dataset has no labels");
  require(ds.split.has_value(), "probe: dataset has no split.json");
  const Matrix z = load_embeddings_f32(args.embeddings, ds.graph.num_nodes);

  const ProbeResult res = linear_probe(z, *ds.graph.labels, *ds.split, args.cfg);
  m["config"] = {{"embeddings", args.embeddings},
                 {"dataset", args.dataset},
                 {"lr", args.cfg.lr},
                 {"wd", args.cfg.weight_decay},
                 {"epochs", args.cfg.epochs},
                 {"seed", args.cfg.seed}};
  m["probe"] = {{"train_accuracy", res.train_accuracy},
                {"val_accuracy", res.val_accuracy},
                {"test_accuracy", res.test_accuracy},
                {"epochs_run", res.epochs_run},
                {"embedding_dim", z.cols()}};
  m["timings_sec"] = {{"total", now_sec() - t0}};
  m["peak_memory_bytes"] = peak_memory_bytes();
  emit(m, args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "all";
  std::uint64_t seed = 0;
  bool fast = false;
  std::string out;
};

Matrix dense_hadamard(Index n) {
  Matrix h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < n) {
    const Index m = h.rows();
    Matrix next(2 * m, 2 * m);
    next.topLeftCorner(m, m) = h;
    next.topRightCorner(m, m) = h;
    next.bottomLeftCorner(m, m) = h;
    next.bottomRightCorner(m, m) = -h;
    h = next;
  }
  return h;
}

Graph cli_random_graph(Index n, double p, std::uint64_t seed) {
  Rng rng(seed);
  EdgeList edges;
  for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return build_graph(edges, n);
}

void add_check(json& checks, bool& all_pass, const std::string& name,
               bool pass, json detail) {
  detail["pass"] = pass;
  checks[name] = std::move(detail);
  all_pass = all_pass && pass;
}

void verify_kernel(json& checks, bool& all_pass, std::uint64_t seed,
                   bool fast) {
  // Unbiasedness of the random-feature kernel estimate.
  {
    bool pass = true;
    json detail;
    for (double tau : {0.5, 1.0}) {
      const UnbiasednessReport rep = check_rff_unbiasedness(
          tau, 1024, fast ? 10 : 20, fast ? 100 : 200, derive_seed(seed, 1));
      pass = pass && rep.pass;
      detail["tau_" + std::to_string(tau)] = {
          {"max_abs_z", rep.max_abs_z},
          {"threshold", 3.0},
          {"mean_abs_error", rep.mean_abs_error}};
    }
    add_check(checks, all_pass, "rff-unbiasedness", pass, detail);
  }
  // Closed-form estimator variance.
  {
    bool pass = true;
    json detail;
    for (double z : {0.5, 1.0, 1.5}) {
      for (Index D : {Index{256}, Index{1024}}) {
        const VarianceReport rep = check_rff_variance(
            z, D, fast ? 4000 : 20000, derive_seed(seed, 2));
        pass = pass && rep.pass;
        detail["z" + std::to_string(z) + "_D" + std::to_string(D)] = {
            {"empirical", rep.empirical_variance},
            {"predicted", rep.predicted_variance},
            {"rel_error", rep.rel_error},
            {"rel_tol", 0.15}};
      }
    }
    add_check(checks, all_pass, "rff-variance-formula", pass, detail);
  }
  // Chebyshev tail bound on the approximation error.
  {
    bool pass = true;
    json detail;
    for (double tau : {0.5, 1.0}) {
      for (Index D : {Index{256}, Index{1024}, Index{4096}}) {
        for (double eps : {0.05, 0.1}) {
          const TailBoundReport rep = check_kernel_tail_bound(
              tau, D, eps, fast ? 1000 : 10000, derive_seed(seed, 3));
          pass = pass && rep.pass;
          detail["tau" + std::to_string(tau) + "_D" + std::to_string(D) +
                 "_eps" + std::to_string(eps)] = {
              {"bound", rep.bound},
              {"violation_rate", rep.violation_rate},
              {"epsilon", eps},
              {"mean_abs_error", rep.mean_abs_error}};
        }
      }
    }
    add_check(checks, all_pass, "kernel-tail-bound", pass, detail);
  }
  // Structured map: scaled orthogonality and dense-oracle agreement.
  {
    bool pass = true;
    double worst_orth = 0.0, worst_proj = 0.0;
    Rng rng(derive_seed(seed, 4));
    for (Index dp = 4; dp <= 256; dp *= 2) {
      const double tau = 0.7;
      const SorfMap map(dp, dp, tau, derive_seed(seed, 5 + dp));
      const Matrix hn =
          dense_hadamard(dp) / std::sqrt(static_cast<double>(dp));
      const auto& s = map.block_signs(0);
      const Matrix w = (std::sqrt(static_cast<double>(dp)) / std::sqrt(tau)) *
                       hn * s[0].asDiagonal() * hn * s[1].asDiagonal() * hn *
                       s[2].asDiagonal();
      const double orth =
          (w * w.transpose() -
           (dp / tau) * Matrix::Identity(dp, dp))
              .cwiseAbs()
              .maxCoeff();
      worst_orth = std::max(worst_orth, orth);
      const Vector x = rng.gaussian_vector(dp);
      const double proj =
          (map.project_pre(x) - w * x).cwiseAbs().maxCoeff();
      worst_proj = std::max(worst_proj, proj);
      pass = pass && orth <= 1e-9 && proj <= 1e-10;
    }
    add_check(checks, all_pass, "sorf-structure", pass,
              {{"worst_orthogonality_error", worst_orth},
               {"orthogonality_tol", 1e-9},
               {"worst_projection_error", worst_proj},
               {"projection_tol", 1e-10}});
  }
  // Fast transform against the dense matrix.
  {
    bool pass = true;
    double worst = 0.0;
    Rng rng(derive_seed(seed, 6));
    for (Index n = 2; n <= 256; n *= 2) {
      const Matrix h = dense_hadamard(n);
      const Vector v = rng.gaussian_vector(n);
      const double err = (fwht(v, false) - h * v).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
      pass = pass && err <= 1e-12;
    }
    add_check(checks, all_pass, "fwht-dense-equivalence", pass,
              {{"worst_error", worst}, {"tol", 1e-12}});
  }
}

void verify_spectral(json& checks, bool& all_pass, std::uint64_t seed) {
  // Linear classification error bound on assortative SBM instances.
  {
    bool pass = true;
    json detail;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Graph g = sbm_generate({50, 50}, 0.2, 0.02, derive_seed(seed, s));
      const BoundReport rep = check_classification_error_bound(g, *g.labels, 8);
      pass = pass && rep.holds;
      detail["seed_" + std::to_string(s)] = {{"mse", rep.mse_lhs},
                                             {"bound", rep.bound_rhs},
                                             {"phi", rep.phi},
                                             {"lambda_d_plus_1",
                                              rep.lambda_d_plus_1}};
    }
    add_check(checks, all_pass, "classification-error-bound", pass, detail);
  }
  // Exact recovery when homophily is perfect.
  {
    EdgeList edges;
    std::vector<int> labels;
    for (Index c = 0; c < 3; ++c)
      for (Index i = 0; i < 5; ++i) {
        labels.push_back(static_cast<int>(c));
        for (Index j = i + 1; j < 5; ++j)
          edges.emplace_back(c * 5 + i, c * 5 + j);
      }
    const Graph g = build_graph(edges, 15, std::nullopt, labels, 3);
    const BoundReport rep = check_classification_error_bound(g, labels, 3);
    add_check(checks, all_pass, "error-bound-exact-on-cliques",
              rep.holds && rep.bound_rhs <= 1e-12 && rep.mse_lhs <= 1e-9,
              {{"mse", rep.mse_lhs}, {"bound", rep.bound_rhs}});
  }
  // Eckart-Young optimality of the spectral factor.
  {
    bool pass = true;
    Rng rng(derive_seed(seed, 20));
    for (std::uint64_t s = 0; s < 20 && pass; ++s) {
      const Graph g =
          sbm_generate({12, 12}, 0.5, 0.1, derive_seed(seed, 21 + s));
      const Matrix a = normalized_adjacency(g);
      const Index d = 2 + static_cast<Index>(s % 3);
      const double best = mf_loss(a, spectral_embeddings(g, d));
      for (int rep = 0; rep < 100; ++rep) {
        Matrix f(g.num_nodes, d);
        for (Index i = 0; i < g.num_nodes; ++i)
          for (Index j = 0; j < d; ++j) f(i, j) = 0.4 * rng.gaussian();
        if (best > mf_loss(a, f)) {
          pass = false;
          break;
        }
      }
    }
    add_check(checks, all_pass, "eckart-young-optimality", pass,
              {{"graphs", 20}, {"random_factors_each", 100}});
  }
  // Rayleigh quotient of a class indicator against edge counting: on a
  // regular graph R = 1 - phi_c with phi_c the ordered-endpoint same-class
  // fraction; the halved constant corresponds to running the quadratic-form
  // edge sum over ordered pairs.
  {
    const EdgeList edges = {{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3},
                            {4, 6}, {4, 7}, {5, 6}, {5, 7}, {6, 7},
                            {0, 4}, {1, 5}};
    const Graph g = build_graph(edges, 8);
    const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
    const Matrix l = normalized_laplacian(g);
    Vector u(8);
    for (Index i = 0; i < 8; ++i) u[i] = labels[i] == 0 ? 1.0 : 0.0;
    const double r = rayleigh_quotient(l, u);
    Index from_c = 0, stay_c = 0;
    for (Index i = 0; i < 8; ++i) {
      if (labels[i] != 0) continue;
      for (Index j : g.neighbors(i)) {
        ++from_c;
        if (labels[j] == 0) ++stay_c;
      }
    }
    const double phi_c = static_cast<double>(stay_c) / from_c;
    const bool pass = std::abs(r - (1.0 - phi_c)) <= 1e-12;
    add_check(checks, all_pass, "rayleigh-homophily-relation", pass,
              {{"rayleigh", r},
               {"one_minus_phi_class", 1.0 - phi_c},
               {"convention", "ordered-endpoint"}});
  }
  // Weak spectral-optimum check on the contrastive objective itself.
  {
    const Graph g = sbm_generate({10, 10}, 0.6, 0.1, derive_seed(seed, 50));
    Matrix zstar = spectral_embeddings(g, 2);
    for (Index i = 0; i < zstar.rows(); ++i)
      zstar.row(i) /= zstar.row(i).norm();
    LossConfig cfg;
    cfg.tau = 0.5;
    const double base = local_gcl_loss({zstar, true}, g, cfg).total;
    bool pass = true;
    double best_random = std::numeric_limits<double>::infinity();
    Rng rng(derive_seed(seed, 51));
    for (int rep = 0; rep < 50; ++rep) {
      Matrix r(20, 2);
      for (Index i = 0; i < 20; ++i) r.row(i) = rng.unit_vector(2);
      const double val = local_gcl_loss({r, true}, g, cfg).total;
      best_random = std::min(best_random, val);
      pass = pass && base < val;
    }
    add_check(checks, all_pass, "spectral-optimum-weak", pass,
              {{"spectral_loss", base}, {"best_random_loss", best_random}});
  }
}

void verify_gradient(json& checks, bool& all_pass, std::uint64_t seed) {
  const Graph g = cli_random_graph(10, 0.3, derive_seed(seed, 60));
  Rng rng(derive_seed(seed, 61));
  Matrix e(10, 4);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 4; ++j) e(i, j) = rng.gaussian();
  const RffMap rff(4, 256, 0.7, derive_seed(seed, 62));
  const SorfMap sorf(4, 256, 0.7, derive_seed(seed, 63));

  auto loss_total = [&](const Matrix& pre, const LossConfig& cfg,
                        int which_map) {
    Matrix z(pre.rows(), pre.cols());
    for (Index i = 0; i < pre.rows(); ++i)
      z.row(i) = pre.row(i) / pre.row(i).norm();
    if (which_map == 1) return local_gcl_loss({z, true}, g, &rff, cfg).total;
    if (which_map == 2) return local_gcl_loss({z, true}, g, &sorf, cfg).total;
    return local_gcl_loss({z, true}, g, cfg).total;
  };
  auto fd_check = [&](const LossConfig& cfg, int which_map) {
    Matrix analytic;
    if (which_map == 1)
      analytic = loss_gradient(e, g, &rff, cfg);
    else if (which_map == 2)
      analytic = loss_gradient(e, g, &sorf, cfg);
    else
      analytic = loss_gradient(e, g, cfg);
    Matrix fd(e.rows(), e.cols());
    Matrix probe = e;
    const double h = 1e-5;
    for (Index i = 0; i < e.rows(); ++i)
      for (Index j = 0; j < e.cols(); ++j) {
        const double saved = probe(i, j);
        probe(i, j) = saved + h;
        const double up = loss_total(probe, cfg, which_map);
        probe(i, j) = saved - h;
        const double down = loss_total(probe, cfg, which_map);
        probe(i, j) = saved;
        fd(i, j) = (up - down) / (2.0 * h);
      }
    return (analytic - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff();
  };

  {
    bool pass = true;
    json detail;
    for (PositiveVariant pv :
         {PositiveVariant::kMean, PositiveVariant::kMax,
          PositiveVariant::kWeight}) {
      for (NegativeMode nm :
           {NegativeMode::kExact, NegativeMode::kExcludeNeighbors,
            NegativeMode::kApprox}) {
        LossConfig cfg;
        cfg.tau = 0.7;
        cfg.variant = pv;
        cfg.negatives = nm;
        const std::string key = "pos" + std::to_string(int(pv)) + "_neg" +
                                std::to_string(int(nm));
        if (nm == NegativeMode::kApprox) {
          const double r1 = fd_check(cfg, 1);
          const double r2 = fd_check(cfg, 2);
          detail[key] = {{"rel_error_rff", r1}, {"rel_error_sorf", r2}};
          pass = pass && r1 < 1e-4 && r2 < 1e-4;
        } else {
          const double r = fd_check(cfg, 0);
          detail[key] = {{"rel_error", r}};
          pass = pass && r < 1e-4;
        }
      }
    }
    add_check(checks, all_pass, "loss-gradient-fd", pass, detail);
  }
  {
    // Encoder parameter gradients, both kinds, 1 and 2 layers.
    bool pass = true;
    json detail;
    const Matrix x = [&] {
      Rng r2(derive_seed(seed, 64));
      Matrix x0(10, 5);
      for (Index i = 0; i < 10; ++i)
        for (Index j = 0; j < 5; ++j) x0(i, j) = r2.gaussian();
      return x0;
    }();
    const Matrix prop = gcn_propagation_matrix(g);
    LossConfig cfg;
    cfg.tau = 0.6;
    for (EncoderKind kind : {EncoderKind::kGcn, EncoderKind::kMlp}) {
      for (Index layers : {Index{1}, Index{2}}) {
        EncoderParams params =
            init_encoder(kind, 5, 3, layers, derive_seed(seed, 65));
        params.kind = kind;
        // Narrow toy layers: keep every ReLU row alive.
        for (auto& layer : params.layers) layer.bias.array() += 0.1;
        const Matrix* pp = kind == EncoderKind::kGcn ? &prop : nullptr;
        const ForwardCache cache = encoder_forward(params, pp, x);
        const LossValue loss =
            loss_with_gradient<RffMap>(cache.pre_norm, g, nullptr, cfg);
        const EncoderGrads grads =
            encoder_backward(params, pp, cache, *loss.gradient);
        auto loss_of = [&](const EncoderParams& p) {
          const ForwardCache c = encoder_forward(p, pp, x);
          Matrix z(10, 3);
          for (Index i = 0; i < 10; ++i)
            z.row(i) = c.pre_norm.row(i) / c.pre_norm.row(i).norm();
          return local_gcl_loss({z, true}, g, cfg).total;
        };
        double worst = 0.0;
        const double h = 1e-5;
        for (size_t k = 0; k < params.layers.size(); ++k) {
          Matrix fd(params.layers[k].weight.rows(),
                    params.layers[k].weight.cols());
          for (Index i = 0; i < fd.rows(); ++i)
            for (Index j = 0; j < fd.cols(); ++j) {
              EncoderParams p = params;
              p.layers[k].weight(i, j) += h;
              const double up = loss_of(p);
              p.layers[k].weight(i, j) -= 2 * h;
              const double down = loss_of(p);
              fd(i, j) = (up - down) / (2 * h);
            }
          worst = std::max(worst, (grads.d_weight[k] - fd).cwiseAbs().maxCoeff() /
                                      fd.cwiseAbs().maxCoeff());
        }
        const std::string key =
            std::string(kind == EncoderKind::kGcn ? "gcn" : "mlp") + "_l" +
            std::to_string(layers);
        detail[key] = {{"rel_error", worst}};
        pass = pass && worst < 1e-4;
      }
    }
    add_check(checks, all_pass, "encoder-gradient-fd", pass, detail);
  }
}

int run_verify(const VerifyArgs& args) {
  const double t0 = now_sec();
  json m = metrics_skeleton("verify");
  m["config"] = {{"suite", args.suite},
                 {"seed", args.seed},
                 {"fast", args.fast}};
  json checks;
  bool all_pass = true;
  if (args.suite == "kernel" || args.suite == "all")
    verify_kernel(checks, all_pass, args.seed, args.fast);
  if (args.suite == "spectral" || args.suite == "all")
    verify_spectral(checks, all_pass, args.seed);
  if (args.suite == "gradient" || args.suite == "all")
    verify_gradient(checks, all_pass, args.seed);
  if (checks.empty())
    throw invalid_input("suite must be kernel, spectral, gradient or all");
  m["verification"] = checks;
  m["all_pass"] = all_pass;
  m["timings_sec"] = {{"total", now_sec() - t0}};
  m["peak_memory_bytes"] = peak_memory_bytes();
  emit(m, args.out);
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string sizes = "1000,2000,4000,8000";
  Index dim = 64;
  Index proj_dim = 2048;
  double tau = 0.5;
  std::uint64_t seed = 0;
  int reps = 5;
  std::string out;
};

int run_bench(const BenchArgs& args) {
  const double t0 = now_sec();
  const std::vector<Index> sizes = parse_index_list(args.sizes);
  const BenchResult res =
      run_scaling_bench(sizes, args.dim, args.proj_dim, args.tau, args.seed,
                        args.reps);
  json m = metrics_skeleton("bench");
  m["config"] = {{"sizes", sizes},   {"dim", args.dim},
                 {"proj_dim", args.proj_dim}, {"tau", args.tau},
                 {"seed", args.seed}, {"reps", args.reps}};
  json points = json::array();
  for (const auto& p : res.points)
    points.push_back({{"size", p.size},
                      {"exact_sec", p.exact_sec},
                      {"approx_sec", p.approx_sec}});
  m["points"] = points;
  m["exact_slope"] =
      res.exact_slope ? json(*res.exact_slope) : json(nullptr);
  m["approx_slope"] =
      res.approx_slope ? json(*res.approx_slope) : json(nullptr);
  m["timings_sec"] = {{"total", now_sec() - t0}};
  m["peak_memory_bytes"] = peak_memory_bytes();
  emit(m, args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// homophily
// ---------------------------------------------------------------------------

int run_homophily(const std::string& dataset, const std::string& out) {
  json m = metrics_skeleton("homophily");
  json dataset_info;
  const Dataset ds = load_dataset_checked(dataset, false, &dataset_info);
  require(ds.graph.labels.has_value(), "homophily: dataset has no labels");
  m["dataset"] = dataset_info;
  m["homophily"] = homophily_ratio(ds.graph);
  emit(m, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local-GCL: augmentation-free graph contrastive learning with "
               "linear-time kernelized negatives"};
  app.require_subcommand(1);

  if (const char* threads = std::getenv("LOCALGCL_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  GenSbmArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-sbm", "generate an SBM dataset");
  cmd_gen->add_option("--blocks", gen.blocks, "comma-separated block sizes")
      ->required();
  cmd_gen->add_option("--p-in", gen.p_in, "within-block edge probability")
      ->required();
  cmd_gen->add_option("--p-out", gen.p_out, "cross-block edge probability")
      ->required();
  cmd_gen->add_option("--seed", gen.seed, "generator seed");
  cmd_gen->add_option("--features", gen.features,
                      "feature scheme: identity, gaussian or none");
  cmd_gen->add_option("--feat-dim", gen.feat_dim,
                      "feature dimension for gaussian features");
  cmd_gen->add_option("--split", gen.split,
                      "train,val,test fractions, e.g. 0.1,0.1,0.8");
  cmd_gen->add_option("--out", gen.out, "output dataset directory")
      ->required();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "self-supervised training");
  cmd_train->add_option("--dataset", tr.dataset, "dataset directory")
      ->required();
  cmd_train->add_flag("--drop-isolated", tr.drop_isolated,
                      "drop isolated nodes at load time");
  cmd_train->add_option("--steps", tr.cfg.steps, "optimizer steps");
  cmd_train->add_option("--layers", tr.cfg.layers, "encoder layers (1-3)");
  cmd_train->add_option("--lr", tr.cfg.lr, "learning rate");
  cmd_train->add_option("--wd", tr.cfg.weight_decay, "weight decay");
  cmd_train->add_option("--dim", tr.cfg.dim, "embedding dimension");
  cmd_train->add_option("--proj-dim", tr.cfg.proj_dim,
                        "random-feature count for approx negatives");
  cmd_train->add_option("--tau", tr.cfg.tau, "temperature");
  cmd_train->add_option("--encoder", tr.encoder, "gcn or mlp");
  cmd_train->add_option("--negatives", tr.negatives,
                        "exact, approx or exclude");
  cmd_train->add_option("--positive", tr.positive, "mean, max or weight");
  cmd_train->add_option("--approx", tr.approx, "sorf or rff");
  cmd_train->add_option("--seed", tr.cfg.seed, "training seed");
  cmd_train->add_flag("--strict", tr.cfg.strict,
                      "deterministic single-thread reductions");
  cmd_train->add_option("--out", tr.out, "output directory")->required();

  ProbeArgs pr;
  auto* cmd_probe = app.add_subcommand("probe", "linear evaluation");
  cmd_probe->add_option("--embeddings", pr.embeddings, "embeddings.f32 file")
      ->required();
  cmd_probe->add_option("--dataset", pr.dataset, "dataset directory")
      ->required();
  cmd_probe->add_option("--lr", pr.cfg.lr, "probe learning rate");
  cmd_probe->add_option("--wd", pr.cfg.weight_decay, "probe weight decay");
  cmd_probe->add_option("--epochs", pr.cfg.epochs, "probe epochs");
  cmd_probe->add_option("--seed", pr.cfg.seed, "probe seed");
  cmd_probe->add_option("--out", pr.out, "metrics output file");

  VerifyArgs vf;
  auto* cmd_verify =
      app.add_subcommand("verify", "run statistical/spectral/gradient checks");
  cmd_verify->add_option("--suite", vf.suite,
                         "kernel, spectral, gradient or all");
  cmd_verify->add_option("--seed", vf.seed, "suite seed");
  cmd_verify->add_flag("--fast", vf.fast, "reduced trial counts");
  cmd_verify->add_option("--out", vf.out, "metrics output file");

  BenchArgs bn;
  auto* cmd_bench =
      app.add_subcommand("bench", "time exact vs approx negative loss");
  cmd_bench->add_option("--sizes", bn.sizes, "comma-separated node counts");
  cmd_bench->add_option("--dim", bn.dim, "embedding dimension");
  cmd_bench->add_option("--proj-dim", bn.proj_dim, "random-feature count");
  cmd_bench->add_option("--tau", bn.tau, "temperature");
  cmd_bench->add_option("--seed", bn.seed, "bench seed");
  cmd_bench->add_option("--reps", bn.reps, "timed repetitions per size");
  cmd_bench->add_option("--out", bn.out, "metrics output file");

  std::string homophily_dataset, homophily_out;
  auto* cmd_hom =
      app.add_subcommand("homophily", "report the dataset homophily ratio");
  cmd_hom->add_option("--dataset", homophily_dataset, "dataset directory")
      ->required();
  cmd_hom->add_option("--out", homophily_out, "metrics output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (tr.cfg.strict) Eigen::setNbThreads(1);
    if (cmd_gen->parsed()) return run_gen_sbm(gen);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_probe->parsed()) return run_probe(pr);
    if (cmd_verify->parsed()) return run_verify(vf);
    if (cmd_bench->parsed()) return run_bench(bn);
    if (cmd_hom->parsed()) return run_homophily(homophily_dataset, homophily_out);
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
