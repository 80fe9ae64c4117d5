#pragma once

#include "localgcl/common.hpp"
#include "localgcl/eval.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/nn.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace localgcl {

// On-disk dataset directory:
//   meta.json     {"num_nodes", "feature_dim", "num_classes", ...}
//   edges.csv     header "src,dst", one undirected edge per line (src < dst)
//   features.bin  row-major little-endian float32, |V| x feature_dim
//   labels.csv    one integer per line
//   split.json    optional {"train": [...], "val": [...], "test": [...]}
// Generators write the same layout, so datasets round-trip bit-exactly.

struct Dataset {
  Graph graph;
  std::optional<Split> split;
  nlohmann::json meta;
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  require(f.good(), "cannot write " + p.string());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  require(f.good(), "short write to " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  require(f.good(), "cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace detail

inline void save_dataset(const std::filesystem::path& dir, const Graph& g,
                         const std::optional<Split>& split = std::nullopt,
                         nlohmann::json extra_meta = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const Index f = g.features ? g.features->cols() : 0;
  nlohmann::json meta = std::move(extra_meta);
  meta["num_nodes"] = g.num_nodes;
  meta["feature_dim"] = f;
  meta["num_classes"] = g.num_classes;
  detail::write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::ostringstream edges;
  edges << "src,dst\n";
  for (Index i = 0; i < g.num_nodes; ++i)
    for (Index j : g.neighbors(i))
      if (i < j) edges << i << "," << j << "\n";
  detail::write_file(dir / "edges.csv", edges.str());

  if (f > 0) {
    std::string blob(static_cast<size_t>(g.num_nodes * f) * 4, '\0');
    float* out = reinterpret_cast<float*>(blob.data());
    for (Index i = 0; i < g.num_nodes; ++i)
      for (Index j = 0; j < f; ++j)
        out[i * f + j] = static_cast<float>((*g.features)(i, j));
    detail::write_file(dir / "features.bin", blob);
  }

  if (g.labels) {
    std::ostringstream lab;
    for (int l : *g.labels) lab << l << "\n";
    detail::write_file(dir / "labels.csv", lab.str());
  }

  if (split) {
    nlohmann::json js;
    js["train"] = split->train;
    js["val"] = split->val;
    js["test"] = split->test;
    detail::write_file(dir / "split.json", js.dump() + "\n");
  }
}

struct LoadReport {
  std::vector<Index> isolated;
  bool dropped_isolated = false;
};

/// Loads a dataset directory. Isolated nodes are reported; with
/// drop_isolated they are removed (indices remapped, split filtered),
/// otherwise they are left in place and downstream operators will reject
/// them where the math requires a neighbor.
inline Dataset load_dataset(const std::filesystem::path& dir,
                            bool drop_isolated = false,
                            LoadReport* report = nullptr) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.meta = nlohmann::json::parse(detail::read_file(dir / "meta.json"));
  const Index n = ds.meta.at("num_nodes").get<Index>();
  const Index f = ds.meta.at("feature_dim").get<Index>();
  const int c = ds.meta.at("num_classes").get<int>();
  require(n > 0, "load_dataset: num_nodes must be positive");

  EdgeList edges;
  {
    std::istringstream in(detail::read_file(dir / "edges.csv"));
    std::string line;
    require(static_cast<bool>(std::getline(in, line)),
            "load_dataset: empty edges.csv");
    require(line == "src,dst" || line == "src,dst\r",
            "load_dataset: edges.csv header must be 'src,dst'");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      require(comma != std::string::npos, "load_dataset: bad edge line");
      edges.emplace_back(std::stoll(line.substr(0, comma)),
                         std::stoll(line.substr(comma + 1)));
    }
  }

  std::optional<Matrix> features;
  if (f > 0) {
    const std::string blob = detail::read_file(dir / "features.bin");
    require(blob.size() == static_cast<size_t>(n * f) * 4,
            "load_dataset: features.bin size mismatch");
    const float* in = reinterpret_cast<const float*>(blob.data());
    features.emplace(n, f);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < f; ++j)
        (*features)(i, j) = static_cast<double>(in[i * f + j]);
  }

  std::optional<std::vector<int>> labels;
  if (fs::exists(dir / "labels.csv")) {
    labels.emplace();
    std::istringstream in(detail::read_file(dir / "labels.csv"));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) labels->push_back(std::stoi(line));
    require(static_cast<Index>(labels->size()) == n,
            "load_dataset: labels.csv row count mismatch");
  }

  ds.graph = build_graph(edges, n, std::move(features), std::move(labels), c);

  if (fs::exists(dir / "split.json")) {
    const auto js = nlohmann::json::parse(detail::read_file(dir / "split.json"));
    Split s;
    s.train = js.at("train").get<std::vector<Index>>();
    s.val = js.at("val").get<std::vector<Index>>();
    s.test = js.at("test").get<std::vector<Index>>();
    s.validate(n);
    ds.split = std::move(s);
  }

  const std::vector<Index> isolated = ds.graph.isolated_nodes();
  if (report) {
    report->isolated = isolated;
    report->dropped_isolated = drop_isolated && !isolated.empty();
  }
  if (drop_isolated && !isolated.empty()) {
    std::vector<Index> remap(static_cast<size_t>(n), -1);
    Index kept = 0;
    size_t cursor = 0;
    for (Index i = 0; i < n; ++i) {
      if (cursor < isolated.size() && isolated[cursor] == i) {
        ++cursor;
        continue;
      }
      remap[static_cast<size_t>(i)] = kept++;
    }
    EdgeList kept_edges;
    for (Index i = 0; i < n; ++i)
      for (Index j : ds.graph.neighbors(i))
        if (i < j) kept_edges.emplace_back(remap[static_cast<size_t>(i)],
                                           remap[static_cast<size_t>(j)]);
    std::optional<Matrix> feat;
    if (ds.graph.features) {
      feat.emplace(kept, ds.graph.features->cols());
      for (Index i = 0; i < n; ++i)
        if (remap[static_cast<size_t>(i)] >= 0)
          feat->row(remap[static_cast<size_t>(i)]) = ds.graph.features->row(i);
    }
    std::optional<std::vector<int>> lab;
    if (ds.graph.labels) {
      lab.emplace();
      for (Index i = 0; i < n; ++i)
        if (remap[static_cast<size_t>(i)] >= 0)
          lab->push_back((*ds.graph.labels)[static_cast<size_t>(i)]);
    }
    ds.graph = build_graph(kept_edges, kept, std::move(feat), std::move(lab),
                           ds.graph.num_classes);
    if (ds.split) {
      auto filter = [&](std::vector<Index>& part) {
        std::vector<Index> out;
        for (Index i : part)
          if (remap[static_cast<size_t>(i)] >= 0)
            out.push_back(remap[static_cast<size_t>(i)]);
        part = std::move(out);
      };
      filter(ds.split->train);
      filter(ds.split->val);
      filter(ds.split->test);
    }
  }
  return ds;
}

// Checkpoint file: 8-byte little-endian header length, JSON header with the
// layer shapes / config echo / seed, then all parameters as row-major
// little-endian float64 in layer order (weight then bias).

inline void save_checkpoint(const std::filesystem::path& path,
                            const EncoderParams& params,
                            const nlohmann::json& config_echo,
                            std::uint64_t seed) {
  nlohmann::json header;
  header["format"] = "localgcl-checkpoint-v1";
  header["encoder"] = params.kind == EncoderKind::kGcn ? "gcn" : "mlp";
  header["seed"] = seed;
  header["config"] = config_echo;
  auto shapes = nlohmann::json::array();
  for (const auto& l : params.layers)
    shapes.push_back({l.weight.rows(), l.weight.cols()});
  header["shapes"] = shapes;
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot write " + path.string());
  const std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  auto write_block = [&](const double* data, size_t count) {
    f.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * 8));
  };
  for (const auto& l : params.layers) {
    // Row-major on disk.
    for (Index i = 0; i < l.weight.rows(); ++i) {
      const Vector row = l.weight.row(i);
      write_block(row.data(), static_cast<size_t>(row.size()));
    }
    write_block(l.bias.data(), static_cast<size_t>(l.bias.size()));
  }
  require(f.good(), "short write to " + path.string());
}

struct Checkpoint {
  EncoderParams params;
  nlohmann::json header;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot read " + path.string());
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  require(f.good() && hlen < (1ULL << 30), "corrupt checkpoint header");
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  require(f.good(), "corrupt checkpoint header");

  Checkpoint ck;
  ck.header = nlohmann::json::parse(hs);
  ck.params.kind = ck.header.at("encoder").get<std::string>() == "gcn"
                       ? EncoderKind::kGcn
                       : EncoderKind::kMlp;
  for (const auto& shape : ck.header.at("shapes")) {
    const Index r = shape[0].get<Index>();
    const Index c = shape[1].get<Index>();
    Layer l;
    l.weight.resize(r, c);
    for (Index i = 0; i < r; ++i) {
      Vector row(c);
      f.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(c * 8));
      l.weight.row(i) = row;
    }
    l.bias.resize(c);
    f.read(reinterpret_cast<char*>(l.bias.data()),
           static_cast<std::streamsize>(c * 8));
    ck.params.layers.push_back(std::move(l));
  }
  require(f.good(), "truncated checkpoint blob");
  return ck;
}

/// Embeddings on disk: raw row-major little-endian float32.
inline void save_embeddings_f32(const std::filesystem::path& path,
                                const Matrix& z) {
  std::string blob(static_cast<size_t>(z.rows() * z.cols()) * 4, '\0');
  float* out = reinterpret_cast<float*>(blob.data());
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j)
      out[i * z.cols() + j] = static_cast<float>(z(i, j));
  detail::write_file(path, blob);
}

inline Matrix load_embeddings_f32(const std::filesystem::path& path,
                                  Index rows) {
  const std::string blob = detail::read_file(path);
  require(rows > 0 && blob.size() % (static_cast<size_t>(rows) * 4) == 0,
          "load_embeddings_f32: size not divisible by row count");
  const Index cols = static_cast<Index>(blob.size() / 4) / rows;
  const float* in = reinterpret_cast<const float*>(blob.data());
  Matrix z(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      z(i, j) = static_cast<double>(in[i * cols + j]);
  return z;
}

}  // namespace localgcl
