#include "gnas/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "gnas/errors.hpp"
#include "gnas/rng.hpp"

namespace gnas {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& tok, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw ParseError("");
    return v;
  } catch (...) {
    throw ParseError(where + ": not a number: '" + tok + "'");
  }
}

// Canonicalizes (a, b) pairs to undirected src < dst edges, dropping
// self-loops and duplicates into `stats`.
std::vector<std::pair<int, int>> canonicalize_edges(
    std::vector<std::pair<int, int>> raw, LoadStats* stats) {
  std::vector<std::pair<int, int>> out;
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : raw) {
    if (a == b) {
      if (stats) ++stats->self_citations;
      continue;
    }
    auto e = std::minmax(a, b);
    if (!seen.insert({e.first, e.second}).second) {
      if (stats) ++stats->duplicate_edges;
      continue;
    }
    out.push_back({e.first, e.second});
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Maps label strings to class ids in sorted order so class numbering does not
// depend on row order.
Eigen::VectorXi assign_labels(const std::vector<std::string>& raw, int* num_classes) {
  std::set<std::string> uniq(raw.begin(), raw.end());
  std::map<std::string, int> id;
  int next = 0;
  for (const auto& s : uniq) id[s] = next++;
  Eigen::VectorXi labels(static_cast<int>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) labels[static_cast<int>(i)] = id[raw[i]];
  *num_classes = next;
  return labels;
}

}  // namespace

Graph load_cora_raw(const std::string& content_path, const std::string& cites_path,
                    LoadStats* stats) {
  std::ifstream content(content_path);
  if (!content) throw IoError("cannot open " + content_path);

  std::map<std::string, int> index_of;
  std::vector<std::vector<double>> feats;
  std::vector<std::string> label_strings;
  std::string line;
  int line_no = 0;
  int width = -1;
  while (std::getline(content, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 3)
      throw ParseError(content_path + ":" + std::to_string(line_no) +
                       ": expected `id feat... label`");
    const int k = static_cast<int>(toks.size()) - 2;
    if (width < 0) width = k;
    if (k != width)
      throw FormatError(content_path + ":" + std::to_string(line_no) +
                        ": inconsistent feature width (" + std::to_string(k) +
                        " vs " + std::to_string(width) + ")");
    if (index_of.count(toks.front()))
      throw FormatError(content_path + ":" + std::to_string(line_no) +
                        ": duplicate node id " + toks.front());
    index_of[toks.front()] = static_cast<int>(feats.size());
    std::vector<double> row(width);
    for (int j = 0; j < width; ++j)
      row[j] = parse_real(toks[j + 1], content_path + ":" + std::to_string(line_no));
    feats.push_back(std::move(row));
    label_strings.push_back(toks.back());
  }
  if (feats.empty()) throw FormatError(content_path + ": no node rows");

  Graph g;
  g.num_nodes = static_cast<int>(feats.size());
  g.features.resize(g.num_nodes, width);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < width; ++j) g.features(i, j) = feats[i][j];
  g.labels = assign_labels(label_strings, &g.num_classes);

  std::ifstream cites(cites_path);
  if (!cites) throw IoError("cannot open " + cites_path);
  std::vector<std::pair<int, int>> raw;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2)
      throw ParseError(cites_path + ":" + std::to_string(line_no) +
                       ": expected `cited citing`");
    auto a = index_of.find(toks[0]);
    auto b = index_of.find(toks[1]);
    if (a == index_of.end() || b == index_of.end()) {
      if (stats) ++stats->dangling_citations;
      continue;
    }
    raw.push_back({a->second, b->second});
  }
  g.edges = canonicalize_edges(std::move(raw), stats);
  g.num_edges = static_cast<int>(g.edges.size());
  validate_graph(g);
  return g;
}

Graph load_edgelist(const std::string& features_csv, const std::string& edges_csv,
                    const std::string& labels_csv, LoadStats* stats) {
  std::ifstream ff(features_csv);
  if (!ff) throw IoError("cannot open " + features_csv);
  std::string line;
  if (!std::getline(ff, line)) throw FormatError(features_csv + ": empty file");
  const int width = static_cast<int>(split_csv(line).size()) - 1;
  if (width <= 0) throw FormatError(features_csv + ": header needs id plus features");

  std::map<std::string, int> index_of;
  std::vector<std::vector<double>> feats;
  int line_no = 1;
  while (std::getline(ff, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto toks = split_csv(line);
    if (static_cast<int>(toks.size()) != width + 1)
      throw FormatError(features_csv + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(width + 1) + " columns");
    if (index_of.count(toks[0]))
      throw FormatError(features_csv + ":" + std::to_string(line_no) +
                        ": duplicate node id " + toks[0]);
    index_of[toks[0]] = static_cast<int>(feats.size());
    std::vector<double> row(width);
    for (int j = 0; j < width; ++j)
      row[j] = parse_real(toks[j + 1], features_csv + ":" + std::to_string(line_no));
    feats.push_back(std::move(row));
  }
  if (feats.empty()) throw FormatError(features_csv + ": no data rows");

  Graph g;
  g.num_nodes = static_cast<int>(feats.size());
  g.features.resize(g.num_nodes, width);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < width; ++j) g.features(i, j) = feats[i][j];

  std::ifstream lf(labels_csv);
  if (!lf) throw IoError("cannot open " + labels_csv);
  if (!std::getline(lf, line)) throw FormatError(labels_csv + ": empty file");
  std::vector<std::string> label_strings(g.num_nodes);
  std::vector<bool> labeled(g.num_nodes, false);
  line_no = 1;
  while (std::getline(lf, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto toks = split_csv(line);
    if (toks.size() != 2)
      throw FormatError(labels_csv + ":" + std::to_string(line_no) + ": expected id,label");
    auto it = index_of.find(toks[0]);
    if (it == index_of.end())
      throw FormatError(labels_csv + ":" + std::to_string(line_no) +
                        ": unknown node id " + toks[0]);
    label_strings[it->second] = toks[1];
    labeled[it->second] = true;
  }
  for (int i = 0; i < g.num_nodes; ++i)
    if (!labeled[i]) throw FormatError(labels_csv + ": node index " + std::to_string(i) +
                                       " has no label row");
  g.labels = assign_labels(label_strings, &g.num_classes);

  std::ifstream ef(edges_csv);
  if (!ef) throw IoError("cannot open " + edges_csv);
  if (!std::getline(ef, line)) throw FormatError(edges_csv + ": empty file");
  std::vector<std::pair<int, int>> raw;
  line_no = 1;
  while (std::getline(ef, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto toks = split_csv(line);
    if (toks.size() != 2)
      throw FormatError(edges_csv + ":" + std::to_string(line_no) + ": expected src,dst");
    auto a = index_of.find(toks[0]);
    auto b = index_of.find(toks[1]);
    if (a == index_of.end() || b == index_of.end())
      throw FormatError(edges_csv + ":" + std::to_string(line_no) +
                        ": edge references unknown node id");
    raw.push_back({a->second, b->second});
  }
  g.edges = canonicalize_edges(std::move(raw), stats);
  g.num_edges = static_cast<int>(g.edges.size());
  validate_graph(g);
  return g;
}

namespace {
constexpr char kCacheMagic[8] = {'G', 'N', 'A', 'S', 'D', 'S', '1', '\n'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path + ": truncated cache file");
  return v;
}
}  // namespace

void save_cache(const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put<std::int32_t>(out, g.num_nodes);
  put<std::int32_t>(out, g.num_edges);
  put<std::int32_t>(out, g.feature_dim());
  put<std::int32_t>(out, g.num_classes);
  for (int i = 0; i < g.num_nodes; ++i) put<std::int32_t>(out, g.labels[i]);
  for (const auto& [a, b] : g.edges) {
    put<std::int32_t>(out, a);
    put<std::int32_t>(out, b);
  }
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < g.feature_dim(); ++j) put<double>(out, g.features(i, j));
  if (!out) throw IoError("write failed: " + path);
}

Graph load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw FormatError(path + ": not a dataset cache file");
  Graph g;
  g.num_nodes = get<std::int32_t>(in, path);
  g.num_edges = get<std::int32_t>(in, path);
  const int dim = get<std::int32_t>(in, path);
  g.num_classes = get<std::int32_t>(in, path);
  if (g.num_nodes <= 0 || dim <= 0 || g.num_edges < 0)
    throw FormatError(path + ": corrupt header");
  g.labels.resize(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) g.labels[i] = get<std::int32_t>(in, path);
  g.edges.resize(g.num_edges);
  for (auto& [a, b] : g.edges) {
    a = get<std::int32_t>(in, path);
    b = get<std::int32_t>(in, path);
  }
  g.features.resize(g.num_nodes, dim);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < dim; ++j) g.features(i, j) = get<double>(in, path);
  validate_graph(g);
  return g;
}

SynthSpec synth_preset(const std::string& name) {
  // Rates are tuned so a plain two-layer GCN lands near its published
  // accuracy range on the matching public benchmark.
  SynthSpec s;
  if (name == "cora") {
    // defaults
  } else if (name == "citeseer") {
    s.nodes = 3327;
    s.undirected_edges = 4732;
    s.features = 3703;
    s.classes = 6;
    s.on_rate_in = 0.012;
    s.on_rate_out = 0.005;
    s.homophily = 0.72;
  } else if (name == "cora-small") {
    s.nodes = 500;
    s.undirected_edges = 1000;
  } else if (name == "citeseer-small") {
    s.nodes = 400;
    s.undirected_edges = 800;
    s.features = 3703;
    s.classes = 6;
    s.on_rate_in = 0.012;
    s.on_rate_out = 0.005;
    s.homophily = 0.72;
  } else {
    throw ConfigError("unknown synth preset: " + name);
  }
  return s;
}

Graph generate_citation_graph(const SynthSpec& spec) {
  if (spec.nodes < 2 || spec.classes < 2 || spec.features < spec.classes)
    throw ArgumentError("synth spec: need >= 2 nodes, >= 2 classes, features >= classes");
  const long max_edges = static_cast<long>(spec.nodes) * (spec.nodes - 1) / 2;
  if (spec.undirected_edges < 0 || spec.undirected_edges > max_edges)
    throw ArgumentError("synth spec: edge count out of range");

  Rng rng(spec.seed);
  Graph g;
  g.num_nodes = spec.nodes;
  g.num_classes = spec.classes;

  // Balanced labels, shuffled.
  std::vector<int> labels(spec.nodes);
  for (int i = 0; i < spec.nodes; ++i) labels[i] = i % spec.classes;
  rng.shuffle(labels);
  g.labels.resize(spec.nodes);
  std::vector<std::vector<int>> by_class(spec.classes);
  for (int i = 0; i < spec.nodes; ++i) {
    g.labels[i] = labels[i];
    by_class[labels[i]].push_back(i);
  }

  // Homophilous edges, rejection-sampled to the exact count.
  std::set<std::pair<int, int>> edge_set;
  while (static_cast<int>(edge_set.size()) < spec.undirected_edges) {
    const int a = rng.index(spec.nodes);
    int b;
    if (rng.bernoulli(spec.homophily)) {
      const auto& peers = by_class[g.labels[a]];
      b = peers[rng.index(peers.size())];
    } else {
      b = rng.index(spec.nodes);
    }
    if (a == b) continue;
    edge_set.insert(std::minmax(a, b));
  }
  g.edges.assign(edge_set.begin(), edge_set.end());
  g.num_edges = static_cast<int>(g.edges.size());

  // Class-conditional bag of words: each class owns a contiguous vocabulary
  // window; background words fire at a lower rate everywhere.
  const int window = spec.features / spec.classes;
  g.features = Eigen::MatrixXd::Zero(spec.nodes, spec.features);
  for (int i = 0; i < spec.nodes; ++i) {
    const int lo = g.labels[i] * window;
    const int hi = (g.labels[i] + 1 == spec.classes) ? spec.features : lo + window;
    for (int j = 0; j < spec.features; ++j) {
      const double p = (j >= lo && j < hi) ? spec.on_rate_in : spec.on_rate_out;
      if (rng.bernoulli(p)) g.features(i, j) = 1.0;
    }
  }
  validate_graph(g);
  return g;
}

void write_planetoid(const Graph& g, const std::string& prefix, std::uint64_t seed) {
  // Non-consecutive string ids in shuffled row order exercise the id mapping.
  std::vector<int> order(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x1d));
  rng.shuffle(order);

  auto id_of = [](int node) { return "paper_" + std::to_string(100000 + node * 3); };

  std::ofstream content(prefix + ".content", std::ios::trunc);
  if (!content) throw IoError("cannot write " + prefix + ".content");
  for (int row = 0; row < g.num_nodes; ++row) {
    const int i = order[row];
    content << id_of(i);
    for (int j = 0; j < g.feature_dim(); ++j) {
      const double v = g.features(i, j);
      if (v == static_cast<long>(v))
        content << ' ' << static_cast<long>(v);
      else
        content << ' ' << v;
    }
    content << " class_" << g.labels[i] << '\n';
  }
  if (!content) throw IoError("write failed: " + prefix + ".content");

  std::ofstream cites(prefix + ".cites", std::ios::trunc);
  if (!cites) throw IoError("cannot write " + prefix + ".cites");
  for (const auto& [a, b] : g.edges) {
    if (rng.bernoulli(0.5))
      cites << id_of(a) << ' ' << id_of(b) << '\n';
    else
      cites << id_of(b) << ' ' << id_of(a) << '\n';
  }
  if (!cites) throw IoError("write failed: " + prefix + ".cites");
}

void write_csv_triple(const Graph& g, const std::string& dir) {
  std::ofstream ff(dir + "/features.csv", std::ios::trunc);
  if (!ff) throw IoError("cannot write " + dir + "/features.csv");
  ff << "id";
  for (int j = 0; j < g.feature_dim(); ++j) ff << ",f" << j;
  ff << '\n';
  for (int i = 0; i < g.num_nodes; ++i) {
    ff << 'n' << i;
    for (int j = 0; j < g.feature_dim(); ++j) {
      const double v = g.features(i, j);
      if (v == static_cast<long>(v))
        ff << ',' << static_cast<long>(v);
      else
        ff << ',' << v;
    }
    ff << '\n';
  }

  std::ofstream ef(dir + "/edges.csv", std::ios::trunc);
  if (!ef) throw IoError("cannot write " + dir + "/edges.csv");
  ef << "src,dst\n";
  for (const auto& [a, b] : g.edges) ef << 'n' << a << ",n" << b << '\n';

  std::ofstream lf(dir + "/labels.csv", std::ios::trunc);
  if (!lf) throw IoError("cannot write " + dir + "/labels.csv");
  lf << "id,label\n";
  for (int i = 0; i < g.num_nodes; ++i) lf << 'n' << i << ",class_" << g.labels[i] << '\n';
}

}  // namespace gnas
