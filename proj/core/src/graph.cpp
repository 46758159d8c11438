#include "graphda/graph.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "graphda/errors.hpp"
#include "graphda/io.hpp"

namespace graphda {

namespace {

void check_duplicate_free(const std::vector<std::string>& tokens,
                          const char* which) {
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens)
    if (!seen.insert(t).second)
      throw ValidationError(std::string("align_attributes: duplicate token '") +
                            t + "' in " + which + " vocabulary");
}

struct LineReader {
  std::ifstream stream;
  std::string path;
  std::size_t line_no = 0;

  explicit LineReader(const std::filesystem::path& p)
      : stream(p), path(p.string()) {
    if (!stream)
      throw ValidationError("cannot open file: " + path);
  }

  // Next non-comment, non-blank line; false at EOF.
  bool next(std::string& line) {
    while (std::getline(stream, line)) {
      ++line_no;
      std::size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos) continue;
      if (line[start] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(path + ":" + std::to_string(line_no) + ": " + what);
  }
};

}  // namespace

AttributeVocabulary align_attributes(std::vector<std::string> source_vocab,
                                     std::vector<std::string> target_vocab) {
  check_duplicate_free(source_vocab, "source");
  check_duplicate_free(target_vocab, "target");

  AttributeVocabulary v;
  v.source_names = std::move(source_vocab);
  v.target_names = std::move(target_vocab);

  std::unordered_map<std::string, std::size_t> union_index;
  v.union_names.reserve(v.source_names.size());
  v.source_index_map.reserve(v.source_names.size());
  for (const auto& t : v.source_names) {
    union_index.emplace(t, v.union_names.size());
    v.source_index_map.push_back(v.union_names.size());
    v.union_names.push_back(t);
  }
  v.target_index_map.reserve(v.target_names.size());
  for (const auto& t : v.target_names) {
    auto it = union_index.find(t);
    if (it == union_index.end()) {
      union_index.emplace(t, v.union_names.size());
      v.target_index_map.push_back(v.union_names.size());
      v.union_names.push_back(t);
    } else {
      v.target_index_map.push_back(it->second);
    }
  }
  return v;
}

double common_attribute_rate(const AttributeVocabulary& vocab) {
  if (vocab.union_names.empty()) return 0.0;
  const std::size_t common = vocab.source_names.size() +
                             vocab.target_names.size() -
                             vocab.union_names.size();
  return static_cast<double>(common) /
         static_cast<double>(vocab.union_names.size());
}

void Graph::validate() const {
  if (adjacency.size() != num_nodes)
    throw ValidationError("graph: adjacency size differs from num_nodes");
  if (attributes.rows != num_nodes)
    throw ValidationError("graph: attribute row count differs from num_nodes");
  if (labels.size() != num_nodes)
    throw ValidationError("graph: label count differs from num_nodes");
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const auto& nb = adjacency[v];
    if (!std::is_sorted(nb.begin(), nb.end()))
      throw ValidationError("graph: neighbor list not sorted");
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw ValidationError("graph: duplicate edge");
    for (int u : nb) {
      if (u < 0 || static_cast<std::size_t>(u) >= num_nodes)
        throw ValidationError("graph: neighbor id out of range");
      if (static_cast<std::size_t>(u) == v)
        throw ValidationError("graph: self-loop at node " + std::to_string(v));
      const auto& back = adjacency[u];
      if (!std::binary_search(back.begin(), back.end(), static_cast<int>(v)))
        throw ValidationError("graph: adjacency not symmetric at edge " +
                              std::to_string(v) + "-" + std::to_string(u));
    }
  }
  if (labeled_set.size() + unlabeled_set.size() != num_nodes)
    throw ValidationError("graph: label partition does not cover all nodes");
  std::vector<char> seen(num_nodes, 0);
  for (int v : labeled_set) {
    if (seen[v]++) throw ValidationError("graph: node in both label sets");
    if (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= num_classes)
      throw ValidationError("graph: labeled node " + std::to_string(v) +
                            " has no valid class id");
  }
  for (int v : unlabeled_set)
    if (seen[v]++) throw ValidationError("graph: node in both label sets");
}

Graph Graph::with_label_partition(const std::vector<int>& labeled_ids) const {
  Graph g = *this;
  g.labeled_set = labeled_ids;
  std::sort(g.labeled_set.begin(), g.labeled_set.end());
  if (std::adjacent_find(g.labeled_set.begin(), g.labeled_set.end()) !=
      g.labeled_set.end())
    throw ValidationError("with_label_partition: duplicate node id");
  std::vector<char> is_labeled(num_nodes, 0);
  for (int v : g.labeled_set) {
    if (v < 0 || static_cast<std::size_t>(v) >= num_nodes)
      throw ValidationError("with_label_partition: node id out of range");
    if (labels[v] == kUnlabeled)
      throw ValidationError("with_label_partition: node " + std::to_string(v) +
                            " has no ground-truth label");
    is_labeled[v] = 1;
  }
  g.unlabeled_set.clear();
  for (std::size_t v = 0; v < num_nodes; ++v)
    if (!is_labeled[v]) g.unlabeled_set.push_back(static_cast<int>(v));
  return g;
}

namespace {

int parse_node_id(LineReader& r, const std::string& tok, std::size_t num_nodes) {
  int id;
  try {
    std::size_t pos;
    id = std::stoi(tok, &pos);
    if (pos != tok.size()) r.fail("malformed node id '" + tok + "'");
  } catch (const std::exception&) {
    r.fail("malformed node id '" + tok + "'");
  }
  if (id < 0 || static_cast<std::size_t>(id) >= num_nodes)
    r.fail("node id " + tok + " out of range [0, " +
           std::to_string(num_nodes) + ")");
  return id;
}

}  // namespace

Graph load_graph(const std::filesystem::path& edge_path,
                 const std::filesystem::path& attr_path,
                 const std::filesystem::path& label_path,
                 const AttributeVocabulary& vocab, GraphSide side,
                 std::size_t num_nodes, std::size_t num_classes) {
  Graph g;
  g.num_nodes = num_nodes;
  g.num_classes = num_classes;
  g.adjacency.assign(num_nodes, {});
  g.attributes = Matrix(num_nodes, vocab.union_size());
  g.labels.assign(num_nodes, kUnlabeled);

  {
    LineReader r(edge_path);
    std::string line;
    while (r.next(line)) {
      std::istringstream is(line);
      std::string a, b, extra;
      if (!(is >> a >> b) || (is >> extra))
        r.fail("expected 'u v'");
      int u = parse_node_id(r, a, num_nodes);
      int v = parse_node_id(r, b, num_nodes);
      if (u == v) continue;  // self-loops are dropped; diffusion adds its own
      g.adjacency[u].push_back(v);
      g.adjacency[v].push_back(u);
    }
  }
  for (auto& nb : g.adjacency) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  {
    const auto& names = side == GraphSide::source ? vocab.source_names
                                                  : vocab.target_names;
    const auto& index_map = side == GraphSide::source ? vocab.source_index_map
                                                      : vocab.target_index_map;
    std::unordered_map<std::string, std::size_t> token_to_union;
    token_to_union.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i)
      token_to_union.emplace(names[i], index_map[i]);

    LineReader r(attr_path);
    std::string line;
    while (r.next(line)) {
      std::istringstream is(line);
      std::string node_tok, attr_tok, value_tok, extra;
      if (!(is >> node_tok >> attr_tok >> value_tok) || (is >> extra))
        r.fail("expected 'node token value'");
      int node = parse_node_id(r, node_tok, num_nodes);
      auto it = token_to_union.find(attr_tok);
      if (it == token_to_union.end())
        r.fail("attribute token '" + attr_tok + "' not in vocabulary");
      char* end = nullptr;
      double value = std::strtod(value_tok.c_str(), &end);
      if (end == value_tok.c_str() || *end != '\0')
        r.fail("malformed value '" + value_tok + "'");
      if (value < 0.0) r.fail("attribute values must be nonnegative");
      g.attributes(node, it->second) = value;
    }
  }

  {
    LineReader r(label_path);
    std::string line;
    while (r.next(line)) {
      std::istringstream is(line);
      std::string node_tok, class_tok, extra;
      if (!(is >> node_tok >> class_tok) || (is >> extra))
        r.fail("expected 'node class'");
      int node = parse_node_id(r, node_tok, num_nodes);
      int cls;
      try {
        std::size_t pos;
        cls = std::stoi(class_tok, &pos);
        if (pos != class_tok.size()) throw std::invalid_argument(class_tok);
      } catch (const std::exception&) {
        r.fail("malformed class id '" + class_tok + "'");
      }
      if (cls < 0 || static_cast<std::size_t>(cls) >= num_classes)
        r.fail("class id " + class_tok + " out of range [0, " +
               std::to_string(num_classes) + ")");
      g.labels[node] = cls;
    }
  }

  if (side == GraphSide::source) {
    g.labeled_set.resize(num_nodes);
    for (std::size_t v = 0; v < num_nodes; ++v)
      g.labeled_set[v] = static_cast<int>(v);
  } else {
    // Target labels stay masked until select_labeled_per_class is applied.
    g.unlabeled_set.resize(num_nodes);
    for (std::size_t v = 0; v < num_nodes; ++v)
      g.unlabeled_set[v] = static_cast<int>(v);
  }
  g.validate();
  return g;
}

std::vector<std::string> scan_attribute_tokens(
    const std::filesystem::path& attr_path) {
  LineReader r(attr_path);
  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  std::string line;
  while (r.next(line)) {
    std::istringstream is(line);
    std::string node_tok, attr_tok;
    if (!(is >> node_tok >> attr_tok)) r.fail("expected 'node token value'");
    if (seen.insert(attr_tok).second) tokens.push_back(attr_tok);
  }
  return tokens;
}

std::size_t scan_num_nodes(const std::filesystem::path& edge_path,
                           const std::filesystem::path& attr_path,
                           const std::filesystem::path& label_path) {
  long max_id = -1;
  auto scan_first_ids = [&max_id](const std::filesystem::path& p, int count) {
    LineReader r(p);
    std::string line;
    while (r.next(line)) {
      std::istringstream is(line);
      std::string tok;
      for (int i = 0; i < count && (is >> tok); ++i) {
        try {
          max_id = std::max(max_id, std::stol(tok));
        } catch (const std::exception&) {
          r.fail("malformed node id '" + tok + "'");
        }
      }
    }
  };
  scan_first_ids(edge_path, 2);
  scan_first_ids(attr_path, 1);
  scan_first_ids(label_path, 1);
  return static_cast<std::size_t>(max_id + 1);
}

std::size_t scan_num_classes(const std::filesystem::path& label_path) {
  LineReader r(label_path);
  long max_class = -1;
  std::string line;
  while (r.next(line)) {
    std::istringstream is(line);
    std::string node_tok, class_tok;
    if (!(is >> node_tok >> class_tok)) r.fail("expected 'node class'");
    try {
      max_class = std::max(max_class, std::stol(class_tok));
    } catch (const std::exception&) {
      r.fail("malformed class id '" + class_tok + "'");
    }
  }
  return static_cast<std::size_t>(max_class + 1);
}

void save_edges(const std::filesystem::path& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "# u v\n";
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    for (int u : g.adjacency[v])
      if (static_cast<std::size_t>(u) > v) os << v << " " << u << "\n";
}

void save_attributes(const std::filesystem::path& path, const Graph& g,
                     const std::vector<std::string>& column_tokens,
                     const std::vector<std::size_t>& column_to_union) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "# node token value\n";
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    for (std::size_t c = 0; c < column_tokens.size(); ++c) {
      const double x = g.attributes(v, column_to_union[c]);
      if (x != 0.0)
        os << v << " " << column_tokens[c] << " " << format_double(x) << "\n";
    }
}

void save_labels(const std::filesystem::path& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "# node class\n";
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    if (g.labels[v] != kUnlabeled) os << v << " " << g.labels[v] << "\n";
}

std::vector<int> select_labeled_per_class(const Graph& graph, std::size_t n,
                                          std::uint64_t seed) {
  if (n == 0) return {};
  std::vector<std::vector<int>> by_class(graph.num_classes);
  for (std::size_t v = 0; v < graph.num_nodes; ++v)
    if (graph.labels[v] != kUnlabeled)
      by_class[graph.labels[v]].push_back(static_cast<int>(v));

  std::mt19937_64 rng(seed);
  std::vector<int> chosen;
  chosen.reserve(n * graph.num_classes);
  for (std::size_t c = 0; c < graph.num_classes; ++c) {
    auto& candidates = by_class[c];
    if (candidates.size() < n)
      throw ValidationError("select_labeled_per_class: class " +
                            std::to_string(c) + " has only " +
                            std::to_string(candidates.size()) +
                            " labeled nodes, need " + std::to_string(n));
    std::shuffle(candidates.begin(), candidates.end(), rng);
    chosen.insert(chosen.end(), candidates.begin(),
                  candidates.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace graphda
