#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphda/matrix.hpp"

namespace graphda {

constexpr int kUnlabeled = -1;

// Shared attribute vocabulary of two graphs. Union ordering is source
// tokens first (in order), then target tokens not seen in the source.
struct AttributeVocabulary {
  std::vector<std::string> source_names;
  std::vector<std::string> target_names;
  std::vector<std::string> union_names;
  std::vector<std::size_t> source_index_map;  // source column -> union column
  std::vector<std::size_t> target_index_map;  // target column -> union column

  std::size_t union_size() const { return union_names.size(); }
};

AttributeVocabulary align_attributes(std::vector<std::string> source_vocab,
                                     std::vector<std::string> target_vocab);

// |source ∩ target| / |union|
double common_attribute_rate(const AttributeVocabulary& vocab);

enum class GraphSide { source, target };

// Immutable attributed graph. Attribute rows are indexed by the union
// vocabulary; labels use kUnlabeled where unknown.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<std::vector<int>> adjacency;  // sorted, deduplicated, no self-loops
  Matrix attributes;                        // num_nodes x union_size
  std::vector<int> labels;                  // class id or kUnlabeled
  std::vector<int> labeled_set;             // sorted node ids
  std::vector<int> unlabeled_set;           // sorted node ids
  std::size_t num_classes = 0;

  std::size_t degree(int v) const { return adjacency[v].size(); }
  const std::vector<int>& neighbors(int v) const { return adjacency[v]; }

  // Throws ValidationError on symmetry/partition/label violations.
  void validate() const;

  // Same graph with a different labeled/unlabeled partition. Every id in
  // labeled_ids must have a known label.
  Graph with_label_partition(const std::vector<int>& labeled_ids) const;
};

// Formats: edge file has "u v" lines, attribute file "node token value"
// lines, label file "node class" lines; '#' starts a comment.
Graph load_graph(const std::filesystem::path& edge_path,
                 const std::filesystem::path& attr_path,
                 const std::filesystem::path& label_path,
                 const AttributeVocabulary& vocab, GraphSide side,
                 std::size_t num_nodes, std::size_t num_classes);

// Token list of one attribute file in first-appearance order.
std::vector<std::string> scan_attribute_tokens(
    const std::filesystem::path& attr_path);

// Node count implied by the three files (1 + max node id seen).
std::size_t scan_num_nodes(const std::filesystem::path& edge_path,
                           const std::filesystem::path& attr_path,
                           const std::filesystem::path& label_path);

// 1 + max class id in the label file; 0 for an empty file.
std::size_t scan_num_classes(const std::filesystem::path& label_path);

void save_edges(const std::filesystem::path& path, const Graph& g);
void save_attributes(const std::filesystem::path& path, const Graph& g,
                     const std::vector<std::string>& column_tokens,
                     const std::vector<std::size_t>& column_to_union);
void save_labels(const std::filesystem::path& path, const Graph& g);

// Exactly n node ids per class, uniform without replacement, deterministic
// for a fixed seed. n = 0 gives the empty set.
std::vector<int> select_labeled_per_class(const Graph& graph, std::size_t n,
                                          std::uint64_t seed);

}  // namespace graphda
