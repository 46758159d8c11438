#include "graphda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "graphda/errors.hpp"

namespace graphda {

namespace {

std::vector<int> balanced_labels(std::size_t n, std::size_t c) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = static_cast<int>(i % c);
  return labels;
}

std::vector<std::vector<int>> sbm_edges(const std::vector<int>& labels,
                                        double intra, double inter,
                                        std::mt19937_64& rng) {
  const std::size_t n = labels.size();
  std::vector<std::vector<int>> adj(n);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? intra : inter;
      if (coin(rng) < p) {
        adj[i].push_back(static_cast<int>(j));
        adj[j].push_back(static_cast<int>(i));
      }
    }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

Matrix prototype_attributes(const std::vector<int>& labels,
                            const std::vector<Matrix>& prototypes,
                            double strength, std::size_t dim,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  Matrix x(labels.size(), dim);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const Matrix& proto = prototypes[labels[v]];
    for (std::size_t j = 0; j < dim; ++j) {
      const double raw = proto.data[j] * strength + noise(rng);
      x(v, j) = raw > 0.0 ? raw : 0.0;
    }
  }
  return x;
}

}  // namespace

void SbmSpec::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(intra_prob) || !in_unit(inter_prob))
    throw ValidationError("sbm: edge probabilities must lie in [0,1]");
  if (intra_prob < inter_prob)
    throw ValidationError("sbm: intra_prob must be >= inter_prob");
  if (!in_unit(domain_shift))
    throw ValidationError("sbm: domain_shift must lie in [0,1]");
  if (!in_unit(label_noise))
    throw ValidationError("sbm: label_noise must lie in [0,1]");
  if (num_classes == 0 || num_nodes < num_classes)
    throw ValidationError("sbm: need at least one node per class");
  if (attr_dim == 0) throw ValidationError("sbm: attr_dim must be positive");
  if (prototype_strength < 0.0)
    throw ValidationError("sbm: prototype_strength must be nonnegative");
}

SynthPair generate_pair(const SbmSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Class prototypes over the shared attribute space.
  std::vector<Matrix> source_protos(spec.num_classes);
  for (auto& p : source_protos) {
    p = Matrix(1, spec.attr_dim);
    for (auto& v : p.data) v = unit(rng);
  }
  // Target prototypes drift towards an independent draw as shift grows.
  std::vector<Matrix> target_protos(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    target_protos[c] = Matrix(1, spec.attr_dim);
    for (std::size_t j = 0; j < spec.attr_dim; ++j) {
      const double alt = unit(rng);
      target_protos[c].data[j] = (1.0 - spec.domain_shift) *
                                     source_protos[c].data[j] +
                                 spec.domain_shift * alt;
    }
  }

  // Vocabulary shift: the tail of the target vocabulary uses fresh tokens.
  const auto novel =
      static_cast<std::size_t>(std::floor(spec.domain_shift / 2.0 *
                                          static_cast<double>(spec.attr_dim)));
  std::vector<std::string> source_tokens(spec.attr_dim);
  std::vector<std::string> target_tokens(spec.attr_dim);
  for (std::size_t j = 0; j < spec.attr_dim; ++j) {
    source_tokens[j] = "a" + std::to_string(j);
    target_tokens[j] = j + novel < spec.attr_dim
                           ? "a" + std::to_string(j + novel)
                           : "b" + std::to_string(j + novel - spec.attr_dim);
  }
  AttributeVocabulary vocab = align_attributes(source_tokens, target_tokens);

  SynthPair pair;
  pair.vocab = std::move(vocab);
  pair.source_tokens = std::move(source_tokens);
  pair.target_tokens = std::move(target_tokens);

  auto build = [&](GraphSide side, const std::vector<Matrix>& protos,
                   const std::vector<std::size_t>& col_map) {
    Graph g;
    g.num_nodes = spec.num_nodes;
    g.num_classes = spec.num_classes;
    g.labels = balanced_labels(spec.num_nodes, spec.num_classes);
    g.adjacency = sbm_edges(g.labels, spec.intra_prob, spec.inter_prob, rng);
    Matrix cols = prototype_attributes(g.labels, protos,
                                       spec.prototype_strength, spec.attr_dim,
                                       rng);
    g.attributes = Matrix(spec.num_nodes, pair.vocab.union_size());
    for (std::size_t v = 0; v < spec.num_nodes; ++v)
      for (std::size_t j = 0; j < spec.attr_dim; ++j)
        g.attributes(v, col_map[j]) = cols(v, j);
    if (spec.label_noise > 0.0) {
      std::uniform_int_distribution<int> cls(
          0, static_cast<int>(spec.num_classes) - 1);
      for (auto& y : g.labels)
        if (unit(rng) < spec.label_noise) y = cls(rng);
    }
    if (side == GraphSide::source) {
      g.labeled_set.resize(g.num_nodes);
      for (std::size_t v = 0; v < g.num_nodes; ++v)
        g.labeled_set[v] = static_cast<int>(v);
    } else {
      g.unlabeled_set.resize(g.num_nodes);
      for (std::size_t v = 0; v < g.num_nodes; ++v)
        g.unlabeled_set[v] = static_cast<int>(v);
    }
    g.validate();
    return g;
  };

  pair.source = build(GraphSide::source, source_protos,
                      pair.vocab.source_index_map);
  pair.target = build(GraphSide::target, target_protos,
                      pair.vocab.target_index_map);
  return pair;
}

}  // namespace graphda
