#pragma once

#include <cstdint>

#include "graphda/graph.hpp"

namespace graphda {

// Stochastic-block-model pair with class-prototype attributes. domain_shift
// perturbs the target prototypes and swaps a slice of the target vocabulary
// for fresh tokens; both effects scale with the knob.
struct SbmSpec {
  std::size_t num_nodes = 600;       // per domain
  std::size_t num_classes = 3;
  double intra_prob = 0.05;
  double inter_prob = 0.005;
  std::size_t attr_dim = 64;         // per-domain vocabulary size
  double prototype_strength = 1.0;
  double domain_shift = 0.0;         // in [0,1]
  double label_noise = 0.0;          // in [0,1]
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthPair {
  Graph source;
  Graph target;
  AttributeVocabulary vocab;
  // Per-domain column token lists, in column order (for file round-trips).
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
};

// Deterministic for a fixed seed. Source is fully labeled; target carries
// ground-truth labels but its labeled set is empty until
// select_labeled_per_class is applied.
SynthPair generate_pair(const SbmSpec& spec);

}  // namespace graphda
