#pragma once

#include <random>
#include <vector>

#include "graphda/autodiff.hpp"

namespace graphda {

// Cosine-similarity classifier: columns of W_c act as class prototypes.
struct ClassifierParams {
  Tensor weights;            // W_c: embed_dim x num_classes
  double temperature = 20.0;

  std::size_t num_classes() const { return weights.value.cols; }

  static ClassifierParams init(std::size_t embed_dim, std::size_t num_classes,
                               double temperature, std::mt19937_64& rng);
};

// softmax((1/T) * W_c^T e / ||e||_2) per row; rows sum to 1 and the output
// is invariant to positive scaling of e.
Var predict(Var embeddings, ClassifierParams& params, Tape& tape);
Var predict(Var embeddings, Var weights, double temperature);

// Mean negative log-likelihood over the rows. Every row must carry a known
// label.
Var cross_entropy(Var predictions, const std::vector<int>& labels);

// Mean Shannon entropy (natural log) over the rows; value lies in
// [0, ln C].
Var entropy_loss(Var predictions);

}  // namespace graphda
