#pragma once

#include <cstdint>

#include "graphda/autodiff.hpp"
#include "graphda/graph.hpp"

namespace graphda {

// Row shuffle of the attribute matrix; adjacency and diffusion stay
// untouched. Deterministic per seed and never the identity permutation.
Matrix corrupt(const Graph& graph, std::uint64_t seed);

// Batch summary: sigmoid of the row mean.
Var readout(Var embeddings);

// sigmoid(e_i^T W_b r) for every row of e.
Var discriminate(Var embeddings, Var w_b, Var summary);

// One graph's positive/negative views plus the summaries. Summaries are
// computed from the uncorrupted embeddings only.
struct ContrastiveBatch {
  Var pos_local;
  Var pos_global;
  Var neg_local;
  Var neg_global;
  Var summary_local;   // r_A
  Var summary_global;  // r_P
};

ContrastiveBatch make_contrastive_batch(Var pos_local, Var pos_global,
                                        Var neg_local, Var neg_global);

// Jensen-Shannon pair loss for one graph:
// -1/(4|B|) * sum_i [ log D(e^A_i, r_P) + log D(e^P_i, r_A)
//                   + log(1 - D(~e^A_i, r_P)) + log(1 - D(~e^P_i, r_A)) ].
// The per-graph losses of the two domains are summed by the trainer.
Var contrastive_loss(const ContrastiveBatch& batch, Var w_b);

}  // namespace graphda
