#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "graphda/autodiff.hpp"
#include "graphda/diffusion.hpp"
#include "graphda/graph.hpp"

namespace graphda {

// Weights of the two GNN encoders. The local view concatenates a node's
// previous representation with the neighborhood mean, so local layer k maps
// 2*prev_dim -> dim_k; the global view maps prev_dim -> dim_k. The same
// tensors serve the source and target graphs.
struct EncoderParams {
  std::vector<Tensor> local_weights;   // W_A^k: dims[k] x 2*prev
  std::vector<Tensor> global_weights;  // W_P^k: dims[k] x prev

  std::size_t depth() const { return local_weights.size(); }
  std::size_t view_dim() const { return local_weights.back().value.rows; }
  // Concatenated embedding width when both views are active.
  std::size_t embed_dim() const { return 2 * view_dim(); }

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;

  // Glorot-uniform init; dims defaults to the 1024/64 stack.
  static EncoderParams init(std::size_t attr_dim,
                            const std::vector<std::size_t>& dims,
                            std::mt19937_64& rng);
};

// Sampled local neighborhoods for one batch, layered by search depth.
// layer_nodes[depth()] is the batch itself; lists at step k index into
// layer_nodes[k-1]. Local lists have exactly sizes[k-1] entries.
struct SamplePlan {
  std::vector<int> batch;
  std::vector<std::size_t> sizes;                      // s_1..s_K
  std::vector<std::vector<int>> layer_nodes;           // [0..K]
  std::vector<std::vector<std::vector<int>>> neighbor_positions;  // [k-1][i][j]
  std::vector<std::vector<int>> self_positions;        // [k-1][i]

  std::size_t depth() const { return sizes.size(); }
};

// Uniform without replacement when the degree allows, uniform with
// replacement otherwise; an isolated node samples itself. Deterministic
// for a fixed (seed, batch, graph).
SamplePlan sample_neighborhoods(const Graph& graph,
                                const std::vector<int>& batch,
                                const std::vector<std::size_t>& sizes,
                                std::uint64_t seed);

// Mean-aggregate + skip-concat encoder over the sampled adjacency view.
// attr_override substitutes the attribute matrix (used for corruption);
// it must have the graph's shape.
Var encode_local(Tape& tape, const Graph& graph, const SamplePlan& plan,
                 EncoderParams& params, const Matrix* attr_override = nullptr);

// Weighted-sum encoder over the sparsified diffusion view; no skip
// connection (the diffusion already carries the self entry).
Var encode_global(Tape& tape, const Graph& graph,
                  const DiffusionMatrix& diffusion,
                  const std::vector<int>& batch, EncoderParams& params,
                  const Matrix* attr_override = nullptr);

// Row-wise concatenation of the two views.
Var embed(Var local, Var global);

}  // namespace graphda
