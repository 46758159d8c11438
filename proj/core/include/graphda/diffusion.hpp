#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "graphda/graph.hpp"
#include "graphda/matrix.hpp"

namespace graphda {

// Top-s sparsified personalized-PageRank matrix. Row weights are the raw
// retained entries; rows are not renormalized, so they may sum to < 1.
struct DiffusionMatrix {
  double alpha = 0.1;
  std::size_t topk = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;  // (neighbor, weight)

  std::size_t num_nodes() const { return rows.size(); }
};

// Symmetrically normalized transition matrix with self-loops:
// (D + I)^{-1/2} (A + I) (D + I)^{-1/2}.
Matrix transition_matrix(const Graph& graph);

// alpha * [I - (1 - alpha) * transition]^{-1}, computed by a dense LU
// solve. Reference path for desk-scale graphs.
Matrix diffuse(const Matrix& transition, double alpha);

// Truncated Neumann series alpha * sum_{k=0..terms} (1-alpha)^k T^k.
// Fallback path for large graphs; also serves as the test oracle for the
// dense solve. The tail is geometric: the truncation error is bounded by
// (1-alpha)^(terms+1).
Matrix diffuse_series(const Matrix& transition, double alpha,
                      std::size_t terms);

// Terms needed so the series tail (1-alpha)^(terms+1) drops below tol,
// never less than min_terms.
std::size_t series_terms_for_tolerance(double alpha, double tol,
                                       std::size_t min_terms = 200);

// Keeps the s largest entries per row; ties broken towards lower node ids;
// zero entries are dropped. Idempotent for fixed s.
DiffusionMatrix sparsify_topk(const Matrix& dense, std::size_t s,
                              double alpha = 0.0);

// Cache file: header lines recording alpha and topk, then "v u p_vu"
// triplets. Round-trips bit-exactly.
void save_diffusion(const std::filesystem::path& path,
                    const DiffusionMatrix& dm);
DiffusionMatrix load_diffusion(const std::filesystem::path& path);

// Preprocessing entry point: transition + diffuse + sparsify. Uses the
// dense solve up to dense_limit nodes, the series fallback beyond it.
DiffusionMatrix build_diffusion(const Graph& graph, double alpha,
                                std::size_t topk,
                                std::size_t dense_limit = 5000);

}  // namespace graphda
