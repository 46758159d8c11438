#include "graphda/contrastive.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "graphda/errors.hpp"

namespace graphda {

namespace {
constexpr double kLogFloor = 1e-12;
}

Matrix corrupt(const Graph& graph, std::uint64_t seed) {
  const std::size_t n = graph.num_nodes;
  if (n < 2)
    throw ValidationError("corrupt: need at least two nodes for a "
                          "non-identity permutation");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    std::shuffle(perm.begin(), perm.end(), rng);
  } while (std::is_sorted(perm.begin(), perm.end()));

  const Matrix& x = graph.attributes;
  Matrix shuffled(x.rows, x.cols);
  for (std::size_t v = 0; v < n; ++v)
    std::copy(x.row_ptr(perm[v]), x.row_ptr(perm[v]) + x.cols,
              shuffled.row_ptr(v));
  return shuffled;
}

Var readout(Var embeddings) {
  if (embeddings.rows() == 0)
    throw ValidationError("readout: empty batch");
  return sigmoid(mean_rows(embeddings));
}

Var discriminate(Var embeddings, Var w_b, Var summary) {
  return sigmoid(bilinear(embeddings, w_b, summary));
}

ContrastiveBatch make_contrastive_batch(Var pos_local, Var pos_global,
                                        Var neg_local, Var neg_global) {
  const std::size_t n = pos_local.rows();
  if (pos_global.rows() != n || neg_local.rows() != n ||
      neg_global.rows() != n)
    throw ValidationError("contrastive: all embedding blocks must share the "
                          "batch row count");
  ContrastiveBatch b;
  b.pos_local = pos_local;
  b.pos_global = pos_global;
  b.neg_local = neg_local;
  b.neg_global = neg_global;
  b.summary_local = readout(pos_local);
  b.summary_global = readout(pos_global);
  return b;
}

Var contrastive_loss(const ContrastiveBatch& batch, Var w_b) {
  const auto n = static_cast<double>(batch.pos_local.rows());
  Var pos_a = discriminate(batch.pos_local, w_b, batch.summary_global);
  Var pos_p = discriminate(batch.pos_global, w_b, batch.summary_local);
  Var neg_a = discriminate(batch.neg_local, w_b, batch.summary_global);
  Var neg_p = discriminate(batch.neg_global, w_b, batch.summary_local);

  Var positives = add(log(clamp_min(pos_a, kLogFloor)),
                      log(clamp_min(pos_p, kLogFloor)));
  Var negatives = add(log(clamp_min(scalar_affine(neg_a, -1.0, 1.0), kLogFloor)),
                      log(clamp_min(scalar_affine(neg_p, -1.0, 1.0), kLogFloor)));
  Var total = sum_all(add(positives, negatives));
  return scalar_mul(total, -1.0 / (4.0 * n));
}

}  // namespace graphda
