#include "graphda/classifier.hpp"

#include "graphda/errors.hpp"

namespace graphda {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr double kNormEps = 1e-12;
}

ClassifierParams ClassifierParams::init(std::size_t embed_dim,
                                        std::size_t num_classes,
                                        double temperature,
                                        std::mt19937_64& rng) {
  if (temperature <= 0.0)
    throw ValidationError("classifier: temperature must be positive");
  ClassifierParams p;
  p.weights = Tensor("W_c", glorot_uniform(embed_dim, num_classes, embed_dim,
                                           num_classes, rng));
  p.temperature = temperature;
  return p;
}

Var predict(Var embeddings, Var weights, double temperature) {
  if (embeddings.cols() != weights.rows())
    throw ValidationError("predict: embedding width differs from classifier "
                          "weight rows");
  Var cosine = matmul(l2_normalize_rows(embeddings, kNormEps), weights);
  return softmax_rows(scalar_mul(cosine, 1.0 / temperature));
}

Var predict(Var embeddings, ClassifierParams& params, Tape& tape) {
  return predict(embeddings, tape.param(params.weights), params.temperature);
}

Var cross_entropy(Var predictions, const std::vector<int>& labels) {
  const std::size_t n = predictions.rows();
  const std::size_t c = predictions.cols();
  if (labels.size() != n)
    throw ValidationError("cross_entropy: label count differs from row count");
  Matrix one_hot(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw ValidationError("cross_entropy: node " + std::to_string(i) +
                            " has no known label");
    one_hot(i, labels[i]) = 1.0;
  }
  Var picked = row_sum(hadamard(predictions, predictions.tape->input(one_hot)));
  Var log_lik = sum_all(log(clamp_min(picked, kLogFloor)));
  return scalar_mul(log_lik, -1.0 / static_cast<double>(n));
}

Var entropy_loss(Var predictions) {
  const auto n = static_cast<double>(predictions.rows());
  Var plogp = hadamard(predictions, log(clamp_min(predictions, kLogFloor)));
  return scalar_mul(sum_all(plogp), -1.0 / n);
}

}  // namespace graphda
