#include "graphda/diffusion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "graphda/errors.hpp"
#include "graphda/io.hpp"

namespace graphda {

Matrix transition_matrix(const Graph& graph) {
  const std::size_t n = graph.num_nodes;
  if (n == 0) throw ValidationError("transition_matrix: empty graph");
  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(graph.degree(v)) + 1.0);
  Matrix t(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    t(v, v) = inv_sqrt[v] * inv_sqrt[v];
    for (int u : graph.neighbors(static_cast<int>(v)))
      t(v, u) = inv_sqrt[v] * inv_sqrt[u];
  }
  return t;
}

Matrix diffuse(const Matrix& transition, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("diffuse: alpha must lie in (0,1)");
  if (transition.rows != transition.cols)
    throw ValidationError("diffuse: transition matrix must be square");
  const auto n = static_cast<Eigen::Index>(transition.rows);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = (i == j ? 1.0 : 0.0) - (1.0 - alpha) * transition(i, j);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  // I - (1-alpha)T is strictly invertible for alpha in (0,1); a vanishing
  // pivot can only mean the input violated the preconditions.
  if (lu.determinant() == 0.0)
    throw std::runtime_error("diffuse: singular system");
  Eigen::MatrixXd inv = lu.solve(
      Eigen::MatrixXd::Identity(n, n) * alpha);
  Matrix p(transition.rows, transition.cols);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = inv(i, j);
      // Exact zeros (disconnected pairs) pick up solver noise of either
      // sign; the result is entrywise nonnegative in exact arithmetic.
      if (v < 0.0 && v > -1e-12) v = 0.0;
      p(i, j) = v;
    }
  return p;
}

Matrix diffuse_series(const Matrix& transition, double alpha,
                      std::size_t terms) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("diffuse_series: alpha must lie in (0,1)");
  const std::size_t n = transition.rows;
  Matrix acc(n, n);
  Matrix power(n, n);
  for (std::size_t i = 0; i < n; ++i) power(i, i) = 1.0;  // T^0
  double coeff = alpha;
  for (std::size_t k = 0;; ++k) {
    for (std::size_t i = 0; i < n * n; ++i)
      acc.data[i] += coeff * power.data[i];
    if (k == terms) break;
    power = matmul(power, transition);
    coeff *= 1.0 - alpha;
  }
  return acc;
}

std::size_t series_terms_for_tolerance(double alpha, double tol,
                                       std::size_t min_terms) {
  // (1-alpha)^(terms+1) <= tol
  const double needed = std::log(tol) / std::log1p(-alpha) - 1.0;
  const auto terms = static_cast<std::size_t>(std::ceil(std::max(needed, 0.0)));
  return std::max(terms, min_terms);
}

DiffusionMatrix sparsify_topk(const Matrix& dense, std::size_t s,
                              double alpha) {
  if (s < 1) throw ValidationError("sparsify_topk: s must be >= 1");
  DiffusionMatrix dm;
  dm.alpha = alpha;
  dm.topk = s;
  dm.rows.resize(dense.rows);
  std::vector<std::pair<int, double>> entries;
  for (std::size_t v = 0; v < dense.rows; ++v) {
    entries.clear();
    for (std::size_t u = 0; u < dense.cols; ++u)
      if (dense(v, u) != 0.0)
        entries.emplace_back(static_cast<int>(u), dense(v, u));
    const std::size_t keep = std::min(s, entries.size());
    std::partial_sort(entries.begin(), entries.begin() + keep, entries.end(),
                      [](const auto& a, const auto& b) {
                        if (a.second != b.second) return a.second > b.second;
                        return a.first < b.first;
                      });
    entries.resize(keep);
    std::sort(entries.begin(), entries.end());  // neighbor-id order per row
    dm.rows[v] = entries;
  }
  return dm;
}

void save_diffusion(const std::filesystem::path& path,
                    const DiffusionMatrix& dm) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "# diffusion cache v1\n";
  os << "alpha " << format_double(dm.alpha) << "\n";
  os << "topk " << dm.topk << "\n";
  os << "nodes " << dm.rows.size() << "\n";
  for (std::size_t v = 0; v < dm.rows.size(); ++v)
    for (const auto& [u, w] : dm.rows[v])
      os << v << " " << u << " " << format_double(w) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

DiffusionMatrix load_diffusion(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open file: " + path.string());
  DiffusionMatrix dm;
  std::string line;
  std::size_t nodes = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "alpha") {
      ls >> dm.alpha;
    } else if (key == "topk") {
      ls >> dm.topk;
    } else if (key == "nodes") {
      ls >> nodes;
      dm.rows.assign(nodes, {});
      have_header = true;
    } else {
      if (!have_header)
        throw ValidationError("diffusion cache: missing header in " +
                              path.string());
      int v = std::stoi(key);
      int u;
      std::string w_tok;
      if (!(ls >> u >> w_tok))
        throw ValidationError("diffusion cache: malformed row in " +
                              path.string());
      if (v < 0 || static_cast<std::size_t>(v) >= nodes || u < 0 ||
          static_cast<std::size_t>(u) >= nodes)
        throw ValidationError("diffusion cache: node id out of range in " +
                              path.string());
      dm.rows[v].emplace_back(u, std::strtod(w_tok.c_str(), nullptr));
    }
  }
  if (!have_header)
    throw ValidationError("diffusion cache: missing header in " +
                          path.string());
  return dm;
}

DiffusionMatrix build_diffusion(const Graph& graph, double alpha,
                                std::size_t topk, std::size_t dense_limit) {
  Matrix t = transition_matrix(graph);
  Matrix p;
  if (graph.num_nodes <= dense_limit) {
    p = diffuse(t, alpha);
  } else {
    p = diffuse_series(t, alpha, series_terms_for_tolerance(alpha, 1e-8));
  }
  return sparsify_topk(p, topk, alpha);
}

}  // namespace graphda
