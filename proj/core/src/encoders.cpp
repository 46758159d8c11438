#include "graphda/encoders.hpp"

#include <algorithm>
#include <unordered_map>

#include "graphda/errors.hpp"

namespace graphda {

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& t : local_weights) out.push_back(&t);
  for (auto& t : global_weights) out.push_back(&t);
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& t : local_weights) out.push_back(&t);
  for (const auto& t : global_weights) out.push_back(&t);
  return out;
}

EncoderParams EncoderParams::init(std::size_t attr_dim,
                                  const std::vector<std::size_t>& dims,
                                  std::mt19937_64& rng) {
  if (dims.empty())
    throw ValidationError("encoder: need at least one layer dimension");
  EncoderParams p;
  std::size_t prev = attr_dim;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const std::size_t out = dims[k];
    p.local_weights.emplace_back(
        "W_A" + std::to_string(k + 1),
        glorot_uniform(out, 2 * prev, 2 * prev, out, rng));
    p.global_weights.emplace_back(
        "W_P" + std::to_string(k + 1),
        glorot_uniform(out, prev, prev, out, rng));
    prev = out;
  }
  return p;
}

SamplePlan sample_neighborhoods(const Graph& graph,
                                const std::vector<int>& batch,
                                const std::vector<std::size_t>& sizes,
                                std::uint64_t seed) {
  for (int v : batch)
    if (v < 0 || static_cast<std::size_t>(v) >= graph.num_nodes)
      throw ValidationError("sample_neighborhoods: batch node out of range");

  const std::size_t depth = sizes.size();
  SamplePlan plan;
  plan.batch = batch;
  plan.sizes = sizes;
  plan.layer_nodes.resize(depth + 1);
  plan.neighbor_positions.resize(depth);
  plan.self_positions.resize(depth);
  plan.layer_nodes[depth] = batch;

  std::mt19937_64 rng(seed);

  // Expand from the batch down to raw attributes: the depth-k step consumes
  // lists of size s_k drawn for every node whose step-k representation is
  // required.
  for (std::size_t k = depth; k >= 1; --k) {
    const auto& level = plan.layer_nodes[k];
    const std::size_t s = sizes[k - 1];
    auto& lists = plan.neighbor_positions[k - 1];
    lists.resize(level.size());

    std::vector<int> prev_nodes;
    std::unordered_map<int, int> pos_of;
    auto position = [&](int node) {
      auto [it, inserted] = pos_of.try_emplace(node,
                                               static_cast<int>(prev_nodes.size()));
      if (inserted) prev_nodes.push_back(node);
      return it->second;
    };
    for (int v : level) position(v);  // skip-connection rows come first

    std::vector<int> sampled;
    for (std::size_t i = 0; i < level.size(); ++i) {
      const int v = level[i];
      const auto& nb = graph.neighbors(v);
      sampled.clear();
      if (nb.empty()) {
        sampled.assign(s, v);  // isolated node falls back to itself
      } else if (nb.size() >= s) {
        std::sample(nb.begin(), nb.end(), std::back_inserter(sampled), s, rng);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
        for (std::size_t j = 0; j < s; ++j) sampled.push_back(nb[pick(rng)]);
      }
      lists[i].reserve(s);
      for (int u : sampled) lists[i].push_back(position(u));
    }
    auto& selves = plan.self_positions[k - 1];
    selves.resize(level.size());
    for (std::size_t i = 0; i < level.size(); ++i) selves[i] = pos_of[level[i]];
    plan.layer_nodes[k - 1] = std::move(prev_nodes);
  }
  return plan;
}

namespace {

Var attribute_rows(Tape& tape, const Graph& graph,
                   const std::vector<int>& nodes, const Matrix* override_x) {
  const Matrix& x = override_x != nullptr ? *override_x : graph.attributes;
  if (override_x != nullptr &&
      (x.rows != graph.num_nodes || x.cols != graph.attributes.cols))
    throw ValidationError("encode: attribute override has wrong shape");
  Matrix rows(nodes.size(), x.cols);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    std::copy(x.row_ptr(nodes[i]), x.row_ptr(nodes[i]) + x.cols,
              rows.row_ptr(i));
  return tape.input(std::move(rows));
}

}  // namespace

Var encode_local(Tape& tape, const Graph& graph, const SamplePlan& plan,
                 EncoderParams& params, const Matrix* attr_override) {
  if (plan.depth() != params.depth())
    throw ValidationError("encode_local: plan depth differs from encoder depth");
  if (params.local_weights[0].value.cols != 2 * graph.attributes.cols)
    throw ValidationError(
        "encode_local: layer-1 weights do not match attribute width");

  Var h = attribute_rows(tape, graph, plan.layer_nodes[0], attr_override);
  for (std::size_t k = 1; k <= plan.depth(); ++k) {
    const auto& lists = plan.neighbor_positions[k - 1];
    const double w = 1.0 / static_cast<double>(plan.sizes[k - 1]);
    std::vector<std::vector<std::pair<int, double>>> mean_lists(lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) {
      mean_lists[i].reserve(lists[i].size());
      for (int pos : lists[i]) mean_lists[i].emplace_back(pos, w);
    }
    Var neighborhood = gather_weighted_sum(h, std::move(mean_lists));
    Var self = gather_rows(h, plan.self_positions[k - 1]);
    Var cat = concat_rows(self, neighborhood);
    Var wk = tape.param(params.local_weights[k - 1]);
    h = relu(matmul(cat, transpose(wk)));
  }
  return h;
}

Var encode_global(Tape& tape, const Graph& graph,
                  const DiffusionMatrix& diffusion,
                  const std::vector<int>& batch, EncoderParams& params,
                  const Matrix* attr_override) {
  if (diffusion.num_nodes() != graph.num_nodes)
    throw ValidationError("encode_global: diffusion built for another graph");
  if (params.global_weights[0].value.cols != graph.attributes.cols)
    throw ValidationError(
        "encode_global: layer-1 weights do not match attribute width");

  const std::size_t depth = params.depth();
  // Layered expansion over the diffusion neighbor lists; deterministic,
  // no sampling beyond the stored top-s structure.
  std::vector<std::vector<int>> layer_nodes(depth + 1);
  std::vector<std::vector<std::vector<std::pair<int, double>>>> layer_lists(
      depth);
  layer_nodes[depth] = batch;
  for (std::size_t k = depth; k >= 1; --k) {
    const auto& level = layer_nodes[k];
    std::vector<int> prev_nodes;
    std::unordered_map<int, int> pos_of;
    auto& lists = layer_lists[k - 1];
    lists.resize(level.size());
    for (std::size_t i = 0; i < level.size(); ++i) {
      const int v = level[i];
      if (v < 0 || static_cast<std::size_t>(v) >= graph.num_nodes)
        throw ValidationError("encode_global: batch node out of range");
      for (const auto& [u, w] : diffusion.rows[v]) {
        auto [it, inserted] =
            pos_of.try_emplace(u, static_cast<int>(prev_nodes.size()));
        if (inserted) prev_nodes.push_back(u);
        lists[i].emplace_back(it->second, w);
      }
    }
    layer_nodes[k - 1] = std::move(prev_nodes);
  }

  Var h = attribute_rows(tape, graph, layer_nodes[0], attr_override);
  for (std::size_t k = 1; k <= depth; ++k) {
    Var agg = gather_weighted_sum(h, std::move(layer_lists[k - 1]));
    Var wk = tape.param(params.global_weights[k - 1]);
    h = relu(matmul(agg, transpose(wk)));
  }
  return h;
}

Var embed(Var local, Var global) {
  if (local.rows() != global.rows())
    throw ValidationError("embed: batch row counts differ between views");
  return concat_rows(local, global);
}

}  // namespace graphda
