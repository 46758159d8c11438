#include "graphda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "graphda/errors.hpp"
#include "graphda/io.hpp"

namespace graphda {

double lr_schedule(double eta0, double progress) {
  return eta0 * std::pow(1.0 + 10.0 * progress, -0.75);
}

double lambda2_ramp(double progress) {
  return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0;
}

double lambda2_schedule(double lambda2_max, double progress) {
  return lambda2_max * lambda2_ramp(progress);
}

void AblationFlags::validate() const {
  if (disable_global_view && disable_local_view)
    throw ValidationError("ablation: -GV and -LV are mutually exclusive");
}

double TrainConfig::lambda2_at(double progress) const {
  if (lambda2_clamp) return std::min(lambda2_ramp(progress), lambda2_max);
  return lambda2_schedule(lambda2_max, progress);
}

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2_max < 0.0 || lambda3 < 0.0)
    throw ValidationError("config: loss coefficients must be nonnegative");
  if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (eta0 <= 0.0) throw ValidationError("config: eta0 must be positive");
  if (temperature <= 0.0)
    throw ValidationError("config: temperature must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("config: alpha must lie in (0,1)");
  if (topk < 1) throw ValidationError("config: topk must be >= 1");
  if (sample_sizes.empty())
    throw ValidationError("config: sample_sizes must not be empty");
  for (std::size_t s : sample_sizes)
    if (s < 1) throw ValidationError("config: sample sizes must be >= 1");
  if (layer_dims.size() != sample_sizes.size())
    throw ValidationError(
        "config: layer_dims and sample_sizes must have the same depth");
  if (weight_decay < 0.0)
    throw ValidationError("config: weight_decay must be nonnegative");
}

ModelParams ModelParams::init(std::size_t attr_dim, std::size_t num_classes,
                              const TrainConfig& config,
                              const AblationFlags& flags) {
  std::mt19937_64 rng(config.seed);
  ModelParams p;
  p.encoder = EncoderParams::init(attr_dim, config.layer_dims, rng);
  const std::size_t d = p.encoder.view_dim();
  p.discriminator = Tensor("W_b", glorot_uniform(d, d, d, d, rng));
  const std::size_t embed =
      flags.local_active() && flags.global_active() ? 2 * d : d;
  p.classifier =
      ClassifierParams::init(embed, num_classes, config.temperature, rng);
  return p;
}

std::size_t ModelParams::embed_dim(const AblationFlags& flags) const {
  const std::size_t d = encoder.view_dim();
  return flags.local_active() && flags.global_active() ? 2 * d : d;
}

std::vector<Tensor*> ModelParams::encoder_group(const AblationFlags& flags) {
  std::vector<Tensor*> out;
  if (flags.local_active())
    for (auto& t : encoder.local_weights) out.push_back(&t);
  if (flags.global_active())
    for (auto& t : encoder.global_weights) out.push_back(&t);
  if (flags.contrastive_active()) out.push_back(&discriminator);
  return out;
}

std::vector<Tensor*> ModelParams::classifier_group() {
  return {&classifier.weights};
}

std::vector<Tensor*> ModelParams::active_tensors(const AblationFlags& flags) {
  auto out = encoder_group(flags);
  out.push_back(&classifier.weights);
  return out;
}

std::vector<const Tensor*> ModelParams::all_tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& t : encoder.local_weights) out.push_back(&t);
  for (const auto& t : encoder.global_weights) out.push_back(&t);
  out.push_back(&discriminator);
  out.push_back(&classifier.weights);
  return out;
}

std::vector<Tensor*> ModelParams::all_tensors() {
  std::vector<Tensor*> out;
  for (auto& t : encoder.local_weights) out.push_back(&t);
  for (auto& t : encoder.global_weights) out.push_back(&t);
  out.push_back(&discriminator);
  out.push_back(&classifier.weights);
  return out;
}

void Adam::step(const std::vector<Tensor*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Tensor* p : params) {
    auto& mom = state_[p];
    if (mom.m.size() != p->value.size()) {
      mom.m = Matrix(p->value.rows, p->value.cols);
      mom.v = Matrix(p->value.rows, p->value.cols);
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data[i] + weight_decay_ * p->value.data[i];
      mom.m.data[i] = beta1_ * mom.m.data[i] + (1.0 - beta1_) * g;
      mom.v.data[i] = beta2_ * mom.v.data[i] + (1.0 - beta2_) * g * g;
      const double mhat = mom.m.data[i] / bc1;
      const double vhat = mom.v.data[i] / bc2;
      p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
    p->zero_grad();
  }
}

namespace {

std::vector<int> draw_batch(const std::vector<int>& pool, std::size_t size,
                            std::mt19937_64& rng) {
  std::vector<int> batch;
  std::sample(pool.begin(), pool.end(), std::back_inserter(batch),
              std::min(size, pool.size()), rng);
  return batch;
}

std::vector<int> labels_of(const Graph& g, const std::vector<int>& nodes) {
  std::vector<int> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = g.labels[nodes[i]];
  return out;
}

constexpr std::uint64_t kEvalSalt = 0x9e3779b97f4a7c15ull;

std::uint64_t eval_seed(std::uint64_t base, GraphSide side,
                        std::uint64_t chunk) {
  return base ^ kEvalSalt ^ (side == GraphSide::source ? 0x1000u : 0x2000u) ^
         (chunk * 0x100000001b3ull);
}

}  // namespace

StepInputs sample_step_inputs(const Graph& source, const Graph& target,
                              const TrainConfig& config,
                              const AblationFlags& flags,
                              std::mt19937_64& rng) {
  if (target.unlabeled_set.empty())
    throw ValidationError("train_step: target graph has no unlabeled nodes");

  StepInputs in;
  in.source_batch = draw_batch(source.labeled_set, config.batch_size, rng);
  in.target_batch = draw_batch(target.unlabeled_set, config.batch_size, rng);
  in.target_labeled = target.labeled_set;

  // Sub-seeds are drawn unconditionally so the stream does not depend on
  // which components are active; zeroed coefficients then reproduce a
  // plain run bit-for-bit.
  const std::uint64_t source_plan_seed = rng();
  const std::uint64_t target_plan_seed = rng();
  const std::uint64_t labeled_plan_seed = rng();
  const std::uint64_t source_corrupt_seed = rng();
  const std::uint64_t target_corrupt_seed = rng();

  if (flags.local_active()) {
    in.source_plan = sample_neighborhoods(source, in.source_batch,
                                          config.sample_sizes,
                                          source_plan_seed);
    in.target_plan = sample_neighborhoods(target, in.target_batch,
                                          config.sample_sizes,
                                          target_plan_seed);
    if (!in.target_labeled.empty())
      in.target_labeled_plan = sample_neighborhoods(target, in.target_labeled,
                                                    config.sample_sizes,
                                                    labeled_plan_seed);
  }
  if (flags.contrastive_active()) {
    in.source_corrupted = corrupt(source, source_corrupt_seed);
    in.target_corrupted = corrupt(target, target_corrupt_seed);
  }
  return in;
}

namespace {

struct ViewPair {
  Var local;
  Var global;
  bool has_local = false;
  bool has_global = false;

  Var combined() const {
    if (has_local && has_global) return embed(local, global);
    return has_local ? local : global;
  }
};

ViewPair encode_views(Tape& tape, const Graph& graph,
                      const DiffusionMatrix& diffusion,
                      const std::vector<int>& batch, const SamplePlan& plan,
                      ModelParams& params, const AblationFlags& flags,
                      const Matrix* attr_override = nullptr) {
  ViewPair v;
  if (flags.local_active()) {
    v.local = encode_local(tape, graph, plan, params.encoder, attr_override);
    v.has_local = true;
  }
  if (flags.global_active()) {
    v.global = encode_global(tape, graph, diffusion, batch, params.encoder,
                             attr_override);
    v.has_global = true;
  }
  return v;
}

}  // namespace

StepLosses build_step_losses(Tape& tape, const Graph& source,
                             const Graph& target,
                             const DiffusionMatrix& source_diffusion,
                             const DiffusionMatrix& target_diffusion,
                             ModelParams& params, const StepInputs& inputs,
                             const TrainConfig& config,
                             const AblationFlags& flags,
                             double entropy_grad_factor) {
  (void)config;
  StepLosses losses;
  Var w_c = tape.param(params.classifier.weights);
  const double temperature = params.classifier.temperature;

  ViewPair src = encode_views(tape, source, source_diffusion,
                              inputs.source_batch, inputs.source_plan, params,
                              flags);
  Var src_probs = predict(src.combined(), w_c, temperature);
  losses.ce = cross_entropy(src_probs, labels_of(source, inputs.source_batch));

  if (!inputs.target_labeled.empty()) {
    ViewPair tl = encode_views(tape, target, target_diffusion,
                               inputs.target_labeled,
                               inputs.target_labeled_plan, params, flags);
    Var tl_probs = predict(tl.combined(), w_c, temperature);
    losses.ce = add(losses.ce,
                    cross_entropy(tl_probs,
                                  labels_of(target, inputs.target_labeled)));
  }

  ViewPair tgt = encode_views(tape, target, target_diffusion,
                              inputs.target_batch, inputs.target_plan, params,
                              flags);

  if (flags.contrastive_active()) {
    Var w_b = tape.param(params.discriminator);
    ViewPair src_neg = encode_views(tape, source, source_diffusion,
                                    inputs.source_batch, inputs.source_plan,
                                    params, flags, &inputs.source_corrupted);
    ViewPair tgt_neg = encode_views(tape, target, target_diffusion,
                                    inputs.target_batch, inputs.target_plan,
                                    params, flags, &inputs.target_corrupted);
    Var cl_source = contrastive_loss(
        make_contrastive_batch(src.local, src.global, src_neg.local,
                               src_neg.global),
        w_b);
    Var cl_target = contrastive_loss(
        make_contrastive_batch(tgt.local, tgt.global, tgt_neg.local,
                               tgt_neg.global),
        w_b);
    losses.cl = add(cl_source, cl_target);
    losses.has_cl = true;
  }

  // Entropy path: forward-identity scale so one backward pass sends
  // -lambda3 * dEN to the classifier and +lambda2 * dEN to the encoders.
  Var scaled = grad_scale(tgt.combined(), entropy_grad_factor);
  Var tgt_probs = predict(scaled, w_c, temperature);
  losses.en = entropy_loss(tgt_probs);
  losses.has_en = true;
  return losses;
}

Trainer::Trainer(const Graph& source, const Graph& target,
                 const DiffusionMatrix& source_diffusion,
                 const DiffusionMatrix& target_diffusion, TrainConfig config,
                 AblationFlags flags)
    : source_(source),
      target_(target),
      source_diffusion_(source_diffusion),
      target_diffusion_(target_diffusion),
      config_(std::move(config)),
      flags_(flags),
      params_(ModelParams::init(source.attributes.cols, source.num_classes,
                                config_, flags_)),
      adam_(config_.weight_decay),
      rng_(config_.seed) {
  config_.validate();
  flags_.validate();
  if (source.attributes.cols != target.attributes.cols)
    throw ValidationError("trainer: graphs disagree on attribute width");
  if (source.num_classes != target.num_classes)
    throw ValidationError("trainer: graphs disagree on class count");
  iters_per_epoch_ =
      config_.iters_per_epoch > 0
          ? config_.iters_per_epoch
          : (source.num_nodes + config_.batch_size - 1) / config_.batch_size;
  total_steps_ = iters_per_epoch_ * config_.epochs;
}

double Trainer::progress() const {
  return total_steps_ == 0
             ? 0.0
             : static_cast<double>(completed_steps_) /
                   static_cast<double>(total_steps_);
}

StepMetrics Trainer::train_step() {
  const double p = progress();
  const double lr = lr_schedule(config_.eta0, p);
  const bool adversarial =
      !flags_.disable_domain_adaptation && config_.lambda3 > 0.0;
  const double lambda2 = adversarial ? config_.lambda2_at(p) : 0.0;
  const double factor =
      adversarial ? -lambda2 / config_.lambda3 : 0.0;

  StepInputs inputs =
      sample_step_inputs(source_, target_, config_, flags_, rng_);
  Tape tape;
  StepLosses losses =
      build_step_losses(tape, source_, target_, source_diffusion_,
                        target_diffusion_, params_, inputs, config_, flags_,
                        factor);

  Var total = losses.ce;
  if (losses.has_cl) total = add(total, scalar_mul(losses.cl, config_.lambda1));
  if (adversarial)
    total = add(total, scalar_mul(losses.en, -config_.lambda3));
  tape.backward(total);
  adam_.step(params_.active_tensors(flags_), lr);

  StepMetrics m;
  m.epoch = completed_steps_ / iters_per_epoch_ + 1;
  m.iter = completed_steps_ % iters_per_epoch_ + 1;
  m.ce = losses.ce.scalar();
  m.cl = losses.has_cl ? losses.cl.scalar() : 0.0;
  m.en = losses.en.scalar();
  m.overall = m.ce + config_.lambda1 * m.cl + lambda2 * m.en;
  m.lr = lr;
  m.lambda2 = lambda2;
  ++completed_steps_;
  return m;
}

const Graph& Trainer::graph_of(GraphSide side) const {
  return side == GraphSide::source ? source_ : target_;
}

const DiffusionMatrix& Trainer::diffusion_of(GraphSide side) const {
  return side == GraphSide::source ? source_diffusion_ : target_diffusion_;
}

Matrix Trainer::node_embeddings(GraphSide side, const std::vector<int>& nodes) {
  const Graph& graph = graph_of(side);
  const DiffusionMatrix& diffusion = diffusion_of(side);
  Matrix out(nodes.size(), params_.embed_dim(flags_));
  const std::size_t chunk_size = std::max<std::size_t>(config_.batch_size, 1);
  for (std::size_t start = 0, chunk = 0; start < nodes.size();
       start += chunk_size, ++chunk) {
    const std::size_t end = std::min(start + chunk_size, nodes.size());
    std::vector<int> batch(nodes.begin() + start, nodes.begin() + end);
    Tape tape;
    SamplePlan plan;
    if (flags_.local_active())
      plan = sample_neighborhoods(graph, batch, config_.sample_sizes,
                                  eval_seed(config_.seed, side, chunk));
    ViewPair views = encode_views(tape, graph, diffusion, batch, plan, params_,
                                  flags_);
    const Matrix& e = views.combined().value();
    for (std::size_t i = 0; i < e.rows; ++i)
      std::copy(e.row_ptr(i), e.row_ptr(i) + e.cols, out.row_ptr(start + i));
  }
  return out;
}

std::vector<double> Trainer::prediction_entropies(
    GraphSide side, const std::vector<int>& nodes) {
  Matrix embeddings = node_embeddings(side, nodes);
  Tape tape;
  Var probs = predict(tape.input(std::move(embeddings)),
                      tape.param(params_.classifier.weights),
                      params_.classifier.temperature);
  const Matrix& pv = probs.value();
  std::vector<double> entropy(pv.rows, 0.0);
  for (std::size_t i = 0; i < pv.rows; ++i)
    for (std::size_t j = 0; j < pv.cols; ++j)
      entropy[i] -= pv(i, j) * std::log(std::max(pv(i, j), 1e-12));
  return entropy;
}

EvalResult Trainer::evaluate() {
  const auto& unlabeled = target_.unlabeled_set;
  if (unlabeled.empty())
    throw ValidationError("evaluate: target graph has no unlabeled nodes");
  for (int v : unlabeled)
    if (target_.labels[v] == kUnlabeled)
      throw ValidationError("evaluate: unlabeled target node " +
                            std::to_string(v) + " lacks ground truth");

  Matrix embeddings = node_embeddings(GraphSide::target, unlabeled);
  Tape tape;
  Var probs = predict(tape.input(std::move(embeddings)),
                      tape.param(params_.classifier.weights),
                      params_.classifier.temperature);
  const Matrix& pv = probs.value();

  EvalResult r;
  r.per_class_correct.assign(target_.num_classes, 0);
  r.per_class_total.assign(target_.num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pv.rows; ++i) {
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < pv.cols; ++j)
      if (pv(i, j) > pv(i, argmax)) argmax = j;  // ties keep the lowest id
    const int truth = target_.labels[unlabeled[i]];
    r.per_class_total[truth]++;
    if (static_cast<int>(argmax) == truth) {
      r.per_class_correct[truth]++;
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(pv.rows);
  return r;
}

DivergenceDiagnostic divergence_diagnostic(
    const std::vector<double>& source_entropies,
    const std::vector<double>& target_entropies, double gamma) {
  auto frac_at_least = [gamma](const std::vector<double>& h) {
    if (h.empty()) return 0.0;
    std::size_t count = 0;
    for (double v : h)
      if (v >= gamma) ++count;
    return static_cast<double>(count) / static_cast<double>(h.size());
  };
  DivergenceDiagnostic d;
  d.source_frac = frac_at_least(source_entropies);
  d.target_frac = frac_at_least(target_entropies);
  d.bound = 2.0 * d.target_frac;
  return d;
}

DivergenceDiagnostic Trainer::diagnostic(double gamma) {
  auto capped = [this](const std::vector<int>& pool,
                       std::uint64_t salt) {
    if (config_.diag_cap == 0 || pool.size() <= config_.diag_cap) return pool;
    std::vector<int> ids = pool;
    std::mt19937_64 rng(config_.seed ^ salt);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(config_.diag_cap);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  std::vector<int> all_source(source_.num_nodes);
  for (std::size_t v = 0; v < source_.num_nodes; ++v)
    all_source[v] = static_cast<int>(v);
  const auto source_nodes = capped(all_source, 0xd1a6u);
  const auto target_nodes = capped(target_.unlabeled_set, 0xd1a7u);
  return divergence_diagnostic(
      prediction_entropies(GraphSide::source, source_nodes),
      prediction_entropies(GraphSide::target, target_nodes), gamma);
}

ExperimentReport run_experiment(const Graph& source, const Graph& target,
                                const DiffusionMatrix& source_diffusion,
                                const DiffusionMatrix& target_diffusion,
                                const TrainConfig& config,
                                const AblationFlags& flags,
                                const ExperimentSinks* sinks) {
  config.validate();
  flags.validate();
  Graph partitioned = target.with_label_partition(
      select_labeled_per_class(target, config.n_labeled, config.seed));

  Trainer trainer(source, partitioned, source_diffusion, target_diffusion,
                  config, flags);

  const double gamma = std::log(static_cast<double>(source.num_classes)) / 2.0;
  ExperimentReport report;
  auto checkpoint_now = [&]() {
    if (sinks != nullptr && !sinks->checkpoint.empty()) {
      const ModelParams& p = trainer.params();
      save_checkpoint(sinks->checkpoint, p.all_tensors());
    }
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    for (std::size_t it = 0; it < trainer.iters_per_epoch(); ++it) {
      StepMetrics m = trainer.train_step();
      row.ce += m.ce;
      row.cl += m.cl;
      row.en += m.en;
      row.overall += m.overall;
      report.steps.push_back(m);
    }
    const auto iters = static_cast<double>(trainer.iters_per_epoch());
    row.ce /= iters;
    row.cl /= iters;
    row.en /= iters;
    row.overall /= iters;
    row.diag = trainer.diagnostic(gamma);
    report.epochs.push_back(row);
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
      checkpoint_now();
  }

  report.final_eval = trainer.evaluate();
  checkpoint_now();
  if (sinks != nullptr) {
    if (!sinks->report_csv.empty())
      write_report_csv(sinks->report_csv, report.steps);
    auto dump = [&trainer](const std::filesystem::path& path, GraphSide side,
                           const Graph& g) {
      if (path.empty()) return;
      std::vector<int> nodes(g.num_nodes);
      for (std::size_t v = 0; v < g.num_nodes; ++v)
        nodes[v] = static_cast<int>(v);
      write_embeddings_csv(path, nodes,
                           trainer.node_embeddings(side, nodes));
    };
    dump(sinks->embeddings_source_csv, GraphSide::source, source);
    dump(sinks->embeddings_target_csv, GraphSide::target, partitioned);
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<StepMetrics>& steps) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "epoch,iter,L_CE,L_CL,L_EN,overall,lr,lambda2\n";
  for (const auto& m : steps)
    os << m.epoch << "," << m.iter << "," << format_double(m.ce) << ","
       << format_double(m.cl) << "," << format_double(m.en) << ","
       << format_double(m.overall) << "," << format_double(m.lr) << ","
       << format_double(m.lambda2) << "\n";
}

void write_embeddings_csv(const std::filesystem::path& path,
                          const std::vector<int>& node_ids,
                          const Matrix& embeddings) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "node_id";
  for (std::size_t j = 1; j <= embeddings.cols; ++j) os << ",v_" << j;
  os << "\n";
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    os << node_ids[i];
    for (std::size_t j = 0; j < embeddings.cols; ++j)
      os << "," << format_double(embeddings(i, j));
    os << "\n";
  }
}

}  // namespace graphda
