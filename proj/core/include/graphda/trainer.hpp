#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "graphda/classifier.hpp"
#include "graphda/contrastive.hpp"
#include "graphda/diffusion.hpp"
#include "graphda/encoders.hpp"
#include "graphda/graph.hpp"

namespace graphda {

// eta0 * (1 + 10p)^(-0.75)
double lr_schedule(double eta0, double progress);
// Unit ramp 2 / (1 + exp(-10p)) - 1, rising from 0 towards 1.
double lambda2_ramp(double progress);
// lambda2_max * ramp(p)
double lambda2_schedule(double lambda2_max, double progress);

struct AblationFlags {
  bool disable_contrastive = false;       // -CL
  bool disable_global_view = false;       // -GV
  bool disable_local_view = false;        // -LV
  bool disable_domain_adaptation = false; // -DA

  // A single active view leaves nothing to contrast.
  bool contrastive_active() const {
    return !disable_contrastive && !disable_global_view && !disable_local_view;
  }
  bool local_active() const { return !disable_local_view; }
  bool global_active() const { return !disable_global_view; }
  void validate() const;
};

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2_max = 0.1;
  double lambda3 = 1.0;
  double eta0 = 0.01;
  std::size_t epochs = 30;
  std::size_t iters_per_epoch = 0;  // 0: ceil(source nodes / batch_size)
  std::size_t batch_size = 128;
  double weight_decay = 5e-5;
  double temperature = 20.0;
  std::vector<std::size_t> sample_sizes = {20, 20};
  std::vector<std::size_t> layer_dims = {1024, 64};
  double alpha = 0.1;
  std::size_t topk = 20;
  std::size_t n_labeled = 5;  // labeled target nodes per class
  std::uint64_t seed = 1;
  // false: lambda2(p) = lambda2_max * ramp(p); true: min(ramp(p), lambda2_max)
  bool lambda2_clamp = false;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes at the end only
  std::size_t diag_cap = 2048;       // max nodes per side in the diagnostic

  double lambda2_at(double progress) const;
  void validate() const;
};

// All trainable state. Both encoder views are always allocated so that a
// checkpoint is self-contained; ablations only exclude tensors from the
// optimizer groups.
struct ModelParams {
  EncoderParams encoder;
  Tensor discriminator;  // W_b, square over the per-view width
  ClassifierParams classifier;

  static ModelParams init(std::size_t attr_dim, std::size_t num_classes,
                          const TrainConfig& config,
                          const AblationFlags& flags);

  std::size_t embed_dim(const AblationFlags& flags) const;
  std::vector<Tensor*> encoder_group(const AblationFlags& flags);  // θ_g
  std::vector<Tensor*> classifier_group();                         // θ_c
  std::vector<Tensor*> active_tensors(const AblationFlags& flags);
  std::vector<const Tensor*> all_tensors() const;
  std::vector<Tensor*> all_tensors();
};

// Adam with the weight-decay term added to the gradient before the moment
// updates. step() consumes and clears the gradients it applies.
class Adam {
 public:
  explicit Adam(double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor*>& params, double lr);

 private:
  struct Moments {
    Matrix m, v;
  };
  double weight_decay_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<const Tensor*, Moments> state_;
};

// Deterministic per-step draws: batches, neighborhood plans, corruption.
struct StepInputs {
  std::vector<int> source_batch;
  std::vector<int> target_batch;    // drawn from the unlabeled target set
  std::vector<int> target_labeled;  // the full labeled target set
  SamplePlan source_plan;
  SamplePlan target_plan;
  SamplePlan target_labeled_plan;
  Matrix source_corrupted;  // allocated only when contrastive is active
  Matrix target_corrupted;
};

StepInputs sample_step_inputs(const Graph& source, const Graph& target,
                              const TrainConfig& config,
                              const AblationFlags& flags,
                              std::mt19937_64& rng);

struct StepLosses {
  Var ce;
  Var cl;  // valid when has_cl
  Var en;  // valid when has_en; encoder gradients pass through grad_scale
  bool has_cl = false;
  bool has_en = false;
};

// Records one step's forward pass. entropy_grad_factor is applied between
// the target embeddings and the classifier on the entropy path; the trainer
// passes -lambda2/lambda3 so one backward over
// ce + lambda1*cl - lambda3*en routes Eq.-16 gradients to the encoders and
// Eq.-17 gradients to the classifier.
StepLosses build_step_losses(Tape& tape, const Graph& source,
                             const Graph& target,
                             const DiffusionMatrix& source_diffusion,
                             const DiffusionMatrix& target_diffusion,
                             ModelParams& params, const StepInputs& inputs,
                             const TrainConfig& config,
                             const AblationFlags& flags,
                             double entropy_grad_factor);

struct StepMetrics {
  std::size_t epoch = 0;  // 1-based
  std::size_t iter = 0;   // 1-based within the epoch
  double ce = 0.0;
  double cl = 0.0;
  double en = 0.0;
  double overall = 0.0;  // encoder objective: ce + l1*cl + l2*en
  double lr = 0.0;
  double lambda2 = 0.0;
};

struct DivergenceDiagnostic {
  double source_frac = 0.0;
  double target_frac = 0.0;
  double bound = 0.0;  // 2 * target_frac
};

// Fractions Pr[H >= gamma] per domain and the divergence bound.
DivergenceDiagnostic divergence_diagnostic(
    const std::vector<double>& source_entropies,
    const std::vector<double>& target_entropies, double gamma);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> per_class_correct;
  std::vector<std::size_t> per_class_total;
};

class Trainer {
 public:
  // target must already carry its labeled/unlabeled partition.
  Trainer(const Graph& source, const Graph& target,
          const DiffusionMatrix& source_diffusion,
          const DiffusionMatrix& target_diffusion, TrainConfig config,
          AblationFlags flags = {});

  StepMetrics train_step();

  // Accuracy over the unlabeled target nodes; argmax ties resolve to the
  // lowest class id. Requires ground-truth labels on the unlabeled set.
  EvalResult evaluate();

  // Forward-only embeddings / prediction entropies with deterministic
  // evaluation-time sampling.
  Matrix node_embeddings(GraphSide side, const std::vector<int>& nodes);
  std::vector<double> prediction_entropies(GraphSide side,
                                           const std::vector<int>& nodes);
  DivergenceDiagnostic diagnostic(double gamma);

  ModelParams& params() { return params_; }
  const TrainConfig& config() const { return config_; }
  const AblationFlags& flags() const { return flags_; }
  std::size_t iters_per_epoch() const { return iters_per_epoch_; }
  std::size_t total_steps() const { return total_steps_; }
  double progress() const;

 private:
  const Graph& source_;
  const Graph& target_;
  const DiffusionMatrix& source_diffusion_;
  const DiffusionMatrix& target_diffusion_;
  TrainConfig config_;
  AblationFlags flags_;
  ModelParams params_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::size_t iters_per_epoch_ = 0;
  std::size_t total_steps_ = 0;
  std::size_t completed_steps_ = 0;

  const Graph& graph_of(GraphSide side) const;
  const DiffusionMatrix& diffusion_of(GraphSide side) const;
};

struct EpochRow {
  std::size_t epoch = 0;
  double ce = 0.0, cl = 0.0, en = 0.0, overall = 0.0;  // means over the epoch
  DivergenceDiagnostic diag;
};

struct ExperimentReport {
  std::vector<StepMetrics> steps;
  std::vector<EpochRow> epochs;
  EvalResult final_eval;
};

// Optional file outputs of run_experiment; empty paths are skipped.
struct ExperimentSinks {
  std::filesystem::path report_csv;
  std::filesystem::path checkpoint;
  std::filesystem::path embeddings_source_csv;
  std::filesystem::path embeddings_target_csv;
};

// Full Algorithm-1 style run: applies the labeled-target selection, trains
// for the configured epochs, evaluates, and emits the requested artifacts.
// The target graph is taken before label selection (all nodes unlabeled).
ExperimentReport run_experiment(const Graph& source, const Graph& target,
                                const DiffusionMatrix& source_diffusion,
                                const DiffusionMatrix& target_diffusion,
                                const TrainConfig& config,
                                const AblationFlags& flags,
                                const ExperimentSinks* sinks = nullptr);

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<StepMetrics>& steps);
void write_embeddings_csv(const std::filesystem::path& path,
                          const std::vector<int>& node_ids,
                          const Matrix& embeddings);

}  // namespace graphda
