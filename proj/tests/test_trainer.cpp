#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "graphda/config.hpp"
#include "graphda/errors.hpp"
#include "graphda/synth.hpp"
#include "graphda/trainer.hpp"
#include "testutil.hpp"

using namespace graphda;

namespace {

struct SmallWorld {
  SynthPair pair;
  Graph target;  // partitioned
  DiffusionMatrix ds, dt;
  TrainConfig config;

  explicit SmallWorld(std::uint64_t seed = 3, double shift = 0.3,
                      std::size_t n_labeled = 2) {
    SbmSpec spec;
    spec.num_nodes = 120;
    spec.num_classes = 3;
    spec.intra_prob = 0.08;
    spec.inter_prob = 0.02;
    spec.attr_dim = 24;
    spec.domain_shift = shift;
    spec.seed = seed;
    pair = generate_pair(spec);

    config.batch_size = 24;
    config.sample_sizes = {3, 3};
    config.layer_dims = {16, 8};
    config.topk = 5;
    config.alpha = 0.1;
    config.epochs = 2;
    config.n_labeled = n_labeled;
    config.temperature = 10.0;
    config.seed = seed;
    config.diag_cap = 0;

    ds = build_diffusion(pair.source, config.alpha, config.topk);
    dt = build_diffusion(pair.target, config.alpha, config.topk);
    target = pair.target.with_label_partition(
        select_labeled_per_class(pair.target, config.n_labeled, config.seed));
  }
};

std::vector<Matrix> snapshot_values(const std::vector<Tensor*>& tensors) {
  std::vector<Matrix> out;
  for (auto* t : tensors) out.push_back(t->value);
  return out;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  CHECK(lr_schedule(0.01, 0.0) == 0.01);
  CHECK(lr_schedule(0.01, 1.0) ==
        doctest::Approx(0.01 * std::pow(11.0, -0.75)).epsilon(1e-15));
  double prev = lr_schedule(0.01, 0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double value = lr_schedule(0.01, i / 1000.0);
    CHECK(value <= prev);
    prev = value;
  }
}

TEST_CASE("lambda2 schedule") {
  CHECK(lambda2_schedule(0.1, 0.0) == 0.0);
  const double at_one = 0.1 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0);
  CHECK(lambda2_schedule(0.1, 1.0) == doctest::Approx(at_one).epsilon(1e-15));
  CHECK(lambda2_schedule(0.1, 1.0) ==
        doctest::Approx(0.0999909).epsilon(1e-5));
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double value = lambda2_schedule(0.1, i / 1000.0);
    CHECK(value >= prev);
    CHECK(value <= 0.1);
    prev = value;
  }
}

TEST_CASE("lambda2 clamp mode caps the unit ramp") {
  TrainConfig c;
  c.lambda2_max = 0.1;
  c.lambda2_clamp = true;
  CHECK(c.lambda2_at(0.0) == 0.0);
  CHECK(c.lambda2_at(1.0) == doctest::Approx(0.1).epsilon(1e-12));
  // Mid-ramp: ramp(0.05) ~ 0.245 > 0.1, so the clamp binds early.
  CHECK(c.lambda2_at(0.05) == doctest::Approx(0.1).epsilon(1e-12));
  c.lambda2_clamp = false;
  CHECK(c.lambda2_at(0.05) < 0.1);
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor w("w", Matrix(1, 1, 10.0));
  Adam adam(0.0);
  for (int i = 0; i < 3000; ++i) {
    Tape tape;
    Var delta = scalar_affine(tape.param(w), 1.0, -3.0);
    tape.backward(sum_all(hadamard(delta, delta)));
    // Adam hovers within ~lr of the optimum; shrink the步 as it closes in.
    adam.step({&w}, i < 2000 ? 0.01 : 0.001);
  }
  CHECK(w.value(0, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("training metrics are deterministic for a fixed seed") {
  SmallWorld w;
  Trainer a(w.pair.source, w.target, w.ds, w.dt, w.config);
  Trainer b(w.pair.source, w.target, w.ds, w.dt, w.config);
  for (int i = 0; i < 6; ++i) {
    StepMetrics ma = a.train_step();
    StepMetrics mb = b.train_step();
    CHECK(ma.ce == mb.ce);
    CHECK(ma.cl == mb.cl);
    CHECK(ma.en == mb.en);
    CHECK(ma.overall == mb.overall);
  }
}

TEST_CASE("zeroed coefficients reproduce plain supervised training") {
  SmallWorld w;
  TrainConfig zeroed = w.config;
  zeroed.lambda1 = 0.0;
  zeroed.lambda2_max = 0.0;
  zeroed.lambda3 = 0.0;
  AblationFlags stripped;
  stripped.disable_contrastive = true;
  stripped.disable_domain_adaptation = true;

  Trainer a(w.pair.source, w.target, w.ds, w.dt, zeroed);
  Trainer b(w.pair.source, w.target, w.ds, w.dt, w.config, stripped);
  for (int i = 0; i < 5; ++i) {
    a.train_step();
    b.train_step();
  }
  // Identical trajectories for every tensor that drives predictions
  // (W_b only sees weight decay in the zeroed run).
  auto check_equal = [](const Tensor& x, const Tensor& y) {
    CHECK(max_abs_diff(x.value, y.value) == 0.0);
  };
  for (std::size_t k = 0; k < a.params().encoder.local_weights.size(); ++k) {
    check_equal(a.params().encoder.local_weights[k],
                b.params().encoder.local_weights[k]);
    check_equal(a.params().encoder.global_weights[k],
                b.params().encoder.global_weights[k]);
  }
  check_equal(a.params().classifier.weights, b.params().classifier.weights);
}

TEST_CASE("single-backward routing equals the two-pass oracle") {
  SmallWorld w;
  const double lambda1 = 0.1, lambda2 = 0.07, lambda3 = 1.3;
  ModelParams params = ModelParams::init(w.pair.source.attributes.cols,
                                         w.pair.source.num_classes, w.config,
                                         {});
  std::mt19937_64 rng(17);
  StepInputs inputs =
      sample_step_inputs(w.pair.source, w.target, w.config, {}, rng);

  // Single backward with the gradient-reversal factor on the entropy path.
  for (auto* t : params.all_tensors()) t->zero_grad();
  {
    Tape tape;
    StepLosses losses =
        build_step_losses(tape, w.pair.source, w.target, w.ds, w.dt, params,
                          inputs, w.config, {}, -lambda2 / lambda3);
    Var total = add(add(losses.ce, scalar_mul(losses.cl, lambda1)),
                    scalar_mul(losses.en, -lambda3));
    tape.backward(total);
  }
  std::vector<Matrix> routed;
  for (auto* t : params.all_tensors()) {
    routed.push_back(t->grad);
    t->zero_grad();
  }

  // Oracle: separate backward passes with manual coefficients.
  std::vector<Matrix> base, entropy;
  {
    Tape tape;
    StepLosses losses = build_step_losses(tape, w.pair.source, w.target, w.ds,
                                          w.dt, params, inputs, w.config, {},
                                          1.0);
    tape.backward(add(losses.ce, scalar_mul(losses.cl, lambda1)));
    for (auto* t : params.all_tensors()) {
      base.push_back(t->grad);
      t->zero_grad();
    }
    tape.backward(losses.en);
    for (auto* t : params.all_tensors()) {
      entropy.push_back(t->grad);
      t->zero_grad();
    }
  }

  auto tensors = params.all_tensors();
  AblationFlags none;
  auto encoder_side = params.encoder_group(none);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const bool is_classifier = tensors[i] == &params.classifier.weights;
    const double coeff = is_classifier ? -lambda3 : lambda2;
    (void)encoder_side;
    Matrix expected = base[i];
    for (std::size_t j = 0; j < expected.size(); ++j)
      expected.data[j] += coeff * entropy[i].data[j];
    CHECK(max_abs_diff(routed[i], expected) <= 1e-10);
  }
}

TEST_CASE("adversarial routing differs from joint minimization") {
  SmallWorld w;
  const double lambda = 0.5;
  auto run = [&](double factor, double coeff) {
    ModelParams params = ModelParams::init(w.pair.source.attributes.cols,
                                           w.pair.source.num_classes,
                                           w.config, {});
    Adam adam(w.config.weight_decay);
    std::mt19937_64 rng(23);
    for (int i = 0; i < 4; ++i) {
      StepInputs inputs =
          sample_step_inputs(w.pair.source, w.target, w.config, {}, rng);
      Tape tape;
      StepLosses losses = build_step_losses(tape, w.pair.source, w.target,
                                            w.ds, w.dt, params, inputs,
                                            w.config, {}, factor);
      Var total = add(add(losses.ce, scalar_mul(losses.cl, w.config.lambda1)),
                      scalar_mul(losses.en, coeff));
      tape.backward(total);
      adam.step(params.active_tensors({}), 0.01);
    }
    return params;
  };
  // Adversarial: classifier maximizes entropy, encoders minimize it.
  ModelParams adversarial = run(-1.0, -lambda);
  // Joint: both groups minimize entropy with the same coefficient.
  ModelParams joint = run(1.0, lambda);
  double diff = 0.0;
  diff = std::max(diff, max_abs_diff(adversarial.classifier.weights.value,
                                     joint.classifier.weights.value));
  CHECK(diff > 1e-6);
}

TEST_CASE("overall encoder loss trends down across epochs") {
  SmallWorld w(5, 0.2);
  TrainConfig config = w.config;
  config.epochs = 4;
  ExperimentReport report = run_experiment(w.pair.source, w.pair.target, w.ds,
                                           w.dt, config, {}, nullptr);
  CHECK(report.epochs.back().overall < report.epochs.front().overall);
}

TEST_CASE("zero-shift transfer reaches within-source accuracy") {
  SbmSpec spec;
  spec.num_nodes = 200;
  spec.num_classes = 2;
  spec.intra_prob = 0.08;
  spec.inter_prob = 0.02;
  spec.attr_dim = 24;
  spec.domain_shift = 0.0;
  spec.prototype_strength = 2.0;
  spec.seed = 11;
  SynthPair pair = generate_pair(spec);

  TrainConfig config;
  config.batch_size = 32;
  config.sample_sizes = {3, 3};
  config.layer_dims = {24, 12};
  config.topk = 5;
  config.epochs = 4;
  config.n_labeled = 5;
  config.temperature = 2.0;
  config.seed = 11;
  config.diag_cap = 0;

  DiffusionMatrix ds = build_diffusion(pair.source, config.alpha, config.topk);
  DiffusionMatrix dt = build_diffusion(pair.target, config.alpha, config.topk);
  Graph target = pair.target.with_label_partition(
      select_labeled_per_class(pair.target, config.n_labeled, config.seed));
  Trainer trainer(pair.source, target, ds, dt, config);
  for (std::size_t i = 0; i < trainer.total_steps(); ++i) trainer.train_step();

  const double target_acc = trainer.evaluate().accuracy;
  // Within-source accuracy over all source nodes.
  std::vector<int> all(pair.source.num_nodes);
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<int>(v);
  Matrix emb = trainer.node_embeddings(GraphSide::source, all);
  Tape tape;
  Var probs = predict(tape.input(std::move(emb)),
                      tape.param(trainer.params().classifier.weights),
                      config.temperature);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j)
      if (probs.value()(i, j) > probs.value()(i, argmax)) argmax = j;
    if (static_cast<int>(argmax) == pair.source.labels[i]) ++correct;
  }
  const double source_acc =
      static_cast<double>(correct) / static_cast<double>(all.size());
  CHECK(source_acc >= 0.8);
  CHECK(target_acc >= 0.8);
  CHECK(std::abs(source_acc - target_acc) <= 0.1);
}

TEST_CASE("divergence diagnostic basics") {
  std::vector<double> h{0.1, 0.4, 0.9, 1.3};
  SUBCASE("identical multisets give equal fractions") {
    auto d = divergence_diagnostic(h, h, 0.5);
    CHECK(d.source_frac == d.target_frac);
    CHECK(d.bound == 2.0 * d.target_frac);
  }
  SUBCASE("gamma zero counts everything") {
    auto d = divergence_diagnostic(h, h, 0.0);
    CHECK(d.source_frac == 1.0);
    CHECK(d.target_frac == 1.0);
    CHECK(d.bound == 2.0);
  }
  SUBCASE("gamma above ln C counts nothing") {
    // Entropies over C classes cannot exceed ln C; 1.3 < ln 4 here.
    auto d = divergence_diagnostic(h, h, std::log(4.0));
    CHECK(d.source_frac == 0.0);
    CHECK(d.target_frac == 0.0);
  }
}

TEST_CASE("train_step requires unlabeled target nodes") {
  SmallWorld w;
  std::vector<int> everything(w.pair.target.num_nodes);
  for (std::size_t v = 0; v < everything.size(); ++v)
    everything[v] = static_cast<int>(v);
  Graph all_labeled = w.pair.target.with_label_partition(everything);
  Trainer trainer(w.pair.source, all_labeled, w.ds, w.dt, w.config);
  CHECK_THROWS_AS(trainer.train_step(), ValidationError);
}

TEST_CASE("evaluate requires ground truth on the unlabeled set") {
  SmallWorld w;
  Graph target = w.target;
  target.labels[target.unlabeled_set[0]] = kUnlabeled;
  Trainer trainer(w.pair.source, target, w.ds, w.dt, w.config);
  CHECK_THROWS_AS(trainer.evaluate(), ValidationError);
}

TEST_CASE("per-class tallies aggregate to the overall accuracy") {
  SmallWorld w;
  Trainer trainer(w.pair.source, w.target, w.ds, w.dt, w.config);
  trainer.train_step();
  EvalResult r = trainer.evaluate();
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < r.per_class_total.size(); ++c) {
    correct += r.per_class_correct[c];
    total += r.per_class_total[c];
  }
  CHECK(total == w.target.unlabeled_set.size());
  CHECK(r.accuracy == doctest::Approx(static_cast<double>(correct) /
                                      static_cast<double>(total)));
}

TEST_CASE("run_experiment writes the documented artifacts deterministically") {
  SmallWorld w;
  auto dir = std::filesystem::temp_directory_path() / "graphda_run_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ExperimentSinks sinks;
  sinks.report_csv = dir / "report.csv";
  sinks.checkpoint = dir / "checkpoint.bin";
  sinks.embeddings_target_csv = dir / "embeddings_target.csv";

  ExperimentReport r1 = run_experiment(w.pair.source, w.pair.target, w.ds,
                                       w.dt, w.config, {}, &sinks);
  std::ifstream is(sinks.report_csv);
  std::string header;
  std::getline(is, header);
  CHECK(header == "epoch,iter,L_CE,L_CL,L_EN,overall,lr,lambda2");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == r1.steps.size());
  CHECK(std::filesystem::exists(sinks.checkpoint));
  auto loaded = load_checkpoint(sinks.checkpoint);
  CHECK(loaded.count("W_c") == 1);
  CHECK(loaded.count("W_A1") == 1);

  std::ifstream a(sinks.report_csv);
  std::string first_run((std::istreambuf_iterator<char>(a)),
                        std::istreambuf_iterator<char>());
  run_experiment(w.pair.source, w.pair.target, w.ds, w.dt, w.config, {},
                 &sinks);
  std::ifstream b(sinks.report_csv);
  std::string second_run((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
  CHECK(first_run == second_run);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ablation flags validate and imply") {
  AblationFlags f;
  f.disable_global_view = true;
  f.disable_local_view = true;
  CHECK_THROWS_AS(f.validate(), ValidationError);

  KeyValues kv;
  kv["ablate_gv"] = "true";
  AblationFlags implied = flags_from_kv(kv);
  CHECK(implied.disable_contrastive);
  CHECK_FALSE(implied.contrastive_active());
}

TEST_CASE("config round-trips through the key-value format") {
  TrainConfig c;
  c.lambda1 = 0.25;
  c.epochs = 7;
  c.sample_sizes = {4, 6};
  c.layer_dims = {32, 16};
  c.lambda2_clamp = true;
  AblationFlags f;
  f.disable_domain_adaptation = true;
  KeyValues kv = config_to_kv(c, f);
  TrainConfig back = config_from_kv(kv);
  AblationFlags back_f = flags_from_kv(kv);
  CHECK(back.lambda1 == c.lambda1);
  CHECK(back.epochs == c.epochs);
  CHECK(back.sample_sizes == c.sample_sizes);
  CHECK(back.layer_dims == c.layer_dims);
  CHECK(back.lambda2_clamp == c.lambda2_clamp);
  CHECK(back_f.disable_domain_adaptation == f.disable_domain_adaptation);

  KeyValues bad;
  bad["not_a_key"] = "1";
  CHECK_THROWS_AS(config_from_kv(bad), ValidationError);
}
