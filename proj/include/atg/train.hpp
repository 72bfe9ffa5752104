#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atg/decode.hpp"
#include "atg/eval.hpp"
#include "atg/graph.hpp"
#include "atg/linearize.hpp"
#include "atg/model.hpp"

namespace atg {

struct LearningRates {
  double encoder = 0.0;
  double decoder = 0.0;
  double other = 0.0;

  double for_group(ParamGroup g) const {
    switch (g) {
      case ParamGroup::Encoder: return encoder;
      case ParamGroup::Decoder: return decoder;
      case ParamGroup::Other: return other;
    }
    return other;
  }
  bool operator==(const LearningRates&) const = default;
};

struct TrainConfig {
  int max_steps = 70000;
  double warmup_frac = 0.10;
  LearningRates base_lr{3e-5, 7e-5, 1e-4};
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// 0 disables clipping.
  double max_grad_norm = 0.0;
  int batch_size = 8;
  /// Maximum number of sentences concatenated into one training sample.
  int augment_max = 5;
  Ordering ordering = Ordering::Sorted;
  /// Probability of replacing each input word with the unknown word during training.
  double word_dropout = 0.0;
  std::uint64_t seed = 0;
  /// 0 disables periodic dev evaluation.
  int eval_every = 0;
  int log_every = 10;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Concatenates n ~ U[1, max_sentences] training examples drawn uniformly with
/// replacement, shifting each part's spans by the length of everything before it.
Example augment(std::span<const Example> dataset, std::mt19937_64& rng, int max_sentences);

/// Concatenation of the given parts, in order.
Example concatenate(std::span<const Example* const> parts);

/// Linear warmup over warmup_frac * max_steps, then linear decay to 0.
LearningRates lr_at(int step, const TrainConfig& config);

/// Everything the loss needs from a gold sequence: decoder inputs, structural
/// labels, next-symbol targets, and the legality mask in force at each step.
struct TeacherForcing {
  std::vector<int> input_ids;
  std::vector<Phase> labels;
  std::vector<int> targets;
  BoolMatrix masks;
};

/// Throws GoldIllegalUnderMask if the gold sequence leaves the grammar.
TeacherForcing teacher_forcing(const std::vector<Symbol>& gold, const VocabLayout& layout, const Schema& schema,
                               const GrammarOptions& options = {});

/// Mean over positions of -log p(target | prefix) under the masked pointing softmax.
template <typename Scalar>
Tensor<Scalar> nll_loss(const Tensor<Scalar>& logits, const TeacherForcing& tf) {
  return cross_entropy(logits, std::span<const int>(tf.targets), &tf.masks);
}

/// Encoder, dynamic vocabulary, teacher-forced decoder and loss for one sample.
template <typename Scalar>
Tensor<Scalar> sequence_loss(const Model<Scalar>& model, std::span<const int> word_ids,
                             const std::vector<Symbol>& gold, const Schema& schema, bool train,
                             std::mt19937_64* rng, const GrammarOptions& options = {});

template <typename Scalar>
class AdamW {
 public:
  struct Slot {
    NamedParameter<Scalar> param;
    Matrix<Scalar> first_moment;
    Matrix<Scalar> second_moment;
  };

  AdamW(std::vector<NamedParameter<Scalar>> params, const TrainConfig& config);

  void zero_grad();
  /// Scales gradients so their global L2 norm is at most max_norm; returns the
  /// norm before scaling.
  double clip_grad_norm(double max_norm);
  void step(const LearningRates& lr);

  long long steps_taken() const { return steps_; }
  void set_steps_taken(long long t) { steps_ = t; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long steps_ = 0;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  LearningRates lr;
};

struct EvalRecord {
  int step = 0;
  ScoreReport dev;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  int best_step = -1;
  double best_score = -1.0;
};

/// Model-selection score: REL+ F1, or ENT F1 when the corpus has no relations.
double selection_score(const ScoreReport& report);

template <typename Scalar>
class Trainer {
 public:
  using LogSink = std::function<void(const std::string&)>;

  Trainer(Model<Scalar>& model, Schema schema, WordVocab vocab, TrainConfig config, std::vector<Example> train,
          std::vector<Example> dev = {});

  /// One optimizer update over `batch_size` freshly augmented samples.
  /// Returns the mean sample loss before the update.
  double step();

  /// Loss of the sample the next step() would draw first, without updating.
  double peek_next_loss() const;

  /// Runs until max_steps, evaluating on dev every eval_every steps and keeping
  /// the best parameters (see best_parameters()).
  TrainResult run(const LogSink& log = {});

  int steps_done() const { return step_; }
  void restore(int steps_done) {
    step_ = steps_done;
    optimizer_.set_steps_taken(steps_done);
  }
  AdamW<Scalar>& optimizer() { return optimizer_; }
  const std::optional<std::vector<Matrix<Scalar>>>& best_parameters() const { return best_; }
  /// Copies the retained best parameters into the model, if any.
  void load_best();

  const TrainConfig& config() const { return config_; }

 private:
  std::mt19937_64 sample_rng(int step, int index) const;
  Tensor<Scalar> sample_loss(int step, int index, bool train) const;

  Model<Scalar>& model_;
  Schema schema_;
  WordVocab vocab_;
  TrainConfig config_;
  std::vector<Example> train_;
  std::vector<Example> dev_;
  AdamW<Scalar> optimizer_;
  int step_ = 0;
  std::optional<std::vector<Matrix<Scalar>>> best_;
};

}  // namespace atg
