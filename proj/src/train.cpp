#include "atg/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "atg/error.hpp"

namespace atg {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (max_steps < 1) fail("max_steps must be >= 1");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) fail("warmup_frac must be in (0, 1)");
  if (augment_max < 1) fail("augment_max (B) must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(word_dropout >= 0.0 && word_dropout < 1.0)) fail("word_dropout must be in [0, 1)");
  if (base_lr.encoder < 0 || base_lr.decoder < 0 || base_lr.other < 0) fail("learning rates must be >= 0");
}

Example concatenate(std::span<const Example* const> parts) {
  Example out;
  int offset = 0;
  for (const Example* part : parts) {
    const int entity_base = static_cast<int>(out.graph.entities.size());
    if (!out.doc.id.empty()) out.doc.id += "+";
    out.doc.id += part->doc.id;
    out.doc.tokens.insert(out.doc.tokens.end(), part->doc.tokens.begin(), part->doc.tokens.end());
    for (auto e : part->graph.entities) {
      e.start += offset;
      e.end += offset;
      out.graph.entities.push_back(e);
    }
    for (auto r : part->graph.relations) {
      r.head += entity_base;
      r.tail += entity_base;
      out.graph.relations.push_back(r);
    }
    offset += part->doc.length();
  }
  return out;
}

Example augment(std::span<const Example> dataset, std::mt19937_64& rng, int max_sentences) {
  if (dataset.empty()) throw Error(Errc::ValidationError, "cannot augment an empty dataset");
  if (max_sentences < 1) throw Error(Errc::InvalidConfig, "B must be >= 1");
  std::uniform_int_distribution<int> count(1, max_sentences);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  const int n = count(rng);
  std::vector<const Example*> parts;
  parts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) parts.push_back(&dataset[pick(rng)]);
  return concatenate(parts);
}

LearningRates lr_at(int step, const TrainConfig& config) {
  const double total = config.max_steps;
  const double warmup = config.warmup_frac * total;
  const double s = std::clamp(static_cast<double>(step), 0.0, total);
  const double factor = s < warmup ? s / warmup : (total - s) / (total - warmup);
  return {config.base_lr.encoder * factor, config.base_lr.decoder * factor, config.base_lr.other * factor};
}

TeacherForcing teacher_forcing(const std::vector<Symbol>& gold, const VocabLayout& layout, const Schema& schema,
                               const GrammarOptions& options) {
  if (gold.size() < 3) throw Error(Errc::GoldIllegalUnderMask, "gold sequence shorter than 3 symbols");
  Replay rp;
  try {
    rp = replay(gold, layout, schema, options);
  } catch (const Error& e) {
    throw Error(Errc::GoldIllegalUnderMask, e.what());
  }
  if (!rp.states_after.back().finished) throw Error(Errc::GoldIllegalUnderMask, "gold sequence does not end");

  const std::size_t n = gold.size() - 1;
  TeacherForcing tf;
  tf.masks.resize(static_cast<Eigen::Index>(n), layout.size());
  for (std::size_t j = 0; j < n; ++j) {
    tf.input_ids.push_back(layout.symbol_to_id(gold[j]));
    tf.labels.push_back(rp.labels[j]);
    tf.targets.push_back(layout.symbol_to_id(gold[j + 1]));
    const LegalMask m = legal_mask(rp.states_after[j], layout, schema, options);
    for (int id = 0; id < layout.size(); ++id) tf.masks(static_cast<Eigen::Index>(j), id) = m[id];
  }
  return tf;
}

template <typename Scalar>
Tensor<Scalar> sequence_loss(const Model<Scalar>& model, std::span<const int> word_ids, const std::vector<Symbol>& gold,
                             const Schema& schema, bool train, std::mt19937_64* rng, const GrammarOptions& options) {
  const VocabLayout layout = model.layout_for(static_cast<int>(word_ids.size()));
  const TeacherForcing tf = teacher_forcing(gold, layout, schema, options);
  const auto hidden = model.encode(word_ids, train, rng);
  const auto vocab = model.build_vocabulary(model.span_embeddings(hidden, layout));
  const auto states = model.decode_hidden(model.decoder_inputs(tf.input_ids, tf.labels, vocab), hidden, train, rng);
  return nll_loss(model.next_token_logits(states, vocab), tf);
}

template <typename Scalar>
AdamW<Scalar>::AdamW(std::vector<NamedParameter<Scalar>> params, const TrainConfig& config)
    : beta1_(config.beta1), beta2_(config.beta2), eps_(config.eps), weight_decay_(config.weight_decay) {
  for (auto& p : params) {
    const auto r = p.tensor.rows();
    const auto c = p.tensor.cols();
    slots_.push_back({std::move(p), Matrix<Scalar>::Zero(r, c), Matrix<Scalar>::Zero(r, c)});
  }
}

template <typename Scalar>
void AdamW<Scalar>::zero_grad() {
  for (auto& s : slots_) s.param.tensor.zero_grad();
}

template <typename Scalar>
double AdamW<Scalar>::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& s : slots_) {
    if (s.param.tensor.has_grad()) sq += static_cast<double>(s.param.tensor.node()->grad.squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto factor = static_cast<Scalar>(max_norm / (norm + 1e-12));
    for (auto& s : slots_) {
      if (s.param.tensor.has_grad()) s.param.tensor.node()->grad *= factor;
    }
  }
  return norm;
}

template <typename Scalar>
void AdamW<Scalar>::step(const LearningRates& lr) {
  ++steps_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const auto b1 = static_cast<Scalar>(beta1_);
  const auto b2 = static_cast<Scalar>(beta2_);
  for (auto& s : slots_) {
    auto& node = *s.param.tensor.node();
    if (node.grad.size() == 0) continue;
    const double rate = lr.for_group(s.param.group);
    s.first_moment = b1 * s.first_moment + (Scalar(1) - b1) * node.grad;
    s.second_moment = b2 * s.second_moment + (Scalar(1) - b2) * node.grad.cwiseProduct(node.grad);
    if (rate == 0.0) continue;
    if (s.param.decay && weight_decay_ > 0.0) node.value *= static_cast<Scalar>(1.0 - rate * weight_decay_);
    const auto step_size = static_cast<Scalar>(rate / bias1);
    const auto denom_scale = static_cast<Scalar>(1.0 / std::sqrt(bias2));
    node.value.array() -=
        step_size * s.first_moment.array() / (s.second_moment.array().sqrt() * denom_scale + static_cast<Scalar>(eps_));
  }
}

double selection_score(const ScoreReport& report) {
  return report.strict_counts.gold > 0 ? report.rel_strict.f1 : report.ent.f1;
}

template <typename Scalar>
Trainer<Scalar>::Trainer(Model<Scalar>& model, Schema schema, WordVocab vocab, TrainConfig config,
                         std::vector<Example> train, std::vector<Example> dev)
    : model_(model),
      schema_(std::move(schema)),
      vocab_(std::move(vocab)),
      config_(std::move(config)),
      train_(std::move(train)),
      dev_(std::move(dev)),
      optimizer_(model.params().named(), config_) {
  config_.validate();
  if (train_.empty()) throw Error(Errc::ValidationError, "training set is empty");
}

template <typename Scalar>
std::mt19937_64 Trainer<Scalar>::sample_rng(int step, int index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

template <typename Scalar>
Tensor<Scalar> Trainer<Scalar>::sample_loss(int step, int index, bool train) const {
  auto rng = sample_rng(step, index);
  Example sample = augment(train_, rng, config_.augment_max);
  while (sample.doc.length() > model_.config().max_positions) {
    // Concatenation outgrew the encoder; fall back to a single sentence.
    sample = augment(train_, rng, 1);
  }
  const auto seq = linearize(sample.graph, config_.ordering, rng);
  auto ids = vocab_.encode(sample.doc.tokens);
  if (train && config_.word_dropout > 0.0) {
    std::bernoulli_distribution drop(config_.word_dropout);
    for (int& id : ids) {
      if (drop(rng)) id = WordVocab::kUnk;
    }
  }
  return sequence_loss(model_, ids, seq.symbols, schema_, train, &rng);
}

template <typename Scalar>
double Trainer<Scalar>::peek_next_loss() const {
  double total = 0.0;
  for (int b = 0; b < config_.batch_size; ++b) {
    NoGradGuard no_grad;
    total += static_cast<double>(sample_loss(step_, b, true).item());
  }
  return total / config_.batch_size;
}

template <typename Scalar>
double Trainer<Scalar>::step() {
  optimizer_.zero_grad();
  double total = 0.0;
  const auto inv_batch = static_cast<Scalar>(1.0 / config_.batch_size);
  for (int b = 0; b < config_.batch_size; ++b) {
    const auto loss = sample_loss(step_, b, true);
    total += static_cast<double>(loss.item());
    backward(scale(loss, inv_batch));
  }
  if (config_.max_grad_norm > 0.0) optimizer_.clip_grad_norm(config_.max_grad_norm);
  optimizer_.step(lr_at(step_ + 1, config_));
  ++step_;
  return total / config_.batch_size;
}

template <typename Scalar>
TrainResult Trainer<Scalar>::run(const LogSink& log) {
  TrainResult result;
  DecodeConfig greedy;
  while (step_ < config_.max_steps) {
    const LearningRates lr = lr_at(step_ + 1, config_);
    const double loss = step();
    result.steps.push_back({step_, loss, lr});
    if (log && (step_ % std::max(1, config_.log_every) == 0 || step_ == config_.max_steps)) {
      std::ostringstream os;
      os.precision(9);
      os << "{\"step\":" << step_ << ",\"loss\":" << loss << ",\"lr_encoder\":" << lr.encoder
         << ",\"lr_decoder\":" << lr.decoder << ",\"lr_other\":" << lr.other << "}";
      log(os.str());
    }
    const bool eval_now =
        config_.eval_every > 0 && !dev_.empty() && (step_ % config_.eval_every == 0 || step_ == config_.max_steps);
    if (eval_now) {
      const ScoreReport report = evaluate_model(model_, vocab_, schema_, dev_, greedy);
      result.evals.push_back({step_, report});
      const double score = selection_score(report);
      if (score >= result.best_score) {
        result.best_score = score;
        result.best_step = step_;
        std::vector<Matrix<Scalar>> snapshot;
        for (const auto& p : model_.params().named()) snapshot.push_back(p.tensor.value());
        best_ = std::move(snapshot);
      }
      if (log) {
        std::ostringstream os;
        os.precision(6);
        os << "{\"step\":" << step_ << ",\"dev_ent\":" << report.ent.f1 << ",\"dev_rel\":" << report.rel.f1
           << ",\"dev_rel_plus\":" << report.rel_strict.f1 << "}";
        log(os.str());
      }
    }
  }
  return result;
}

template <typename Scalar>
void Trainer<Scalar>::load_best() {
  if (!best_) return;
  auto named = model_.params().named();
  for (std::size_t i = 0; i < named.size(); ++i) named[i].tensor.mutable_value() = (*best_)[i];
}

template Tensor<float> sequence_loss(const Model<float>&, std::span<const int>, const std::vector<Symbol>&,
                                     const Schema&, bool, std::mt19937_64*, const GrammarOptions&);
template Tensor<double> sequence_loss(const Model<double>&, std::span<const int>, const std::vector<Symbol>&,
                                      const Schema&, bool, std::mt19937_64*, const GrammarOptions&);
template class AdamW<float>;
template class AdamW<double>;
template class Trainer<float>;
template class Trainer<double>;

}  // namespace atg
