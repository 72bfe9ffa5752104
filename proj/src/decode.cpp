#include "atg/decode.hpp"

#include <algorithm>
#include <numeric>

#include "atg/error.hpp"

namespace atg {

void DecodeConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::InvalidConfig, "top_p must be in (0, 1]");
  if (max_len != 0 && max_len < 3) throw Error(Errc::InvalidConfig, "max_len must be >= 3");
}

std::vector<std::pair<int, double>> nucleus_distribution(std::span<const double> probs, std::span<const int> ids,
                                                         double top_p) {
  if (probs.size() != ids.size() || probs.empty()) {
    throw Error(Errc::ShapeMismatch, "nucleus needs one probability per candidate id");
  }
  std::vector<std::pair<int, double>> ranked;
  ranked.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ranked.emplace_back(ids[i], probs[i]);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < ranked.size()) {
    mass += ranked[keep].second;
    ++keep;
    if (mass >= top_p) break;
  }
  ranked.resize(keep);
  for (auto& [id, p] : ranked) p /= mass;
  return ranked;
}

int nucleus_select(std::span<const double> probs, std::span<const int> ids, double top_p, std::mt19937_64& rng) {
  const auto nucleus = nucleus_distribution(probs, ids, top_p);
  if (nucleus.size() == 1) return nucleus.front().first;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double acc = 0.0;
  for (const auto& [id, p] : nucleus) {
    acc += p;
    if (u < acc) return id;
  }
  return nucleus.back().first;
}

namespace {

/// Closes a cut-off prefix into a well-formed sequence: finishes the entity
/// section, drops a partial triple, appends <END>.
std::vector<Symbol> close_prefix(std::vector<Symbol> symbols, const DecodeState& state) {
  switch (state.phase) {
    case Phase::Node:
      symbols.emplace_back(Special::Sep);
      break;
    case Phase::Head:
      break;
    case Phase::Tail:
      symbols.pop_back();
      break;
    case Phase::Rel:
      symbols.resize(symbols.size() - 2);
      break;
  }
  symbols.emplace_back(Special::End);
  return symbols;
}

}  // namespace

template <typename Scalar>
DecodeResult generate(const Model<Scalar>& model, std::span<const int> word_ids, const Schema& schema,
                      const DecodeConfig& config) {
  config.validate();
  NoGradGuard no_grad;
  const auto& mc = model.config();
  if (schema.num_entity_types() != mc.num_entity_types || schema.num_relation_types() != mc.num_relation_types) {
    throw Error(Errc::SchemaMismatch, "schema does not match the model's type counts");
  }
  const int L = static_cast<int>(word_ids.size());
  const VocabLayout layout = model.layout_for(L);
  const auto hidden = model.encode(word_ids, false, nullptr);
  const auto vocab = model.build_vocabulary(model.span_embeddings(hidden, layout));

  int max_len = config.max_len > 0 ? config.max_len : 3 + 4 * L;
  max_len = std::min(max_len, mc.max_positions + 1);

  std::mt19937_64 rng(config.seed);
  DecodeResult result;
  std::vector<Symbol> symbols{Special::Start};
  std::vector<int> ids{layout.special_id(Special::Start)};
  std::vector<Phase> labels{Phase::Node};
  DecodeState state = initial_state();

  std::optional<DecoderCache<Scalar>> cache;
  Tensor<Scalar> last;
  if (config.incremental) {
    cache = model.start_cache(hidden);
    last = model.decode_step(*cache, ids.back(), labels.back(), vocab);
  }

  std::vector<double> legal_probs;
  std::vector<int> legal_ids;
  while (!state.finished) {
    if (static_cast<int>(symbols.size()) >= max_len) {
      result.truncated = true;
      break;
    }
    if (!config.incremental) {
      const auto states = model.decode_hidden(model.decoder_inputs(ids, labels, vocab), hidden, false, nullptr);
      last = slice_rows(states, states.rows() - 1, 1);
    }
    const auto logits = model.next_token_logits(last, vocab);
    const LegalMask legal = legal_mask(state, layout, schema, config.grammar);
    BoolMatrix mask(1, layout.size());
    for (int id = 0; id < layout.size(); ++id) mask(0, id) = legal[id];
    const auto probs = softmax_rows(logits, &mask);

    legal_probs.clear();
    legal_ids.clear();
    for (int id = 0; id < layout.size(); ++id) {
      if (!legal[id]) continue;
      legal_ids.push_back(id);
      legal_probs.push_back(static_cast<double>(probs.value()(0, id)));
    }
    int chosen;
    if (config.mode == DecodeMode::Greedy) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < legal_probs.size(); ++i) {
        if (legal_probs[i] > legal_probs[best]) best = i;
      }
      chosen = legal_ids[best];
    } else {
      chosen = nucleus_select(legal_probs, legal_ids, config.top_p, rng);
    }

    const Symbol sym = layout.id_to_symbol(chosen);
    result.steps.push_back({chosen, static_cast<double>(probs.value()(0, chosen)),
                            static_cast<int>(legal_ids.size()), state.phase});
    labels.push_back(state.phase);
    state = advance(state, sym, layout, schema, config.grammar);
    symbols.push_back(sym);
    ids.push_back(chosen);
    if (config.incremental && !state.finished && static_cast<int>(symbols.size()) < max_len) {
      last = model.decode_step(*cache, chosen, labels.back(), vocab);
    }
  }

  if (result.truncated) symbols = close_prefix(std::move(symbols), state);
  result.sequence.symbols = symbols;
  result.graph = delinearize(result.sequence);

  if (config.capture_attention) {
    const std::size_t n = std::min<std::size_t>(symbols.size(), static_cast<std::size_t>(mc.max_positions));
    result.attention_symbols.assign(symbols.begin(), symbols.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<int> all_ids;
    for (const auto& s : result.attention_symbols) all_ids.push_back(layout.symbol_to_id(s));
    const auto replayed = replay(result.attention_symbols, layout, schema, config.grammar);
    AttentionMaps maps;
    model.decode_hidden(model.decoder_inputs(all_ids, replayed.labels, vocab), hidden, false, nullptr, &maps);
    result.attention = std::move(maps);
  }
  return result;
}

template <typename Scalar>
ScoreReport evaluate_model(const Model<Scalar>& model, const WordVocab& vocab, const Schema& schema,
                           std::span<const Example> examples, const DecodeConfig& config,
                           std::vector<IEGraph>* predictions) {
  CorpusCounts counts;
  for (const auto& ex : examples) {
    const auto ids = vocab.encode(ex.doc.tokens);
    auto result = generate(model, ids, schema, config);
    counts.add(result.graph, ex.graph);
    if (predictions != nullptr) predictions->push_back(std::move(result.graph));
  }
  return micro_f1(counts);
}

template DecodeResult generate(const Model<float>&, std::span<const int>, const Schema&, const DecodeConfig&);
template DecodeResult generate(const Model<double>&, std::span<const int>, const Schema&, const DecodeConfig&);
template ScoreReport evaluate_model(const Model<float>&, const WordVocab&, const Schema&, std::span<const Example>,
                                    const DecodeConfig&, std::vector<IEGraph>*);
template ScoreReport evaluate_model(const Model<double>&, const WordVocab&, const Schema&, std::span<const Example>,
                                    const DecodeConfig&, std::vector<IEGraph>*);

}  // namespace atg
