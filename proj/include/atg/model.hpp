#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atg/grammar.hpp"
#include "atg/ops.hpp"
#include "atg/tensor.hpp"
#include "atg/vocab.hpp"

namespace atg {

struct ModelConfig {
  int dim = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_width = 12;
  int num_entity_types = 1;
  int num_relation_types = 0;
  int word_vocab_size = 1;
  int max_positions = 512;
  double dropout = 0.1;
  bool use_positional = true;
  bool use_structural = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Word-level input vocabulary; id 0 is the unknown word.
class WordVocab {
 public:
  static constexpr int kUnk = 0;

  WordVocab() : words_{"<unk>"} {}
  static WordVocab build(const std::vector<std::vector<std::string>>& sentences, int min_count = 1);
  static WordVocab from_words(std::vector<std::string> words);

  int size() const { return static_cast<int>(words_.size()); }
  int id(const std::string& word) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

enum class ParamGroup { Encoder, Decoder, Other };

template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;  // in x out
  Tensor<Scalar> bias;    // 1 x out
};

template <typename Scalar>
struct Norm {
  Tensor<Scalar> gain;
  Tensor<Scalar> bias;
};

template <typename Scalar>
struct AttentionWeights {
  Linear<Scalar> query, key, value, output;
};

template <typename Scalar>
struct EncoderLayer {
  Norm<Scalar> attn_norm, ffn_norm;
  AttentionWeights<Scalar> self_attn;
  Linear<Scalar> ffn_in, ffn_out;
};

template <typename Scalar>
struct DecoderLayer {
  Norm<Scalar> self_norm, cross_norm, ffn_norm;
  AttentionWeights<Scalar> self_attn, cross_attn;
  Linear<Scalar> ffn_in, ffn_out;
};

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Tensor<Scalar> tensor;
  ParamGroup group;
  bool decay;
};

template <typename Scalar>
struct Parameters {
  Tensor<Scalar> word_embedding;
  Tensor<Scalar> encoder_positions;
  std::vector<EncoderLayer<Scalar>> encoder;
  Norm<Scalar> encoder_norm;

  /// One 2D x D projection per entity type.
  std::vector<Tensor<Scalar>> span_type_weights;
  Tensor<Scalar> special_embedding;   // [START, END, SEP] x D
  Tensor<Scalar> relation_embedding;  // R x D
  Tensor<Scalar> decoder_positions;
  Tensor<Scalar> structure_embedding;  // [Node, Head, Tail, Rel] x D

  std::vector<DecoderLayer<Scalar>> decoder;
  Norm<Scalar> decoder_norm;

  /// Stable, checkpoint-facing enumeration of every trainable tensor.
  std::vector<NamedParameter<Scalar>> named() const;
};

/// Per-layer, per-head attention weights, captured for inspection.
struct AttentionMaps {
  std::vector<std::vector<Matrix<double>>> self_attn;   // [layer][head] n x n
  std::vector<std::vector<Matrix<double>>> cross_attn;  // [layer][head] n x L
};

/// Key/value cache for incremental decoding of one document.
template <typename Scalar>
struct DecoderCache {
  std::vector<Matrix<Scalar>> self_keys, self_values;
  std::vector<Matrix<Scalar>> cross_keys, cross_values;
  int length = 0;
};

template <typename Scalar>
class Model {
 public:
  using T = Tensor<Scalar>;

  Model(ModelConfig config, std::uint64_t seed);
  Model(ModelConfig config, Parameters<Scalar> params);

  const ModelConfig& config() const { return config_; }
  const Parameters<Scalar>& params() const { return params_; }
  Parameters<Scalar>& params() { return params_; }

  /// Contextual word representations H (L x D). `rng` drives dropout and may be
  /// null when `train` is false.
  T encode(std::span<const int> word_ids, bool train, std::mt19937_64* rng) const;

  /// S with rows in vocabulary id order ((start*K + w)*C + type).
  T span_embeddings(const T& hidden, const VocabLayout& layout) const;

  /// E = [S; special rows; relation rows].
  T build_vocabulary(const T& spans) const;

  /// Z[i] = E[ids[i]] + E_pos[i] + E_struct[labels[i]], honoring ablation switches.
  T decoder_inputs(std::span<const int> ids, std::span<const Phase> labels, const T& vocab) const;

  /// Causal decoder over Z with cross-attention into H; returns n x D.
  T decode_hidden(const T& inputs, const T& hidden, bool train, std::mt19937_64* rng,
                  AttentionMaps* capture = nullptr) const;

  /// Pointing scores E * z for each row of `states` (rows x V).
  T next_token_logits(const T& states, const T& vocab) const;

  DecoderCache<Scalar> start_cache(const T& hidden) const;
  /// Appends one symbol to the cache and returns its final hidden state (1 x D).
  /// Inference only.
  T decode_step(DecoderCache<Scalar>& cache, int id, Phase label, const T& vocab) const;

  VocabLayout layout_for(int length) const {
    return VocabLayout(length, config_.max_width, config_.num_entity_types, config_.num_relation_types);
  }

 private:
  T embed_symbols(std::span<const int> ids, std::span<const Phase> labels, const T& vocab, int offset) const;

  ModelConfig config_;
  Parameters<Scalar> params_;
};

}  // namespace atg
