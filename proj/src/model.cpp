#include "atg/model.hpp"

#include <cmath>
#include <numeric>

#include "atg/error.hpp"

namespace atg {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (dim < 1 || heads < 1 || dim % heads != 0) fail("dim must be a positive multiple of heads");
  if (enc_layers < 0) fail("enc_layers must be >= 0");
  if (dec_layers < 1) fail("dec_layers must be >= 1");
  if (ffn_mult < 1) fail("ffn_mult must be >= 1");
  if (max_width < 1) fail("max_width must be >= 1");
  if (num_entity_types < 1 || num_relation_types < 0) fail("schema sizes must be C >= 1, R >= 0");
  if (word_vocab_size < 1) fail("word_vocab_size must be >= 1");
  if (max_positions < 1) fail("max_positions must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
}

WordVocab WordVocab::build(const std::vector<std::vector<std::string>>& sentences, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& s : sentences) {
    for (const auto& w : s) ++counts[w];
  }
  std::vector<std::string> words;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) words.push_back(w);
  }
  return from_words(std::move(words));
}

WordVocab WordVocab::from_words(std::vector<std::string> words) {
  WordVocab v;
  for (auto& w : words) {
    if (w == v.words_.front() || v.index_.contains(w)) continue;
    v.index_.emplace(w, static_cast<int>(v.words_.size()));
    v.words_.push_back(std::move(w));
  }
  return v;
}

int WordVocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> WordVocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

template <typename Scalar>
std::vector<NamedParameter<Scalar>> Parameters<Scalar>::named() const {
  std::vector<NamedParameter<Scalar>> out;
  auto add = [&](std::string name, const Tensor<Scalar>& t, ParamGroup g, bool decay = false) {
    out.push_back({std::move(name), t, g, decay});
  };
  auto add_linear = [&](const std::string& prefix, const Linear<Scalar>& l, ParamGroup g) {
    add(prefix + ".weight", l.weight, g, true);
    add(prefix + ".bias", l.bias, g);
  };
  auto add_norm = [&](const std::string& prefix, const Norm<Scalar>& n, ParamGroup g) {
    add(prefix + ".gain", n.gain, g);
    add(prefix + ".bias", n.bias, g);
  };
  auto add_attention = [&](const std::string& prefix, const AttentionWeights<Scalar>& a, ParamGroup g) {
    add_linear(prefix + ".query", a.query, g);
    add_linear(prefix + ".key", a.key, g);
    add_linear(prefix + ".value", a.value, g);
    add_linear(prefix + ".output", a.output, g);
  };

  constexpr auto enc = ParamGroup::Encoder;
  constexpr auto dec = ParamGroup::Decoder;
  constexpr auto other = ParamGroup::Other;

  add("word_embedding", word_embedding, enc);
  add("encoder_positions", encoder_positions, enc);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const std::string p = "encoder." + std::to_string(l);
    add_norm(p + ".attn_norm", encoder[l].attn_norm, enc);
    add_attention(p + ".self_attn", encoder[l].self_attn, enc);
    add_norm(p + ".ffn_norm", encoder[l].ffn_norm, enc);
    add_linear(p + ".ffn_in", encoder[l].ffn_in, enc);
    add_linear(p + ".ffn_out", encoder[l].ffn_out, enc);
  }
  add_norm("encoder_norm", encoder_norm, enc);

  for (std::size_t c = 0; c < span_type_weights.size(); ++c) {
    add("span_type." + std::to_string(c), span_type_weights[c], other, true);
  }
  add("special_embedding", special_embedding, other);
  add("relation_embedding", relation_embedding, other);

  add("decoder_positions", decoder_positions, dec);
  add("structure_embedding", structure_embedding, dec);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string p = "decoder." + std::to_string(l);
    add_norm(p + ".self_norm", decoder[l].self_norm, dec);
    add_attention(p + ".self_attn", decoder[l].self_attn, dec);
    add_norm(p + ".cross_norm", decoder[l].cross_norm, dec);
    add_attention(p + ".cross_attn", decoder[l].cross_attn, dec);
    add_norm(p + ".ffn_norm", decoder[l].ffn_norm, dec);
    add_linear(p + ".ffn_in", decoder[l].ffn_in, dec);
    add_linear(p + ".ffn_out", decoder[l].ffn_out, dec);
  }
  add_norm("decoder_norm", decoder_norm, dec);
  return out;
}

namespace {

template <typename Scalar>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor<Scalar> normal(Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng_));
    return Tensor<Scalar>::parameter(std::move(m));
  }

  Tensor<Scalar> constant(Eigen::Index rows, Eigen::Index cols, Scalar v) {
    return Tensor<Scalar>::parameter(Matrix<Scalar>::Constant(rows, cols, v));
  }

  Linear<Scalar> linear(int in, int out) {
    return {normal(in, out, 1.0 / std::sqrt(static_cast<double>(in))), constant(1, out, 0)};
  }

  Norm<Scalar> norm(int dim) { return {constant(1, dim, 1), constant(1, dim, 0)}; }

  AttentionWeights<Scalar> attention(int dim) {
    return {linear(dim, dim), linear(dim, dim), linear(dim, dim), linear(dim, dim)};
  }

 private:
  std::mt19937_64 rng_;
};

template <typename Scalar>
Tensor<Scalar> apply(const Linear<Scalar>& l, const Tensor<Scalar>& x) {
  return add(matmul(x, l.weight), l.bias);
}

template <typename Scalar>
Tensor<Scalar> apply(const Norm<Scalar>& n, const Tensor<Scalar>& x) {
  return layer_norm(x, n.gain, n.bias);
}

/// Multi-head scaled dot-product attention over already-projected q, k, v.
template <typename Scalar>
Tensor<Scalar> attend(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v, int heads,
                      const BoolMatrix* mask, Scalar drop, bool train, std::mt19937_64* rng,
                      std::vector<Matrix<double>>* capture) {
  const Eigen::Index head_dim = q.cols() / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  std::vector<Tensor<Scalar>> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * head_dim, head_dim);
    auto kh = slice_cols(k, h * head_dim, head_dim);
    auto vh = slice_cols(v, h * head_dim, head_dim);
    auto weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt), mask);
    if (capture != nullptr) capture->push_back(weights.value().template cast<double>());
    if (train) weights = dropout(weights, drop, *rng, true);
    outputs.push_back(matmul(weights, vh));
  }
  return heads == 1 ? outputs.front() : concat_cols(outputs);
}

template <typename Scalar>
Tensor<Scalar> maybe_dropout(const Tensor<Scalar>& x, Scalar p, bool train, std::mt19937_64* rng) {
  if (!train || p <= Scalar(0)) return x;
  return dropout(x, p, *rng, true);
}

template <typename Scalar>
Tensor<Scalar> feed_forward(const Linear<Scalar>& in, const Linear<Scalar>& out, const Tensor<Scalar>& x) {
  return apply(out, gelu(apply(in, x)));
}

BoolMatrix causal_mask(Eigen::Index n) {
  BoolMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = j <= i;
  }
  return m;
}

std::vector<int> iota_ids(int n, int offset = 0) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), offset);
  return ids;
}

}  // namespace

template <typename Scalar>
Model<Scalar>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Initializer<Scalar> init(seed);
  const int d = config_.dim;
  const int ffn = d * config_.ffn_mult;

  params_.word_embedding = init.normal(config_.word_vocab_size, d, 1.0);
  params_.encoder_positions = init.normal(config_.max_positions, d, 1.0);
  for (int l = 0; l < config_.enc_layers; ++l) {
    EncoderLayer<Scalar> layer;
    layer.attn_norm = init.norm(d);
    layer.self_attn = init.attention(d);
    layer.ffn_norm = init.norm(d);
    layer.ffn_in = init.linear(d, ffn);
    layer.ffn_out = init.linear(ffn, d);
    params_.encoder.push_back(std::move(layer));
  }
  params_.encoder_norm = init.norm(d);

  for (int c = 0; c < config_.num_entity_types; ++c) {
    params_.span_type_weights.push_back(init.normal(2 * d, d, 1.0 / std::sqrt(2.0 * d)));
  }
  params_.special_embedding = init.normal(VocabLayout::kNumSpecial, d, 1.0);
  params_.relation_embedding = init.normal(config_.num_relation_types, d, 1.0);
  params_.decoder_positions = init.normal(config_.max_positions, d, 1.0);
  params_.structure_embedding = init.normal(kNumPhases, d, 1.0);

  for (int l = 0; l < config_.dec_layers; ++l) {
    DecoderLayer<Scalar> layer;
    layer.self_norm = init.norm(d);
    layer.self_attn = init.attention(d);
    layer.cross_norm = init.norm(d);
    layer.cross_attn = init.attention(d);
    layer.ffn_norm = init.norm(d);
    layer.ffn_in = init.linear(d, ffn);
    layer.ffn_out = init.linear(ffn, d);
    params_.decoder.push_back(std::move(layer));
  }
  params_.decoder_norm = init.norm(d);
}

template <typename Scalar>
Model<Scalar>::Model(ModelConfig config, Parameters<Scalar> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::encode(std::span<const int> word_ids, bool train, std::mt19937_64* rng) const {
  const int n = static_cast<int>(word_ids.size());
  if (n < 1) throw Error(Errc::InvalidDocument, "empty input");
  if (n > config_.max_positions) {
    throw Error(Errc::TooLong, std::to_string(n) + " tokens > max_positions " + std::to_string(config_.max_positions));
  }
  const auto p = static_cast<Scalar>(config_.dropout);
  const auto positions = iota_ids(n);
  auto x = add(embedding_lookup(params_.word_embedding, word_ids),
               gather_rows<Scalar>(params_.encoder_positions, positions));
  x = maybe_dropout(x, p, train, rng);
  for (const auto& layer : params_.encoder) {
    auto h = apply(layer.attn_norm, x);
    auto attn = attend(apply(layer.self_attn.query, h), apply(layer.self_attn.key, h),
                       apply(layer.self_attn.value, h), config_.heads, nullptr, p, train, rng, nullptr);
    x = add(x, maybe_dropout(apply(layer.self_attn.output, attn), p, train, rng));
    auto f = feed_forward(layer.ffn_in, layer.ffn_out, apply(layer.ffn_norm, x));
    x = add(x, maybe_dropout(f, p, train, rng));
  }
  if (!params_.encoder.empty()) x = apply(params_.encoder_norm, x);
  return x;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::span_embeddings(const T& hidden, const VocabLayout& layout) const {
  const int L = layout.length();
  const int K = layout.max_width();
  const int C = layout.num_entity_types();
  if (hidden.rows() != L) throw Error(Errc::ShapeMismatch, "span_embeddings: H rows != layout length");
  if (C != static_cast<int>(params_.span_type_weights.size())) {
    throw Error(Errc::ShapeMismatch, "span_embeddings: layout entity types != model entity types");
  }
  const int slots = L * K;
  std::vector<int> starts(static_cast<std::size_t>(slots));
  std::vector<int> ends(static_cast<std::size_t>(slots));
  for (int s = 0; s < L; ++s) {
    for (int w = 0; w < K; ++w) {
      starts[s * K + w] = s;
      ends[s * K + w] = s + w < L ? s + w : -1;  // overhanging slot: zero end vector
    }
  }
  const auto pairs = concat_cols(gather_rows<Scalar>(hidden, starts), gather_rows<Scalar>(hidden, ends));
  std::vector<T> per_type;
  per_type.reserve(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) per_type.push_back(matmul(pairs, params_.span_type_weights[c]));
  if (C == 1) return per_type.front();

  // Stacked rows are type-major; reorder to id order (slot*C + type).
  std::vector<int> order(static_cast<std::size_t>(slots * C));
  for (int slot = 0; slot < slots; ++slot) {
    for (int c = 0; c < C; ++c) order[slot * C + c] = c * slots + slot;
  }
  return gather_rows<Scalar>(vstack(per_type), order);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::build_vocabulary(const T& spans) const {
  return vstack<Scalar>({spans, params_.special_embedding, params_.relation_embedding});
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::decoder_inputs(std::span<const int> ids, std::span<const Phase> labels,
                                             const T& vocab) const {
  return embed_symbols(ids, labels, vocab, 0);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::embed_symbols(std::span<const int> ids, std::span<const Phase> labels, const T& vocab,
                                            int offset) const {
  if (ids.size() != labels.size()) throw Error(Errc::ShapeMismatch, "decoder ids and labels differ in length");
  const int n = static_cast<int>(ids.size());
  if (offset + n > config_.max_positions) {
    throw Error(Errc::PrefixTooLong, "prefix of " + std::to_string(offset + n) + " > max_positions " +
                                         std::to_string(config_.max_positions));
  }
  auto z = gather_rows<Scalar>(vocab, ids);
  if (config_.use_positional) z = add(z, gather_rows<Scalar>(params_.decoder_positions, iota_ids(n, offset)));
  if (config_.use_structural) {
    std::vector<int> label_ids;
    label_ids.reserve(labels.size());
    for (Phase ph : labels) label_ids.push_back(static_cast<int>(ph));
    z = add(z, gather_rows<Scalar>(params_.structure_embedding, label_ids));
  }
  return z;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::decode_hidden(const T& inputs, const T& hidden, bool train, std::mt19937_64* rng,
                                            AttentionMaps* capture) const {
  const auto p = static_cast<Scalar>(config_.dropout);
  const BoolMatrix mask = causal_mask(inputs.rows());
  auto x = maybe_dropout(inputs, p, train, rng);
  if (capture != nullptr) {
    capture->self_attn.assign(params_.decoder.size(), {});
    capture->cross_attn.assign(params_.decoder.size(), {});
  }
  for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
    const auto& layer = params_.decoder[l];
    auto h = apply(layer.self_norm, x);
    auto self = attend(apply(layer.self_attn.query, h), apply(layer.self_attn.key, h), apply(layer.self_attn.value, h),
                       config_.heads, &mask, p, train, rng, capture ? &capture->self_attn[l] : nullptr);
    x = add(x, maybe_dropout(apply(layer.self_attn.output, self), p, train, rng));

    auto c = apply(layer.cross_norm, x);
    auto cross = attend(apply(layer.cross_attn.query, c), apply(layer.cross_attn.key, hidden),
                        apply(layer.cross_attn.value, hidden), config_.heads, nullptr, p, train, rng,
                        capture ? &capture->cross_attn[l] : nullptr);
    x = add(x, maybe_dropout(apply(layer.cross_attn.output, cross), p, train, rng));

    auto f = feed_forward(layer.ffn_in, layer.ffn_out, apply(layer.ffn_norm, x));
    x = add(x, maybe_dropout(f, p, train, rng));
  }
  return apply(params_.decoder_norm, x);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::next_token_logits(const T& states, const T& vocab) const {
  return matmul(states, transpose(vocab));
}

template <typename Scalar>
DecoderCache<Scalar> Model<Scalar>::start_cache(const T& hidden) const {
  NoGradGuard no_grad;
  DecoderCache<Scalar> cache;
  const auto d = static_cast<Eigen::Index>(config_.dim);
  for (const auto& layer : params_.decoder) {
    cache.self_keys.emplace_back(0, d);
    cache.self_values.emplace_back(0, d);
    cache.cross_keys.push_back(apply(layer.cross_attn.key, hidden).value());
    cache.cross_values.push_back(apply(layer.cross_attn.value, hidden).value());
  }
  return cache;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::decode_step(DecoderCache<Scalar>& cache, int id, Phase label, const T& vocab) const {
  NoGradGuard no_grad;
  const int ids[] = {id};
  const Phase labels[] = {label};
  auto x = embed_symbols(ids, labels, vocab, cache.length);
  auto append = [](Matrix<Scalar>& m, const Matrix<Scalar>& row) {
    m.conservativeResize(m.rows() + 1, Eigen::NoChange);
    m.row(m.rows() - 1) = row.row(0);
  };
  for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
    const auto& layer = params_.decoder[l];
    auto h = apply(layer.self_norm, x);
    append(cache.self_keys[l], apply(layer.self_attn.key, h).value());
    append(cache.self_values[l], apply(layer.self_attn.value, h).value());
    auto self = attend(apply(layer.self_attn.query, h), T(cache.self_keys[l]), T(cache.self_values[l]), config_.heads,
                       nullptr, Scalar(0), false, nullptr, nullptr);
    x = add(x, apply(layer.self_attn.output, self));

    auto c = apply(layer.cross_norm, x);
    auto cross = attend(apply(layer.cross_attn.query, c), T(cache.cross_keys[l]), T(cache.cross_values[l]),
                        config_.heads, nullptr, Scalar(0), false, nullptr, nullptr);
    x = add(x, apply(layer.cross_attn.output, cross));

    x = add(x, feed_forward(layer.ffn_in, layer.ffn_out, apply(layer.ffn_norm, x)));
  }
  ++cache.length;
  return apply(params_.decoder_norm, x);
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Model<float>;
template class Model<double>;

}  // namespace atg
