#include "atg/introspect.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>

#include "atg/checkpoint.hpp"
#include "atg/error.hpp"
#include "atg/grammar.hpp"

namespace atg {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const char* const kPhaseNames[kNumPhases] = {"Node", "Head", "Tail", "Rel"};

}  // namespace

LabeledMatrix export_attention(const DecodeResult& result, const Document& doc, const Schema& schema, int layer,
                               int head, AttentionKind kind) {
  if (!result.attention) throw Error(Errc::TraceMissing, "decode result has no attention trace");
  const auto& maps = kind == AttentionKind::Self ? result.attention->self_attn : result.attention->cross_attn;
  if (layer < 0 || layer >= static_cast<int>(maps.size())) {
    throw Error(Errc::IdOutOfRange, "layer " + std::to_string(layer) + " out of range");
  }
  const auto& heads = maps[layer];
  if (head < -1 || head >= static_cast<int>(heads.size())) {
    throw Error(Errc::IdOutOfRange, "head " + std::to_string(head) + " out of range");
  }
  LabeledMatrix out;
  if (head >= 0) {
    out.values = heads[head];
  } else {
    out.values = Matrix<double>::Zero(heads[0].rows(), heads[0].cols());
    for (const auto& h : heads) out.values += h;
    out.values /= static_cast<double>(heads.size());
  }
  for (const auto& sym : result.attention_symbols) out.row_labels.push_back(render(sym, schema));
  out.col_labels = kind == AttentionKind::Self ? out.row_labels : doc.tokens;
  return out;
}

template <typename Scalar>
StructSimilarity export_struct_similarity(const Parameters<Scalar>& params) {
  const Matrix<double> v = params.structure_embedding.value().template cast<double>();
  StructSimilarity out;
  out.values.values = v;
  for (int i = 0; i < v.rows(); ++i) out.values.row_labels.push_back(kPhaseNames[i]);
  for (int d = 0; d < v.cols(); ++d) out.values.col_labels.push_back("dim" + std::to_string(d));
  Eigen::VectorXd norms(v.rows());
  for (int i = 0; i < v.rows(); ++i) {
    norms(i) = v.row(i).norm();
    if (norms(i) == 0.0) throw Error(Errc::ZeroVector, std::string(kPhaseNames[i]) + " embedding is all zeros");
  }
  out.cosine.values.resize(v.rows(), v.rows());
  for (int i = 0; i < v.rows(); ++i) {
    for (int j = 0; j < v.rows(); ++j) {
      const double c = i == j ? 1.0 : v.row(i).dot(v.row(j)) / (norms(i) * norms(j));
      out.cosine.values(i, j) = std::clamp(c, -1.0, 1.0);
    }
  }
  out.cosine.row_labels = out.values.row_labels;
  out.cosine.col_labels = out.values.row_labels;
  return out;
}

std::string to_csv(const LabeledMatrix& m) {
  std::string out;
  for (const auto& label : m.col_labels) out += "," + csv_field(label);
  out += '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out += csv_field(i < static_cast<Eigen::Index>(m.row_labels.size()) ? m.row_labels[i] : std::to_string(i));
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.9g", m.values(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const LabeledMatrix& m) { write_file_atomic(path, to_csv(m)); }

template StructSimilarity export_struct_similarity(const Parameters<float>&);
template StructSimilarity export_struct_similarity(const Parameters<double>&);

}  // namespace atg
