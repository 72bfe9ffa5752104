#pragma once

#include <string>
#include <vector>

#include "atg/decode.hpp"
#include "atg/graph.hpp"
#include "atg/model.hpp"

namespace atg {

struct LabeledMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix<double> values;
};

enum class AttentionKind { Self, Cross };

/// Attention of the generated sequence from a decode run with attention capture.
/// Rows are the generated symbols; columns are the same symbols (Self) or the
/// document words (Cross). `head == -1` averages over heads.
/// Throws TraceMissing if the result carries no attention.
LabeledMatrix export_attention(const DecodeResult& result, const Document& doc, const Schema& schema, int layer,
                               int head, AttentionKind kind);

struct StructSimilarity {
  LabeledMatrix cosine;  // 4 x 4
  LabeledMatrix values;  // 4 x D
};

/// Cosine similarity between the Node/Head/Tail/Rel embeddings plus their raw
/// values. Throws ZeroVector if a row is all zeros.
template <typename Scalar>
StructSimilarity export_struct_similarity(const Parameters<Scalar>& params);

/// CSV with a header row of column labels; the first column holds row labels.
std::string to_csv(const LabeledMatrix& m);
void write_csv(const std::string& path, const LabeledMatrix& m);

}  // namespace atg
