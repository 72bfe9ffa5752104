#pragma once

#include <cstdint>
#include <vector>

#include "atg/graph.hpp"
#include "atg/linearize.hpp"

namespace atg {

/// Id space of the per-input dynamic vocabulary.
///
/// Ids are laid out as [spans | specials | relations] with
/// span id = ((start * K) + width_index) * C + type. The span block always holds
/// L*K*C slots; slots whose end would fall past the sentence are kept in the id
/// space but reported as non-realizable.
class VocabLayout {
 public:
  static constexpr int kNumSpecial = 3;

  VocabLayout(int length, int max_width, int num_entity_types, int num_relation_types);

  int length() const { return length_; }
  int max_width() const { return max_width_; }
  int num_entity_types() const { return num_entity_types_; }
  int num_relation_types() const { return num_relation_types_; }
  int num_special() const { return kNumSpecial; }

  int num_span_ids() const { return length_ * max_width_ * num_entity_types_; }
  int special_offset() const { return num_span_ids(); }
  int relation_offset() const { return num_span_ids() + kNumSpecial; }
  /// V = L*K*C + R + T.
  int size() const { return relation_offset() + num_relation_types_; }

  int num_realizable_spans() const;
  bool realizable(int id) const;

  int span_id(int start, int end, int type_id) const;
  int span_id(const EntitySpan& span) const { return span_id(span.start, span.end, span.type_id); }
  int special_id(Special s) const;
  int relation_id(int rel_type_id) const;

  int symbol_to_id(const Symbol& sym) const;
  Symbol id_to_symbol(int id) const;

  bool is_span_id(int id) const { return id >= 0 && id < num_span_ids(); }
  bool is_relation_id(int id) const { return id >= relation_offset() && id < size(); }

 private:
  int length_;
  int max_width_;
  int num_entity_types_;
  int num_relation_types_;
};

VocabLayout build_layout(int length, const Schema& schema, int max_width);

/// Special-token id order inside the special block.
constexpr int special_index(Special s) {
  switch (s) {
    case Special::Start: return 0;
    case Special::End: return 1;
    case Special::Sep: return 2;
  }
  return 0;
}

}  // namespace atg
