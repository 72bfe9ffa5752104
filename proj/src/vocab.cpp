#include "atg/vocab.hpp"

#include <string>

#include "atg/error.hpp"

namespace atg {

VocabLayout::VocabLayout(int length, int max_width, int num_entity_types, int num_relation_types)
    : length_(length),
      max_width_(max_width),
      num_entity_types_(num_entity_types),
      num_relation_types_(num_relation_types) {
  if (length < 1 || max_width < 1 || num_entity_types < 1 || num_relation_types < 0) {
    throw Error(Errc::InvalidConfig, "layout requires L >= 1, K >= 1, C >= 1, R >= 0");
  }
}

VocabLayout build_layout(int length, const Schema& schema, int max_width) {
  return VocabLayout(length, max_width, schema.num_entity_types(), schema.num_relation_types());
}

int VocabLayout::num_realizable_spans() const {
  int positions = 0;
  for (int start = 0; start < length_; ++start) {
    positions += std::min(max_width_, length_ - start);
  }
  return positions * num_entity_types_;
}

bool VocabLayout::realizable(int id) const {
  if (id < 0 || id >= size()) return false;
  if (!is_span_id(id)) return true;
  const int slot = id / num_entity_types_;
  const int start = slot / max_width_;
  const int w = slot % max_width_;
  return start + w < length_;
}

int VocabLayout::span_id(int start, int end, int type_id) const {
  const int w = end - start;
  if (start < 0 || start >= length_ || w < 0 || w >= max_width_ || type_id < 0 ||
      type_id >= num_entity_types_) {
    throw Error(Errc::SymbolOutOfLayout, "span (" + std::to_string(start) + "," + std::to_string(end) +
                                             "," + std::to_string(type_id) + ")");
  }
  return ((start * max_width_) + w) * num_entity_types_ + type_id;
}

int VocabLayout::special_id(Special s) const { return special_offset() + special_index(s); }

int VocabLayout::relation_id(int rel_type_id) const {
  if (rel_type_id < 0 || rel_type_id >= num_relation_types_) {
    throw Error(Errc::SymbolOutOfLayout, "relation type " + std::to_string(rel_type_id));
  }
  return relation_offset() + rel_type_id;
}

int VocabLayout::symbol_to_id(const Symbol& sym) const {
  if (const auto* e = std::get_if<EntitySpan>(&sym)) return span_id(*e);
  if (const auto* r = std::get_if<RelSym>(&sym)) return relation_id(r->rel_type_id);
  return special_id(std::get<Special>(sym));
}

Symbol VocabLayout::id_to_symbol(int id) const {
  if (id < 0 || id >= size()) {
    throw Error(Errc::IdOutOfRange, "id " + std::to_string(id) + " outside [0," + std::to_string(size()) + ")");
  }
  if (is_span_id(id)) {
    const int type_id = id % num_entity_types_;
    const int slot = id / num_entity_types_;
    const int start = slot / max_width_;
    const int w = slot % max_width_;
    return EntitySpan{start, start + w, type_id};
  }
  if (id < relation_offset()) {
    static constexpr Special kOrder[] = {Special::Start, Special::End, Special::Sep};
    return kOrder[id - special_offset()];
  }
  return RelSym{id - relation_offset()};
}

}  // namespace atg
