#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atg/graph.hpp"

namespace atg {

enum class SplitMode { Same, Compositional };

struct SynthConfig {
  int train_size = 50;
  int dev_size = 25;
  int test_size = 25;
  /// 2 gives {Peop, Org} with {Work_For, Kill}; 3 adds Loc with
  /// {Live_In, OrgBased_In, Located_In}.
  int num_entity_types = 2;
  SplitMode split_mode = SplitMode::Same;
  std::uint64_t seed = 0;
};

struct SynthSplit {
  std::vector<Example> examples;
  /// Template index used for each example.
  std::vector<int> templates;
};

struct SynthCorpus {
  Schema schema;
  int max_width = 4;
  SynthSplit train;
  SynthSplit dev;
  SynthSplit test;
};

/// Number of sentence templates available for `num_entity_types`.
int synth_template_count(int num_entity_types);
/// Template pattern as text, e.g. "{P} works for {O} .".
std::string synth_template_text(int num_entity_types, int index);
/// True if the template is reserved for dev/test under SplitMode::Compositional.
bool synth_template_held_out(int num_entity_types, int index);

/// Deterministic for a fixed config. No sentence appears twice across splits.
SynthCorpus make_synthetic(const SynthConfig& config);

}  // namespace atg
