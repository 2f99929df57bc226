#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ccn::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

Outcome gradient_suite();
Outcome attention_invariants();
Outcome oracle_equivalence();
Outcome synthetic_learning();
Outcome directional_ablations();
Outcome baseline_ordering();
Outcome evidence_only_control();
Outcome pipeline_fixtures();
Outcome formats();

inline std::vector<Criterion> all_criteria() {
  return {{"gradient-suite", gradient_suite},
          {"attention-invariants", attention_invariants},
          {"oracle-equivalence", oracle_equivalence},
          {"synthetic-learning", synthetic_learning},
          {"directional-ablations", directional_ablations},
          {"baseline-ordering", baseline_ordering},
          {"evidence-only-control", evidence_only_control},
          {"pipeline-fixtures", pipeline_fixtures},
          {"formats", formats}};
}

}  // namespace ccn::acceptance
