#ifndef TOFNER_EVAL_HPP
#define TOFNER_EVAL_HPP

#include <string>
#include <vector>

#include "tofner/types.hpp"

namespace tof {

// Entity-level precision/recall/F1 with micro-averaged counts. An entity
// counts as correct iff (type, start, end) all match within the same
// sentence.
struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  std::string to_json() const;
  std::string to_table() const;  // human-readable report
};

PrfScore entity_f1(const std::vector<TaggedSentence>& gold,
                   const std::vector<TaggedSentence>& pred);

struct RunAggregate {
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // sample standard deviation; 0 for a single run
  std::size_t runs = 0;
  bool single_run = false;

  // Table-style "0.8035 (± 0.0029)" with 4-decimal rounding.
  std::string formatted() const;
};

RunAggregate aggregate_runs(const std::vector<PrfScore>& scores);

}  // namespace tof

#endif  // TOFNER_EVAL_HPP
