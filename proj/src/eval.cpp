#include "tofner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tofner/corpus.hpp"
#include "tofner/util.hpp"

namespace tof {

std::string PrfScore::to_json() const {
  nlohmann::json doc{{"precision", precision}, {"recall", recall}, {"f1", f1},
                     {"gold", gold},           {"predicted", predicted}, {"correct", correct}};
  return doc.dump(2);
}

std::string PrfScore::to_table() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gold: %zu  predicted: %zu  correct: %zu\n"
                "precision: %.4f  recall: %.4f  f1: %.4f",
                gold, predicted, correct, precision, recall, f1);
  return buf;
}

PrfScore entity_f1(const std::vector<TaggedSentence>& gold,
                   const std::vector<TaggedSentence>& pred) {
  if (gold.size() != pred.size())
    fail(ErrorKind::kContract, "entity_f1: sentence counts differ (" +
                                   std::to_string(gold.size()) + " vs " +
                                   std::to_string(pred.size()) + ")");
  PrfScore score;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.size() != pred[i].tokens.size())
      fail(ErrorKind::kContract,
           "entity_f1: token count mismatch at sentence " + gold[i].id);
    std::vector<EntitySpan> g = extract_entities(gold[i]);
    std::vector<EntitySpan> p = extract_entities(pred[i]);
    score.gold += g.size();
    score.predicted += p.size();
    std::set<EntitySpan> gold_set(g.begin(), g.end());
    for (const auto& span : p)
      if (gold_set.count(span)) ++score.correct;
  }
  score.precision = score.predicted == 0
                        ? 0.0
                        : static_cast<double>(score.correct) / static_cast<double>(score.predicted);
  score.recall = score.gold == 0
                     ? 0.0
                     : static_cast<double>(score.correct) / static_cast<double>(score.gold);
  double pr = score.precision + score.recall;
  score.f1 = pr > 0.0 ? 2.0 * score.precision * score.recall / pr : 0.0;
  return score;
}

std::string RunAggregate::formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f (± %.4f)", mean_f1, std_f1);
  return buf;
}

RunAggregate aggregate_runs(const std::vector<PrfScore>& scores) {
  if (scores.empty()) fail(ErrorKind::kContract, "aggregate_runs requires at least one score");
  RunAggregate agg;
  agg.runs = scores.size();
  agg.single_run = scores.size() == 1;
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  agg.mean_f1 = sum / static_cast<double>(scores.size());
  if (scores.size() > 1) {
    double ss = 0.0;
    for (const auto& s : scores) {
      double d = s.f1 - agg.mean_f1;
      ss += d * d;
    }
    agg.std_f1 = std::sqrt(ss / static_cast<double>(scores.size() - 1));
  }
  return agg;
}

}  // namespace tof
