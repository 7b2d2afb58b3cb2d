#ifndef TOFNER_SYNTHETIC_HPP
#define TOFNER_SYNTHETIC_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tofner/convert.hpp"
#include "tofner/types.hpp"

namespace tof {

// Sizes of the generated corpora. Entities are cued by marker tokens shared
// between domains (the marker opens the span, one name token continues it);
// the filler vocabulary differs per domain, so solving the target side
// means carrying the marker rule across an O-context shift. A word-for-word
// filler dictionary plays the role of the source-to-target translator, which
// gives the run a translated copy of the labeled source corpus.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t source_ner = 100;       // labeled source sentences
  std::size_t source_unlabeled = 80;  // raw source sentences
  std::size_t target_unlabeled = 80;  // raw target sentences
  std::size_t target_test = 40;       // held-out gold target sentences
  std::size_t target_mrc = 30;        // sentences behind the target MRC set
  std::size_t source_mrc = 30;        // sentences behind the source MRC set
};

struct SyntheticSuite {
  LabelSet labels;
  QueryTemplateSet templates;
  std::vector<TaggedSentence> source_ner;
  std::vector<TaggedSentence> source_unlabeled;  // gold tags kept for oracle use
  std::vector<TaggedSentence> target_unlabeled;  // gold tags kept for oracle use
  std::vector<TaggedSentence> target_test;
  std::vector<MrcExample> target_mrc;
  std::vector<MrcExample> source_mrc;
  std::map<std::string, std::string> dictionary;          // source filler -> target filler
  std::vector<TaggedSentence> source_ner_translated;      // source_ner through the dictionary
  std::vector<TaggedSentence> source_unlabeled_translated;
};

SyntheticSuite make_synthetic_suite(const SyntheticSpec& spec);

// Materializes the suite plus a ready-to-run config under `dir`:
// source_ner.conll, source_unlabeled.conll and target_unlabeled.conll (tags
// stripped), target_test.conll (gold), target_mrc.jsonl, source_mrc.jsonl,
// templates.json, config.json. Hyperparameters in the emitted config are
// tuned for the built-in backend at this corpus scale.
void write_synthetic_suite(const SyntheticSuite& suite, const std::string& dir);

}  // namespace tof

#endif  // TOFNER_SYNTHETIC_HPP
