#ifndef TOFNER_CORPUS_HPP
#define TOFNER_CORPUS_HPP

#include <map>
#include <string>
#include <vector>

#include "tofner/types.hpp"

namespace tof {

struct ParsedCorpus {
  std::vector<TaggedSentence> sentences;
  // Indices into `sentences` where a -DOCSTART- marker opened a new document.
  // Kept as shuffle-group hints; the markers themselves are dropped.
  std::vector<std::size_t> doc_starts;
};

// CoNLL column format: one token per line, tag in the final column, blank
// line between sentences. IOB1-style input is normalized to strict BIO.
// Sentence ids are "<id_prefix>-<ordinal>".
ParsedCorpus parse_conll(const std::string& text, const LabelSet& labels,
                         const std::string& id_prefix = "s");

std::string serialize_conll(const std::vector<TaggedSentence>& sentences);

// Verdict-returning BIO check; never throws.
BioVerdict validate_bio(const std::vector<std::string>& tags, const LabelSet& labels);

// Normalizes a tag sequence in place: an I-T that opens a span becomes B-T.
void normalize_iob1(std::vector<std::string>& tags);

// Maximal B-then-I runs of a BIO-valid sentence. Throws kContract on invalid
// input.
std::vector<EntitySpan> extract_entities(const TaggedSentence& sentence);

// Inverse of extract_entities for non-overlapping spans within [0, length).
std::vector<std::string> spans_to_bio(const std::vector<EntitySpan>& spans,
                                      std::size_t length);

// Copies the dataset with every tag set to "O"; tokens preserved byte-exactly.
std::vector<TaggedSentence> strip_labels(const std::vector<TaggedSentence>& dataset);

// Internal serialized dataset format: one JSON record per line.
std::string ner_to_jsonl(const std::vector<TaggedSentence>& dataset);
std::vector<TaggedSentence> ner_from_jsonl(const std::string& text);
std::string mrc_to_jsonl(const std::vector<MrcExample>& dataset);
std::vector<MrcExample> mrc_from_jsonl(const std::string& text);

struct NerStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::map<std::string, std::size_t> entities_by_type;
  std::size_t entities() const;
};

struct MrcStats {
  std::size_t examples = 0;
  std::size_t answers = 0;
  std::size_t negatives = 0;  // examples with no answer
};

NerStats ner_stats(const std::vector<TaggedSentence>& dataset);
MrcStats mrc_stats(const std::vector<MrcExample>& dataset);

// The six corpus roles of the transfer setup plus the generated pseudo roles
// and the optional word-substituted source copies.
enum class CorpusRole {
  kTargetNerUnlabeled,         // D_t,no
  kSourceNerUnlabeled,         // D_s,no
  kTargetMrc,                  // D_t,m
  kSourceMrc,                  // D_s,m
  kSourceNer,                  // D_s,n
  kSourceNerAsMrc,             // D_s,nm (always derived from D_s,n)
  kTargetNerPseudo,            // generated pseudo-NER
  kTargetMrcPseudo,            // generated pseudo-MRC
  kSourceNerUnlabeledTranslated,
  kSourceNerTranslated,
};

const char* role_name(CorpusRole role);
bool role_is_mrc(CorpusRole role);
bool role_is_unlabeled(CorpusRole role);

// Six-role corpus store. Values are immutable once registered; unlabeled
// roles have their tags stripped on insertion.
class CorpusRegistry {
 public:
  explicit CorpusRegistry(LabelSet labels = LabelSet::default_four())
      : labels_(std::move(labels)) {}

  const LabelSet& labels() const { return labels_; }

  void set_ner(CorpusRole role, std::vector<TaggedSentence> data);
  void set_mrc(CorpusRole role, std::vector<MrcExample> data);

  bool has(CorpusRole role) const;
  const std::vector<TaggedSentence>& ner(CorpusRole role) const;
  const std::vector<MrcExample>& mrc(CorpusRole role) const;
  std::size_t size(CorpusRole role) const;

  std::vector<CorpusRole> roles() const;

 private:
  LabelSet labels_;
  std::map<CorpusRole, std::vector<TaggedSentence>> ner_;
  std::map<CorpusRole, std::vector<MrcExample>> mrc_;
};

}  // namespace tof

#endif  // TOFNER_CORPUS_HPP
