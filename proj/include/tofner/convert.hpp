#ifndef TOFNER_CONVERT_HPP
#define TOFNER_CONVERT_HPP

#include <map>
#include <string>
#include <vector>

#include "tofner/types.hpp"

namespace tof {

// One natural-language query per entity type; the annotation-guideline
// description of the type is used as the question.
class QueryTemplateSet {
 public:
  QueryTemplateSet() = default;
  explicit QueryTemplateSet(std::map<std::string, std::string> queries);

  // JSON object file: {"PER": "query text", ...}
  static QueryTemplateSet load(const std::string& path);
  static QueryTemplateSet from_json(const std::string& text);

  const std::string& query_for(const std::string& type) const;
  bool covers(const LabelSet& labels) const;
  // Throws kValidation naming the first uncovered type.
  void require_coverage(const LabelSet& labels) const;
  const std::map<std::string, std::string>& queries() const { return queries_; }

 private:
  std::map<std::string, std::string> queries_;
};

// Surface-string substitution table standing in for the translation slot.
class WordMap {
 public:
  WordMap() = default;
  WordMap(std::map<std::string, std::string> entries, bool lowercase_fallback);

  // Two-column UTF-8 text, one "source target" pair per line.
  static WordMap load(const std::string& path, bool lowercase_fallback = false);
  static WordMap parse(const std::string& text, bool lowercase_fallback = false);

  // Returns the mapped token, or the input unchanged when absent.
  const std::string& translate(const std::string& token) const;
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& token) const;

 private:
  std::map<std::string, std::string> entries_;
  bool lowercase_fallback_ = false;
};

// NER-as-MRC reformulation: one example per (sentence, entity type) pair;
// answers are the spans of that type. Sentences without the type stay as
// negative examples.
std::vector<MrcExample> ner_to_mrc(const std::vector<TaggedSentence>& dataset,
                                   const QueryTemplateSet& templates,
                                   const LabelSet& labels);

// Same mapping applied to pseudo-labeled data; kept as a named operation so
// the pipeline trace can distinguish the call site.
std::vector<MrcExample> pseudo_ner_to_mrc(const std::vector<TaggedSentence>& pseudo,
                                          const QueryTemplateSet& templates,
                                          const LabelSet& labels);

struct NormalizeResult {
  std::vector<MrcExample> examples;
  // One entry per answer whose character span did not line up with token
  // boundaries and was widened to the covering token span.
  std::vector<std::string> warnings;
};

// SQuAD-style JSON -> internal MRC examples. Character offsets are mapped to
// token index pairs under whitespace-plus-punctuation tokenization;
// unanswerable entries become examples with empty answers.
NormalizeResult mrc_normalize(const std::string& raw_json,
                              const std::string& id_prefix = "q");

// Whitespace-plus-punctuation tokenizer with byte offsets, shared between
// mrc_normalize and its tests.
struct OffsetToken {
  std::string text;
  std::size_t begin = 0;  // byte offset of first char
  std::size_t end = 0;    // byte offset one past last char
};
std::vector<OffsetToken> tokenize_with_offsets(const std::string& text);

// Token-wise replacement; token count and tags are never changed.
std::vector<TaggedSentence> substitute_words(const std::vector<TaggedSentence>& dataset,
                                             const WordMap& map);

}  // namespace tof

#endif  // TOFNER_CONVERT_HPP
