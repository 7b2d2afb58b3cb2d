#ifndef TOFNER_TYPES_HPP
#define TOFNER_TYPES_HPP

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

namespace tof {

// Ordered set of entity type names under the BIO scheme. The tag vocabulary
// is {O} plus {B-T, I-T} for each type, so |Y| = 2 * |types| + 1.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> types);

  // PER, LOC, ORG, MISC
  static LabelSet default_four();
  // Single pseudo-type SPAN, for entity span detection (WNUT16-style).
  static LabelSet span_only();
  // Comma-separated type list, e.g. "PER,LOC,ORG,MISC".
  static LabelSet parse(const std::string& csv);

  const std::vector<std::string>& types() const { return types_; }
  bool has_type(const std::string& type) const;
  std::vector<std::string> tag_vocabulary() const;
  std::size_t tag_count() const { return 2 * types_.size() + 1; }

  bool operator==(const LabelSet& other) const { return types_ == other.types_; }

 private:
  std::vector<std::string> types_;
};

// Token sequence with aligned BIO tags; the unit of NER data.
struct TaggedSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  bool operator==(const TaggedSentence&) const = default;
};

// (type, start, end) with inclusive token indices.
struct EntitySpan {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const EntitySpan&) const = default;
};

// Inclusive token-index answer span inside an MRC context.
struct AnswerSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const AnswerSpan&) const = default;
  bool overlaps(const AnswerSpan& other) const {
    return start <= other.end && other.start <= end;
  }
};

// (query, context, answer spans) triple; the unit of MRC data.
struct MrcExample {
  std::string id;
  std::string query;
  std::vector<std::string> context;
  std::vector<AnswerSpan> answers;  // sorted by (start, end), non-overlapping
  std::string entity_type;          // empty when not tied to an entity type

  bool operator==(const MrcExample&) const = default;
};

struct BioVerdict {
  bool valid = true;
  std::size_t first_violation = 0;  // meaningful only when !valid
  std::string reason;
};

inline const char kOutsideTag[] = "O";

}  // namespace tof

#endif  // TOFNER_TYPES_HPP
