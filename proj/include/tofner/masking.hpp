#ifndef TOFNER_MASKING_HPP
#define TOFNER_MASKING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tofner/types.hpp"

namespace tof {

inline const char kMaskToken[] = "[MASK]";
inline const char kClsToken[] = "[CLS]";
inline const char kSepToken[] = "[SEP]";
inline const char kPadToken[] = "[PAD]";
inline const char kUnkToken[] = "[UNK]";

bool is_special_token(const std::string& token);

// mask/random/keep split applied to selected positions, plus the pool the
// "random" branch draws replacements from.
struct MaskPolicy {
  double mask = 0.8;
  double random = 0.1;
  double keep = 0.1;
  std::vector<std::string> replacement_pool;

  void validate() const;
};

// One masked variant of a sentence. Selected positions are the keys of
// `targets`; the keep branch leaves the surface form unchanged but the
// position is still a prediction target.
struct MaskedInstance {
  std::string sentence_id;
  std::size_t variant = 0;  // 0..k-1
  std::vector<std::string> tokens;
  std::map<std::size_t, std::string> targets;  // position -> original token
};

// Exactly k masked variants of one sentence. Selection count is
// max(1, round(rate * len)), clamped to the number of eligible (non-special)
// positions. Identical seed gives identical output.
std::vector<MaskedInstance> generate_maskings(const TaggedSentence& sentence, std::size_t k,
                                              double rate, const MaskPolicy& policy,
                                              std::uint64_t seed);

// k variants for every sentence, with per-sentence seeds derived from
// (seed, ordinal) so the result does not depend on traversal order.
std::vector<MaskedInstance> generate_mlm_instances(const std::vector<TaggedSentence>& sentences,
                                                   std::size_t k, double rate,
                                                   const MaskPolicy& policy, std::uint64_t seed);

// All target sentences plus a uniform sample of source sentences of size
// min(|source|, |target|), shuffled deterministically.
std::vector<TaggedSentence> build_mlm_corpus(const std::vector<TaggedSentence>& target_unlabeled,
                                             const std::vector<TaggedSentence>& source_unlabeled,
                                             std::uint64_t seed);

}  // namespace tof

#endif  // TOFNER_MASKING_HPP
