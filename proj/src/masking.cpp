#include "tofner/masking.hpp"

#include <algorithm>
#include <cmath>

#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

bool is_special_token(const std::string& token) {
  return token == kMaskToken || token == kClsToken || token == kSepToken ||
         token == kPadToken || token == kUnkToken;
}

void MaskPolicy::validate() const {
  if (mask < 0.0 || random < 0.0 || keep < 0.0)
    fail(ErrorKind::kValidation, "mask policy probabilities must be non-negative");
  if (std::abs(mask + random + keep - 1.0) > 1e-9)
    fail(ErrorKind::kValidation, "mask policy probabilities must sum to 1");
}

std::vector<MaskedInstance> generate_maskings(const TaggedSentence& sentence, std::size_t k,
                                              double rate, const MaskPolicy& policy,
                                              std::uint64_t seed) {
  if (sentence.tokens.empty())
    fail(ErrorKind::kContract, "generate_maskings requires a non-empty sentence");
  if (k < 1) fail(ErrorKind::kContract, "generate_maskings requires k >= 1");
  if (rate <= 0.0 || rate >= 1.0)
    fail(ErrorKind::kContract, "generate_maskings requires 0 < rate < 1");
  policy.validate();

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i)
    if (!is_special_token(sentence.tokens[i])) eligible.push_back(i);

  std::size_t want = static_cast<std::size_t>(
      std::lround(rate * static_cast<double>(sentence.tokens.size())));
  if (want < 1) want = 1;
  std::size_t n_select = std::min(want, eligible.size());

  std::vector<MaskedInstance> out;
  out.reserve(k);
  for (std::size_t v = 0; v < k; ++v) {
    Rng rng(derive_seed(seed, v));
    MaskedInstance inst;
    inst.sentence_id = sentence.id;
    inst.variant = v;
    inst.tokens = sentence.tokens;

    std::vector<std::size_t> picked = rng.sample_indices(eligible.size(), n_select);
    std::vector<std::size_t> positions;
    positions.reserve(picked.size());
    for (std::size_t p : picked) positions.push_back(eligible[p]);
    std::sort(positions.begin(), positions.end());

    for (std::size_t pos : positions) {
      inst.targets[pos] = sentence.tokens[pos];
      double u = rng.uniform();
      if (u < policy.mask) {
        inst.tokens[pos] = kMaskToken;
      } else if (u < policy.mask + policy.random) {
        if (!policy.replacement_pool.empty()) {
          inst.tokens[pos] =
              policy.replacement_pool[rng.uniform_index(policy.replacement_pool.size())];
        } else {
          inst.tokens[pos] = kMaskToken;
        }
      }
      // else: keep the original surface form
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<MaskedInstance> generate_mlm_instances(const std::vector<TaggedSentence>& sentences,
                                                   std::size_t k, double rate,
                                                   const MaskPolicy& policy, std::uint64_t seed) {
  std::vector<MaskedInstance> out;
  out.reserve(sentences.size() * k);
  for (std::size_t ordinal = 0; ordinal < sentences.size(); ++ordinal) {
    auto instances =
        generate_maskings(sentences[ordinal], k, rate, policy, derive_seed(seed, ordinal));
    for (auto& inst : instances) out.push_back(std::move(inst));
  }
  return out;
}

std::vector<TaggedSentence> build_mlm_corpus(const std::vector<TaggedSentence>& target_unlabeled,
                                             const std::vector<TaggedSentence>& source_unlabeled,
                                             std::uint64_t seed) {
  if (target_unlabeled.empty())
    fail(ErrorKind::kValidation, "build_mlm_corpus requires a non-empty target dataset");
  if (source_unlabeled.empty())
    fail(ErrorKind::kValidation, "build_mlm_corpus requires a non-empty source dataset");

  std::vector<TaggedSentence> mixed = target_unlabeled;
  std::size_t take = std::min(source_unlabeled.size(), target_unlabeled.size());
  Rng rng(derive_seed(seed, "mlm_mix"));
  std::vector<std::size_t> picked = rng.sample_indices(source_unlabeled.size(), take);
  std::sort(picked.begin(), picked.end());
  for (std::size_t i : picked) mixed.push_back(source_unlabeled[i]);
  rng.shuffle(mixed);
  return mixed;
}

}  // namespace tof
