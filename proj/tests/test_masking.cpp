#include <doctest.h>

#include <map>
#include <set>

#include "checks.hpp"
#include "support.hpp"
#include "tofner/masking.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

using namespace tof;
using testsup::expect_error;

namespace {

TaggedSentence plain_sentence(std::size_t n, const std::string& id = "m") {
  TaggedSentence s;
  s.id = id;
  for (std::size_t i = 0; i < n; ++i) {
    s.tokens.push_back("tok" + std::to_string(i));
    s.tags.push_back(kOutsideTag);
  }
  return s;
}

}  // namespace

TEST_CASE("special token predicate covers exactly the five reserved forms") {
  for (const char* t : {kMaskToken, kClsToken, kSepToken, kPadToken, kUnkToken})
    CHECK(is_special_token(t));
  CHECK_FALSE(is_special_token("MASK"));
  CHECK_FALSE(is_special_token("word"));
}

TEST_CASE("generate_maskings yields k variants with the rounded position count") {
  TaggedSentence s = plain_sentence(20);
  std::vector<MaskedInstance> out = generate_maskings(s, 10, 0.15, MaskPolicy{}, 99);
  REQUIRE(out.size() == 10);
  for (std::size_t v = 0; v < out.size(); ++v) {
    const MaskedInstance& inst = out[v];
    CHECK(inst.sentence_id == "m");
    CHECK(inst.variant == v);
    CHECK(inst.tokens.size() == s.tokens.size());
    CHECK(inst.targets.size() == 3);  // round(0.15 * 20)
    for (const auto& [pos, original] : inst.targets) {
      CHECK(pos < s.tokens.size());
      CHECK(original == s.tokens[pos]);
    }
    // Non-selected positions keep their surface form.
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      if (inst.targets.find(i) == inst.targets.end()) CHECK(inst.tokens[i] == s.tokens[i]);
  }
}

TEST_CASE("mask policy extremes behave as declared") {
  TaggedSentence s = plain_sentence(12);

  MaskPolicy all_mask{1.0, 0.0, 0.0, {}};
  for (const auto& inst : generate_maskings(s, 5, 0.25, all_mask, 7))
    for (const auto& [pos, _] : inst.targets) CHECK(inst.tokens[pos] == kMaskToken);

  MaskPolicy all_keep{0.0, 0.0, 1.0, {}};
  for (const auto& inst : generate_maskings(s, 5, 0.25, all_keep, 7)) {
    CHECK(inst.tokens == s.tokens);
    CHECK(inst.targets.size() == 3);
  }

  MaskPolicy all_random{0.0, 1.0, 0.0, {"replacement"}};
  for (const auto& inst : generate_maskings(s, 5, 0.25, all_random, 7))
    for (const auto& [pos, _] : inst.targets) CHECK(inst.tokens[pos] == "replacement");

  // Without a replacement pool the random branch degrades to [MASK].
  MaskPolicy poolless{0.0, 1.0, 0.0, {}};
  for (const auto& inst : generate_maskings(s, 5, 0.25, poolless, 7))
    for (const auto& [pos, _] : inst.targets) CHECK(inst.tokens[pos] == kMaskToken);
}

TEST_CASE("special tokens are never selected for masking") {
  TaggedSentence s = plain_sentence(15, "sp");
  s.tokens[2] = kClsToken;
  s.tokens[7] = kSepToken;
  s.tokens[11] = kUnkToken;
  for (const auto& inst : generate_maskings(s, 20, 0.3, MaskPolicy{}, 13)) {
    CHECK(inst.targets.find(2) == inst.targets.end());
    CHECK(inst.targets.find(7) == inst.targets.end());
    CHECK(inst.targets.find(11) == inst.targets.end());
  }

  // All-special sentences have nothing to predict but still produce variants.
  TaggedSentence specials{"x", {kClsToken, kSepToken}, {"O", "O"}};
  std::vector<MaskedInstance> out = generate_maskings(specials, 3, 0.5, MaskPolicy{}, 1);
  REQUIRE(out.size() == 3);
  for (const auto& inst : out) CHECK(inst.targets.empty());
}

TEST_CASE("a one-token sentence still gets one masked position") {
  TaggedSentence s = plain_sentence(1);
  std::vector<MaskedInstance> out = generate_maskings(s, 4, 0.15, MaskPolicy{}, 3);
  REQUIRE(out.size() == 4);
  for (const auto& inst : out) CHECK(inst.targets.size() == 1);
}

TEST_CASE("maskings are reproducible from the seed") {
  TaggedSentence s = plain_sentence(18);
  auto a = generate_maskings(s, 8, 0.2, MaskPolicy{}, 42);
  auto b = generate_maskings(s, 8, 0.2, MaskPolicy{}, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tokens == b[i].tokens);
    CHECK(a[i].targets == b[i].targets);
  }

  auto c = generate_maskings(s, 8, 0.2, MaskPolicy{}, 43);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].tokens != c[i].tokens || a[i].targets != c[i].targets) any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("generate_maskings rejects bad arguments") {
  TaggedSentence s = plain_sentence(5);
  expect_error([&] { generate_maskings({"e", {}, {}}, 2, 0.15, MaskPolicy{}, 1); },
               ErrorKind::kContract);
  expect_error([&] { generate_maskings(s, 0, 0.15, MaskPolicy{}, 1); }, ErrorKind::kContract);
  expect_error([&] { generate_maskings(s, 2, 0.0, MaskPolicy{}, 1); }, ErrorKind::kContract);
  expect_error([&] { generate_maskings(s, 2, 1.0, MaskPolicy{}, 1); }, ErrorKind::kContract);
  expect_error([&] { generate_maskings(s, 2, 0.15, MaskPolicy{0.5, 0.0, 0.0, {}}, 1); },
               ErrorKind::kValidation);
  expect_error([&] { generate_maskings(s, 2, 0.15, MaskPolicy{-0.2, 1.2, 0.0, {}}, 1); },
               ErrorKind::kValidation);
}

TEST_CASE("generate_mlm_instances derives stable per-sentence seeds") {
  std::vector<TaggedSentence> corpus{plain_sentence(10, "a"), plain_sentence(14, "b"),
                                     plain_sentence(9, "c")};
  std::vector<MaskedInstance> all = generate_mlm_instances(corpus, 4, 0.2, MaskPolicy{}, 77);
  REQUIRE(all.size() == corpus.size() * 4);

  // First block equals a direct call with the derived per-sentence seed.
  auto direct = generate_maskings(corpus[0], 4, 0.2, MaskPolicy{}, derive_seed(77, 0));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(all[i].tokens == direct[i].tokens);
    CHECK(all[i].targets == direct[i].targets);
  }

  auto again = generate_mlm_instances(corpus, 4, 0.2, MaskPolicy{}, 77);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].tokens == again[i].tokens);
    CHECK(all[i].targets == again[i].targets);
  }
}

TEST_CASE("build_mlm_corpus mixes all target sentences with a matched source sample") {
  std::vector<TaggedSentence> target, source;
  for (std::size_t i = 0; i < 100; ++i) target.push_back(plain_sentence(6, "t" + std::to_string(i)));
  for (std::size_t i = 0; i < 500; ++i) source.push_back(plain_sentence(6, "s" + std::to_string(i)));

  std::vector<TaggedSentence> mixed = build_mlm_corpus(target, source, 5);
  CHECK(mixed.size() == 200);

  std::set<std::string> ids;
  std::size_t from_target = 0, from_source = 0;
  for (const auto& s : mixed) {
    CHECK(ids.insert(s.id).second);  // the sample never repeats a sentence
    if (s.id[0] == 't') ++from_target;
    if (s.id[0] == 's') ++from_source;
  }
  CHECK(from_target == 100);
  CHECK(from_source == 100);

  // Short source side: everything from both.
  std::vector<TaggedSentence> small_source(source.begin(), source.begin() + 50);
  CHECK(build_mlm_corpus(target, small_source, 5).size() == 150);

  // Same seed reproduces the exact order; a different seed changes it.
  std::vector<TaggedSentence> mixed2 = build_mlm_corpus(target, source, 5);
  CHECK(mixed == mixed2);
  CHECK(build_mlm_corpus(target, source, 6) != mixed);

  expect_error([&] { build_mlm_corpus({}, source, 5); }, ErrorKind::kValidation);
  expect_error([&] { build_mlm_corpus(target, {}, 5); }, ErrorKind::kValidation);
}
