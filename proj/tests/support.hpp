#ifndef TOFNER_TESTS_SUPPORT_HPP
#define TOFNER_TESTS_SUPPORT_HPP

// Shared scaffolding for the test binaries: scratch directories,
// deterministic random corpora, and small ready-made pipeline setups.
// No test-framework dependency, so the acceptance binary can use it too.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tofner/corpus.hpp"
#include "tofner/pipeline.hpp"
#include "tofner/rng.hpp"
#include "tofner/synthetic.hpp"
#include "tofner/types.hpp"

namespace testsup {

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void spill(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// BIO-valid sentence over a small vocabulary; roughly one entity span per
// three tokens, spans one to three tokens long, adjacent spans allowed.
inline tof::TaggedSentence random_bio_sentence(tof::Rng& rng, const tof::LabelSet& labels,
                                               std::size_t ordinal, std::size_t min_len = 4,
                                               std::size_t max_len = 14) {
  tof::TaggedSentence s;
  s.id = "r-" + std::to_string(ordinal);
  std::size_t len = min_len + rng.uniform_index(max_len - min_len + 1);
  std::size_t i = 0;
  while (i < len) {
    if (rng.uniform() < 0.3) {
      const std::string& type = labels.types()[rng.uniform_index(labels.types().size())];
      std::size_t span = 1 + rng.uniform_index(std::min<std::size_t>(3, len - i));
      for (std::size_t j = 0; j < span; ++j) {
        s.tokens.push_back("ent" + std::to_string(rng.uniform_index(40)));
        s.tags.push_back((j == 0 ? "B-" : "I-") + type);
      }
      i += span;
    } else {
      s.tokens.push_back("w" + std::to_string(rng.uniform_index(150)));
      s.tags.push_back(tof::kOutsideTag);
      ++i;
    }
  }
  return s;
}

inline std::vector<tof::TaggedSentence> random_bio_corpus(tof::Rng& rng,
                                                          const tof::LabelSet& labels,
                                                          std::size_t n) {
  std::vector<tof::TaggedSentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_bio_sentence(rng, labels, i));
  return out;
}

// Prediction-like corruption of gold tags: keeps, drops or retypes each gold
// span, and sometimes invents a new span in free outside territory.
inline tof::TaggedSentence corrupt_prediction(const tof::TaggedSentence& gold, tof::Rng& rng,
                                              const tof::LabelSet& labels) {
  std::vector<tof::EntitySpan> spans = tof::extract_entities(gold);
  std::vector<tof::EntitySpan> kept;
  for (const auto& span : spans) {
    double roll = rng.uniform();
    if (roll < 0.2) continue;  // dropped
    tof::EntitySpan out = span;
    if (roll < 0.4)
      out.type = labels.types()[rng.uniform_index(labels.types().size())];
    kept.push_back(out);
  }
  std::vector<bool> occupied(gold.tokens.size(), false);
  for (const auto& span : kept)
    for (std::size_t i = span.start; i <= span.end; ++i) occupied[i] = true;
  if (!gold.tokens.empty() && rng.uniform() < 0.3) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::size_t start = rng.uniform_index(gold.tokens.size());
      std::size_t end = std::min(start + rng.uniform_index(2), gold.tokens.size() - 1);
      bool free = true;
      for (std::size_t i = start; i <= end; ++i)
        if (occupied[i]) free = false;
      if (!free) continue;
      kept.push_back({labels.types()[rng.uniform_index(labels.types().size())], start, end});
      for (std::size_t i = start; i <= end; ++i) occupied[i] = true;
      break;
    }
  }
  tof::TaggedSentence pred;
  pred.id = gold.id;
  pred.tokens = gold.tokens;
  pred.tags = tof::spans_to_bio(kept, gold.tokens.size());
  return pred;
}

// Reduced synthetic suite for structural pipeline tests where transfer
// quality does not matter.
inline tof::SyntheticSuite small_suite(std::uint64_t seed = 5) {
  tof::SyntheticSpec spec;
  spec.seed = seed;
  spec.source_ner = 24;
  spec.source_unlabeled = 16;
  spec.target_unlabeled = 16;
  spec.target_test = 8;
  spec.target_mrc = 6;
  spec.source_mrc = 6;
  return tof::make_synthetic_suite(spec);
}

inline tof::CorpusRegistry registry_from(const tof::SyntheticSuite& suite,
                                         bool with_translated = true) {
  tof::CorpusRegistry reg(suite.labels);
  reg.set_ner(tof::CorpusRole::kTargetNerUnlabeled, suite.target_unlabeled);
  reg.set_ner(tof::CorpusRole::kSourceNerUnlabeled, suite.source_unlabeled);
  reg.set_ner(tof::CorpusRole::kSourceNer, suite.source_ner);
  reg.set_mrc(tof::CorpusRole::kTargetMrc, suite.target_mrc);
  reg.set_mrc(tof::CorpusRole::kSourceMrc, suite.source_mrc);
  if (with_translated) {
    reg.set_ner(tof::CorpusRole::kSourceNerTranslated, suite.source_ner_translated);
    reg.set_ner(tof::CorpusRole::kSourceNerUnlabeledTranslated,
                suite.source_unlabeled_translated);
  }
  return reg;
}

// One-epoch everything with a narrow encoder: exercises every stage cheaply.
inline tof::PipelineConfig tiny_config(const tof::SyntheticSuite& suite,
                                       std::uint64_t seed = 11) {
  tof::PipelineConfig cfg;
  cfg.templates = suite.templates;
  cfg.seed = seed;
  cfg.iterations = 1;
  cfg.encoder.d_model = 24;
  cfg.encoder.d_ff = 48;
  cfg.encoder.max_len = 64;
  cfg.encoder.rel_window = 4;
  cfg.mlm = {1e-3, 16, 1, 0};
  cfg.mrc = {1e-3, 16, 1, 0};
  cfg.ner = {1e-3, 16, 1, 0};
  cfg.loop_mrc = {1e-3, 16, 1, 0};
  cfg.loop_ner = {1e-3, 16, 1, 0};
  cfg.masking.k = 2;
  cfg.masking.rate = 0.15;
  return cfg;
}

}  // namespace testsup

#endif  // TOFNER_TESTS_SUPPORT_HPP
