#include "tofner/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

#include "tofner/convert.hpp"
#include "tofner/corpus.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// One marker per type, shared across domains; the marker carries the type.
const std::vector<std::string>& markers() {
  static const std::vector<std::string> m = {"sir", "near", "guild", "item"};
  return m;
}

// Entity content tokens are shared between domains; the domains differ only
// in their filler vocabulary, so the target side is O-context shift.
const std::vector<std::string>& entity_names() {
  static const std::vector<std::string> v = {"alpha", "bravo",  "charlie", "delta", "echo",
                                             "foxtrot", "golf", "hotel",   "india", "juliet"};
  return v;
}

// Filler words are syllabic and disjoint per domain (source onsets b/d/m,
// target onsets k/l/p).  A broad filler vocabulary keeps each filler rare, so
// its embedding stays close to initialization and the tagger has to learn
// "weakly trained token in plain context means outside" instead of memorizing
// filler identities; that is the rule that survives the domain switch.
std::vector<std::string> syllable_words(const char* onsets, const char* codas) {
  std::vector<std::string> out;
  for (const char* o = onsets; *o; ++o)
    for (const char* v = "aeiou"; *v; ++v)
      for (const char* c = codas; *c; ++c) out.push_back(std::string{*o, *v, *c});
  return out;
}

const std::vector<std::string>& source_fillers() {
  static const std::vector<std::string> v = syllable_words("bdm", "nt");
  return v;
}

const std::vector<std::string>& target_fillers() {
  static const std::vector<std::string> v = syllable_words("klp", "rs");
  return v;
}

TaggedSentence make_sentence(Rng& rng, const std::vector<std::string>& names,
                             const std::vector<std::string>& fillers, const LabelSet& labels,
                             const std::string& id) {
  const std::size_t n_fill = 2 + rng.uniform_index(4);      // 2..5
  const std::size_t n_entities = 2;  // two per sentence so every example also
                                     // trains nearest-marker discrimination
  std::vector<std::size_t> slots = rng.sample_indices(n_fill + 1, n_entities);
  std::sort(slots.begin(), slots.end());

  TaggedSentence s;
  s.id = id;
  std::size_t next_entity = 0;
  for (std::size_t slot = 0; slot <= n_fill; ++slot) {
    while (next_entity < slots.size() && slots[next_entity] == slot) {
      std::size_t type_index = rng.uniform_index(labels.types().size());
      s.tokens.push_back(markers()[type_index]);
      s.tags.push_back("B-" + labels.types()[type_index]);
      s.tokens.push_back(names[rng.uniform_index(names.size())]);
      s.tags.push_back("I-" + labels.types()[type_index]);
      ++next_entity;
    }
    if (slot < n_fill) {
      s.tokens.push_back(fillers[rng.uniform_index(fillers.size())]);
      s.tags.push_back(kOutsideTag);
    }
  }
  s.tokens.push_back(".");
  s.tags.push_back(kOutsideTag);
  return s;
}

std::vector<TaggedSentence> make_section(std::uint64_t seed, const std::string& section,
                                         std::size_t count, bool target_domain,
                                         const LabelSet& labels) {
  const auto& names = entity_names();
  const auto& fillers = target_domain ? target_fillers() : source_fillers();
  Rng rng(derive_seed(seed, section));
  std::vector<TaggedSentence> out;
  out.reserve(count);
  std::size_t nonce = 0;
  for (std::size_t i = 0; i < count; ++i) {
    TaggedSentence s = make_sentence(rng, names, fillers, labels, section + "-" + std::to_string(i));
    // Half of the source sentences carry a one-off nonce filler.  Hapax tokens
    // keep their embeddings near initialization, pinning that whole region of
    // embedding space to the outside tag, which is where every weakly trained
    // token the model meets later will sit.  Target sections stay nonce-free
    // so the held-out side measures the domain switch, not unknown-token luck.
    if (!target_domain && rng.uniform_index(2) == 0) {
      std::vector<std::size_t> filler_pos;
      for (std::size_t p = 0; p + 1 < s.tokens.size(); ++p)
        if (s.tags[p] == kOutsideTag) filler_pos.push_back(p);
      if (!filler_pos.empty())
        s.tokens[filler_pos[rng.uniform_index(filler_pos.size())]] =
            "q" + section.substr(0, 2) + section.substr(section.size() - 2) +
            std::to_string(nonce++);
    }
    out.push_back(std::move(s));
  }
  return out;
}

QueryTemplateSet make_templates() {
  return QueryTemplateSet({
      {"PER", "find the person name mentioned in the text"},
      {"LOC", "find the location name mentioned in the text"},
      {"ORG", "find the organization name mentioned in the text"},
      {"MISC", "find the miscellaneous entity name mentioned in the text"},
  });
}

}  // namespace

SyntheticSuite make_synthetic_suite(const SyntheticSpec& spec) {
  SyntheticSuite suite;
  suite.labels = LabelSet::default_four();
  suite.templates = make_templates();
  suite.source_ner = make_section(spec.seed, "source_ner", spec.source_ner, false, suite.labels);
  suite.source_unlabeled =
      make_section(spec.seed, "source_unlabeled", spec.source_unlabeled, false, suite.labels);
  suite.target_unlabeled =
      make_section(spec.seed, "target_unlabeled", spec.target_unlabeled, true, suite.labels);
  suite.target_test =
      make_section(spec.seed, "target_test", spec.target_test, true, suite.labels);
  suite.target_mrc = ner_to_mrc(
      make_section(spec.seed, "target_mrc", spec.target_mrc, true, suite.labels),
      suite.templates, suite.labels);
  suite.source_mrc = ner_to_mrc(
      make_section(spec.seed, "source_mrc", spec.source_mrc, false, suite.labels),
      suite.templates, suite.labels);
  for (std::size_t i = 0; i < source_fillers().size(); ++i)
    suite.dictionary[source_fillers()[i]] = target_fillers()[i];
  WordMap dict(suite.dictionary, false);
  suite.source_ner_translated = substitute_words(suite.source_ner, dict);
  suite.source_unlabeled_translated = substitute_words(suite.source_unlabeled, dict);
  for (auto& s : suite.source_ner_translated) s.id += "-tr";
  for (auto& s : suite.source_unlabeled_translated) s.id += "-tr";
  return suite;
}

void write_synthetic_suite(const SyntheticSuite& suite, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory " + dir);
  fs::path base(dir);

  write_file_atomic((base / "source_ner.conll").string(), serialize_conll(suite.source_ner));
  write_file_atomic((base / "source_unlabeled.conll").string(),
                    serialize_conll(strip_labels(suite.source_unlabeled)));
  write_file_atomic((base / "target_unlabeled.conll").string(),
                    serialize_conll(strip_labels(suite.target_unlabeled)));
  write_file_atomic((base / "target_test.conll").string(), serialize_conll(suite.target_test));
  write_file_atomic((base / "target_mrc.jsonl").string(), mrc_to_jsonl(suite.target_mrc));
  write_file_atomic((base / "source_mrc.jsonl").string(), mrc_to_jsonl(suite.source_mrc));
  write_file_atomic((base / "source_ner_translated.conll").string(),
                    serialize_conll(suite.source_ner_translated));
  write_file_atomic((base / "source_unlabeled_translated.conll").string(),
                    serialize_conll(strip_labels(suite.source_unlabeled_translated)));

  std::string dict_text;
  for (const auto& [from, to] : suite.dictionary) dict_text += from + " " + to + "\n";
  write_file_atomic((base / "dictionary.txt").string(), dict_text);

  json templates(suite.templates.queries());
  write_file_atomic((base / "templates.json").string(), templates.dump(2) + "\n");

  // Hyperparameters here are for the built-in backend on this corpus scale;
  // the library defaults target pretrained encoders and are far too small to
  // converge from random initialization.
  json config;
  config["mode"] = "TOF";
  config["iterations"] = 1;
  config["seed"] = 2019;
  config["labels"] = "PER,LOC,ORG,MISC";
  config["corpus.t_ner_unlabeled"] = "target_unlabeled.conll";
  config["corpus.s_ner_unlabeled"] = "source_unlabeled.conll";
  config["corpus.s_ner"] = "source_ner.conll";
  config["corpus.t_mrc"] = "target_mrc.jsonl";
  config["corpus.s_mrc"] = "source_mrc.jsonl";
  config["corpus.s_ner_translated"] = "source_ner_translated.conll";
  config["corpus.s_ner_unlabeled_translated"] = "source_unlabeled_translated.conll";
  config["templates"] = "templates.json";
  config["out_dir"] = "run";
  config["mlm.learning_rate"] = 3e-4;
  config["mlm.batch_size"] = 16;
  config["mlm.epochs"] = 2;
  config["mrc.learning_rate"] = 5e-4;
  config["mrc.batch_size"] = 8;
  config["mrc.epochs"] = 4;
  config["ner.learning_rate"] = 1e-3;
  config["ner.batch_size"] = 8;
  config["ner.epochs"] = 30;
  config["loop_mrc.learning_rate"] = 5e-4;
  config["loop_mrc.batch_size"] = 8;
  config["loop_mrc.epochs"] = 2;
  config["loop_ner.learning_rate"] = 1e-3;
  config["loop_ner.batch_size"] = 8;
  config["loop_ner.epochs"] = 10;
  config["masking.k"] = 10;
  config["masking.rate"] = 0.15;
  config["mrc_negative_keep_ratio"] = 0.3;
  config["pseudo_min_confidence"] = 0.99;
  write_file_atomic((base / "config.json").string(), config.dump(2) + "\n");
}

}  // namespace tof
