#include "tofner/corpus.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tofner/util.hpp"

namespace tof {

using json = nlohmann::json;

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> cols;
  std::istringstream in(line);
  std::string col;
  while (in >> col) cols.push_back(col);
  return cols;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Splits a tag into (prefix, type). Returns false for anything that is not
// "O", "B-T" or "I-T".
bool split_tag(const std::string& tag, char* prefix, std::string* type) {
  if (tag == kOutsideTag) {
    *prefix = 'O';
    type->clear();
    return true;
  }
  if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') return false;
  *prefix = tag[0];
  *type = tag.substr(2);
  return true;
}

}  // namespace

LabelSet::LabelSet(std::vector<std::string> types) : types_(std::move(types)) {
  if (types_.empty()) fail(ErrorKind::kValidation, "label set must contain at least one entity type");
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].empty()) fail(ErrorKind::kValidation, "label set contains an empty type name");
    for (std::size_t j = i + 1; j < types_.size(); ++j)
      if (types_[i] == types_[j])
        fail(ErrorKind::kValidation, "duplicate entity type in label set: " + types_[i]);
  }
}

LabelSet LabelSet::default_four() { return LabelSet({"PER", "LOC", "ORG", "MISC"}); }

LabelSet LabelSet::span_only() { return LabelSet({"SPAN"}); }

LabelSet LabelSet::parse(const std::string& csv) {
  std::vector<std::string> types;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    std::size_t a = item.find_first_not_of(" \t");
    std::size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    types.push_back(item.substr(a, b - a + 1));
  }
  return LabelSet(std::move(types));
}

bool LabelSet::has_type(const std::string& type) const {
  return std::find(types_.begin(), types_.end(), type) != types_.end();
}

std::vector<std::string> LabelSet::tag_vocabulary() const {
  std::vector<std::string> vocab{kOutsideTag};
  for (const auto& t : types_) {
    vocab.push_back("B-" + t);
    vocab.push_back("I-" + t);
  }
  return vocab;
}

ParsedCorpus parse_conll(const std::string& text, const LabelSet& labels,
                         const std::string& id_prefix) {
  ParsedCorpus out;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  bool next_is_doc_start = false;
  std::size_t ordinal = 0;

  auto flush = [&]() {
    if (tokens.empty()) return;
    TaggedSentence s;
    s.id = id_prefix + "-" + std::to_string(ordinal++);
    s.tokens = std::move(tokens);
    s.tags = std::move(tags);
    normalize_iob1(s.tags);
    if (next_is_doc_start) {
      out.doc_starts.push_back(out.sentences.size());
      next_is_doc_start = false;
    }
    out.sentences.push_back(std::move(s));
    tokens.clear();
    tags.clear();
  };

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) {
      flush();
      continue;
    }
    std::vector<std::string> cols = split_ws(line);
    if (cols.size() < 2)
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                  ": expected token and tag columns, got \"" + line + "\"");
    if (cols.front() == "-DOCSTART-") {
      next_is_doc_start = true;
      continue;
    }
    const std::string& tag = cols.back();
    char prefix;
    std::string type;
    if (!split_tag(tag, &prefix, &type))
      fail(ErrorKind::kValidation,
           "line " + std::to_string(line_no) + ": malformed tag \"" + tag + "\"");
    if (prefix != 'O' && !labels.has_type(type))
      fail(ErrorKind::kValidation,
           "line " + std::to_string(line_no) + ": unknown tag type in \"" + tag + "\"");
    tokens.push_back(cols.front());
    tags.push_back(tag);
  }
  flush();
  return out;
}

std::string serialize_conll(const std::vector<TaggedSentence>& sentences) {
  std::ostringstream out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i] << ' ' << s.tags[i] << '\n';
    out << '\n';
  }
  return out.str();
}

void normalize_iob1(std::vector<std::string>& tags) {
  std::string prev_type;
  char prev_prefix = 'O';
  for (auto& tag : tags) {
    char prefix;
    std::string type;
    if (!split_tag(tag, &prefix, &type)) continue;
    if (prefix == 'I') {
      bool continues = (prev_prefix == 'B' || prev_prefix == 'I') && prev_type == type;
      if (!continues) tag = "B-" + type;
    }
    prev_prefix = (tag == kOutsideTag) ? 'O' : tag[0];
    prev_type = type;
  }
}

BioVerdict validate_bio(const std::vector<std::string>& tags, const LabelSet& labels) {
  std::string prev_type;
  char prev_prefix = 'O';
  for (std::size_t i = 0; i < tags.size(); ++i) {
    char prefix;
    std::string type;
    if (!split_tag(tags[i], &prefix, &type))
      return {false, i, "malformed tag \"" + tags[i] + "\""};
    if (prefix != 'O' && !labels.has_type(type))
      return {false, i, "unknown tag type in \"" + tags[i] + "\""};
    if (prefix == 'I') {
      bool continues = (prev_prefix == 'B' || prev_prefix == 'I') && prev_type == type;
      if (!continues) return {false, i, "I-" + type + " does not continue a " + type + " span"};
    }
    prev_prefix = prefix;
    prev_type = type;
  }
  return {};
}

std::vector<EntitySpan> extract_entities(const TaggedSentence& sentence) {
  if (sentence.tokens.size() != sentence.tags.size())
    fail(ErrorKind::kContract, "sentence " + sentence.id + ": token/tag length mismatch");
  // extract_entities assumes BIO-valid input; the check keeps violations loud.
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < sentence.tags.size(); ++i) {
    const std::string& tag = sentence.tags[i];
    char prefix;
    std::string type;
    if (!split_tag(tag, &prefix, &type))
      fail(ErrorKind::kContract,
           "sentence " + sentence.id + ": malformed tag \"" + tag + "\" at index " + std::to_string(i));
    if (prefix == 'B') {
      spans.push_back({type, i, i});
    } else if (prefix == 'I') {
      if (spans.empty() || spans.back().end + 1 != i || spans.back().type != type)
        fail(ErrorKind::kContract, "sentence " + sentence.id + ": BIO-invalid tags at index " +
                                       std::to_string(i));
      spans.back().end = i;
    }
  }
  return spans;
}

std::vector<std::string> spans_to_bio(const std::vector<EntitySpan>& spans, std::size_t length) {
  std::vector<std::string> tags(length, kOutsideTag);
  std::vector<EntitySpan> ordered = spans;
  std::sort(ordered.begin(), ordered.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& span : ordered) {
    if (span.start > span.end || span.end >= length)
      fail(ErrorKind::kContract, "span out of range: [" + std::to_string(span.start) + ", " +
                                     std::to_string(span.end) + ") with length " +
                                     std::to_string(length));
    if (!first && span.start <= prev_end)
      fail(ErrorKind::kContract, "overlapping spans at index " + std::to_string(span.start));
    tags[span.start] = "B-" + span.type;
    for (std::size_t i = span.start + 1; i <= span.end; ++i) tags[i] = "I-" + span.type;
    prev_end = span.end;
    first = false;
  }
  return tags;
}

std::vector<TaggedSentence> strip_labels(const std::vector<TaggedSentence>& dataset) {
  std::vector<TaggedSentence> out = dataset;
  for (auto& s : out)
    std::fill(s.tags.begin(), s.tags.end(), kOutsideTag);
  return out;
}

std::string ner_to_jsonl(const std::vector<TaggedSentence>& dataset) {
  std::ostringstream out;
  for (const auto& s : dataset) {
    json rec{{"id", s.id}, {"tokens", s.tokens}, {"tags", s.tags}};
    out << rec.dump() << '\n';
  }
  return out.str();
}

std::vector<TaggedSentence> ner_from_jsonl(const std::string& text) {
  std::vector<TaggedSentence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    TaggedSentence s;
    try {
      s.id = rec.at("id").get<std::string>();
      s.tokens = rec.at("tokens").get<std::vector<std::string>>();
      s.tags = rec.at("tags").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (s.tokens.size() != s.tags.size())
      fail(ErrorKind::kParse,
           "line " + std::to_string(line_no) + ": token/tag length mismatch in record " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

std::string mrc_to_jsonl(const std::vector<MrcExample>& dataset) {
  std::ostringstream out;
  for (const auto& e : dataset) {
    json answers = json::array();
    for (const auto& a : e.answers) answers.push_back({a.start, a.end});
    json rec{{"id", e.id}, {"query", e.query}, {"context", e.context}, {"answers", answers}};
    if (!e.entity_type.empty()) rec["entity_type"] = e.entity_type;
    out << rec.dump() << '\n';
  }
  return out.str();
}

std::vector<MrcExample> mrc_from_jsonl(const std::string& text) {
  std::vector<MrcExample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    MrcExample e;
    try {
      e.id = rec.at("id").get<std::string>();
      e.query = rec.at("query").get<std::string>();
      e.context = rec.at("context").get<std::vector<std::string>>();
      for (const auto& a : rec.at("answers")) {
        if (!a.is_array() || a.size() != 2)
          fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": answer must be [start, end]");
        e.answers.push_back({a[0].get<std::size_t>(), a[1].get<std::size_t>()});
      }
      if (rec.contains("entity_type")) e.entity_type = rec["entity_type"].get<std::string>();
    } catch (const json::exception& ex) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    std::sort(e.answers.begin(), e.answers.end());
    for (std::size_t i = 0; i < e.answers.size(); ++i) {
      const auto& a = e.answers[i];
      if (a.start > a.end || a.end >= e.context.size())
        fail(ErrorKind::kParse,
             "line " + std::to_string(line_no) + ": answer out of range in record " + e.id);
      if (i > 0 && e.answers[i - 1].overlaps(a))
        fail(ErrorKind::kParse,
             "line " + std::to_string(line_no) + ": overlapping answers in record " + e.id);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::size_t NerStats::entities() const {
  std::size_t n = 0;
  for (const auto& [_, count] : entities_by_type) n += count;
  return n;
}

NerStats ner_stats(const std::vector<TaggedSentence>& dataset) {
  NerStats stats;
  stats.sentences = dataset.size();
  for (const auto& s : dataset) {
    stats.tokens += s.tokens.size();
    for (const auto& span : extract_entities(s)) ++stats.entities_by_type[span.type];
  }
  return stats;
}

MrcStats mrc_stats(const std::vector<MrcExample>& dataset) {
  MrcStats stats;
  stats.examples = dataset.size();
  for (const auto& e : dataset) {
    stats.answers += e.answers.size();
    if (e.answers.empty()) ++stats.negatives;
  }
  return stats;
}

const char* role_name(CorpusRole role) {
  switch (role) {
    case CorpusRole::kTargetNerUnlabeled: return "t_ner_unlabeled";
    case CorpusRole::kSourceNerUnlabeled: return "s_ner_unlabeled";
    case CorpusRole::kTargetMrc: return "t_mrc";
    case CorpusRole::kSourceMrc: return "s_mrc";
    case CorpusRole::kSourceNer: return "s_ner";
    case CorpusRole::kSourceNerAsMrc: return "s_ner_as_mrc";
    case CorpusRole::kTargetNerPseudo: return "t_ner_pseudo";
    case CorpusRole::kTargetMrcPseudo: return "t_mrc_pseudo";
    case CorpusRole::kSourceNerUnlabeledTranslated: return "s_ner_unlabeled_translated";
    case CorpusRole::kSourceNerTranslated: return "s_ner_translated";
  }
  return "unknown";
}

bool role_is_mrc(CorpusRole role) {
  switch (role) {
    case CorpusRole::kTargetMrc:
    case CorpusRole::kSourceMrc:
    case CorpusRole::kSourceNerAsMrc:
    case CorpusRole::kTargetMrcPseudo:
      return true;
    default:
      return false;
  }
}

bool role_is_unlabeled(CorpusRole role) {
  switch (role) {
    case CorpusRole::kTargetNerUnlabeled:
    case CorpusRole::kSourceNerUnlabeled:
    case CorpusRole::kSourceNerUnlabeledTranslated:
      return true;
    default:
      return false;
  }
}

void CorpusRegistry::set_ner(CorpusRole role, std::vector<TaggedSentence> data) {
  if (role_is_mrc(role))
    fail(ErrorKind::kContract, std::string("role ") + role_name(role) + " holds MRC data");
  if (role_is_unlabeled(role)) {
    data = strip_labels(data);
  } else {
    for (const auto& s : data) {
      if (s.tokens.size() != s.tags.size())
        fail(ErrorKind::kValidation, "sentence " + s.id + ": token/tag length mismatch");
      BioVerdict v = validate_bio(s.tags, labels_);
      if (!v.valid)
        fail(ErrorKind::kValidation, "sentence " + s.id + ": " + v.reason + " at index " +
                                         std::to_string(v.first_violation));
    }
  }
  ner_[role] = std::move(data);
}

void CorpusRegistry::set_mrc(CorpusRole role, std::vector<MrcExample> data) {
  if (!role_is_mrc(role))
    fail(ErrorKind::kContract, std::string("role ") + role_name(role) + " holds NER data");
  for (const auto& e : data) {
    for (std::size_t i = 0; i < e.answers.size(); ++i) {
      const auto& a = e.answers[i];
      if (a.start > a.end || a.end >= e.context.size())
        fail(ErrorKind::kValidation, "example " + e.id + ": answer out of context range");
      if (i > 0 && e.answers[i - 1].overlaps(a))
        fail(ErrorKind::kValidation, "example " + e.id + ": overlapping answers");
    }
  }
  mrc_[role] = std::move(data);
}

bool CorpusRegistry::has(CorpusRole role) const {
  return ner_.count(role) > 0 || mrc_.count(role) > 0;
}

const std::vector<TaggedSentence>& CorpusRegistry::ner(CorpusRole role) const {
  auto it = ner_.find(role);
  if (it == ner_.end())
    fail(ErrorKind::kContract, std::string("registry has no NER data for role ") + role_name(role));
  return it->second;
}

const std::vector<MrcExample>& CorpusRegistry::mrc(CorpusRole role) const {
  auto it = mrc_.find(role);
  if (it == mrc_.end())
    fail(ErrorKind::kContract, std::string("registry has no MRC data for role ") + role_name(role));
  return it->second;
}

std::size_t CorpusRegistry::size(CorpusRole role) const {
  if (auto it = ner_.find(role); it != ner_.end()) return it->second.size();
  if (auto it = mrc_.find(role); it != mrc_.end()) return it->second.size();
  return 0;
}

std::vector<CorpusRole> CorpusRegistry::roles() const {
  std::vector<CorpusRole> out;
  for (const auto& [role, _] : ner_) out.push_back(role);
  for (const auto& [role, _] : mrc_) out.push_back(role);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tof
