#include "tofner/convert.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tofner/corpus.hpp"
#include "tofner/util.hpp"

namespace tof {

using json = nlohmann::json;

QueryTemplateSet::QueryTemplateSet(std::map<std::string, std::string> queries)
    : queries_(std::move(queries)) {
  for (const auto& [type, query] : queries_) {
    if (query.empty())
      fail(ErrorKind::kValidation, "empty query template for type " + type);
    for (const auto& [other_type, other_query] : queries_) {
      if (type < other_type && query == other_query)
        fail(ErrorKind::kValidation,
             "types " + type + " and " + other_type + " share the same query template");
    }
  }
}

QueryTemplateSet QueryTemplateSet::load(const std::string& path) {
  return from_json(read_file(path));
}

QueryTemplateSet QueryTemplateSet::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("template file: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kParse, "template file must be a JSON object");
  std::map<std::string, std::string> queries;
  for (const auto& [type, query] : doc.items()) {
    if (!query.is_string())
      fail(ErrorKind::kParse, "template for type " + type + " must be a string");
    queries[type] = query.get<std::string>();
  }
  return QueryTemplateSet(std::move(queries));
}

const std::string& QueryTemplateSet::query_for(const std::string& type) const {
  auto it = queries_.find(type);
  if (it == queries_.end())
    fail(ErrorKind::kValidation, "no query template for entity type " + type);
  return it->second;
}

bool QueryTemplateSet::covers(const LabelSet& labels) const {
  for (const auto& type : labels.types())
    if (queries_.find(type) == queries_.end()) return false;
  return true;
}

void QueryTemplateSet::require_coverage(const LabelSet& labels) const {
  for (const auto& type : labels.types())
    if (queries_.find(type) == queries_.end())
      fail(ErrorKind::kValidation, "no query template for entity type " + type);
}

namespace {

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

WordMap::WordMap(std::map<std::string, std::string> entries, bool lowercase_fallback)
    : entries_(std::move(entries)), lowercase_fallback_(lowercase_fallback) {}

WordMap WordMap::load(const std::string& path, bool lowercase_fallback) {
  return parse(read_file(path), lowercase_fallback);
}

WordMap WordMap::parse(const std::string& text, bool lowercase_fallback) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream cols(line);
    std::string src, dst, extra;
    if (!(cols >> src >> dst) || (cols >> extra))
      fail(ErrorKind::kParse,
           "word map line " + std::to_string(line_no) + ": expected exactly two columns");
    if (entries.count(src))
      fail(ErrorKind::kParse,
           "word map line " + std::to_string(line_no) + ": duplicate source word \"" + src + "\"");
    entries[src] = dst;
  }
  return WordMap(std::move(entries), lowercase_fallback);
}

const std::string& WordMap::translate(const std::string& token) const {
  auto it = entries_.find(token);
  if (it != entries_.end()) return it->second;
  if (lowercase_fallback_) {
    it = entries_.find(ascii_lower(token));
    if (it != entries_.end()) return it->second;
  }
  return token;
}

bool WordMap::contains(const std::string& token) const {
  if (entries_.count(token)) return true;
  return lowercase_fallback_ && entries_.count(ascii_lower(token)) > 0;
}

std::vector<MrcExample> ner_to_mrc(const std::vector<TaggedSentence>& dataset,
                                   const QueryTemplateSet& templates,
                                   const LabelSet& labels) {
  templates.require_coverage(labels);
  std::vector<MrcExample> out;
  out.reserve(dataset.size() * labels.types().size());
  for (const auto& sentence : dataset) {
    std::vector<EntitySpan> spans = extract_entities(sentence);
    for (const auto& type : labels.types()) {
      MrcExample e;
      e.id = sentence.id + "#" + type;
      e.query = templates.query_for(type);
      e.context = sentence.tokens;
      e.entity_type = type;
      for (const auto& span : spans)
        if (span.type == type) e.answers.push_back({span.start, span.end});
      std::sort(e.answers.begin(), e.answers.end());
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<MrcExample> pseudo_ner_to_mrc(const std::vector<TaggedSentence>& pseudo,
                                          const QueryTemplateSet& templates,
                                          const LabelSet& labels) {
  return ner_to_mrc(pseudo, templates, labels);
}

std::vector<OffsetToken> tokenize_with_offsets(const std::string& text) {
  std::vector<OffsetToken> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c < 128 && std::ispunct(c)) {
      tokens.push_back({std::string(1, text[i]), i, i + 1});
      ++i;
      continue;
    }
    std::size_t begin = i;
    while (i < text.size()) {
      unsigned char d = static_cast<unsigned char>(text[i]);
      if (std::isspace(d) || (d < 128 && std::ispunct(d))) break;
      ++i;
    }
    tokens.push_back({text.substr(begin, i - begin), begin, i});
  }
  return tokens;
}

namespace {

struct RawAnswer {
  std::string text;
  std::size_t start = 0;
};

// Maps a character-offset answer to the smallest covering token span.
AnswerSpan align_answer(const std::string& context, const std::vector<OffsetToken>& tokens,
                        const RawAnswer& raw, const std::string& qa_id,
                        std::vector<std::string>* warnings) {
  if (raw.start > context.size() || raw.start + raw.text.size() > context.size())
    fail(ErrorKind::kParse, "example " + qa_id + ": answer offset " +
                                std::to_string(raw.start) + " out of context range");
  if (context.compare(raw.start, raw.text.size(), raw.text) != 0)
    fail(ErrorKind::kValidation,
         "example " + qa_id + ": answer text does not match context at offset " +
             std::to_string(raw.start));
  // Trim surrounding whitespace so the span never starts or ends between
  // tokens.
  std::size_t begin = raw.start;
  std::size_t end = raw.start + raw.text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(context[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(context[end - 1]))) --end;
  if (begin == end)
    fail(ErrorKind::kValidation, "example " + qa_id + ": whitespace-only answer");

  std::size_t first = tokens.size();
  std::size_t last = tokens.size();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].begin < end && tokens[t].end > begin) {
      if (first == tokens.size()) first = t;
      last = t;
    }
  }
  if (first == tokens.size())
    fail(ErrorKind::kValidation, "example " + qa_id + ": answer aligns with no token");
  if (tokens[first].begin != begin || tokens[last].end != end)
    warnings->push_back("example " + qa_id + ": answer \"" + raw.text +
                        "\" widened to covering token span [" + std::to_string(first) + ", " +
                        std::to_string(last) + "]");
  return {first, last};
}

}  // namespace

NormalizeResult mrc_normalize(const std::string& raw_json, const std::string& id_prefix) {
  json doc;
  try {
    doc = json::parse(raw_json);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("MRC file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array())
    fail(ErrorKind::kParse, "MRC file: expected a top-level object with a \"data\" array");

  NormalizeResult result;
  std::size_t ordinal = 0;
  for (const auto& article : doc["data"]) {
    if (!article.contains("paragraphs")) continue;
    for (const auto& paragraph : article["paragraphs"]) {
      if (!paragraph.contains("context") || !paragraph.contains("qas"))
        fail(ErrorKind::kParse, "MRC file: paragraph without context or qas");
      const std::string context = paragraph["context"].get<std::string>();
      std::vector<OffsetToken> tokens = tokenize_with_offsets(context);
      std::vector<std::string> context_tokens;
      context_tokens.reserve(tokens.size());
      for (const auto& t : tokens) context_tokens.push_back(t.text);

      for (const auto& qa : paragraph["qas"]) {
        MrcExample e;
        e.id = qa.contains("id") ? qa["id"].get<std::string>()
                                 : id_prefix + "-" + std::to_string(ordinal);
        ++ordinal;
        if (!qa.contains("question"))
          fail(ErrorKind::kParse, "example " + e.id + ": missing question");
        e.query = qa["question"].get<std::string>();
        e.context = context_tokens;

        bool impossible = qa.contains("is_impossible") && qa["is_impossible"].get<bool>();
        if (!impossible && qa.contains("answers")) {
          for (const auto& ans : qa["answers"]) {
            RawAnswer raw;
            raw.text = ans.at("text").get<std::string>();
            long long start = ans.at("answer_start").get<long long>();
            if (start < 0)
              fail(ErrorKind::kParse, "example " + e.id + ": negative answer offset");
            raw.start = static_cast<std::size_t>(start);
            e.answers.push_back(align_answer(context, tokens, raw, e.id, &result.warnings));
          }
        }
        std::sort(e.answers.begin(), e.answers.end());
        e.answers.erase(std::unique(e.answers.begin(), e.answers.end()), e.answers.end());
        // Distinct answers that still overlap cannot be represented as flat
        // spans; keep the earliest and warn.
        std::vector<AnswerSpan> kept;
        for (const auto& a : e.answers) {
          if (!kept.empty() && kept.back().overlaps(a)) {
            result.warnings.push_back("example " + e.id + ": dropped overlapping answer [" +
                                      std::to_string(a.start) + ", " + std::to_string(a.end) + "]");
            continue;
          }
          kept.push_back(a);
        }
        e.answers = std::move(kept);
        result.examples.push_back(std::move(e));
      }
    }
  }
  return result;
}

std::vector<TaggedSentence> substitute_words(const std::vector<TaggedSentence>& dataset,
                                             const WordMap& map) {
  std::vector<TaggedSentence> out = dataset;
  for (auto& sentence : out)
    for (auto& token : sentence.tokens) token = map.translate(token);
  return out;
}

}  // namespace tof
