#include "tofner/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "tofner/util.hpp"

namespace tof {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum class KeyType { kString, kDouble, kInt, kBool };

struct KeySpec {
  const char* key;
  KeyType type;
  const char* fallback;  // default literal; loop-stage keys fall back to their base stage
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"labels", KeyType::kString, "PER,LOC,ORG,MISC"},
      {"mode", KeyType::kString, "TOF"},
      {"iterations", KeyType::kInt, "1"},
      {"seed", KeyType::kInt, "2019"},
      {"templates", KeyType::kString, ""},
      {"out_dir", KeyType::kString, "run"},
      {"stop_after", KeyType::kString, ""},
      {"corpus.t_ner_unlabeled", KeyType::kString, ""},
      {"corpus.s_ner_unlabeled", KeyType::kString, ""},
      {"corpus.t_mrc", KeyType::kString, ""},
      {"corpus.s_mrc", KeyType::kString, ""},
      {"corpus.s_ner", KeyType::kString, ""},
      {"corpus.s_ner_unlabeled_translated", KeyType::kString, ""},
      {"corpus.s_ner_translated", KeyType::kString, ""},
      {"mlm.learning_rate", KeyType::kDouble, "5e-05"},
      {"mlm.batch_size", KeyType::kInt, "32"},
      {"mlm.epochs", KeyType::kInt, "3"},
      {"mrc.learning_rate", KeyType::kDouble, "2e-05"},
      {"mrc.batch_size", KeyType::kInt, "16"},
      {"mrc.epochs", KeyType::kInt, "6"},
      {"ner.learning_rate", KeyType::kDouble, "5e-05"},
      {"ner.batch_size", KeyType::kInt, "64"},
      {"ner.epochs", KeyType::kInt, "6"},
      {"loop_mrc.learning_rate", KeyType::kDouble, nullptr},
      {"loop_mrc.batch_size", KeyType::kInt, nullptr},
      {"loop_mrc.epochs", KeyType::kInt, nullptr},
      {"loop_ner.learning_rate", KeyType::kDouble, nullptr},
      {"loop_ner.batch_size", KeyType::kInt, nullptr},
      {"loop_ner.epochs", KeyType::kInt, nullptr},
      {"masking.k", KeyType::kInt, "10"},
      {"masking.rate", KeyType::kDouble, "0.15"},
      {"decode.threshold", KeyType::kDouble, "0.5"},
      {"decode.max_span_len", KeyType::kInt, "30"},
      {"mrc_negative_keep_ratio", KeyType::kDouble, "1"},
      {"pseudo_min_confidence", KeyType::kDouble, "0"},
      {"loop_include_source_mrc", KeyType::kBool, "false"},
      {"encoder.d_model", KeyType::kInt, "64"},
      {"encoder.n_layers", KeyType::kInt, "2"},
      {"encoder.d_ff", KeyType::kInt, "128"},
      {"encoder.max_len", KeyType::kInt, "256"},
      {"encoder.rel_window", KeyType::kInt, "8"},
      {"encoder.tie_mlm", KeyType::kBool, "true"},
      {"encoder.init_scale", KeyType::kDouble, "0.02"},
  };
  return table;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& spec : key_table())
    if (key == spec.key) return &spec;
  return nullptr;
}

// Loop-stage keys without an explicit value follow the base MRC/NER stage.
std::string fallback_key(const std::string& key) {
  if (key.rfind("loop_mrc.", 0) == 0) return "mrc." + key.substr(std::string("loop_mrc.").size());
  if (key.rfind("loop_ner.", 0) == 0) return "ner." + key.substr(std::string("loop_ner.").size());
  return "";
}

bool convert_double(const std::string& literal, double* out) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(literal.c_str(), &end);
  if (errno != 0 || end == literal.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

bool convert_int(const std::string& literal, std::int64_t* out) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(literal.c_str(), &end, 10);
  if (errno != 0 || end == literal.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

bool convert_bool(const std::string& literal, bool* out) {
  if (literal == "true" || literal == "1") {
    *out = true;
    return true;
  }
  if (literal == "false" || literal == "0") {
    *out = false;
    return true;
  }
  return false;
}

// Corpus roles a config may populate directly.
const std::vector<CorpusRole>& config_roles() {
  static const std::vector<CorpusRole> roles = {
      CorpusRole::kTargetNerUnlabeled, CorpusRole::kSourceNerUnlabeled,
      CorpusRole::kTargetMrc,          CorpusRole::kSourceMrc,
      CorpusRole::kSourceNer,          CorpusRole::kSourceNerUnlabeledTranslated,
      CorpusRole::kSourceNerTranslated};
  return roles;
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig(); }

RunConfig RunConfig::parse(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kParse, "config must be a JSON object of flat keys");

  RunConfig config;
  config.base_dir_ = base_dir;
  for (const auto& [key, value] : doc.items()) {
    const KeySpec* spec = find_key(key);
    if (!spec) {
      config.unknown_keys_.push_back(key);
      continue;
    }
    std::string literal;
    bool ok = true;
    switch (spec->type) {
      case KeyType::kString:
        ok = value.is_string();
        if (ok) literal = value.get<std::string>();
        break;
      case KeyType::kDouble:
        ok = value.is_number();
        if (ok) literal = value.dump();
        break;
      case KeyType::kInt:
        ok = value.is_number_integer();
        if (ok) literal = value.dump();
        break;
      case KeyType::kBool:
        ok = value.is_boolean();
        if (ok) literal = value.dump();
        break;
    }
    if (!ok) {
      config.parse_problems_.push_back("key '" + key + "' has the wrong type (value " +
                                       value.dump() + ")");
      continue;
    }
    config.values_[key] = literal;
  }
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  std::string dir = fs::path(path).parent_path().string();
  return parse(read_file(path), dir);
}

std::string RunConfig::env_name(const std::string& key) {
  std::string name = "TOF_";
  for (char c : key)
    name += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void RunConfig::apply_env(const std::map<std::string, std::string>& env) {
  for (const auto& spec : key_table()) {
    auto it = env.find(env_name(spec.key));
    if (it != env.end()) values_[spec.key] = it->second;
  }
}

void RunConfig::set(const std::string& key, const std::string& literal) {
  if (!find_key(key)) fail(ErrorKind::kUsage, "unknown config key: " + key);
  values_[key] = literal;
}

bool RunConfig::is_set(const std::string& key) const {
  return values_.find(key) != values_.end();
}

std::string RunConfig::get_string(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec) fail(ErrorKind::kUsage, "unknown config key: " + key);
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  std::string fb = fallback_key(key);
  if (!fb.empty()) return get_string(fb);
  return spec->fallback ? spec->fallback : "";
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  std::string literal = get_string(key);
  if (!convert_double(literal, &v))
    fail(ErrorKind::kValidation, "key '" + key + "': '" + literal + "' is not a number");
  return v;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  std::int64_t v = 0;
  std::string literal = get_string(key);
  if (!convert_int(literal, &v))
    fail(ErrorKind::kValidation, "key '" + key + "': '" + literal + "' is not an integer");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  std::string literal = get_string(key);
  if (!convert_bool(literal, &v))
    fail(ErrorKind::kValidation, "key '" + key + "': '" + literal + "' is not a boolean");
  return v;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty() || base_dir_.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir_) / path).string();
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out = parse_problems_;
  for (const auto& key : unknown_keys_) out.push_back("unknown key: " + key);

  // Type and range checks over every key, using the effective value.
  auto check_double = [&](const std::string& key, double lo, double hi, bool lo_open) {
    double v = 0.0;
    if (!convert_double(get_string(key), &v)) {
      out.push_back("key '" + key + "': '" + get_string(key) + "' is not a number");
      return;
    }
    bool ok = lo_open ? (v > lo) : (v >= lo);
    if (v > hi) ok = false;
    if (!ok)
      out.push_back("key '" + key + "': " + get_string(key) + " is outside the allowed range");
  };
  auto check_int = [&](const std::string& key, std::int64_t lo) {
    std::int64_t v = 0;
    if (!convert_int(get_string(key), &v)) {
      out.push_back("key '" + key + "': '" + get_string(key) + "' is not an integer");
      return;
    }
    if (v < lo)
      out.push_back("key '" + key + "': " + get_string(key) + " must be >= " + std::to_string(lo));
  };
  auto check_bool = [&](const std::string& key) {
    bool v = false;
    if (!convert_bool(get_string(key), &v))
      out.push_back("key '" + key + "': '" + get_string(key) + "' is not a boolean");
  };

  constexpr double kInf = 1e308;
  for (const char* key : {"mlm.learning_rate", "mrc.learning_rate", "ner.learning_rate",
                          "loop_mrc.learning_rate", "loop_ner.learning_rate"})
    check_double(key, 0.0, kInf, true);
  for (const char* key : {"mlm.batch_size", "mrc.batch_size", "ner.batch_size",
                          "loop_mrc.batch_size", "loop_ner.batch_size"})
    check_int(key, 1);
  for (const char* key : {"mlm.epochs", "mrc.epochs", "ner.epochs", "loop_mrc.epochs",
                          "loop_ner.epochs"})
    check_int(key, 0);
  check_int("iterations", 0);
  check_int("seed", 0);
  check_int("masking.k", 1);
  check_double("masking.rate", 0.0, 1.0, true);
  check_double("decode.threshold", 0.0, 1.0, false);
  check_int("decode.max_span_len", 1);
  check_double("mrc_negative_keep_ratio", 0.0, 1.0, false);
  check_double("pseudo_min_confidence", 0.0, 1.0, false);
  check_bool("loop_include_source_mrc");
  check_bool("encoder.tie_mlm");
  check_int("encoder.d_model", 1);
  check_int("encoder.n_layers", 1);
  check_int("encoder.d_ff", 1);
  check_int("encoder.max_len", 8);
  check_int("encoder.rel_window", 1);
  check_double("encoder.init_scale", 0.0, kInf, true);

  try {
    LabelSet::parse(get_string("labels"));
  } catch (const Error& e) {
    out.push_back(std::string("key 'labels': ") + e.what());
  }

  PipelineMode mode = PipelineMode::kTof;
  bool mode_ok = true;
  try {
    mode = parse_mode(get_string("mode"));
  } catch (const Error& e) {
    out.push_back(std::string("key 'mode': ") + e.what());
    mode_ok = false;
  }

  if (get_string("out_dir").empty()) out.push_back("key 'out_dir': must not be empty");

  // Required roles per mode, then existence of every referenced file.
  if (mode_ok) {
    const bool uses_mrc = mode != PipelineMode::kAdaptabertBaseline;
    for (const char* key :
         {"corpus.t_ner_unlabeled", "corpus.s_ner_unlabeled", "corpus.s_ner"})
      if (get_string(key).empty())
        out.push_back(std::string("key '") + key + "': required for mode " + mode_name(mode));
    if (uses_mrc) {
      if (get_string("corpus.t_mrc").empty() && get_string("corpus.s_mrc").empty())
        out.push_back("mode " + std::string(mode_name(mode)) +
                      " needs corpus.t_mrc or corpus.s_mrc");
      if (get_string("templates").empty())
        out.push_back("key 'templates': required for mode " + std::string(mode_name(mode)));
    }
  }
  for (const auto& spec : key_table()) {
    std::string key(spec.key);
    bool is_path = key.rfind("corpus.", 0) == 0 || key == "templates";
    if (!is_path) continue;
    std::string path = get_string(key);
    if (!path.empty() && !fs::exists(resolve(path)))
      out.push_back("key '" + key + "': file not found: " + resolve(path));
  }
  return out;
}

void RunConfig::require_valid() const {
  std::vector<std::string> found = problems();
  if (found.empty()) return;
  std::string joined = "invalid config:";
  for (const auto& p : found) joined += "\n  - " + p;
  fail(ErrorKind::kValidation, joined);
}

std::string RunConfig::effective_json() const {
  json doc;
  for (const auto& spec : key_table()) {
    switch (spec.type) {
      case KeyType::kString: doc[spec.key] = get_string(spec.key); break;
      case KeyType::kDouble: doc[spec.key] = get_double(spec.key); break;
      case KeyType::kInt: doc[spec.key] = get_int(spec.key); break;
      case KeyType::kBool: doc[spec.key] = get_bool(spec.key); break;
    }
  }
  return doc.dump(2) + "\n";
}

CorpusRegistry RunConfig::load_registry() const {
  require_valid();
  CorpusRegistry registry(LabelSet::parse(get_string("labels")));
  for (CorpusRole role : config_roles()) {
    std::string key = std::string("corpus.") + role_name(role);
    std::string path = get_string(key);
    if (path.empty()) continue;
    std::string text = read_file(resolve(path));
    if (role_is_mrc(role)) {
      registry.set_mrc(role, mrc_from_jsonl(text));
    } else {
      ParsedCorpus parsed = parse_conll(text, registry.labels(), role_name(role));
      registry.set_ner(role, std::move(parsed.sentences));
    }
  }
  return registry;
}

PipelineConfig RunConfig::pipeline_config() const {
  require_valid();
  PipelineConfig cfg;
  cfg.mode = parse_mode(get_string("mode"));
  cfg.iterations = static_cast<std::size_t>(get_int("iterations"));
  cfg.seed = static_cast<std::uint64_t>(get_int("seed"));
  cfg.encoder.d_model = static_cast<std::size_t>(get_int("encoder.d_model"));
  cfg.encoder.n_layers = static_cast<std::size_t>(get_int("encoder.n_layers"));
  cfg.encoder.d_ff = static_cast<std::size_t>(get_int("encoder.d_ff"));
  cfg.encoder.max_len = static_cast<std::size_t>(get_int("encoder.max_len"));
  cfg.encoder.rel_window = static_cast<std::size_t>(get_int("encoder.rel_window"));
  cfg.encoder.tie_mlm = get_bool("encoder.tie_mlm");
  cfg.encoder.init_scale = get_double("encoder.init_scale");
  cfg.masking.k = static_cast<std::size_t>(get_int("masking.k"));
  cfg.masking.rate = get_double("masking.rate");
  cfg.decode.threshold = get_double("decode.threshold");
  cfg.decode.max_span_len = static_cast<std::size_t>(get_int("decode.max_span_len"));
  auto stage = [&](const char* prefix) {
    StageHyperparams hp;
    std::string p(prefix);
    hp.learning_rate = get_double(p + ".learning_rate");
    hp.batch_size = static_cast<std::size_t>(get_int(p + ".batch_size"));
    hp.epochs = static_cast<std::size_t>(get_int(p + ".epochs"));
    return hp;
  };
  cfg.mlm = stage("mlm");
  cfg.mrc = stage("mrc");
  cfg.ner = stage("ner");
  cfg.loop_mrc = stage("loop_mrc");
  cfg.loop_ner = stage("loop_ner");
  cfg.mrc_negative_keep_ratio = get_double("mrc_negative_keep_ratio");
  cfg.pseudo_min_confidence = get_double("pseudo_min_confidence");
  cfg.loop_include_source_mrc = get_bool("loop_include_source_mrc");
  if (!get_string("templates").empty())
    cfg.templates = QueryTemplateSet::load(resolve(get_string("templates")));
  cfg.run_dir = resolve(get_string("out_dir"));
  cfg.stop_after = get_string("stop_after");
  return cfg;
}

}  // namespace tof
