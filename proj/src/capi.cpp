#include "tofner.h"

#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "tofner/config.hpp"
#include "tofner/convert.hpp"
#include "tofner/corpus.hpp"
#include "tofner/eval.hpp"
#include "tofner/pipeline.hpp"
#include "tofner/synthetic.hpp"
#include "tofner/util.hpp"

extern char** environ;

namespace {

using tof::Error;
using tof::ErrorKind;
using json = nlohmann::json;

thread_local std::string g_last_error;

tof_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return TOF_ERR_USAGE;
    case ErrorKind::kValidation: return TOF_ERR_VALIDATION;
    case ErrorKind::kParse: return TOF_ERR_PARSE;
    case ErrorKind::kContract: return TOF_ERR_CONTRACT;
    case ErrorKind::kTraining: return TOF_ERR_TRAINING;
    case ErrorKind::kIo: return TOF_ERR_IO;
  }
  return TOF_ERR_INTERNAL;
}

template <typename Fn>
tof_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TOF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TOF_ERR_INTERNAL;
  }
}

void require_arg(const char* value, const char* name) {
  if (value == nullptr) tof::fail(ErrorKind::kUsage, std::string(name) + " must not be NULL");
}

void copy_out(const std::string& value, char* buf, size_t len) {
  if (buf == nullptr || len == 0) return;
  size_t n = std::min(value.size(), len - 1);
  std::memcpy(buf, value.data(), n);
  buf[n] = '\0';
}

std::map<std::string, std::string> process_env() {
  std::map<std::string, std::string> env;
  for (char** p = environ; p != nullptr && *p != nullptr; ++p) {
    const char* eq = std::strchr(*p, '=');
    if (!eq) continue;
    std::string name(*p, eq - *p);
    if (name.rfind("TOF_", 0) == 0) env[name] = eq + 1;
  }
  return env;
}

tof::RunConfig load_config(const char* config_path, const char* overrides_json) {
  require_arg(config_path, "config_path");
  tof::RunConfig config = tof::RunConfig::load(config_path);
  config.apply_env(process_env());
  if (overrides_json != nullptr && *overrides_json != '\0') {
    json doc;
    try {
      doc = json::parse(overrides_json);
    } catch (const json::exception& e) {
      tof::fail(ErrorKind::kUsage, std::string("overrides are not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) tof::fail(ErrorKind::kUsage, "overrides must be a JSON object");
    for (const auto& [key, value] : doc.items())
      config.set(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  config.require_valid();
  return config;
}

std::vector<tof::TaggedSentence> read_conll(const char* path, const tof::LabelSet& labels,
                                            const char* prefix) {
  return tof::parse_conll(tof::read_file(path), labels, prefix).sentences;
}

}  // namespace

struct tof_model {
  tof::ModelState state;
  std::string stage_tag;  // stable storage for the accessor
};

extern "C" {

const char* tof_version(void) { return "0.1.0"; }

const char* tof_last_error(void) { return g_last_error.c_str(); }

tof_status tof_convert_ner_to_mrc(const char* conll_in, const char* templates_path,
                                  const char* labels_csv, const char* jsonl_out,
                                  size_t* n_records) {
  return guarded([&] {
    require_arg(conll_in, "conll_in");
    require_arg(templates_path, "templates_path");
    require_arg(labels_csv, "labels_csv");
    require_arg(jsonl_out, "jsonl_out");
    tof::LabelSet labels = tof::LabelSet::parse(labels_csv);
    tof::QueryTemplateSet templates = tof::QueryTemplateSet::load(templates_path);
    templates.require_coverage(labels);
    auto sentences = read_conll(conll_in, labels, "s");
    auto examples = tof::ner_to_mrc(sentences, templates, labels);
    tof::write_file_atomic(jsonl_out, tof::mrc_to_jsonl(examples));
    if (n_records) *n_records = examples.size();
  });
}

tof_status tof_convert_normalize_mrc(const char* squad_json_in, const char* jsonl_out,
                                     size_t* n_records) {
  return guarded([&] {
    require_arg(squad_json_in, "squad_json_in");
    require_arg(jsonl_out, "jsonl_out");
    tof::NormalizeResult result = tof::mrc_normalize(tof::read_file(squad_json_in));
    tof::write_file_atomic(jsonl_out, tof::mrc_to_jsonl(result.examples));
    if (n_records) *n_records = result.examples.size();
  });
}

tof_status tof_convert_strip_labels(const char* conll_in, const char* labels_csv,
                                    const char* conll_out, size_t* n_records) {
  return guarded([&] {
    require_arg(conll_in, "conll_in");
    require_arg(labels_csv, "labels_csv");
    require_arg(conll_out, "conll_out");
    tof::LabelSet labels = tof::LabelSet::parse(labels_csv);
    auto sentences = read_conll(conll_in, labels, "s");
    auto stripped = tof::strip_labels(sentences);
    tof::write_file_atomic(conll_out, tof::serialize_conll(stripped));
    if (n_records) *n_records = stripped.size();
  });
}

tof_status tof_convert_substitute(const char* conll_in, const char* labels_csv,
                                  const char* wordmap_path, int lowercase_fallback,
                                  const char* conll_out, size_t* n_records) {
  return guarded([&] {
    require_arg(conll_in, "conll_in");
    require_arg(labels_csv, "labels_csv");
    require_arg(wordmap_path, "wordmap_path");
    require_arg(conll_out, "conll_out");
    tof::LabelSet labels = tof::LabelSet::parse(labels_csv);
    tof::WordMap map = tof::WordMap::load(wordmap_path, lowercase_fallback != 0);
    auto sentences = read_conll(conll_in, labels, "s");
    auto substituted = tof::substitute_words(sentences, map);
    tof::write_file_atomic(conll_out, tof::serialize_conll(substituted));
    if (n_records) *n_records = substituted.size();
  });
}

tof_status tof_train(const char* config_path, const char* overrides_json, char* run_dir_buf,
                     size_t run_dir_len) {
  return guarded([&] {
    tof::RunConfig config = load_config(config_path, overrides_json);
    tof::PipelineConfig pipeline = config.pipeline_config();
    tof::CorpusRegistry registry = config.load_registry();
    if (!pipeline.run_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(pipeline.run_dir, ec);
      tof::write_file_atomic(pipeline.run_dir + "/config.json", config.effective_json());
    }
    tof::run_tof(registry, pipeline);
    copy_out(pipeline.run_dir, run_dir_buf, run_dir_len);
  });
}

tof_status tof_resume(const char* config_path, const char* overrides_json, char* run_dir_buf,
                      size_t run_dir_len) {
  return guarded([&] {
    tof::RunConfig config = load_config(config_path, overrides_json);
    tof::PipelineConfig pipeline = config.pipeline_config();
    tof::CorpusRegistry registry = config.load_registry();
    tof::resume(pipeline.run_dir, registry, pipeline);
    copy_out(pipeline.run_dir, run_dir_buf, run_dir_len);
  });
}

tof_status tof_model_load(const char* checkpoint_path, tof_model** out) {
  return guarded([&] {
    require_arg(checkpoint_path, "checkpoint_path");
    if (out == nullptr) tof::fail(ErrorKind::kUsage, "out must not be NULL");
    auto model = std::make_unique<tof_model>();
    model->state = tof::load_checkpoint(checkpoint_path);
    model->stage_tag = model->state.stage_tag;
    *out = model.release();
  });
}

void tof_model_free(tof_model* model) { delete model; }

const char* tof_model_stage_tag(const tof_model* model) {
  return model ? model->stage_tag.c_str() : "";
}

tof_status tof_model_predict_file(const tof_model* model, const char* conll_in,
                                  const char* conll_out) {
  return guarded([&] {
    if (!model) tof::fail(ErrorKind::kUsage, "model must not be NULL");
    require_arg(conll_in, "conll_in");
    require_arg(conll_out, "conll_out");
    auto sentences = read_conll(conll_in, model->state.labels, "p");
    auto tagged = tof::generate_pseudo_labels(model->state, sentences);
    tof::write_file_atomic(conll_out, tof::serialize_conll(tagged));
  });
}

tof_status tof_predict(const char* checkpoint_path, const char* conll_in, const char* conll_out) {
  tof_model* model = nullptr;
  tof_status status = tof_model_load(checkpoint_path, &model);
  if (status != TOF_OK) return status;
  status = tof_model_predict_file(model, conll_in, conll_out);
  tof_model_free(model);
  return status;
}

tof_status tof_eval(const char* gold_conll, const char* pred_conll, const char* labels_csv,
                    const char* format, char* report_buf, size_t report_len) {
  return guarded([&] {
    require_arg(gold_conll, "gold_conll");
    require_arg(pred_conll, "pred_conll");
    require_arg(labels_csv, "labels_csv");
    tof::LabelSet labels = tof::LabelSet::parse(labels_csv);
    auto gold = read_conll(gold_conll, labels, "g");
    auto pred = read_conll(pred_conll, labels, "p");
    tof::PrfScore score = tof::entity_f1(gold, pred);
    std::string fmt = format ? format : "json";
    if (fmt != "json" && fmt != "table")
      tof::fail(ErrorKind::kUsage, "format must be \"json\" or \"table\"");
    copy_out(fmt == "table" ? score.to_table() : score.to_json(), report_buf, report_len);
  });
}

tof_status tof_make_synthetic(const char* out_dir, uint64_t seed) {
  return guarded([&] {
    require_arg(out_dir, "out_dir");
    tof::SyntheticSpec spec;
    spec.seed = seed;
    tof::write_synthetic_suite(tof::make_synthetic_suite(spec), out_dir);
  });
}

}  // extern "C"
