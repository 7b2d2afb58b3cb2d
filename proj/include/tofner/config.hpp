#ifndef TOFNER_CONFIG_HPP
#define TOFNER_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "tofner/corpus.hpp"
#include "tofner/pipeline.hpp"

namespace tof {

// Flat-key JSON run configuration: corpus role paths plus every pipeline
// knob, with documented defaults. Relative paths resolve against the config
// file's directory. Every key can be overridden through the environment
// (TOF_ prefix, uppercase, dots become underscores).
class RunConfig {
 public:
  static RunConfig defaults();
  // kParse when the text is not a JSON object; scalar-level type mistakes
  // and unknown keys are collected and surface through problems().
  static RunConfig parse(const std::string& json_text, const std::string& base_dir = "");
  static RunConfig load(const std::string& path);

  static std::string env_name(const std::string& key);  // "mlm.epochs" -> "TOF_MLM_EPOCHS"
  // Applies overrides for every known key present in the map (keys are env
  // names). Pass the filtered process environment here.
  void apply_env(const std::map<std::string, std::string>& env);

  // Every validation failure at once: unknown keys, type mistakes, bad
  // ranges, unparseable mode, missing corpus roles, dangling paths.
  std::vector<std::string> problems() const;
  void require_valid() const;  // kValidation listing all problems

  // Full snapshot with defaults and loop-stage fallbacks materialized;
  // reproduces the run when fed back through parse().
  std::string effective_json() const;

  std::string resolve(const std::string& path) const;
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  bool is_set(const std::string& key) const;  // explicitly present, not defaulted

  // Both require a valid config.
  CorpusRegistry load_registry() const;
  PipelineConfig pipeline_config() const;

  const std::string& base_dir() const { return base_dir_; }
  void set(const std::string& key, const std::string& literal);  // kUsage on unknown key

 private:
  std::string base_dir_;
  std::map<std::string, std::string> values_;   // key -> literal override
  std::vector<std::string> unknown_keys_;
  std::vector<std::string> parse_problems_;
};

}  // namespace tof

#endif  // TOFNER_CONFIG_HPP
