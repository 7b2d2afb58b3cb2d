// Command-line front end; everything substantive happens behind the C API.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tofner.h"

namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitTraining = 3;

int exit_code_for(tof_status status) {
  switch (status) {
    case TOF_OK: return kExitOk;
    case TOF_ERR_USAGE: return kExitUsage;
    case TOF_ERR_TRAINING: return kExitTraining;
    default: return kExitValidation;
  }
}

int report_failure(tof_status status) {
  std::fprintf(stderr, "error: %s\n", tof_last_error());
  return exit_code_for(status);
}

// Flags --seed/--mode/--iterations/--out become config-key overrides layered
// over the file and the TOF_* environment.
struct TrainArgs {
  std::string config_path;
  std::string seed, mode, iterations, out_dir;

  std::string overrides() const {
    json doc = json::object();
    if (!seed.empty()) doc["seed"] = json::parse(seed);
    if (!mode.empty()) doc["mode"] = mode;
    if (!iterations.empty()) doc["iterations"] = json::parse(iterations);
    if (!out_dir.empty()) doc["out_dir"] = out_dir;
    return doc.dump();
  }
};

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config_path, "run config file (flat-key JSON)")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--mode", args.mode,
                  "override the mode (TOF, TOF_NO_CONTINUAL, TOF_MRC_ONLY, ADAPTABERT_BASELINE)");
  cmd->add_option("--iterations", args.iterations, "override the loop iteration count T");
  cmd->add_option("--out", args.out_dir, "override the run output directory");
}

void print_trace_summary(const std::string& run_dir) {
  std::ifstream in(run_dir + "/trace.json");
  if (!in) return;
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc = json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded() || !doc.contains("records")) return;
  std::printf("run directory: %s\n", run_dir.c_str());
  std::printf("%-12s %-14s %-14s %s\n", "stage", "from", "to", "sizes");
  for (const auto& rec : doc["records"]) {
    std::string sizes;
    for (const auto& [k, v] : rec["sizes"].items()) {
      if (!sizes.empty()) sizes += " ";
      sizes += k + "=" + v.dump();
    }
    std::printf("%-12s %-14s %-14s %s\n", rec["stage"].get<std::string>().c_str(),
                rec["theta_from"].get<std::string>().c_str(),
                rec["theta_to"].get<std::string>().c_str(), sizes.c_str());
  }
}

int run_train(const TrainArgs& args, bool resume_run) {
  char run_dir[4096] = {0};
  tof_status status =
      resume_run ? tof_resume(args.config_path.c_str(), args.overrides().c_str(), run_dir,
                              sizeof(run_dir))
                 : tof_train(args.config_path.c_str(), args.overrides().c_str(), run_dir,
                             sizeof(run_dir));
  if (status != TOF_OK) return report_failure(status);
  print_trace_summary(run_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-resource NER transfer pipeline"};
  app.require_subcommand(1);
  app.footer(
      "exit codes: 0 success, 1 usage error, 2 validation/parse failure, 3 training failure\n"
      "every config key can be overridden via the environment: TOF_<KEY> with dots as\n"
      "underscores, e.g. TOF_NER_LEARNING_RATE=3e-3");

  // convert
  auto* convert = app.add_subcommand("convert", "data conversions");
  convert->require_subcommand(1);
  std::string in_path, out_path, labels = "PER,LOC,ORG,MISC", templates_path, map_path;
  bool lowercase_fallback = false;

  auto* ner2mrc = convert->add_subcommand("ner2mrc", "CoNLL NER file to MRC examples");
  ner2mrc->add_option("--in", in_path, "CoNLL input")->required();
  ner2mrc->add_option("--templates", templates_path, "query template JSON file")->required();
  ner2mrc->add_option("--labels", labels, "comma-separated entity types");
  ner2mrc->add_option("--out", out_path, "output line-JSON file")->required();

  auto* normalize = convert->add_subcommand("normalize-mrc", "SQuAD-style JSON to internal MRC");
  normalize->add_option("--in", in_path, "SQuAD-style JSON input")->required();
  normalize->add_option("--out", out_path, "output line-JSON file")->required();

  auto* strip = convert->add_subcommand("strip-labels", "set every tag to O");
  strip->add_option("--in", in_path, "CoNLL input")->required();
  strip->add_option("--labels", labels, "comma-separated entity types");
  strip->add_option("--out", out_path, "CoNLL output")->required();

  auto* substitute = convert->add_subcommand("substitute", "token-wise word substitution");
  substitute->add_option("--in", in_path, "CoNLL input")->required();
  substitute->add_option("--labels", labels, "comma-separated entity types");
  substitute->add_option("--map", map_path, "two-column word map file")->required();
  substitute->add_flag("--lowercase-fallback", lowercase_fallback,
                       "fall back to the lowercased token when unmapped");
  substitute->add_option("--out", out_path, "CoNLL output")->required();

  // train / resume
  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run the staged pipeline from a config");
  add_train_flags(train, train_args);
  TrainArgs resume_args;
  auto* resume = app.add_subcommand("resume", "continue an interrupted run");
  add_train_flags(resume, resume_args);

  // predict
  std::string checkpoint_path;
  auto* predict = app.add_subcommand("predict", "tag a CoNLL file with a checkpoint");
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  predict->add_option("--in", in_path, "CoNLL input")->required();
  predict->add_option("--out", out_path, "CoNLL output")->required();

  // eval
  std::string gold_path, pred_path, format = "table";
  auto* eval = app.add_subcommand("eval", "entity-level P/R/F1 of predictions against gold");
  eval->add_option("--gold", gold_path, "gold CoNLL file")->required();
  eval->add_option("--pred", pred_path, "predicted CoNLL file")->required();
  eval->add_option("--labels", labels, "comma-separated entity types");
  eval->add_option("--format", format, "report format: table or json");

  // make-synthetic
  std::string synth_dir;
  std::uint64_t synth_seed = 7;
  auto* synth = app.add_subcommand("make-synthetic",
                                   "generate the deterministic synthetic corpus suite");
  synth->add_option("--out", synth_dir, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  tof_status status = TOF_OK;
  size_t n_records = 0;
  if (ner2mrc->parsed()) {
    status = tof_convert_ner_to_mrc(in_path.c_str(), templates_path.c_str(), labels.c_str(),
                                    out_path.c_str(), &n_records);
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote %zu MRC examples to %s\n", n_records, out_path.c_str());
  } else if (normalize->parsed()) {
    status = tof_convert_normalize_mrc(in_path.c_str(), out_path.c_str(), &n_records);
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote %zu MRC examples to %s\n", n_records, out_path.c_str());
  } else if (strip->parsed()) {
    status = tof_convert_strip_labels(in_path.c_str(), labels.c_str(), out_path.c_str(),
                                      &n_records);
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote %zu sentences to %s\n", n_records, out_path.c_str());
  } else if (substitute->parsed()) {
    status = tof_convert_substitute(in_path.c_str(), labels.c_str(), map_path.c_str(),
                                    lowercase_fallback ? 1 : 0, out_path.c_str(), &n_records);
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote %zu sentences to %s\n", n_records, out_path.c_str());
  } else if (train->parsed()) {
    return run_train(train_args, false);
  } else if (resume->parsed()) {
    return run_train(resume_args, true);
  } else if (predict->parsed()) {
    status = tof_predict(checkpoint_path.c_str(), in_path.c_str(), out_path.c_str());
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote predictions to %s\n", out_path.c_str());
  } else if (eval->parsed()) {
    char report[16384] = {0};
    status = tof_eval(gold_path.c_str(), pred_path.c_str(), labels.c_str(), format.c_str(),
                      report, sizeof(report));
    if (status != TOF_OK) return report_failure(status);
    std::printf("%s\n", report);
  } else if (synth->parsed()) {
    status = tof_make_synthetic(synth_dir.c_str(), synth_seed);
    if (status != TOF_OK) return report_failure(status);
    std::printf("wrote synthetic suite to %s\n", synth_dir.c_str());
  }
  return kExitOk;
}
