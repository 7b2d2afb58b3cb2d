#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "checks.hpp"
#include "support.hpp"

using testsup::contains;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary through the shell so environment prefixes and
// redirections behave as they would for a user.
CliResult run_cli(const std::string& tail, const std::string& env = "") {
  static testsup::TempDir io("cli-io");
  static int counter = 0;
  std::string out_path = io.file("out" + std::to_string(counter));
  std::string err_path = io.file("err" + std::to_string(counter));
  ++counter;
  std::string cmd = env + (env.empty() ? "" : " ") + "'" + TOF_CLI_PATH + "' " + tail + " >'" +
                    out_path + "' 2>'" + err_path + "'";
  int raw = std::system(cmd.c_str());
  CliResult result;
  result.code = WEXITSTATUS(raw);
  result.out = testsup::slurp(out_path);
  result.err = testsup::slurp(err_path);
  return result;
}

// One-epoch schedules keep pipeline-driving cases quick; train and resume
// must share this prefix because the stage plan is part of the run snapshot.
const std::string kFastEnv =
    "TOF_MLM_EPOCHS=1 TOF_MRC_EPOCHS=1 TOF_NER_EPOCHS=1 "
    "TOF_LOOP_MRC_EPOCHS=1 TOF_LOOP_NER_EPOCHS=1";

const char kTwoSentences[] =
    "John B-PER\nworks O\nat O\nacme B-ORG\n\nparis B-LOC\n\n";

std::string make_suite(testsup::TempDir& tmp) {
  CliResult r = run_cli("make-synthetic --out '" + tmp.path().string() + "/suite' --seed 9");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return tmp.path().string() + "/suite";
}

}  // namespace

TEST_CASE("cli: help and usage errors carry the documented exit codes") {
  CliResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(contains(help.out, "exit codes: 0 success, 1 usage error"));
  for (const char* sub : {"convert", "train", "resume", "predict", "eval", "make-synthetic"})
    CHECK_MESSAGE(contains(help.out, sub), "help misses ", sub);

  CHECK(run_cli("").code == 1);                    // a subcommand is required
  CHECK(run_cli("frobnicate").code == 1);          // unknown subcommand
  CHECK(run_cli("convert").code == 1);             // conversion kind is required
  CliResult missing = run_cli("convert ner2mrc --in x.conll --out y.jsonl");
  CHECK(missing.code == 1);
  CHECK(contains(missing.err, "--templates"));
}

TEST_CASE("cli: conversions transform files and report counts") {
  testsup::TempDir tmp("cli-convert");
  testsup::spill(tmp.file("in.conll"), kTwoSentences);
  testsup::spill(tmp.file("templates.json"),
                 R"({"PER": "who?", "LOC": "where?", "ORG": "what org?", "MISC": "what else?"})");

  CliResult r = run_cli("convert ner2mrc --in '" + tmp.file("in.conll") + "' --templates '" +
                        tmp.file("templates.json") + "' --out '" + tmp.file("mrc.jsonl") + "'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "wrote 8 MRC examples to"));
  CHECK(std::filesystem::file_size(tmp.file("mrc.jsonl")) > 0);

  r = run_cli("convert strip-labels --in '" + tmp.file("in.conll") + "' --out '" +
              tmp.file("stripped.conll") + "'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "wrote 2 sentences to"));
  CHECK(testsup::slurp(tmp.file("stripped.conll")) ==
        "John O\nworks O\nat O\nacme O\n\nparis O\n\n");

  testsup::spill(tmp.file("map.txt"), "john juan\nparis pariz\n");
  r = run_cli("convert substitute --in '" + tmp.file("in.conll") + "' --map '" +
              tmp.file("map.txt") + "' --out '" + tmp.file("subst.conll") + "'");
  CHECK(r.code == 0);
  CHECK(contains(testsup::slurp(tmp.file("subst.conll")), "John B-PER"));  // case-sensitive miss

  r = run_cli("convert substitute --in '" + tmp.file("in.conll") + "' --map '" +
              tmp.file("map.txt") + "' --lowercase-fallback --out '" +
              tmp.file("subst2.conll") + "'");
  CHECK(r.code == 0);
  CHECK(contains(testsup::slurp(tmp.file("subst2.conll")), "juan B-PER"));

  testsup::spill(tmp.file("squad.json"),
                 R"({"data":[{"paragraphs":[{"context":"Rome fell","qas":[)"
                 R"({"id":"q1","question":"what fell?",)"
                 R"("answers":[{"text":"Rome","answer_start":0}]}]}]}]})");
  r = run_cli("convert normalize-mrc --in '" + tmp.file("squad.json") + "' --out '" +
              tmp.file("norm.jsonl") + "'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "wrote 1 MRC examples to"));
}

TEST_CASE("cli: data failures print an error line and exit 2") {
  testsup::TempDir tmp("cli-fail");
  CliResult r = run_cli("convert strip-labels --in '" + tmp.file("absent.conll") + "' --out '" +
                        tmp.file("o.conll") + "'");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "error: "));
  CHECK(contains(r.err, "cannot open"));

  testsup::spill(tmp.file("bad.conll"), "lonelytoken\n\n");
  r = run_cli("eval --gold '" + tmp.file("bad.conll") + "' --pred '" + tmp.file("bad.conll") +
              "'");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "line 1"));

  r = run_cli("train --config '" + tmp.file("absent.json") + "'");
  CHECK(r.code == 2);

  std::string suite = make_suite(tmp);
  r = run_cli("resume --config '" + suite + "/config.json' --out '" + tmp.file("fresh-dir") +
              "'");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "nothing to resume"));
}

TEST_CASE("cli: train prints a trace summary and honors flag overrides") {
  testsup::TempDir tmp("cli-train");
  std::string suite = make_suite(tmp);
  std::string run = tmp.file("run");

  CliResult r = run_cli("train --config '" + suite + "/config.json' --seed 123 --out '" + run +
                            "'",
                        kFastEnv);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(contains(r.out, "run directory: " + run));
  for (const char* stage : {"MLM", "MRC", "NER", "PSEUDO_GEN", "REFRESH", "MRC_LOOP_1",
                            "NER_LOOP_1", "PREDICT"})
    CHECK_MESSAGE(contains(r.out, stage), "summary misses ", stage);
  CHECK(contains(r.out, "theta_ner_1"));
  CHECK(std::filesystem::exists(run + "/predictions.conll"));
  CHECK(contains(testsup::slurp(run + "/config.json"), "\"seed\": 123"));

  std::string baseline_run = tmp.file("run-baseline");
  r = run_cli("train --config '" + suite + "/config.json' --mode ADAPTABERT_BASELINE --out '" +
                  baseline_run + "'",
              kFastEnv);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(contains(r.out, "MLM"));
  CHECK(contains(r.out, "PREDICT"));
  CHECK_FALSE(contains(r.out, "MRC"));
}

TEST_CASE("cli: resume finishes a run stopped early by the environment") {
  testsup::TempDir tmp("cli-resume");
  std::string suite = make_suite(tmp);
  std::string run = tmp.file("run");

  CliResult r = run_cli("train --config '" + suite + "/config.json' --out '" + run + "'",
                        kFastEnv + " TOF_STOP_AFTER=NER");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK_FALSE(std::filesystem::exists(run + "/predictions.conll"));

  r = run_cli("resume --config '" + suite + "/config.json' --out '" + run + "'", kFastEnv);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(contains(r.out, "PREDICT"));
  CHECK(std::filesystem::exists(run + "/predictions.conll"));
}

TEST_CASE("cli: predict and eval close the loop on a trained checkpoint") {
  testsup::TempDir tmp("cli-predict");
  std::string suite = make_suite(tmp);
  std::string run = tmp.file("run");
  CliResult r = run_cli("train --config '" + suite + "/config.json' --out '" + run + "'",
                        kFastEnv);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  std::string preds = tmp.file("preds.conll");
  r = run_cli("predict --checkpoint '" + run + "/checkpoints/theta_ner_1.ckpt' --in '" + suite +
              "/target_test.conll' --out '" + preds + "'");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(contains(r.out, "wrote predictions to"));

  r = run_cli("eval --gold '" + suite + "/target_test.conll' --pred '" + preds + "'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "precision:"));
  CHECK(contains(r.out, "f1:"));

  r = run_cli("eval --gold '" + suite + "/target_test.conll' --pred '" + preds +
              "' --format json");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "\"f1\""));

  r = run_cli("eval --gold '" + suite + "/target_test.conll' --pred '" + preds +
              "' --format yaml");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "format must be"));
}
