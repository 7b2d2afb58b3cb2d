#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "checks.hpp"
#include "support.hpp"
#include "tofner.h"
#include "tofner/corpus.hpp"
#include "tofner/synthetic.hpp"

using testsup::contains;

namespace {

std::string err() { return tof_last_error(); }

const char kTemplatesJson[] =
    R"({"PER": "find person entities", "LOC": "find location entities",)"
    R"( "ORG": "find organization entities", "MISC": "find miscellaneous entities"})";

const char kTwoSentences[] =
    "john B-PER\nworks O\nat O\nacme B-ORG\n\nparis B-LOC\n\n";

}  // namespace

TEST_CASE("version and per-thread error lifecycle") {
  CHECK(std::string(tof_version()) == "0.1.0");

  CHECK(tof_convert_strip_labels(nullptr, "PER", "/tmp/x", nullptr) == TOF_ERR_USAGE);
  CHECK(err() == "conll_in must not be NULL");

  testsup::TempDir tmp("capi-err");
  testsup::spill(tmp.file("in.conll"), "a O\n\n");
  size_t n = 0;
  CHECK(tof_convert_strip_labels(tmp.file("in.conll").c_str(), "PER,LOC,ORG,MISC",
                                 tmp.file("out.conll").c_str(), &n) == TOF_OK);
  CHECK(err().empty());  // success clears the message
}

TEST_CASE("null arguments map to usage errors with the argument name") {
  tof_model* model = nullptr;
  CHECK(tof_model_load(nullptr, &model) == TOF_ERR_USAGE);
  CHECK(contains(err(), "checkpoint_path must not be NULL"));
  CHECK(tof_model_load("/tmp/whatever.ckpt", nullptr) == TOF_ERR_USAGE);
  CHECK(contains(err(), "out must not be NULL"));
  CHECK(tof_model_predict_file(nullptr, "a", "b") == TOF_ERR_USAGE);
  CHECK(contains(err(), "model must not be NULL"));
  CHECK(tof_eval(nullptr, "a", "PER", "json", nullptr, 0) == TOF_ERR_USAGE);
  CHECK(tof_train(nullptr, nullptr, nullptr, 0) == TOF_ERR_USAGE);
  CHECK(tof_make_synthetic(nullptr, 1) == TOF_ERR_USAGE);
}

TEST_CASE("conversion endpoints run file to file") {
  testsup::TempDir tmp("capi-convert");
  testsup::spill(tmp.file("in.conll"), kTwoSentences);
  testsup::spill(tmp.file("templates.json"), kTemplatesJson);

  size_t n = 0;
  CHECK(tof_convert_ner_to_mrc(tmp.file("in.conll").c_str(), tmp.file("templates.json").c_str(),
                               "PER,LOC,ORG,MISC", tmp.file("out.jsonl").c_str(),
                               &n) == TOF_OK);
  CHECK(n == 8);  // one example per sentence and type
  std::vector<tof::MrcExample> examples =
      tof::mrc_from_jsonl(testsup::slurp(tmp.file("out.jsonl")));
  REQUIRE(examples.size() == 8);
  CHECK(examples[0].entity_type == "PER");
  CHECK(examples[0].answers == std::vector<tof::AnswerSpan>{{0, 0}});
  CHECK(examples[1].entity_type == "LOC");
  CHECK(examples[1].answers.empty());

  CHECK(tof_convert_strip_labels(tmp.file("in.conll").c_str(), "PER,LOC,ORG,MISC",
                                 tmp.file("stripped.conll").c_str(), &n) == TOF_OK);
  CHECK(n == 2);
  CHECK(testsup::slurp(tmp.file("stripped.conll")) ==
        "john O\nworks O\nat O\nacme O\n\nparis O\n\n");

  testsup::spill(tmp.file("map.txt"), "john juan\nparis pariz\n");
  CHECK(tof_convert_substitute(tmp.file("in.conll").c_str(), "PER,LOC,ORG,MISC",
                               tmp.file("map.txt").c_str(), 0,
                               tmp.file("subst.conll").c_str(), &n) == TOF_OK);
  CHECK(testsup::slurp(tmp.file("subst.conll")) ==
        "juan B-PER\nworks O\nat O\nacme B-ORG\n\npariz B-LOC\n\n");

  testsup::spill(tmp.file("squad.json"),
                 R"({"data":[{"paragraphs":[{"context":"Paris is big","qas":[)"
                 R"({"id":"q1","question":"where is it?",)"
                 R"("answers":[{"text":"Paris","answer_start":0}]}]}]}]})");
  CHECK(tof_convert_normalize_mrc(tmp.file("squad.json").c_str(),
                                  tmp.file("norm.jsonl").c_str(), &n) == TOF_OK);
  CHECK(n == 1);
  std::vector<tof::MrcExample> norm = tof::mrc_from_jsonl(testsup::slurp(tmp.file("norm.jsonl")));
  REQUIRE(norm.size() == 1);
  CHECK(norm[0].context == std::vector<std::string>{"Paris", "is", "big"});
  CHECK(norm[0].answers == std::vector<tof::AnswerSpan>{{0, 0}});
}

TEST_CASE("conversion failures map to the right status codes") {
  testsup::TempDir tmp("capi-convfail");
  size_t n = 0;
  CHECK(tof_convert_ner_to_mrc(tmp.file("absent.conll").c_str(), tmp.file("t.json").c_str(),
                               "PER", tmp.file("o").c_str(), &n) == TOF_ERR_IO);
  CHECK(contains(err(), "cannot open"));

  testsup::spill(tmp.file("bad.conll"), "lonelytoken\n\n");
  testsup::spill(tmp.file("templates.json"), kTemplatesJson);
  CHECK(tof_convert_strip_labels(tmp.file("bad.conll").c_str(), "PER,LOC,ORG,MISC",
                                 tmp.file("o.conll").c_str(), &n) == TOF_ERR_PARSE);
  CHECK(contains(err(), "line 1"));

  testsup::spill(tmp.file("short.json"), R"({"PER": "people only"})");
  testsup::spill(tmp.file("ok.conll"), "a O\n\n");
  CHECK(tof_convert_ner_to_mrc(tmp.file("ok.conll").c_str(), tmp.file("short.json").c_str(),
                               "PER,LOC,ORG,MISC", tmp.file("o.jsonl").c_str(),
                               &n) == TOF_ERR_VALIDATION);
  CHECK(contains(err(), "LOC"));
}

TEST_CASE("train, resume, predict and eval drive a full run") {
  namespace fs = std::filesystem;
  testsup::TempDir tmp("capi-train");
  tof::SyntheticSuite suite = testsup::small_suite();
  tof::write_synthetic_suite(suite, tmp.path().string());
  std::string config = tmp.file("config.json");

  // Uninterrupted reference run.
  std::string run1 = tmp.file("run1");
  std::string overrides1 = "{\"out_dir\": \"" + run1 + "\"}";
  char run_dir_buf[512] = {0};
  REQUIRE_MESSAGE(tof_train(config.c_str(), overrides1.c_str(), run_dir_buf,
                            sizeof run_dir_buf) == TOF_OK,
                  err());
  CHECK(std::string(run_dir_buf) == run1);
  for (const char* name : {"trace.json", "pipeline_config.json", "config.json",
                           "predictions.conll"})
    CHECK_MESSAGE(fs::exists(fs::path(run1) / name), "missing ", name);

  // Interrupted run, then resume to completion; same bytes as the reference.
  std::string run2 = tmp.file("run2");
  std::string overrides2 =
      "{\"out_dir\": \"" + run2 + "\", \"stop_after\": \"NER\"}";
  REQUIRE_MESSAGE(tof_train(config.c_str(), overrides2.c_str(), nullptr, 0) == TOF_OK, err());
  CHECK_FALSE(fs::exists(fs::path(run2) / "predictions.conll"));

  std::string overrides3 = "{\"out_dir\": \"" + run2 + "\"}";
  REQUIRE_MESSAGE(tof_resume(config.c_str(), overrides3.c_str(), nullptr, 0) == TOF_OK, err());
  CHECK(testsup::slurp(run2 + "/predictions.conll") ==
        testsup::slurp(run1 + "/predictions.conll"));
  CHECK(testsup::slurp(run2 + "/trace.json") == testsup::slurp(run1 + "/trace.json"));

  // Model loading and file prediction from the final checkpoint.
  std::string ckpt = run1 + "/checkpoints/theta_ner_1.ckpt";
  tof_model* model = nullptr;
  REQUIRE_MESSAGE(tof_model_load(ckpt.c_str(), &model) == TOF_OK, err());
  CHECK(std::string(tof_model_stage_tag(model)) == "theta_ner_1");

  std::string test_conll = tmp.file("target_test.conll");
  std::string pred_a = tmp.file("pred_a.conll");
  REQUIRE_MESSAGE(tof_model_predict_file(model, test_conll.c_str(), pred_a.c_str()) == TOF_OK,
                  err());
  tof_model_free(model);

  std::string pred_b = tmp.file("pred_b.conll");
  REQUIRE(tof_predict(ckpt.c_str(), test_conll.c_str(), pred_b.c_str()) == TOF_OK);
  CHECK(testsup::slurp(pred_a) == testsup::slurp(pred_b));

  tof::ParsedCorpus parsed =
      tof::parse_conll(testsup::slurp(pred_a), suite.labels, "p");
  CHECK(parsed.sentences.size() == suite.target_test.size());

  // Evaluation against the gold test set, in both formats.
  char report[2048] = {0};
  REQUIRE_MESSAGE(tof_eval(test_conll.c_str(), pred_a.c_str(), "PER,LOC,ORG,MISC", "json",
                           report, sizeof report) == TOF_OK,
                  err());
  CHECK(contains(report, "\"f1\""));
  CHECK(contains(report, "\"precision\""));

  REQUIRE(tof_eval(test_conll.c_str(), pred_a.c_str(), "PER,LOC,ORG,MISC", "table", report,
                   sizeof report) == TOF_OK);
  CHECK(contains(report, "precision:"));

  CHECK(tof_eval(test_conll.c_str(), pred_a.c_str(), "PER,LOC,ORG,MISC", "yaml", report,
                 sizeof report) == TOF_ERR_USAGE);
  CHECK(contains(err(), "format must be"));

  // Reports are truncated to the buffer, always NUL-terminated.
  char tiny[8];
  std::memset(tiny, 'x', sizeof tiny);
  REQUIRE(tof_eval(test_conll.c_str(), pred_a.c_str(), "PER,LOC,ORG,MISC", "json", tiny,
                   sizeof tiny) == TOF_OK);
  CHECK(std::strlen(tiny) == 7);

  // Mismatched corpora are a contract violation.
  CHECK(tof_eval(test_conll.c_str(), tmp.file("target_unlabeled.conll").c_str(),
                 "PER,LOC,ORG,MISC", "json", report, sizeof report) == TOF_ERR_CONTRACT);
}

TEST_CASE("config problems surface through train with precise statuses") {
  testsup::TempDir tmp("capi-cfgfail");
  CHECK(tof_train(tmp.file("absent.json").c_str(), nullptr, nullptr, 0) == TOF_ERR_IO);

  testsup::spill(tmp.file("empty.json"), "{}");
  CHECK(tof_train(tmp.file("empty.json").c_str(), nullptr, nullptr, 0) == TOF_ERR_VALIDATION);
  CHECK(contains(err(), "invalid config"));

  tof::SyntheticSuite suite = testsup::small_suite();
  tof::write_synthetic_suite(suite, tmp.path().string());
  std::string config = tmp.file("config.json");
  CHECK(tof_train(config.c_str(), "not json", nullptr, 0) == TOF_ERR_USAGE);
  CHECK(contains(err(), "overrides are not valid JSON"));
  CHECK(tof_train(config.c_str(), "[1]", nullptr, 0) == TOF_ERR_USAGE);
  CHECK(contains(err(), "overrides must be a JSON object"));
  CHECK(tof_train(config.c_str(), "{\"bogus\": 1}", nullptr, 0) == TOF_ERR_USAGE);
  CHECK(contains(err(), "unknown config key: bogus"));

  std::string empty_run = tmp.file("never-ran");
  std::string overrides = "{\"out_dir\": \"" + empty_run + "\"}";
  CHECK(tof_resume(config.c_str(), overrides.c_str(), nullptr, 0) == TOF_ERR_VALIDATION);
  CHECK(contains(err(), "nothing to resume"));
}

TEST_CASE("environment overrides apply inside the api") {
  testsup::TempDir tmp("capi-env");
  tof::SyntheticSuite suite = testsup::small_suite();
  tof::write_synthetic_suite(suite, tmp.path().string());
  std::string config = tmp.file("config.json");

  ::setenv("TOF_SEED", "123", 1);
  std::string run_a = tmp.file("env-run");
  std::string overrides =
      "{\"out_dir\": \"" + run_a + "\", \"stop_after\": \"MLM\"}";
  REQUIRE_MESSAGE(tof_train(config.c_str(), overrides.c_str(), nullptr, 0) == TOF_OK, err());
  CHECK(contains(testsup::slurp(run_a + "/config.json"), "\"seed\": 123"));

  // Explicit overrides outrank the environment.
  std::string run_b = tmp.file("env-run-b");
  std::string stronger =
      "{\"out_dir\": \"" + run_b + "\", \"stop_after\": \"MLM\", \"seed\": 77}";
  REQUIRE_MESSAGE(tof_train(config.c_str(), stronger.c_str(), nullptr, 0) == TOF_OK, err());
  CHECK(contains(testsup::slurp(run_b + "/config.json"), "\"seed\": 77"));
  ::unsetenv("TOF_SEED");
}

TEST_CASE("the synthetic generator is deterministic per seed") {
  testsup::TempDir tmp("capi-synth");
  std::string a = tmp.file("a");
  std::string b = tmp.file("b");
  std::string c = tmp.file("c");
  REQUIRE_MESSAGE(tof_make_synthetic(a.c_str(), 5) == TOF_OK, err());
  REQUIRE(tof_make_synthetic(b.c_str(), 5) == TOF_OK);
  REQUIRE(tof_make_synthetic(c.c_str(), 6) == TOF_OK);

  for (const char* name : {"source_ner.conll", "target_unlabeled.conll", "target_mrc.jsonl",
                           "config.json", "templates.json", "dictionary.txt"}) {
    CHECK_MESSAGE(std::filesystem::exists(std::filesystem::path(a) / name), "missing ", name);
    CHECK(testsup::slurp(a + "/" + name) == testsup::slurp(b + "/" + name));
  }
  CHECK(testsup::slurp(a + "/source_ner.conll") != testsup::slurp(c + "/source_ner.conll"));
}
