#include "tofner/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "tofner/masking.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kStageMlm[] = "MLM";
constexpr char kStageMrc[] = "MRC";
constexpr char kStageNer[] = "NER";
constexpr char kStagePseudoGen[] = "PSEUDO_GEN";
constexpr char kStageNerPseudo[] = "NER_PSEUDO";
constexpr char kStageRefresh[] = "REFRESH";
constexpr char kStagePredict[] = "PREDICT";

std::string loop_mrc_stage(std::size_t i) { return "MRC_LOOP_" + std::to_string(i); }
std::string loop_ner_stage(std::size_t i) { return "NER_LOOP_" + std::to_string(i); }
std::string refresh_stage(std::size_t i) { return "REFRESH_" + std::to_string(i); }

bool mode_uses_mrc(PipelineMode mode) { return mode != PipelineMode::kAdaptabertBaseline; }

bool mode_uses_pseudo(PipelineMode mode) {
  return mode == PipelineMode::kTof || mode == PipelineMode::kTofNoContinual;
}

}  // namespace

const char* mode_name(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kTof: return "TOF";
    case PipelineMode::kTofNoContinual: return "TOF_NO_CONTINUAL";
    case PipelineMode::kTofMrcOnly: return "TOF_MRC_ONLY";
    case PipelineMode::kAdaptabertBaseline: return "ADAPTABERT_BASELINE";
  }
  fail(ErrorKind::kContract, "unknown pipeline mode value");
}

PipelineMode parse_mode(const std::string& name) {
  for (PipelineMode m : {PipelineMode::kTof, PipelineMode::kTofNoContinual,
                         PipelineMode::kTofMrcOnly, PipelineMode::kAdaptabertBaseline})
    if (name == mode_name(m)) return m;
  fail(ErrorKind::kValidation,
       "unknown mode: " + name +
           " (expected TOF, TOF_NO_CONTINUAL, TOF_MRC_ONLY or ADAPTABERT_BASELINE)");
}

std::vector<std::string> expected_stage_sequence(const PipelineConfig& config) {
  std::vector<std::string> plan;
  plan.push_back(kStageMlm);
  if (mode_uses_mrc(config.mode)) plan.push_back(kStageMrc);
  plan.push_back(kStageNer);
  if (mode_uses_pseudo(config.mode)) {
    plan.push_back(kStagePseudoGen);
    plan.push_back(kStageNerPseudo);
    if (config.mode == PipelineMode::kTof) {
      plan.push_back(kStageRefresh);
      for (std::size_t i = 1; i <= config.iterations; ++i) {
        plan.push_back(loop_mrc_stage(i));
        plan.push_back(loop_ner_stage(i));
        plan.push_back(refresh_stage(i));
      }
    }
  }
  plan.push_back(kStagePredict);
  return plan;
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  auto check_stage = [&](const char* name, const StageHyperparams& hp) {
    if (!(hp.learning_rate > 0.0))
      problems.push_back(std::string(name) + ".learning_rate must be positive");
    if (hp.batch_size == 0) problems.push_back(std::string(name) + ".batch_size must be >= 1");
  };
  check_stage("mlm", mlm);
  check_stage("mrc", mrc);
  check_stage("ner", ner);
  check_stage("loop_mrc", loop_mrc);
  check_stage("loop_ner", loop_ner);
  if (masking.k < 1) problems.push_back("masking.k must be >= 1");
  if (!(masking.rate > 0.0 && masking.rate < 1.0))
    problems.push_back("masking.rate must lie in (0, 1)");
  if (!(mrc_negative_keep_ratio >= 0.0 && mrc_negative_keep_ratio <= 1.0))
    problems.push_back("mrc_negative_keep_ratio must lie in [0, 1]");
  if (!(pseudo_min_confidence >= 0.0 && pseudo_min_confidence <= 1.0))
    problems.push_back("pseudo_min_confidence must lie in [0, 1]");
  if (!(decode.threshold >= 0.0 && decode.threshold <= 1.0))
    problems.push_back("decode.threshold must lie in [0, 1]");
  if (decode.max_span_len == 0) problems.push_back("decode.max_span_len must be >= 1");
  if (encoder.d_model == 0) problems.push_back("encoder.d_model must be >= 1");
  if (encoder.n_layers == 0) problems.push_back("encoder.n_layers must be >= 1");
  if (encoder.d_ff == 0) problems.push_back("encoder.d_ff must be >= 1");
  if (encoder.max_len < 8) problems.push_back("encoder.max_len must be >= 8");
  if (!stop_after.empty()) {
    auto plan = expected_stage_sequence(*this);
    if (std::find(plan.begin(), plan.end(), stop_after) == plan.end())
      problems.push_back("stop_after names stage '" + stop_after + "' which mode " +
                         mode_name(mode) + " never runs");
  }
  if (!problems.empty()) {
    std::string joined = "invalid pipeline config:";
    for (const auto& p : problems) joined += "\n  - " + p;
    fail(ErrorKind::kValidation, joined);
  }
}

std::vector<std::string> PipelineTrace::stage_names() const {
  std::vector<std::string> names;
  names.reserve(records.size());
  for (const auto& r : records) names.push_back(r.stage);
  return names;
}

std::vector<std::array<std::string, 3>> PipelineTrace::handoffs() const {
  std::vector<std::array<std::string, 3>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.stage, r.theta_from, r.theta_to});
  return out;
}

std::string PipelineTrace::to_json() const {
  json doc;
  doc["records"] = json::array();
  for (const auto& r : records) {
    json rec;
    rec["stage"] = r.stage;
    rec["roles"] = r.roles;
    rec["theta_from"] = r.theta_from;
    rec["theta_to"] = r.theta_to;
    rec["sizes"] = r.sizes;
    rec["checkpoint"] = r.checkpoint;
    rec["checkpoint_hash"] = r.checkpoint_hash;
    doc["records"].push_back(rec);
  }
  return doc.dump(2) + "\n";
}

PipelineTrace PipelineTrace::from_json(const std::string& text) {
  PipelineTrace trace;
  try {
    json doc = json::parse(text);
    for (const auto& rec : doc.at("records")) {
      StageRecord r;
      r.stage = rec.at("stage").get<std::string>();
      r.roles = rec.at("roles").get<std::vector<std::string>>();
      r.theta_from = rec.at("theta_from").get<std::string>();
      r.theta_to = rec.at("theta_to").get<std::string>();
      r.sizes = rec.at("sizes").get<std::map<std::string, std::size_t>>();
      r.checkpoint = rec.at("checkpoint").get<std::string>();
      r.checkpoint_hash = rec.at("checkpoint_hash").get<std::string>();
      trace.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("malformed trace file: ") + e.what());
  }
  return trace;
}

namespace {

// Exclusive-create lock file, removed on scope exit. A leftover lock means
// another process owns the run directory.
class RunLock {
 public:
  explicit RunLock(const fs::path& path) : path_(path) {
    int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      fail(ErrorKind::kIo, "run directory is locked (remove " + path.string() +
                               " if no other process is running)");
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

std::string stage_seed_label(const std::string& stage) { return "stage_" + stage; }

StageHyperparams with_stage_seed(StageHyperparams hp, std::uint64_t seed,
                                 const std::string& stage) {
  hp.seed = derive_seed(seed, stage_seed_label(stage));
  return hp;
}

std::string hyperparams_json(const StageHyperparams& hp) {
  json doc;
  doc["learning_rate"] = hp.learning_rate;
  doc["batch_size"] = hp.batch_size;
  doc["epochs"] = hp.epochs;
  doc["seed"] = hp.seed;
  return doc.dump();
}

// Snapshot of everything that determines the run, for resume consistency.
std::string config_snapshot(const PipelineConfig& cfg) {
  json doc;
  doc["mode"] = mode_name(cfg.mode);
  doc["iterations"] = cfg.iterations;
  doc["seed"] = cfg.seed;
  doc["encoder"] = {{"d_model", cfg.encoder.d_model},     {"n_layers", cfg.encoder.n_layers},
                    {"d_ff", cfg.encoder.d_ff},           {"max_len", cfg.encoder.max_len},
                    {"rel_window", cfg.encoder.rel_window},
                    {"tie_mlm", cfg.encoder.tie_mlm},     {"init_scale", cfg.encoder.init_scale}};
  doc["masking"] = {{"k", cfg.masking.k}, {"rate", cfg.masking.rate}};
  doc["decode"] = {{"threshold", cfg.decode.threshold}, {"max_span_len", cfg.decode.max_span_len}};
  auto stage = [](const StageHyperparams& hp) {
    return json{{"learning_rate", hp.learning_rate},
                {"batch_size", hp.batch_size},
                {"epochs", hp.epochs}};
  };
  doc["mlm"] = stage(cfg.mlm);
  doc["mrc"] = stage(cfg.mrc);
  doc["ner"] = stage(cfg.ner);
  doc["loop_mrc"] = stage(cfg.loop_mrc);
  doc["loop_ner"] = stage(cfg.loop_ner);
  doc["mrc_negative_keep_ratio"] = cfg.mrc_negative_keep_ratio;
  doc["pseudo_min_confidence"] = cfg.pseudo_min_confidence;
  doc["loop_include_source_mrc"] = cfg.loop_include_source_mrc;
  doc["templates"] = cfg.templates.queries();
  return doc.dump(2) + "\n";
}

struct RunContext {
  const CorpusRegistry& reg;
  const PipelineConfig& cfg;
  ModelState model;
  std::vector<TaggedSentence> hat_ner;  // current pseudo-NER training set
  std::vector<MrcExample> hat_mrc;      // current pseudo-MRC training set
  std::vector<TaggedSentence> predictions;
  PipelineTrace trace;
  bool persist = false;
  fs::path dir;
};

void persist_trace(RunContext& ctx) {
  if (ctx.persist) write_file_atomic((ctx.dir / "trace.json").string(), ctx.trace.to_json());
}

void persist_dataset(RunContext& ctx, const std::string& name, const std::string& content) {
  if (ctx.persist) write_file_atomic((ctx.dir / "datasets" / name).string(), content);
}

void attach_checkpoint(RunContext& ctx, StageRecord& rec, const StageHyperparams& hp) {
  if (!ctx.persist) return;
  std::string rel = "checkpoints/" + ctx.model.stage_tag + ".ckpt";
  fs::path full = ctx.dir / rel;
  save_checkpoint(ctx.model, full.string(), hyperparams_json(hp));
  rec.checkpoint = rel;
  rec.checkpoint_hash = to_hex(file_hash(full.string()));
}

std::vector<TaggedSentence> tag_with_model(const ModelState& model,
                                           const std::vector<TaggedSentence>& unlabeled,
                                           double min_confidence,
                                           std::size_t* dropped = nullptr) {
  std::vector<TaggedSentence> out;
  out.reserve(unlabeled.size());
  std::size_t skipped = 0;
  for (const auto& s : unlabeled) {
    Eigen::MatrixXd probs = ner_forward(model, s.tokens);
    if (min_confidence > 0.0) {
      double confidence = 1.0;
      for (Eigen::Index r = 0; r < probs.rows(); ++r)
        confidence = std::min(confidence, probs.row(r).maxCoeff());
      if (confidence < min_confidence) {
        ++skipped;
        continue;
      }
    }
    TaggedSentence tagged;
    tagged.id = s.id;
    tagged.tokens = s.tokens;
    tagged.tags = ner_decode(probs, model.labels);
    out.push_back(std::move(tagged));
  }
  if (dropped) *dropped = skipped;
  return out;
}

// Drops a deterministic sample of the no-answer examples; order preserved.
std::vector<MrcExample> downsample_negatives(std::vector<MrcExample> data, double keep_ratio,
                                             std::uint64_t seed) {
  if (keep_ratio >= 1.0) return data;
  std::vector<std::size_t> negative_positions;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].answers.empty()) negative_positions.push_back(i);
  std::size_t n_keep =
      static_cast<std::size_t>(std::llround(keep_ratio * static_cast<double>(negative_positions.size())));
  Rng rng(seed);
  std::vector<std::size_t> kept = rng.sample_indices(negative_positions.size(), n_keep);
  std::set<std::size_t> keep_set;
  for (std::size_t k : kept) keep_set.insert(negative_positions[k]);
  std::vector<MrcExample> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].answers.empty() && keep_set.find(i) == keep_set.end()) continue;
    out.push_back(std::move(data[i]));
  }
  return out;
}

std::size_t refresh_index(const std::string& stage) {
  if (stage == kStageRefresh) return 0;
  return static_cast<std::size_t>(std::stoul(stage.substr(std::strlen("REFRESH_"))));
}

std::size_t loop_index(const std::string& stage) {
  auto pos = stage.rfind('_');
  return static_cast<std::size_t>(std::stoul(stage.substr(pos + 1)));
}

void run_refresh(RunContext& ctx, StageRecord& rec, std::size_t index) {
  const auto& unlabeled = ctx.reg.ner(CorpusRole::kTargetNerUnlabeled);
  std::size_t dropped = 0;
  ctx.hat_ner = tag_with_model(ctx.model, unlabeled, ctx.cfg.pseudo_min_confidence, &dropped);
  ctx.hat_mrc = pseudo_ner_to_mrc(ctx.hat_ner, ctx.cfg.templates, ctx.reg.labels());
  persist_dataset(ctx, "pseudo_ner_" + std::to_string(index) + ".jsonl",
                  ner_to_jsonl(ctx.hat_ner));
  persist_dataset(ctx, "pseudo_mrc_" + std::to_string(index) + ".jsonl",
                  mrc_to_jsonl(ctx.hat_mrc));
  rec.roles = {role_name(CorpusRole::kTargetNerUnlabeled)};
  rec.sizes[role_name(CorpusRole::kTargetNerUnlabeled)] = unlabeled.size();
  rec.sizes[role_name(CorpusRole::kTargetNerPseudo)] = ctx.hat_ner.size();
  rec.sizes[role_name(CorpusRole::kTargetMrcPseudo)] = ctx.hat_mrc.size();
  if (dropped > 0) rec.sizes["low_confidence_dropped"] = dropped;
}

std::vector<MrcExample> assemble_mrc_stage_data(RunContext& ctx, StageRecord& rec,
                                                bool loop_phase) {
  std::vector<MrcExample> data;
  auto take = [&](CorpusRole role, const std::vector<MrcExample>& part) {
    data.insert(data.end(), part.begin(), part.end());
    rec.roles.push_back(role_name(role));
    rec.sizes[role_name(role)] = part.size();
  };
  if (ctx.reg.has(CorpusRole::kTargetMrc)) take(CorpusRole::kTargetMrc, ctx.reg.mrc(CorpusRole::kTargetMrc));
  if (!loop_phase) {
    if (ctx.reg.has(CorpusRole::kSourceMrc))
      take(CorpusRole::kSourceMrc, ctx.reg.mrc(CorpusRole::kSourceMrc));
    std::vector<MrcExample> derived =
        ner_to_mrc(ctx.reg.ner(CorpusRole::kSourceNer), ctx.cfg.templates, ctx.reg.labels());
    persist_dataset(ctx, "d_s_nm.jsonl", mrc_to_jsonl(derived));
    take(CorpusRole::kSourceNerAsMrc, derived);
  } else {
    take(CorpusRole::kTargetMrcPseudo, ctx.hat_mrc);
    if (ctx.cfg.loop_include_source_mrc && ctx.reg.has(CorpusRole::kSourceMrc))
      take(CorpusRole::kSourceMrc, ctx.reg.mrc(CorpusRole::kSourceMrc));
  }
  data = downsample_negatives(data, ctx.cfg.mrc_negative_keep_ratio,
                              derive_seed(ctx.cfg.seed, "mrc_negatives_" + rec.stage));
  rec.sizes["train_examples"] = data.size();
  return data;
}

void execute_stage(RunContext& ctx, const std::string& stage) {
  StageRecord rec;
  rec.stage = stage;
  rec.theta_from = ctx.model.stage_tag;

  if (stage == kStageMlm) {
    std::vector<TaggedSentence> source = ctx.reg.ner(CorpusRole::kSourceNerUnlabeled);
    rec.roles = {role_name(CorpusRole::kTargetNerUnlabeled),
                 role_name(CorpusRole::kSourceNerUnlabeled)};
    rec.sizes[role_name(CorpusRole::kTargetNerUnlabeled)] =
        ctx.reg.size(CorpusRole::kTargetNerUnlabeled);
    rec.sizes[role_name(CorpusRole::kSourceNerUnlabeled)] = source.size();
    if (ctx.reg.has(CorpusRole::kSourceNerUnlabeledTranslated)) {
      const auto& extra = ctx.reg.ner(CorpusRole::kSourceNerUnlabeledTranslated);
      source.insert(source.end(), extra.begin(), extra.end());
      rec.roles.push_back(role_name(CorpusRole::kSourceNerUnlabeledTranslated));
      rec.sizes[role_name(CorpusRole::kSourceNerUnlabeledTranslated)] = extra.size();
    }
    std::vector<TaggedSentence> mixed =
        build_mlm_corpus(ctx.reg.ner(CorpusRole::kTargetNerUnlabeled), source,
                         derive_seed(ctx.cfg.seed, "mlm_corpus"));
    MaskPolicy policy;
    const auto& vocab_tokens = ctx.model.encoder->vocab().tokens();
    policy.replacement_pool.assign(vocab_tokens.begin() + 5, vocab_tokens.end());
    std::vector<MaskedInstance> instances =
        generate_mlm_instances(mixed, ctx.cfg.masking.k, ctx.cfg.masking.rate, policy,
                               derive_seed(ctx.cfg.seed, "masking"));
    rec.sizes["mlm_sentences"] = mixed.size();
    rec.sizes["mlm_instances"] = instances.size();
    ctx.model.ensure_mlm_head(derive_seed(ctx.cfg.seed, "mlm_head"));
    StageHyperparams hp = with_stage_seed(ctx.cfg.mlm, ctx.cfg.seed, stage);
    train_stage(ctx.model, instances, hp);
    ctx.model.stage_tag = theta_mlm_tag();
    attach_checkpoint(ctx, rec, hp);
  } else if (stage == kStageMrc || stage.rfind("MRC_LOOP_", 0) == 0) {
    const bool loop_phase = stage != kStageMrc;
    std::vector<MrcExample> data = assemble_mrc_stage_data(ctx, rec, loop_phase);
    ctx.model.ensure_mrc_head(derive_seed(ctx.cfg.seed, "mrc_head"));
    StageHyperparams hp =
        with_stage_seed(loop_phase ? ctx.cfg.loop_mrc : ctx.cfg.mrc, ctx.cfg.seed, stage);
    train_stage(ctx.model, data, hp);
    ctx.model.stage_tag = loop_phase ? theta_mrc_loop_tag(loop_index(stage)) : theta_mrc_tag();
    attach_checkpoint(ctx, rec, hp);
  } else if (stage == kStageNer) {
    std::vector<TaggedSentence> data = ctx.reg.ner(CorpusRole::kSourceNer);
    rec.roles = {role_name(CorpusRole::kSourceNer)};
    rec.sizes[role_name(CorpusRole::kSourceNer)] = data.size();
    if (ctx.reg.has(CorpusRole::kSourceNerTranslated)) {
      const auto& extra = ctx.reg.ner(CorpusRole::kSourceNerTranslated);
      data.insert(data.end(), extra.begin(), extra.end());
      rec.roles.push_back(role_name(CorpusRole::kSourceNerTranslated));
      rec.sizes[role_name(CorpusRole::kSourceNerTranslated)] = extra.size();
    }
    rec.sizes["train_sentences"] = data.size();
    ctx.model.ensure_ner_head(derive_seed(ctx.cfg.seed, "ner_head"));
    StageHyperparams hp = with_stage_seed(ctx.cfg.ner, ctx.cfg.seed, stage);
    train_stage(ctx.model, data, hp);
    ctx.model.stage_tag = theta_ner_tag();
    attach_checkpoint(ctx, rec, hp);
  } else if (stage == kStagePseudoGen) {
    const auto& unlabeled = ctx.reg.ner(CorpusRole::kTargetNerUnlabeled);
    std::size_t dropped = 0;
    ctx.hat_ner = tag_with_model(ctx.model, unlabeled, ctx.cfg.pseudo_min_confidence, &dropped);
    persist_dataset(ctx, "pseudo_ner_gen.jsonl", ner_to_jsonl(ctx.hat_ner));
    rec.roles = {role_name(CorpusRole::kTargetNerUnlabeled)};
    rec.sizes[role_name(CorpusRole::kTargetNerUnlabeled)] = unlabeled.size();
    rec.sizes[role_name(CorpusRole::kTargetNerPseudo)] = ctx.hat_ner.size();
    if (dropped > 0) rec.sizes["low_confidence_dropped"] = dropped;
  } else if (stage == kStageNerPseudo || stage.rfind("NER_LOOP_", 0) == 0) {
    const bool loop_phase = stage != kStageNerPseudo;
    rec.roles = {role_name(CorpusRole::kTargetNerPseudo)};
    rec.sizes[role_name(CorpusRole::kTargetNerPseudo)] = ctx.hat_ner.size();
    StageHyperparams hp =
        with_stage_seed(loop_phase ? ctx.cfg.loop_ner : ctx.cfg.ner, ctx.cfg.seed, stage);
    train_stage(ctx.model, ctx.hat_ner, hp);
    ctx.model.stage_tag = loop_phase ? theta_ner_loop_tag(loop_index(stage)) : theta_ner_loop_tag(0);
    attach_checkpoint(ctx, rec, hp);
  } else if (stage == kStageRefresh || stage.rfind("REFRESH_", 0) == 0) {
    run_refresh(ctx, rec, refresh_index(stage));
  } else if (stage == kStagePredict) {
    const auto& unlabeled = ctx.reg.ner(CorpusRole::kTargetNerUnlabeled);
    ctx.predictions = tag_with_model(ctx.model, unlabeled, 0.0);
    if (ctx.persist)
      write_file_atomic((ctx.dir / "predictions.conll").string(),
                        serialize_conll(ctx.predictions));
    rec.roles = {role_name(CorpusRole::kTargetNerUnlabeled)};
    rec.sizes["predictions"] = ctx.predictions.size();
  } else {
    fail(ErrorKind::kContract, "unknown stage in plan: " + stage);
  }

  rec.theta_to = ctx.model.stage_tag;
  ctx.trace.records.push_back(std::move(rec));
  persist_trace(ctx);
}

PipelineResult run_stages(RunContext& ctx, const std::vector<std::string>& plan,
                          std::size_t first) {
  bool stopped = false;
  for (std::size_t i = first; i < plan.size(); ++i) {
    execute_stage(ctx, plan[i]);
    if (!ctx.cfg.stop_after.empty() && plan[i] == ctx.cfg.stop_after && i + 1 < plan.size()) {
      stopped = true;
      break;
    }
  }
  PipelineResult result{std::move(ctx.model), std::move(ctx.predictions), std::move(ctx.trace),
                        stopped};
  return result;
}

void check_required_roles(const CorpusRegistry& reg, const PipelineConfig& cfg) {
  std::vector<std::string> missing;
  for (CorpusRole role : {CorpusRole::kTargetNerUnlabeled, CorpusRole::kSourceNerUnlabeled,
                          CorpusRole::kSourceNer})
    if (!reg.has(role)) missing.push_back(role_name(role));
  if (mode_uses_mrc(cfg.mode) && !reg.has(CorpusRole::kTargetMrc) &&
      !reg.has(CorpusRole::kSourceMrc))
    missing.push_back(std::string(role_name(CorpusRole::kTargetMrc)) + " or " +
                      role_name(CorpusRole::kSourceMrc));
  if (!missing.empty()) {
    std::string joined = "registry is missing required corpus roles for mode " +
                         std::string(mode_name(cfg.mode)) + ":";
    for (const auto& m : missing) joined += " " + m;
    fail(ErrorKind::kValidation, joined);
  }
}

Vocab build_run_vocab(const CorpusRegistry& reg, const PipelineConfig& cfg) {
  VocabBuilder builder;
  for (CorpusRole role : reg.roles()) {
    if (role_is_mrc(role)) {
      for (const auto& ex : reg.mrc(role)) {
        builder.add_text(ex.query);
        builder.add_all(ex.context);
      }
    } else {
      for (const auto& s : reg.ner(role)) builder.add_all(s.tokens);
    }
  }
  for (const auto& [type, query] : cfg.templates.queries()) {
    (void)type;
    builder.add_text(query);
  }
  return builder.build();
}

ModelState fresh_model(const CorpusRegistry& reg, const PipelineConfig& cfg) {
  return ModelState::init(cfg.encoder, build_run_vocab(reg, cfg), reg.labels(),
                          derive_seed(cfg.seed, "model_init"));
}

void prepare_run(const CorpusRegistry& reg, const PipelineConfig& cfg) {
  cfg.validate();
  check_required_roles(reg, cfg);
  if (mode_uses_mrc(cfg.mode)) cfg.templates.require_coverage(reg.labels());
}

}  // namespace

std::vector<TaggedSentence> generate_pseudo_labels(const ModelState& state,
                                                   const std::vector<TaggedSentence>& unlabeled) {
  return tag_with_model(state, unlabeled, 0.0);
}

PipelineResult run_tof(const CorpusRegistry& registry, const PipelineConfig& config) {
  prepare_run(registry, config);
  RunContext ctx{registry, config, {}, {}, {}, {}, {}, !config.run_dir.empty(),
                 fs::path(config.run_dir)};
  std::optional<RunLock> lock;
  if (ctx.persist) {
    std::error_code ec1, ec2;
    fs::create_directories(ctx.dir / "checkpoints", ec1);
    fs::create_directories(ctx.dir / "datasets", ec2);
    if (ec1 || ec2) fail(ErrorKind::kIo, "cannot create run directory " + ctx.dir.string());
    lock.emplace(ctx.dir / ".lock");
    write_file_atomic((ctx.dir / "pipeline_config.json").string(), config_snapshot(config));
  }
  ctx.model = fresh_model(registry, config);
  return run_stages(ctx, expected_stage_sequence(config), 0);
}

PipelineResult resume(const std::string& run_dir, const CorpusRegistry& registry,
                      const PipelineConfig& config) {
  prepare_run(registry, config);
  fs::path dir(run_dir);
  if (!fs::exists(dir / "trace.json"))
    fail(ErrorKind::kValidation, "no trace.json under " + run_dir + "; nothing to resume");
  std::string stored_snapshot = read_file((dir / "pipeline_config.json").string());
  if (stored_snapshot != config_snapshot(config))
    fail(ErrorKind::kValidation,
         "config does not match the run directory snapshot; refusing to resume " + run_dir);

  PipelineTrace trace = PipelineTrace::from_json(read_file((dir / "trace.json").string()));
  std::vector<std::string> plan = expected_stage_sequence(config);
  if (trace.records.size() > plan.size())
    fail(ErrorKind::kValidation, "trace has more stages than the config plans; refusing to resume");
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (trace.records[i].stage != plan[i])
      fail(ErrorKind::kValidation, "trace stage " + std::to_string(i) + " is " +
                                       trace.records[i].stage + " but the plan expects " + plan[i]);
    const auto& rec = trace.records[i];
    if (!rec.checkpoint.empty()) {
      fs::path ckpt = dir / rec.checkpoint;
      if (!fs::exists(ckpt))
        fail(ErrorKind::kValidation, "trace names missing checkpoint " + ckpt.string());
      if (to_hex(file_hash(ckpt.string())) != rec.checkpoint_hash)
        fail(ErrorKind::kValidation,
             "checkpoint/trace mismatch: " + ckpt.string() + " does not hash to " +
                 rec.checkpoint_hash);
    }
  }

  // Restore theta from the last recorded checkpoint, or start fresh if the
  // run died before the first training stage finished.
  RunContext ctx{registry, config, {}, {}, {}, {}, {}, true, dir};
  std::string last_checkpoint;
  for (const auto& rec : trace.records)
    if (!rec.checkpoint.empty()) last_checkpoint = rec.checkpoint;
  if (last_checkpoint.empty()) {
    ctx.model = fresh_model(registry, config);
  } else {
    ctx.model = load_checkpoint((dir / last_checkpoint).string());
    Vocab expected = build_run_vocab(registry, config);
    if (expected.hash() != ctx.model.encoder->vocab().hash())
      fail(ErrorKind::kValidation,
           "registry vocabulary no longer matches the checkpointed run; refusing to resume");
  }

  // Replay persisted pseudo datasets so later stages see the same inputs.
  for (const auto& rec : trace.records) {
    if (rec.stage == kStagePseudoGen) {
      ctx.hat_ner = ner_from_jsonl(read_file((dir / "datasets" / "pseudo_ner_gen.jsonl").string()));
    } else if (rec.stage == kStageRefresh || rec.stage.rfind("REFRESH_", 0) == 0) {
      std::string suffix = std::to_string(refresh_index(rec.stage));
      ctx.hat_ner =
          ner_from_jsonl(read_file((dir / "datasets" / ("pseudo_ner_" + suffix + ".jsonl")).string()));
      ctx.hat_mrc =
          mrc_from_jsonl(read_file((dir / "datasets" / ("pseudo_mrc_" + suffix + ".jsonl")).string()));
    }
  }
  ctx.trace = trace;

  if (trace.records.size() == plan.size()) {
    // Completed run: hand back the stored artifacts untouched.
    PipelineResult result{std::move(ctx.model), {}, std::move(ctx.trace), false};
    fs::path pred = dir / "predictions.conll";
    if (fs::exists(pred)) {
      ParsedCorpus parsed = parse_conll(read_file(pred.string()), registry.labels(), "pred");
      result.predictions = std::move(parsed.sentences);
    }
    return result;
  }

  RunLock lock(dir / ".lock");
  return run_stages(ctx, plan, trace.records.size());
}

}  // namespace tof
