#ifndef TOFNER_PIPELINE_HPP
#define TOFNER_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tofner/convert.hpp"
#include "tofner/corpus.hpp"
#include "tofner/model.hpp"

namespace tof {

// Full scheme and its documented truncations.
enum class PipelineMode {
  kTof,
  kTofNoContinual,      // stops after the first pseudo-NER stage
  kTofMrcOnly,          // stops after source NER fine-tuning
  kAdaptabertBaseline,  // two-step MLM -> NER, no MRC and no pseudo data
};

const char* mode_name(PipelineMode mode);
PipelineMode parse_mode(const std::string& name);  // kValidation on unknown names

struct MaskingParams {
  std::size_t k = 10;   // masked variants per sentence
  double rate = 0.15;   // fraction of positions selected
};

// Everything run_tof needs besides the corpora themselves.
struct PipelineConfig {
  PipelineMode mode = PipelineMode::kTof;
  std::size_t iterations = 1;  // T, the pseudo-data iteration count
  std::uint64_t seed = 2019;

  EncoderConfig encoder;
  MaskingParams masking;
  MrcDecodeConfig decode;
  QueryTemplateSet templates;

  // learning_rate defaults track the per-dataset tuning tables; batch sizes
  // 32/16/64 and epochs 3/6/6 are the stated MLM/MRC/NER settings. The seed
  // field inside each StageHyperparams is ignored here; stage seeds derive
  // from `seed` and the stage name.
  StageHyperparams mlm{5e-5, 32, 3, 0};
  StageHyperparams mrc{2e-5, 16, 6, 0};
  StageHyperparams ner{5e-5, 64, 6, 0};
  StageHyperparams loop_mrc{2e-5, 16, 6, 0};
  StageHyperparams loop_ner{5e-5, 64, 6, 0};

  double mrc_negative_keep_ratio = 1.0;  // fraction of no-answer MRC examples kept
  double pseudo_min_confidence = 0.0;    // 0 disables pseudo-label filtering
  bool loop_include_source_mrc = false;  // add D_s,m to loop-phase MRC stages

  std::string run_dir;     // empty = keep everything in memory
  std::string stop_after;  // stage name; run returns early after completing it

  void validate() const;  // kValidation listing every problem
};

// One executed stage. Training stages persist a checkpoint; generation and
// prediction stages leave the checkpoint fields empty.
struct StageRecord {
  std::string stage;
  std::vector<std::string> roles;  // consumed dataset roles
  std::string theta_from;
  std::string theta_to;
  std::map<std::string, std::size_t> sizes;
  std::string checkpoint;       // path relative to the run directory
  std::string checkpoint_hash;  // hex FNV-1a64 of the checkpoint file
};

struct PipelineTrace {
  std::vector<StageRecord> records;

  std::vector<std::string> stage_names() const;
  // (stage, theta_from, theta_to) triples for golden-sequence comparison.
  std::vector<std::array<std::string, 3>> handoffs() const;

  std::string to_json() const;
  static PipelineTrace from_json(const std::string& text);
};

// Names of the stages a config will execute, in order. This is the golden
// sequence the emitted trace must match.
std::vector<std::string> expected_stage_sequence(const PipelineConfig& config);

struct PipelineResult {
  ModelState model;  // final theta for the mode
  std::vector<TaggedSentence> predictions;
  PipelineTrace trace;
  bool stopped_early = false;
};

// Executes the staged fine-tuning scheme end to end: MLM domain tuning, MRC
// enhancement, source NER tuning, pseudo-label generation, and T rounds of
// the MRC/NER continual loop, then predicts on the unlabeled target data.
PipelineResult run_tof(const CorpusRegistry& registry, const PipelineConfig& config);

// Tags unlabeled sentences with the current model. Tokens are preserved,
// output is BIO-valid, and |output| == |input|.
std::vector<TaggedSentence> generate_pseudo_labels(const ModelState& state,
                                                   const std::vector<TaggedSentence>& unlabeled);

// Continues an interrupted run from its last completed stage. Verifies that
// the on-disk trace matches the config's expected sequence and that every
// recorded checkpoint hash still matches the file; a completed run is a
// no-op that returns the stored artifacts.
PipelineResult resume(const std::string& run_dir, const CorpusRegistry& registry,
                      const PipelineConfig& config);

}  // namespace tof

#endif  // TOFNER_PIPELINE_HPP
