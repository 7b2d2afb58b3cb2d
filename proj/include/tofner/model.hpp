#ifndef TOFNER_MODEL_HPP
#define TOFNER_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tofner/masking.hpp"
#include "tofner/types.hpp"

namespace tof {

// Token vocabulary with the five reserved specials at fixed low ids.
class Vocab {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;
  static constexpr std::size_t kClsId = 2;
  static constexpr std::size_t kSepId = 3;
  static constexpr std::size_t kMaskId = 4;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // must start with the specials

  std::size_t id(const std::string& token) const;  // falls back to [UNK]
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

// Frequency-ordered vocabulary builder; ties broken lexicographically so the
// result is deterministic.
class VocabBuilder {
 public:
  void add(const std::string& token);
  void add_all(const std::vector<std::string>& tokens);
  void add_text(const std::string& text);  // tokenized with the shared tokenizer
  Vocab build(std::size_t min_count = 1, std::size_t max_size = 0) const;

 private:
  std::map<std::string, std::size_t> counts_;
};

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = 256;
  std::size_t rel_window = 8;  // relative-position bias clip distance
  bool tie_mlm = true;         // MLM projection shares the token embedding
  double init_scale = 0.02;

  bool operator==(const EncoderConfig&) const = default;
};

// Named parameter with its gradient accumulator.
struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Tensor() = default;
  Tensor(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

// Read-only encoder surface: contextualized embeddings, one vector per input
// token. Production backends plug in behind this.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual std::size_t dim() const = 0;
  virtual const Vocab& vocab() const = 0;
  virtual Eigen::MatrixXd encode(const std::vector<std::string>& tokens) const = 0;
};

struct EncodeCache;  // internal forward activations (encoder.cpp)

// Small trainable sequence model: token + position embeddings, two blocks of
// single-head self-attention with a learned relative-position bias, and a
// ReLU feed-forward, all pre-norm with residuals.
class TinyEncoder : public EncoderBackend {
 public:
  TinyEncoder(EncoderConfig config, Vocab vocab, std::uint64_t seed);

  std::size_t dim() const override { return config_.d_model; }
  const Vocab& vocab() const override { return vocab_; }
  const EncoderConfig& config() const { return config_; }

  // One row per input token; [CLS]/[SEP] framing is internal.
  Eigen::MatrixXd encode(const std::vector<std::string>& tokens) const override;

  std::vector<std::size_t> ids_for(const std::vector<std::string>& tokens) const;

  // Training surface: forward over an explicit id sequence (no framing
  // added), and backward accumulating parameter gradients.
  Eigen::MatrixXd forward(const std::vector<std::size_t>& ids, EncodeCache* cache) const;
  void backward(const EncodeCache& cache, const Eigen::MatrixXd& d_hidden);

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void zero_grad();

  Tensor& token_embedding() { return tok_emb_; }
  const Tensor& token_embedding() const { return tok_emb_; }

 private:
  struct Layer {
    Tensor ln1_g, ln1_b;
    Tensor wq, wk, wv, wo;
    Tensor rel_bias;  // 1 x (2 * rel_window + 1)
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
  };

  EncoderConfig config_;
  Vocab vocab_;
  Tensor tok_emb_;  // V x d
  Tensor pos_emb_;  // max_len x d
  std::vector<Layer> layers_;
  Tensor lnf_g_, lnf_b_;

  friend struct EncodeCache;
};

// Linear classifier over the BIO tag vocabulary (Eq.-style W h + b with a
// softmax); rows of the output are probability vectors.
struct NerHead {
  Tensor w;  // d x |Y|
  Tensor b;  // 1 x |Y|
  NerHead() = default;
  NerHead(std::size_t dim, std::size_t n_tags, std::uint64_t seed);
};

// Two bias-free d x 2 projections for span start / span end flags.
struct MrcHead {
  Tensor w_start;
  Tensor w_end;
  MrcHead() = default;
  MrcHead(std::size_t dim, std::uint64_t seed);
};

// Vocabulary projection for masked-token reconstruction. When tied, the
// weight is the token embedding and only the output bias lives here.
struct MlmHead {
  Tensor bias;               // 1 x V
  std::optional<Tensor> w;   // d x V, only when untied
  MlmHead() = default;
  MlmHead(std::size_t dim, std::size_t vocab_size, bool tied, std::uint64_t seed);
};

// Stage tags along the handoff chain.
std::string theta_init_tag();
std::string theta_mlm_tag();
std::string theta_mrc_tag();
std::string theta_ner_tag();
std::string theta_ner_loop_tag(std::size_t i);  // theta_ner_0, theta_ner_1, ...
std::string theta_mrc_loop_tag(std::size_t i);  // theta_mrc_1, ...

// Bitmask naming which heads participate in an update.
enum HeadKindMask : unsigned {
  kHeadsNone = 0,
  kHeadsNer = 1,
  kHeadsMrc = 2,
  kHeadsMlm = 4,
};

// Encoder parameters plus the optional task heads; the theta handed between
// pipeline stages.
struct ModelState {
  EncoderConfig config;
  LabelSet labels;
  std::shared_ptr<TinyEncoder> encoder;
  std::optional<NerHead> ner;
  std::optional<MrcHead> mrc;
  std::optional<MlmHead> mlm;
  std::string stage_tag;

  static ModelState init(const EncoderConfig& config, Vocab vocab, LabelSet labels,
                         std::uint64_t seed);

  ModelState clone_with_tag(const std::string& tag) const;  // deep copy
  void ensure_ner_head(std::uint64_t seed);
  void ensure_mrc_head(std::uint64_t seed);
  void ensure_mlm_head(std::uint64_t seed);

  std::vector<Tensor*> parameters(unsigned head_mask);
  void zero_grad();
};

Eigen::MatrixXd encode(const ModelState& state, const std::vector<std::string>& tokens);

// Per-token probability rows over the tag vocabulary.
Eigen::MatrixXd ner_forward(const ModelState& state, const std::vector<std::string>& tokens);

// Mean over tokens of -log p(gold tag). Gold tags must be BIO-valid and
// aligned with the probability rows.
double ner_loss(const Eigen::MatrixXd& probs, const std::vector<std::string>& gold_tags,
                const LabelSet& labels);

std::size_t tag_index(const std::string& tag, const LabelSet& labels);

struct MrcProbs {
  Eigen::MatrixXd start;  // n_context x 2
  Eigen::MatrixXd end;    // n_context x 2
};

MrcProbs mrc_forward(const ModelState& state, const MrcExample& example);

// Mean token-level cross-entropy for start flags plus the same for end flags.
double mrc_loss(const MrcProbs& probs, const MrcExample& example);

// Per-token argmax plus a repair pass; the output is always BIO-valid.
std::vector<std::string> ner_decode(const Eigen::MatrixXd& probs, const LabelSet& labels);

struct MrcDecodeConfig {
  double threshold = 0.5;
  std::size_t max_span_len = 30;
};

// Candidates are (s, e) with start/end probability over the threshold and
// e - s < max_span_len; greedy selection by descending start*end product,
// ties broken by smaller s then smaller e, overlaps discarded.
std::vector<AnswerSpan> mrc_decode(const Eigen::MatrixXd& p_start, const Eigen::MatrixXd& p_end,
                                   const MrcDecodeConfig& config = {});

struct StageHyperparams {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;

  bool operator==(const StageHyperparams&) const = default;
};

struct TrainReport {
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
};

// In-place fine-tuning of the state on one dataset kind. Identical seed,
// inputs and hyperparams give bit-identical parameters on one machine.
TrainReport train_stage(ModelState& state, const std::vector<MaskedInstance>& dataset,
                        const StageHyperparams& hp);
TrainReport train_stage(ModelState& state, const std::vector<MrcExample>& dataset,
                        const StageHyperparams& hp);
TrainReport train_stage(ModelState& state, const std::vector<TaggedSentence>& dataset,
                        const StageHyperparams& hp);

// Loss plus parameter-gradient accumulation for a single item; exposed for
// gradient checking.
double mlm_item_grad(ModelState& state, const MaskedInstance& inst);
double mrc_item_grad(ModelState& state, const MrcExample& example);
double ner_item_grad(ModelState& state, const TaggedSentence& sentence);

// Self-describing checkpoint container: JSON header (stage tag, hyperparams,
// vocabulary and its hash, shapes) followed by raw little-endian doubles.
void save_checkpoint(const ModelState& state, const std::string& path,
                     const std::string& hyperparams_json = "");
ModelState load_checkpoint(const std::string& path);

// Splits a query string with the shared whitespace-plus-punctuation
// tokenizer.
std::vector<std::string> tokenize_query(const std::string& query);

}  // namespace tof

#endif  // TOFNER_MODEL_HPP
