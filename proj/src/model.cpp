#include "tofner/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "encoder_internal.hpp"
#include "tofner/convert.hpp"
#include "tofner/corpus.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

using json = nlohmann::json;

namespace {

std::vector<std::string> special_tokens() {
  return {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};
}

}  // namespace

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  auto specials = special_tokens();
  if (tokens_.size() < specials.size())
    fail(ErrorKind::kContract, "vocabulary must contain the reserved special tokens");
  for (std::size_t i = 0; i < specials.size(); ++i)
    if (tokens_[i] != specials[i])
      fail(ErrorKind::kContract, "vocabulary slot " + std::to_string(i) + " must be " + specials[i]);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second)
      fail(ErrorKind::kContract, "duplicate vocabulary token: " + tokens_[i]);
  }
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size())
    fail(ErrorKind::kContract, "vocabulary id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::uint64_t Vocab::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return fnv1a64(joined);
}

void VocabBuilder::add(const std::string& token) {
  if (is_special_token(token)) return;  // reserved slots, never counted
  ++counts_[token];
}

void VocabBuilder::add_all(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) add(t);
}

void VocabBuilder::add_text(const std::string& text) {
  for (const auto& t : tokenize_with_offsets(text)) add(t.text);
}

Vocab VocabBuilder::build(std::size_t min_count, std::size_t max_size) const {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [token, count] : counts_)
    if (count >= min_count) items.emplace_back(token, count);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = special_tokens();
  for (const auto& [token, _] : items) {
    if (max_size > 0 && tokens.size() >= max_size) break;
    tokens.push_back(token);
  }
  return Vocab(std::move(tokens));
}

NerHead::NerHead(std::size_t dim, std::size_t n_tags, std::uint64_t seed) {
  w = Tensor("ner.w", dim, n_tags);
  b = Tensor("ner.b", 1, n_tags);
  Rng rng(derive_seed(seed, "ner_head"));
  for (Eigen::Index r = 0; r < w.value.rows(); ++r)
    for (Eigen::Index c = 0; c < w.value.cols(); ++c) w.value(r, c) = rng.normal(0.0, 0.02);
}

MrcHead::MrcHead(std::size_t dim, std::uint64_t seed) {
  w_start = Tensor("mrc.w_start", dim, 2);
  w_end = Tensor("mrc.w_end", dim, 2);
  Rng rng(derive_seed(seed, "mrc_head"));
  for (Eigen::Index r = 0; r < w_start.value.rows(); ++r)
    for (Eigen::Index c = 0; c < 2; ++c) w_start.value(r, c) = rng.normal(0.0, 0.02);
  for (Eigen::Index r = 0; r < w_end.value.rows(); ++r)
    for (Eigen::Index c = 0; c < 2; ++c) w_end.value(r, c) = rng.normal(0.0, 0.02);
}

MlmHead::MlmHead(std::size_t dim, std::size_t vocab_size, bool tied, std::uint64_t seed) {
  bias = Tensor("mlm.bias", 1, vocab_size);
  if (!tied) {
    w = Tensor("mlm.w", dim, vocab_size);
    Rng rng(derive_seed(seed, "mlm_head"));
    for (Eigen::Index r = 0; r < w->value.rows(); ++r)
      for (Eigen::Index c = 0; c < w->value.cols(); ++c) w->value(r, c) = rng.normal(0.0, 0.02);
  }
}

std::string theta_init_tag() { return "theta_init"; }
std::string theta_mlm_tag() { return "theta_mlm"; }
std::string theta_mrc_tag() { return "theta_mrc"; }
std::string theta_ner_tag() { return "theta_ner"; }
std::string theta_ner_loop_tag(std::size_t i) { return "theta_ner_" + std::to_string(i); }
std::string theta_mrc_loop_tag(std::size_t i) { return "theta_mrc_" + std::to_string(i); }

ModelState ModelState::init(const EncoderConfig& config, Vocab vocab, LabelSet labels,
                            std::uint64_t seed) {
  ModelState state;
  state.config = config;
  state.labels = std::move(labels);
  state.encoder = std::make_shared<TinyEncoder>(config, std::move(vocab), seed);
  state.stage_tag = theta_init_tag();
  return state;
}

ModelState ModelState::clone_with_tag(const std::string& tag) const {
  ModelState copy = *this;
  copy.encoder = std::make_shared<TinyEncoder>(*encoder);  // deep parameter copy
  copy.stage_tag = tag;
  return copy;
}

void ModelState::ensure_ner_head(std::uint64_t seed) {
  if (!ner) ner.emplace(config.d_model, labels.tag_count(), seed);
}

void ModelState::ensure_mrc_head(std::uint64_t seed) {
  if (!mrc) mrc.emplace(config.d_model, seed);
}

void ModelState::ensure_mlm_head(std::uint64_t seed) {
  if (!mlm) mlm.emplace(config.d_model, encoder->vocab().size(), config.tie_mlm, seed);
}

std::vector<Tensor*> ModelState::parameters(unsigned head_mask) {
  std::vector<Tensor*> out = encoder->parameters();
  if ((head_mask & kHeadsNer) && ner) {
    out.push_back(&ner->w);
    out.push_back(&ner->b);
  }
  if ((head_mask & kHeadsMrc) && mrc) {
    out.push_back(&mrc->w_start);
    out.push_back(&mrc->w_end);
  }
  if ((head_mask & kHeadsMlm) && mlm) {
    out.push_back(&mlm->bias);
    if (mlm->w) out.push_back(&*mlm->w);
  }
  return out;
}

void ModelState::zero_grad() {
  for (Tensor* t : parameters(kHeadsNer | kHeadsMrc | kHeadsMlm)) t->zero_grad();
}

Eigen::MatrixXd encode(const ModelState& state, const std::vector<std::string>& tokens) {
  return state.encoder->encode(tokens);
}

std::size_t tag_index(const std::string& tag, const LabelSet& labels) {
  std::vector<std::string> vocab = labels.tag_vocabulary();
  auto it = std::find(vocab.begin(), vocab.end(), tag);
  if (it == vocab.end())
    fail(ErrorKind::kContract, "tag not in tag vocabulary: " + tag);
  return static_cast<std::size_t>(it - vocab.begin());
}

Eigen::MatrixXd ner_forward(const ModelState& state, const std::vector<std::string>& tokens) {
  if (!state.ner) fail(ErrorKind::kContract, "model state has no NER head");
  Eigen::MatrixXd h = encode(state, tokens);
  Eigen::MatrixXd logits = (h * state.ner->w.value).rowwise() + state.ner->b.value.row(0);
  return softmax_rows(logits);
}

double ner_loss(const Eigen::MatrixXd& probs, const std::vector<std::string>& gold_tags,
                const LabelSet& labels) {
  if (static_cast<std::size_t>(probs.rows()) != gold_tags.size())
    fail(ErrorKind::kContract, "ner_loss: probability rows do not match gold tag count");
  BioVerdict v = validate_bio(gold_tags, labels);
  if (!v.valid)
    fail(ErrorKind::kContract, "ner_loss: gold tags are not BIO-valid: " + v.reason);
  double total = 0.0;
  for (std::size_t i = 0; i < gold_tags.size(); ++i) {
    std::size_t idx = tag_index(gold_tags[i], labels);
    total += -std::log(std::max(probs(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(idx)),
                                1e-300));
  }
  return total / static_cast<double>(gold_tags.size());
}

std::vector<std::string> tokenize_query(const std::string& query) {
  std::vector<std::string> out;
  for (const auto& t : tokenize_with_offsets(query)) out.push_back(t.text);
  return out;
}

namespace {

// [CLS] query [SEP] context [SEP]; returns the sequence ids and the offset of
// the first context position.
std::vector<std::size_t> mrc_sequence_ids(const ModelState& state, const MrcExample& example,
                                          std::size_t* context_offset) {
  std::vector<std::string> query_tokens = tokenize_query(example.query);
  std::vector<std::size_t> ids;
  ids.reserve(query_tokens.size() + example.context.size() + 3);
  ids.push_back(Vocab::kClsId);
  for (const auto& t : query_tokens) ids.push_back(state.encoder->vocab().id(t));
  ids.push_back(Vocab::kSepId);
  *context_offset = ids.size();
  for (const auto& t : example.context) ids.push_back(state.encoder->vocab().id(t));
  ids.push_back(Vocab::kSepId);
  return ids;
}

void check_mrc_answers(const MrcExample& example) {
  for (const auto& a : example.answers)
    if (a.start > a.end || a.end >= example.context.size())
      fail(ErrorKind::kContract, "example " + example.id + ": answer index out of context range");
}

}  // namespace

MrcProbs mrc_forward(const ModelState& state, const MrcExample& example) {
  if (!state.mrc) fail(ErrorKind::kContract, "model state has no MRC head");
  if (example.context.empty())
    fail(ErrorKind::kContract, "example " + example.id + ": empty context");
  check_mrc_answers(example);
  std::size_t offset = 0;
  std::vector<std::size_t> ids = mrc_sequence_ids(state, example, &offset);
  Eigen::MatrixXd h = state.encoder->forward(ids, nullptr);
  Eigen::MatrixXd ctx =
      h.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(example.context.size()));
  MrcProbs probs;
  probs.start = softmax_rows(ctx * state.mrc->w_start.value);
  probs.end = softmax_rows(ctx * state.mrc->w_end.value);
  return probs;
}

double mrc_loss(const MrcProbs& probs, const MrcExample& example) {
  const std::size_t n = example.context.size();
  if (static_cast<std::size_t>(probs.start.rows()) != n ||
      static_cast<std::size_t>(probs.end.rows()) != n)
    fail(ErrorKind::kContract, "mrc_loss: probability rows do not match context length");
  check_mrc_answers(example);
  std::vector<int> start_flag(n, 0), end_flag(n, 0);
  for (const auto& a : example.answers) {
    start_flag[a.start] = 1;
    end_flag[a.end] = 1;
  }
  double start_total = 0.0, end_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = static_cast<Eigen::Index>(i);
    start_total += -std::log(std::max(probs.start(r, start_flag[i]), 1e-300));
    end_total += -std::log(std::max(probs.end(r, end_flag[i]), 1e-300));
  }
  return (start_total + end_total) / static_cast<double>(n);
}

std::vector<std::string> ner_decode(const Eigen::MatrixXd& probs, const LabelSet& labels) {
  std::vector<std::string> tag_vocab = labels.tag_vocabulary();
  if (static_cast<std::size_t>(probs.cols()) != tag_vocab.size())
    fail(ErrorKind::kContract, "ner_decode: probability columns do not match tag vocabulary");
  std::vector<std::string> tags;
  tags.reserve(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    tags.push_back(tag_vocab[static_cast<std::size_t>(best)]);
  }
  // Repair pass: an I- that does not continue a same-type span opens one.
  normalize_iob1(tags);
  return tags;
}

std::vector<AnswerSpan> mrc_decode(const Eigen::MatrixXd& p_start, const Eigen::MatrixXd& p_end,
                                   const MrcDecodeConfig& config) {
  const std::size_t n = static_cast<std::size_t>(p_start.rows());
  if (p_end.rows() != p_start.rows())
    fail(ErrorKind::kContract, "mrc_decode: start/end row mismatch");
  if (config.max_span_len == 0) return {};

  struct Candidate {
    double score;
    std::size_t start, end;
  };
  std::vector<Candidate> candidates;
  for (std::size_t s = 0; s < n; ++s) {
    double ps = p_start(static_cast<Eigen::Index>(s), 1);
    if (ps < config.threshold) continue;
    std::size_t last = std::min(n - 1, s + config.max_span_len - 1);
    for (std::size_t e = s; e <= last; ++e) {
      double pe = p_end(static_cast<Eigen::Index>(e), 1);
      if (pe < config.threshold) continue;
      candidates.push_back({ps * pe, s, e});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  std::vector<AnswerSpan> picked;
  for (const auto& c : candidates) {
    AnswerSpan span{c.start, c.end};
    bool overlaps = false;
    for (const auto& prev : picked)
      if (prev.overlaps(span)) {
        overlaps = true;
        break;
      }
    if (!overlaps) picked.push_back(span);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

double mlm_item_grad(ModelState& state, const MaskedInstance& inst) {
  if (!state.mlm) fail(ErrorKind::kContract, "model state has no MLM head");
  if (inst.targets.empty()) return 0.0;  // all-special sentence; nothing to predict
  const TinyEncoder& enc = *state.encoder;
  const std::size_t n = inst.tokens.size();
  std::vector<std::size_t> ids;
  ids.reserve(n + 2);
  ids.push_back(Vocab::kClsId);
  for (const auto& t : inst.tokens) ids.push_back(enc.vocab().id(t));
  ids.push_back(Vocab::kSepId);

  EncodeCache cache;
  Eigen::MatrixXd h = state.encoder->forward(ids, &cache);

  const bool tied = !state.mlm->w.has_value();
  const Eigen::MatrixXd& w_out =
      tied ? state.encoder->token_embedding().value : state.mlm->w->value;  // V x d or d x V
  const double inv_n = 1.0 / static_cast<double>(inst.targets.size());

  Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  double total = 0.0;
  for (const auto& [pos, original] : inst.targets) {
    if (pos >= n)
      fail(ErrorKind::kContract, "masked instance " + inst.sentence_id + ": target out of range");
    Eigen::Index row = static_cast<Eigen::Index>(pos + 1);  // skip [CLS]
    Eigen::RowVectorXd logits =
        tied ? (h.row(row) * w_out.transpose()).eval() : (h.row(row) * w_out).eval();
    logits += state.mlm->bias.value.row(0);
    Eigen::RowVectorXd probs = softmax_rows(logits).row(0);
    std::size_t gold = enc.vocab().id(original);
    total += -std::log(std::max(probs(static_cast<Eigen::Index>(gold)), 1e-300));

    Eigen::RowVectorXd d_logits = probs * inv_n;
    d_logits(static_cast<Eigen::Index>(gold)) -= inv_n;
    state.mlm->bias.grad.row(0) += d_logits;
    if (tied) {
      state.encoder->token_embedding().grad += d_logits.transpose() * h.row(row);
      d_hidden.row(row) += d_logits * w_out;
    } else {
      state.mlm->w->grad += h.row(row).transpose() * d_logits;
      d_hidden.row(row) += d_logits * w_out.transpose();
    }
  }
  state.encoder->backward(cache, d_hidden);
  return total * inv_n;
}

double mrc_item_grad(ModelState& state, const MrcExample& example) {
  if (!state.mrc) fail(ErrorKind::kContract, "model state has no MRC head");
  if (example.context.empty())
    fail(ErrorKind::kContract, "example " + example.id + ": empty context");
  check_mrc_answers(example);
  std::size_t offset = 0;
  std::vector<std::size_t> ids = mrc_sequence_ids(state, example, &offset);
  EncodeCache cache;
  Eigen::MatrixXd h = state.encoder->forward(ids, &cache);
  const std::size_t n = example.context.size();
  Eigen::MatrixXd ctx = h.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd p_start = softmax_rows(ctx * state.mrc->w_start.value);
  Eigen::MatrixXd p_end = softmax_rows(ctx * state.mrc->w_end.value);

  std::vector<int> start_flag(n, 0), end_flag(n, 0);
  for (const auto& a : example.answers) {
    start_flag[a.start] = 1;
    end_flag[a.end] = 1;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  Eigen::MatrixXd d_start = p_start * inv_n;
  Eigen::MatrixXd d_end = p_end * inv_n;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = static_cast<Eigen::Index>(i);
    total += -std::log(std::max(p_start(r, start_flag[i]), 1e-300));
    total += -std::log(std::max(p_end(r, end_flag[i]), 1e-300));
    d_start(r, start_flag[i]) -= inv_n;
    d_end(r, end_flag[i]) -= inv_n;
  }
  state.mrc->w_start.grad += ctx.transpose() * d_start;
  state.mrc->w_end.grad += ctx.transpose() * d_end;

  Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  d_hidden.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n)) =
      d_start * state.mrc->w_start.value.transpose() + d_end * state.mrc->w_end.value.transpose();
  state.encoder->backward(cache, d_hidden);
  return total * inv_n;
}

double ner_item_grad(ModelState& state, const TaggedSentence& sentence) {
  if (!state.ner) fail(ErrorKind::kContract, "model state has no NER head");
  if (sentence.tokens.empty())
    fail(ErrorKind::kContract, "sentence " + sentence.id + ": empty token list");
  if (sentence.tokens.size() != sentence.tags.size())
    fail(ErrorKind::kContract, "sentence " + sentence.id + ": token/tag count mismatch");
  const std::size_t n = sentence.tokens.size();
  std::vector<std::size_t> ids;
  ids.reserve(n + 2);
  ids.push_back(Vocab::kClsId);
  for (const auto& t : sentence.tokens) ids.push_back(state.encoder->vocab().id(t));
  ids.push_back(Vocab::kSepId);
  EncodeCache cache;
  Eigen::MatrixXd h = state.encoder->forward(ids, &cache);
  Eigen::MatrixXd body = h.middleRows(1, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd probs =
      softmax_rows((body * state.ner->w.value).rowwise() + state.ner->b.value.row(0));

  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  Eigen::MatrixXd d_logits = probs * inv_n;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = static_cast<Eigen::Index>(i);
    Eigen::Index gold = static_cast<Eigen::Index>(tag_index(sentence.tags[i], state.labels));
    total += -std::log(std::max(probs(r, gold), 1e-300));
    d_logits(r, gold) -= inv_n;
  }
  state.ner->w.grad += body.transpose() * d_logits;
  state.ner->b.grad.row(0) += d_logits.colwise().sum();

  Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  d_hidden.middleRows(1, static_cast<Eigen::Index>(n)) = d_logits * state.ner->w.value.transpose();
  state.encoder->backward(cache, d_hidden);
  return total * inv_n;
}

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'O', 'F', 'C', 'K', 'P', 'T', '1'};

std::vector<const Tensor*> checkpoint_tensors(const ModelState& state) {
  auto& mutable_state = const_cast<ModelState&>(state);
  std::vector<Tensor*> params = mutable_state.parameters(kHeadsNer | kHeadsMrc | kHeadsMlm);
  return {params.begin(), params.end()};
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path,
                     const std::string& hyperparams_json) {
  json header;
  header["format"] = 1;
  header["stage_tag"] = state.stage_tag;
  header["label_set"] = state.labels.types();
  header["vocab"] = state.encoder->vocab().tokens();
  header["vocab_hash"] = to_hex(state.encoder->vocab().hash());
  header["encoder"] = {{"d_model", state.config.d_model},   {"n_layers", state.config.n_layers},
                       {"d_ff", state.config.d_ff},         {"max_len", state.config.max_len},
                       {"rel_window", state.config.rel_window},
                       {"tie_mlm", state.config.tie_mlm},   {"init_scale", state.config.init_scale}};
  header["heads"] = {{"ner", state.ner.has_value()},
                     {"mrc", state.mrc.has_value()},
                     {"mlm", state.mlm.has_value()}};
  if (!hyperparams_json.empty()) header["hyperparams"] = json::parse(hyperparams_json);

  auto tensors = checkpoint_tensors(state);
  json index = json::array();
  for (const Tensor* t : tensors)
    index.push_back({{"name", t->name}, {"rows", t->value.rows()}, {"cols", t->value.cols()}});
  header["tensors"] = index;

  std::string header_str = header.dump();
  std::string blob;
  blob.reserve(sizeof(kCheckpointMagic) + 4 + header_str.size());
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
  char len_bytes[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                       static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  blob.append(len_bytes, 4);
  blob += header_str;
  for (const Tensor* t : tensors) {
    for (Eigen::Index r = 0; r < t->value.rows(); ++r)
      for (Eigen::Index col = 0; col < t->value.cols(); ++col) {
        double v = t->value(r, col);
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        blob.append(bytes, sizeof(double));
      }
  }
  write_file_atomic(path, blob);
}

ModelState load_checkpoint(const std::string& path) {
  std::string blob = read_file(path);
  if (blob.size() < sizeof(kCheckpointMagic) + 4 ||
      std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    fail(ErrorKind::kValidation, "not a checkpoint file: " + path);
  std::uint32_t len = 0;
  for (int i = 3; i >= 0; --i)
    len = (len << 8) | static_cast<unsigned char>(blob[sizeof(kCheckpointMagic) + i]);
  std::size_t header_begin = sizeof(kCheckpointMagic) + 4;
  if (blob.size() < header_begin + len)
    fail(ErrorKind::kValidation, "truncated checkpoint header: " + path);
  json header;
  try {
    header = json::parse(blob.substr(header_begin, len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, "corrupt checkpoint header in " + path + ": " + e.what());
  }

  EncoderConfig config;
  const auto& enc = header.at("encoder");
  config.d_model = enc.at("d_model").get<std::size_t>();
  config.n_layers = enc.at("n_layers").get<std::size_t>();
  config.d_ff = enc.at("d_ff").get<std::size_t>();
  config.max_len = enc.at("max_len").get<std::size_t>();
  config.rel_window = enc.at("rel_window").get<std::size_t>();
  config.tie_mlm = enc.at("tie_mlm").get<bool>();
  config.init_scale = enc.at("init_scale").get<double>();

  std::vector<std::string> vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
  Vocab vocab(vocab_tokens);
  std::string stored_hash = header.at("vocab_hash").get<std::string>();
  if (to_hex(vocab.hash()) != stored_hash)
    fail(ErrorKind::kValidation, "vocabulary hash mismatch in checkpoint " + path);

  LabelSet labels(header.at("label_set").get<std::vector<std::string>>());
  ModelState state = ModelState::init(config, std::move(vocab), std::move(labels), 0);
  state.stage_tag = header.at("stage_tag").get<std::string>();
  const auto& heads = header.at("heads");
  if (heads.at("ner").get<bool>()) state.ensure_ner_head(0);
  if (heads.at("mrc").get<bool>()) state.ensure_mrc_head(0);
  if (heads.at("mlm").get<bool>()) state.ensure_mlm_head(0);

  auto tensors = checkpoint_tensors(state);
  const auto& index = header.at("tensors");
  if (index.size() != tensors.size())
    fail(ErrorKind::kValidation, "checkpoint tensor count mismatch in " + path);
  std::size_t offset = header_begin + len;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor* t = const_cast<Tensor*>(tensors[ti]);
    const auto& meta = index[ti];
    if (meta.at("name").get<std::string>() != t->name ||
        meta.at("rows").get<Eigen::Index>() != t->value.rows() ||
        meta.at("cols").get<Eigen::Index>() != t->value.cols())
      fail(ErrorKind::kValidation,
           "checkpoint tensor mismatch for " + t->name + " in " + path);
    std::size_t need = static_cast<std::size_t>(t->value.size()) * sizeof(double);
    if (blob.size() < offset + need)
      fail(ErrorKind::kValidation, "truncated checkpoint data in " + path);
    for (Eigen::Index r = 0; r < t->value.rows(); ++r)
      for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
        double v;
        std::memcpy(&v, blob.data() + offset, sizeof(double));
        offset += sizeof(double);
        t->value(r, c) = v;
      }
  }
  if (offset != blob.size())
    fail(ErrorKind::kValidation, "trailing bytes in checkpoint " + path);
  return state;
}

}  // namespace tof
