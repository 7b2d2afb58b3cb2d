#include <algorithm>
#include <cmath>

#include "encoder_internal.hpp"
#include "tofner/model.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

namespace {

constexpr double kLnEps = 1e-5;

void init_normal(Tensor& t, Rng& rng, double scale) {
  for (Eigen::Index r = 0; r < t.value.rows(); ++r)
    for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = rng.normal(0.0, scale);
}

// y = gamma .* xhat + beta, row-wise statistics.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Tensor& gamma, const Tensor& beta,
                           Eigen::MatrixXd* xhat_out, Eigen::VectorXd* inv_std_out) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::MatrixXd xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * inv;
    inv_std(i) = inv;
  }
  Eigen::MatrixXd y =
      (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
  *xhat_out = std::move(xhat);
  *inv_std_out = std::move(inv_std);
  return y;
}

// Given dL/dy, accumulates dgamma/dbeta and returns dL/dx.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_std, Tensor& gamma, Tensor& beta) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  Eigen::MatrixXd dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  Eigen::MatrixXd dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m1 = dxhat.row(i).mean();
    double m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
    dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
  }
  return dx;
}

}  // namespace

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

TinyEncoder::TinyEncoder(EncoderConfig config, Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  const std::size_t d = config_.d_model;
  Rng rng(derive_seed(seed, "encoder_init"));

  tok_emb_ = Tensor("tok_emb", vocab_.size(), d);
  init_normal(tok_emb_, rng, config_.init_scale);
  pos_emb_ = Tensor("pos_emb", config_.max_len, d);
  init_normal(pos_emb_, rng, config_.init_scale);

  layers_.reserve(config_.n_layers);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_g = Tensor(p + "ln1_g", 1, d);
    layer.ln1_g.value.setOnes();
    layer.ln1_b = Tensor(p + "ln1_b", 1, d);
    layer.wq = Tensor(p + "wq", d, d);
    init_normal(layer.wq, rng, config_.init_scale);
    layer.wk = Tensor(p + "wk", d, d);
    init_normal(layer.wk, rng, config_.init_scale);
    layer.wv = Tensor(p + "wv", d, d);
    init_normal(layer.wv, rng, config_.init_scale);
    layer.wo = Tensor(p + "wo", d, d);
    init_normal(layer.wo, rng, config_.init_scale);
    layer.rel_bias = Tensor(p + "rel_bias", 1, 2 * config_.rel_window + 1);
    layer.ln2_g = Tensor(p + "ln2_g", 1, d);
    layer.ln2_g.value.setOnes();
    layer.ln2_b = Tensor(p + "ln2_b", 1, d);
    layer.w1 = Tensor(p + "w1", d, config_.d_ff);
    init_normal(layer.w1, rng, config_.init_scale);
    layer.b1 = Tensor(p + "b1", 1, config_.d_ff);
    layer.w2 = Tensor(p + "w2", config_.d_ff, d);
    init_normal(layer.w2, rng, config_.init_scale);
    layer.b2 = Tensor(p + "b2", 1, d);
    layers_.push_back(std::move(layer));
  }
  lnf_g_ = Tensor("lnf_g", 1, d);
  lnf_g_.value.setOnes();
  lnf_b_ = Tensor("lnf_b", 1, d);
}

std::vector<std::size_t> TinyEncoder::ids_for(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab_.id(t));
  return ids;
}

Eigen::MatrixXd TinyEncoder::forward(const std::vector<std::size_t>& ids,
                                     EncodeCache* cache) const {
  const std::size_t n = ids.size();
  const std::size_t d = config_.d_model;
  if (n == 0) fail(ErrorKind::kContract, "encoder forward requires a non-empty sequence");
  if (n > config_.max_len)
    fail(ErrorKind::kContract, "sequence length " + std::to_string(n) +
                                   " exceeds max_len " + std::to_string(config_.max_len));

  EncodeCache local;
  EncodeCache& c = cache ? *cache : local;
  c.ids = ids;
  c.x0.resize(n, d);
  for (std::size_t i = 0; i < n; ++i)
    c.x0.row(i) = tok_emb_.value.row(static_cast<Eigen::Index>(ids[i])) +
                  pos_emb_.value.row(static_cast<Eigen::Index>(i));

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const long r_window = static_cast<long>(config_.rel_window);
  Eigen::MatrixXd x = c.x0;
  c.layers.clear();
  c.layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& p = layers_[l];
    LayerCache& lc = c.layers[l];
    lc.x_in = x;
    lc.a = layer_norm(x, p.ln1_g, p.ln1_b, &lc.a_xhat, &lc.a_inv_std);
    lc.q = lc.a * p.wq.value;
    lc.k = lc.a * p.wk.value;
    lc.v = lc.a * p.wv.value;
    Eigen::MatrixXd scores = (lc.q * lc.k.transpose()) * scale;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        long rel = std::clamp(static_cast<long>(j) - static_cast<long>(i), -r_window, r_window);
        scores(i, j) += p.rel_bias.value(0, rel + r_window);
      }
    lc.att = softmax_rows(scores);
    lc.ctx = lc.att * lc.v;
    lc.x_mid = lc.x_in + lc.ctx * p.wo.value;
    lc.bnorm = layer_norm(lc.x_mid, p.ln2_g, p.ln2_b, &lc.b_xhat, &lc.b_inv_std);
    lc.f_pre = (lc.bnorm * p.w1.value).rowwise() + p.b1.value.row(0);
    lc.f_act = lc.f_pre.cwiseMax(0.0);
    x = lc.x_mid + ((lc.f_act * p.w2.value).rowwise() + p.b2.value.row(0)).matrix();
  }
  c.h = layer_norm(x, lnf_g_, lnf_b_, &c.h_xhat, &c.h_inv_std);
  return c.h;
}

void TinyEncoder::backward(const EncodeCache& c, const Eigen::MatrixXd& d_hidden) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  const long r_window = static_cast<long>(config_.rel_window);
  const std::size_t n = c.ids.size();

  Eigen::MatrixXd dx = layer_norm_backward(d_hidden, c.h_xhat, c.h_inv_std, lnf_g_, lnf_b_);

  for (std::size_t li = layers_.size(); li-- > 0;) {
    Layer& p = layers_[li];
    const LayerCache& lc = c.layers[li];

    // x_out = x_mid + relu(LN2(x_mid) W1 + b1) W2 + b2
    Eigen::MatrixXd d_xmid = dx;
    p.w2.grad += lc.f_act.transpose() * dx;
    p.b2.grad.row(0) += dx.colwise().sum();
    Eigen::MatrixXd d_fact = dx * p.w2.value.transpose();
    Eigen::MatrixXd d_fpre =
        (d_fact.array() * (lc.f_pre.array() > 0.0).cast<double>()).matrix();
    p.w1.grad += lc.bnorm.transpose() * d_fpre;
    p.b1.grad.row(0) += d_fpre.colwise().sum();
    Eigen::MatrixXd d_bnorm = d_fpre * p.w1.value.transpose();
    d_xmid += layer_norm_backward(d_bnorm, lc.b_xhat, lc.b_inv_std, p.ln2_g, p.ln2_b);

    // x_mid = x_in + (att v) Wo
    Eigen::MatrixXd d_xin = d_xmid;
    p.wo.grad += lc.ctx.transpose() * d_xmid;
    Eigen::MatrixXd d_ctx = d_xmid * p.wo.value.transpose();
    Eigen::MatrixXd d_att = d_ctx * lc.v.transpose();
    Eigen::MatrixXd d_v = lc.att.transpose() * d_ctx;

    // softmax rows
    Eigen::MatrixXd d_scores(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = d_att.row(i).dot(lc.att.row(i));
      d_scores.row(i) = (lc.att.row(i).array() * (d_att.row(i).array() - dot)).matrix();
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        long rel = std::clamp(static_cast<long>(j) - static_cast<long>(i), -r_window, r_window);
        p.rel_bias.grad(0, rel + r_window) += d_scores(i, j);
      }

    Eigen::MatrixXd d_q = d_scores * lc.k * scale;
    Eigen::MatrixXd d_k = d_scores.transpose() * lc.q * scale;
    p.wq.grad += lc.a.transpose() * d_q;
    p.wk.grad += lc.a.transpose() * d_k;
    p.wv.grad += lc.a.transpose() * d_v;
    Eigen::MatrixXd d_a = d_q * p.wq.value.transpose() + d_k * p.wk.value.transpose() +
                          d_v * p.wv.value.transpose();
    d_xin += layer_norm_backward(d_a, lc.a_xhat, lc.a_inv_std, p.ln1_g, p.ln1_b);
    dx = std::move(d_xin);
  }

  for (std::size_t i = 0; i < n; ++i) {
    tok_emb_.grad.row(static_cast<Eigen::Index>(c.ids[i])) += dx.row(i);
    pos_emb_.grad.row(static_cast<Eigen::Index>(i)) += dx.row(i);
  }
}

Eigen::MatrixXd TinyEncoder::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) fail(ErrorKind::kContract, "encode requires a non-empty token sequence");
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(Vocab::kClsId);
  for (const auto& t : tokens) ids.push_back(vocab_.id(t));
  ids.push_back(Vocab::kSepId);
  Eigen::MatrixXd h = forward(ids, nullptr);
  return h.middleRows(1, static_cast<Eigen::Index>(tokens.size()));
}

std::vector<Tensor*> TinyEncoder::parameters() {
  std::vector<Tensor*> out{&tok_emb_, &pos_emb_};
  for (auto& layer : layers_) {
    out.push_back(&layer.ln1_g);
    out.push_back(&layer.ln1_b);
    out.push_back(&layer.wq);
    out.push_back(&layer.wk);
    out.push_back(&layer.wv);
    out.push_back(&layer.wo);
    out.push_back(&layer.rel_bias);
    out.push_back(&layer.ln2_g);
    out.push_back(&layer.ln2_b);
    out.push_back(&layer.w1);
    out.push_back(&layer.b1);
    out.push_back(&layer.w2);
    out.push_back(&layer.b2);
  }
  out.push_back(&lnf_g_);
  out.push_back(&lnf_b_);
  return out;
}

std::vector<const Tensor*> TinyEncoder::parameters() const {
  auto mutable_params = const_cast<TinyEncoder*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void TinyEncoder::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

}  // namespace tof
