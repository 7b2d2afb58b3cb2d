#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tofner/model.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

namespace tof {

namespace {

// Adam with bias correction; state is per training stage, never carried over.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr) : params_(std::move(params)), lr_(lr) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* t : params_) {
      m_.push_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor* p = params_[i];
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * p->grad;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * p->grad.cwiseProduct(p->grad);
      Eigen::MatrixXd m_hat = m_[i] / bc1;
      Eigen::MatrixXd v_hat = v_[i] / bc2;
      p->value -= lr_ * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + kEps).matrix());
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::vector<Tensor*> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  double lr_;
  int t_ = 0;
};

template <typename Item, typename GradFn>
TrainReport run_training(ModelState& state, const std::vector<Item>& dataset,
                         const StageHyperparams& hp, unsigned head_mask, GradFn&& item_grad) {
  if (hp.batch_size == 0)
    fail(ErrorKind::kValidation, "batch size must be positive");
  if (!(hp.learning_rate > 0.0))
    fail(ErrorKind::kValidation, "learning rate must be positive");
  TrainReport report;
  if (hp.epochs == 0 || dataset.empty()) return report;

  Adam optimizer(state.parameters(head_mask), hp.learning_rate);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng rng(derive_seed(hp.seed, "epoch_" + std::to_string(epoch)));
    rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size, ++batch_index) {
      std::size_t end = std::min(begin + hp.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      state.zero_grad();
      double batch_total = 0.0;
      for (std::size_t i = begin; i < end; ++i)
        batch_total += item_grad(state, dataset[order[i]]);
      if (!std::isfinite(batch_total))
        fail(ErrorKind::kTraining, "non-finite loss in epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
      for (Tensor* t : state.parameters(head_mask)) t->grad *= inv_batch;
      optimizer.step();
      epoch_total += batch_total;
      ++report.steps;
    }
    report.epoch_mean_loss.push_back(epoch_total / static_cast<double>(order.size()));
  }
  return report;
}

}  // namespace

TrainReport train_stage(ModelState& state, const std::vector<MaskedInstance>& dataset,
                        const StageHyperparams& hp) {
  if (!state.mlm) fail(ErrorKind::kContract, "train_stage: model state has no MLM head");
  return run_training(state, dataset, hp, kHeadsMlm,
                      [](ModelState& s, const MaskedInstance& item) { return mlm_item_grad(s, item); });
}

TrainReport train_stage(ModelState& state, const std::vector<MrcExample>& dataset,
                        const StageHyperparams& hp) {
  if (!state.mrc) fail(ErrorKind::kContract, "train_stage: model state has no MRC head");
  return run_training(state, dataset, hp, kHeadsMrc,
                      [](ModelState& s, const MrcExample& item) { return mrc_item_grad(s, item); });
}

TrainReport train_stage(ModelState& state, const std::vector<TaggedSentence>& dataset,
                        const StageHyperparams& hp) {
  if (!state.ner) fail(ErrorKind::kContract, "train_stage: model state has no NER head");
  return run_training(state, dataset, hp, kHeadsNer,
                      [](ModelState& s, const TaggedSentence& item) { return ner_item_grad(s, item); });
}

}  // namespace tof
