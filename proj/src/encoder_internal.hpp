#ifndef TOFNER_SRC_ENCODER_INTERNAL_HPP
#define TOFNER_SRC_ENCODER_INTERNAL_HPP

#include <Eigen/Core>
#include <vector>

namespace tof {

// Forward activations kept for the backward pass.
struct LayerCache {
  Eigen::MatrixXd x_in;       // n x d, block input
  Eigen::MatrixXd a;          // LN1 output
  Eigen::MatrixXd a_xhat;     // LN1 normalized rows
  Eigen::VectorXd a_inv_std;  // per-row 1/sigma
  Eigen::MatrixXd q, k, v;    // n x d
  Eigen::MatrixXd att;        // n x n, softmax rows
  Eigen::MatrixXd ctx;        // n x d
  Eigen::MatrixXd x_mid;      // after attention residual
  Eigen::MatrixXd bnorm;      // LN2 output
  Eigen::MatrixXd b_xhat;
  Eigen::VectorXd b_inv_std;
  Eigen::MatrixXd f_pre;      // n x d_ff, pre-ReLU
  Eigen::MatrixXd f_act;      // n x d_ff
};

struct EncodeCache {
  std::vector<std::size_t> ids;
  Eigen::MatrixXd x0;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd h_xhat;  // final LN cache
  Eigen::VectorXd h_inv_std;
  Eigen::MatrixXd h;  // encoder output
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

}  // namespace tof

#endif  // TOFNER_SRC_ENCODER_INTERNAL_HPP
