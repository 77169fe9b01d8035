#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rudi/rng.hpp"

namespace rudi {

struct NlnConfig {
  std::size_t layers = 2;       // L
  std::size_t hidden = 20;      // H, neurons per conjunction/disjunction part
  std::size_t rules = 20;       // R, must be even
  std::size_t epochs = 500;
  std::size_t batch_size = 128;
  double lr_start = 0.1;
  double lr_end = 0.001;
  double tau_start = 1.0;
  double tau_end = 0.0001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // when false, one Gumbel noise draw per selector is shared by the batch
  bool noise_per_instance = true;
};

// Each neuron selects exactly two inputs; a selector holds the logits of its
// categorical distribution over the previous layer.
struct LogicalLayer {
  std::size_t in_dim = 0;
  // conj[j] / disj[j] hold the two selector logit vectors of neuron j
  std::vector<std::array<Eigen::VectorXd, 2>> conj;
  std::vector<std::array<Eigen::VectorXd, 2>> disj;

  std::size_t num_conj() const { return conj.size(); }
  std::size_t num_disj() const { return disj.size(); }
};

struct NlnParams {
  std::size_t input_bits = 0;  // P'
  std::size_t hidden = 0;      // H
  std::vector<LogicalLayer> layers;
  Eigen::VectorXd rule_weights;  // w, length R

  std::size_t num_rules() const {
    return std::size_t(rule_weights.size());
  }
  // h_0 = 2P'+2, h_l = 2H + h_{l-1} below the last layer, h_L = R
  std::size_t layer_width(std::size_t l) const;
};

// Zero-initialized parameter set with the widths derived from (P', L, H, R).
NlnParams make_params(std::size_t input_bits, const NlnConfig& config);
// Logits and rule weights i.i.d. normal(0, 0.1).
NlnParams init_params(std::size_t input_bits, const NlnConfig& config, Rng& rng);

// Gumbel(0,1) draws for every selector of every layer, in a fixed order so
// they can be injected for reproducibility and gradient checking.
struct GumbelNoise {
  // noise[l] rows: 2*num_conj + 2*num_disj selector draws, each of in_dim
  std::vector<std::vector<Eigen::VectorXd>> layers;
};
GumbelNoise draw_noise(const NlnParams& params, Rng& rng);

struct ForwardTrace {
  // z[0] = input, z[l] = activations after layer l (length L+1)
  std::vector<Eigen::VectorXd> z;
  // per layer, per selector (same order as GumbelNoise): relaxed selection q
  std::vector<std::vector<Eigen::VectorXd>> q;
  // per layer, per neuron (conj first): the two selector inner products
  std::vector<std::vector<std::array<double, 2>>> inner;
  double prediction = 0.0;
};

// Relaxed forward pass at temperature tau with the given noise.
ForwardTrace forward_soft(const NlnParams& params, const Eigen::VectorXd& input,
                          double tau, const GumbelNoise& noise);
// Convenience overload drawing fresh noise from rng.
ForwardTrace forward_soft(const NlnParams& params, const Eigen::VectorXd& input,
                          double tau, Rng& rng);

struct HardForward {
  std::vector<Eigen::VectorXd> z;  // binary activations, z[0] = input
  double prediction = 0.0;
};

// Noise-free discrete pass: every selector takes the argmax of its logits
// (ties to the lowest index).
HardForward forward_hard(const NlnParams& params, const Eigen::VectorXd& input);

// The pairwise logistic ranking objective over all ordered pairs in a batch;
// training maximizes this (it is a log-likelihood, <= 0).
double ranking_objective(const Eigen::VectorXd& predictions,
                         const Eigen::VectorXd& teacher);
// d(objective)/d(predictions).
Eigen::VectorXd ranking_objective_grad(const Eigen::VectorXd& predictions,
                                       const Eigen::VectorXd& teacher);

// Gradients mirror the parameter layout.
struct NlnGrads {
  std::vector<LogicalLayer> layers;
  Eigen::VectorXd rule_weights;
};
NlnGrads make_grads(const NlnParams& params);

// Accumulates d(seed * prediction)/d(params) into grads by backpropagating
// through the trace. tau must match the forward pass.
void backward(const NlnParams& params, const ForwardTrace& trace, double tau,
              double seed, NlnGrads& grads);

// Trains on the literal rows (N x P') against teacher scores with Adam and
// the per-epoch linear lr/tau schedules. Deterministic given config.seed.
NlnParams train(const Eigen::MatrixXd& literal_bits,
                const Eigen::VectorXd& teacher, const NlnConfig& config);

// Max relative error of backward() against central finite differences on a
// random small instance (dimensions from config, tau as given).
double grad_check(std::size_t input_bits, const NlnConfig& config, double tau,
                  Rng& rng);

}  // namespace rudi
