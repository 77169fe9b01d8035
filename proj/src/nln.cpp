#include "rudi/nln.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rudi/binarize.hpp"

namespace rudi {

namespace {

void check_config(const NlnConfig& config) {
  if (config.rules == 0 || config.rules % 2 != 0)
    throw std::invalid_argument("nln: rule count must be positive and even");
  if (config.layers == 0) throw std::invalid_argument("nln: need >= 1 layer");
  if (config.hidden == 0) throw std::invalid_argument("nln: need hidden >= 1");
  if (config.tau_start <= 0.0 || config.tau_end <= 0.0)
    throw std::invalid_argument("nln: temperatures must be positive");
}

double log_sigmoid(double x) {
  return x > 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x > 0.0 ? 1.0 / (1.0 + std::exp(-x))
                 : std::exp(x) / (1.0 + std::exp(x));
}

// Explicit loop so the rules module can reproduce the exact same float sum.
double dot_in_order(const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) sum += w[i] * z[i];
  return sum;
}

Eigen::VectorXd tempered_softmax(Eigen::VectorXd logits, double tau) {
  const double m = logits.maxCoeff();
  logits = ((logits.array() - m) / tau).exp();
  return logits / logits.sum();
}

}  // namespace

std::size_t NlnParams::layer_width(std::size_t l) const {
  if (l == 0) return 2 * input_bits + 2;
  const LogicalLayer& layer = layers.at(l - 1);
  const bool last = l == layers.size();
  const std::size_t neurons = layer.num_conj() + layer.num_disj();
  return last ? neurons : neurons + layer.in_dim;
}

NlnParams make_params(std::size_t input_bits, const NlnConfig& config) {
  check_config(config);
  NlnParams params;
  params.input_bits = input_bits;
  params.hidden = config.hidden;
  std::size_t width = 2 * input_bits + 2;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const bool last = l + 1 == config.layers;
    const std::size_t part = last ? config.rules / 2 : config.hidden;
    LogicalLayer layer;
    layer.in_dim = width;
    layer.conj.resize(part, {Eigen::VectorXd::Zero(Eigen::Index(width)),
                             Eigen::VectorXd::Zero(Eigen::Index(width))});
    layer.disj.resize(part, {Eigen::VectorXd::Zero(Eigen::Index(width)),
                             Eigen::VectorXd::Zero(Eigen::Index(width))});
    params.layers.push_back(std::move(layer));
    width = last ? 2 * part : 2 * part + width;
  }
  params.rule_weights = Eigen::VectorXd::Zero(Eigen::Index(config.rules));
  return params;
}

NlnParams init_params(std::size_t input_bits, const NlnConfig& config,
                      Rng& rng) {
  NlnParams params = make_params(input_bits, config);
  constexpr double kInitStd = 0.1;
  auto randomize = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = kInitStd * rng.normal();
  };
  for (LogicalLayer& layer : params.layers) {
    for (auto& sel : layer.conj) {
      randomize(sel[0]);
      randomize(sel[1]);
    }
    for (auto& sel : layer.disj) {
      randomize(sel[0]);
      randomize(sel[1]);
    }
  }
  randomize(params.rule_weights);
  return params;
}

GumbelNoise draw_noise(const NlnParams& params, Rng& rng) {
  GumbelNoise noise;
  for (const LogicalLayer& layer : params.layers) {
    std::vector<Eigen::VectorXd> draws;
    const std::size_t selectors = 2 * (layer.num_conj() + layer.num_disj());
    draws.reserve(selectors);
    for (std::size_t s = 0; s < selectors; ++s) {
      Eigen::VectorXd g(Eigen::Index(layer.in_dim));
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        g[i] = u;
      }
      // vectorized -log(-log(u)); the scalar equivalent dominates training
      g = -(-g.array().log()).log();
      draws.push_back(std::move(g));
    }
    noise.layers.push_back(std::move(draws));
  }
  return noise;
}

ForwardTrace forward_soft(const NlnParams& params, const Eigen::VectorXd& input,
                          double tau, const GumbelNoise& noise) {
  if (tau <= 0.0) throw std::invalid_argument("forward_soft: tau must be > 0");
  if (std::size_t(input.size()) != params.layer_width(0))
    throw std::invalid_argument("forward_soft: input width mismatch");

  ForwardTrace trace;
  trace.z.push_back(input);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LogicalLayer& layer = params.layers[l];
    const bool last = l + 1 == params.layers.size();
    const Eigen::VectorXd& z_prev = trace.z.back();
    std::vector<Eigen::VectorXd> layer_q;
    std::vector<std::array<double, 2>> layer_inner;

    const std::size_t out_width =
        layer.num_conj() + layer.num_disj() + (last ? 0 : layer.in_dim);
    Eigen::VectorXd z_out = Eigen::VectorXd::Zero(Eigen::Index(out_width));

    std::size_t sel = 0;
    for (std::size_t j = 0; j < layer.num_conj(); ++j) {
      std::array<double, 2> inner{};
      for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd q = tempered_softmax(
            layer.conj[j][std::size_t(k)] + noise.layers[l][sel], tau);
        inner[std::size_t(k)] = q.dot(z_prev);
        layer_q.push_back(q);
        ++sel;
      }
      z_out[Eigen::Index(j)] = inner[0] * inner[1];
      layer_inner.push_back(inner);
    }
    for (std::size_t j = 0; j < layer.num_disj(); ++j) {
      std::array<double, 2> inner{};
      for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd q = tempered_softmax(
            layer.disj[j][std::size_t(k)] + noise.layers[l][sel], tau);
        inner[std::size_t(k)] = q.dot(z_prev);
        layer_q.push_back(q);
        ++sel;
      }
      z_out[Eigen::Index(layer.num_conj() + j)] =
          1.0 - (1.0 - inner[0]) * (1.0 - inner[1]);
      layer_inner.push_back(inner);
    }
    if (!last)
      z_out.tail(Eigen::Index(layer.in_dim)) = z_prev;

    trace.q.push_back(std::move(layer_q));
    trace.inner.push_back(std::move(layer_inner));
    trace.z.push_back(std::move(z_out));
  }
  trace.prediction = dot_in_order(params.rule_weights, trace.z.back());
  return trace;
}

ForwardTrace forward_soft(const NlnParams& params, const Eigen::VectorXd& input,
                          double tau, Rng& rng) {
  return forward_soft(params, input, tau, draw_noise(params, rng));
}

HardForward forward_hard(const NlnParams& params,
                         const Eigen::VectorXd& input) {
  if (std::size_t(input.size()) != params.layer_width(0))
    throw std::invalid_argument("forward_hard: input width mismatch");
  auto argmax = [](const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;  // ties resolve to the lowest index
    return best;
  };

  HardForward fwd;
  fwd.z.push_back(input);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LogicalLayer& layer = params.layers[l];
    const bool last = l + 1 == params.layers.size();
    const Eigen::VectorXd& z_prev = fwd.z.back();
    const std::size_t out_width =
        layer.num_conj() + layer.num_disj() + (last ? 0 : layer.in_dim);
    Eigen::VectorXd z_out = Eigen::VectorXd::Zero(Eigen::Index(out_width));
    for (std::size_t j = 0; j < layer.num_conj(); ++j) {
      const double a = z_prev[argmax(layer.conj[j][0])];
      const double b = z_prev[argmax(layer.conj[j][1])];
      z_out[Eigen::Index(j)] = (a != 0.0 && b != 0.0) ? 1.0 : 0.0;
    }
    for (std::size_t j = 0; j < layer.num_disj(); ++j) {
      const double a = z_prev[argmax(layer.disj[j][0])];
      const double b = z_prev[argmax(layer.disj[j][1])];
      z_out[Eigen::Index(layer.num_conj() + j)] =
          (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
    }
    if (!last) z_out.tail(Eigen::Index(layer.in_dim)) = z_prev;
    fwd.z.push_back(std::move(z_out));
  }
  fwd.prediction = dot_in_order(params.rule_weights, fwd.z.back());
  return fwd;
}

double ranking_objective(const Eigen::VectorXd& predictions,
                         const Eigen::VectorXd& teacher) {
  const Eigen::Index n = predictions.size();
  if (n != teacher.size())
    throw std::invalid_argument("ranking_objective: length mismatch");
  if (n < 2) throw std::invalid_argument("ranking_objective: need >= 2");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      total += teacher[i] > teacher[j]
                   ? log_sigmoid(predictions[i] - predictions[j])
                   : log_sigmoid(predictions[j] - predictions[i]);
    }
  return total / (double(n) * double(n - 1));
}

Eigen::VectorXd ranking_objective_grad(const Eigen::VectorXd& predictions,
                                       const Eigen::VectorXd& teacher) {
  const Eigen::Index n = predictions.size();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
  const double scale = 1.0 / (double(n) * double(n - 1));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (teacher[i] > teacher[j]) {
        const double coeff = 1.0 - sigmoid(predictions[i] - predictions[j]);
        grad[i] += scale * coeff;
        grad[j] -= scale * coeff;
      } else {
        const double coeff = 1.0 - sigmoid(predictions[j] - predictions[i]);
        grad[j] += scale * coeff;
        grad[i] -= scale * coeff;
      }
    }
  return grad;
}

NlnGrads make_grads(const NlnParams& params) {
  NlnGrads grads;
  for (const LogicalLayer& layer : params.layers) {
    LogicalLayer zero;
    zero.in_dim = layer.in_dim;
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(Eigen::Index(layer.in_dim));
    zero.conj.resize(layer.num_conj(), {z, z});
    zero.disj.resize(layer.num_disj(), {z, z});
    grads.layers.push_back(std::move(zero));
  }
  grads.rule_weights = Eigen::VectorXd::Zero(params.rule_weights.size());
  return grads;
}

void backward(const NlnParams& params, const ForwardTrace& trace, double tau,
              double seed, NlnGrads& grads) {
  const std::size_t num_layers = params.layers.size();
  grads.rule_weights += seed * trace.z.back();
  Eigen::VectorXd dz = seed * params.rule_weights;

  for (std::size_t l = num_layers; l-- > 0;) {
    const LogicalLayer& layer = params.layers[l];
    const bool last = l + 1 == num_layers;
    const Eigen::VectorXd& z_prev = trace.z[l];
    Eigen::VectorXd dz_prev =
        Eigen::VectorXd::Zero(Eigen::Index(layer.in_dim));
    if (!last) dz_prev += dz.tail(Eigen::Index(layer.in_dim));

    auto selector_backward = [&](const Eigen::VectorXd& q, double d_inner,
                                 Eigen::VectorXd& logit_grad) {
      // inner = q . z_prev; q = softmax((w+g)/tau); dq = d_inner * z_prev
      dz_prev += d_inner * q;
      const double mix = d_inner * q.dot(z_prev);
      logit_grad.array() +=
          q.array() * (d_inner * z_prev.array() - mix) / tau;
    };

    std::size_t sel = 0;
    for (std::size_t j = 0; j < layer.num_conj(); ++j) {
      const double du = dz[Eigen::Index(j)];
      const double a = trace.inner[l][j][0];
      const double b = trace.inner[l][j][1];
      selector_backward(trace.q[l][sel], du * b, grads.layers[l].conj[j][0]);
      ++sel;
      selector_backward(trace.q[l][sel], du * a, grads.layers[l].conj[j][1]);
      ++sel;
    }
    for (std::size_t j = 0; j < layer.num_disj(); ++j) {
      const double dv = dz[Eigen::Index(layer.num_conj() + j)];
      const std::size_t idx = layer.num_conj() + j;
      const double a = trace.inner[l][idx][0];
      const double b = trace.inner[l][idx][1];
      selector_backward(trace.q[l][sel], dv * (1.0 - b),
                        grads.layers[l].disj[j][0]);
      ++sel;
      selector_backward(trace.q[l][sel], dv * (1.0 - a),
                        grads.layers[l].disj[j][1]);
      ++sel;
    }
    dz = std::move(dz_prev);
  }
}

namespace {

std::vector<Eigen::VectorXd*> blocks(NlnParams& p) {
  std::vector<Eigen::VectorXd*> out;
  for (LogicalLayer& layer : p.layers) {
    for (auto& sel : layer.conj) {
      out.push_back(&sel[0]);
      out.push_back(&sel[1]);
    }
    for (auto& sel : layer.disj) {
      out.push_back(&sel[0]);
      out.push_back(&sel[1]);
    }
  }
  out.push_back(&p.rule_weights);
  return out;
}

std::vector<Eigen::VectorXd*> blocks(NlnGrads& g) {
  std::vector<Eigen::VectorXd*> out;
  for (LogicalLayer& layer : g.layers) {
    for (auto& sel : layer.conj) {
      out.push_back(&sel[0]);
      out.push_back(&sel[1]);
    }
    for (auto& sel : layer.disj) {
      out.push_back(&sel[0]);
      out.push_back(&sel[1]);
    }
  }
  out.push_back(&g.rule_weights);
  return out;
}

void zero_grads(NlnGrads& g) {
  for (Eigen::VectorXd* block : blocks(g)) block->setZero();
}

struct Adam {
  NlnGrads m;
  NlnGrads v;
  double beta1, beta2, eps;
  std::size_t t = 0;

  Adam(const NlnParams& params, const NlnConfig& config)
      : m(make_grads(params)),
        v(make_grads(params)),
        beta1(config.adam_beta1),
        beta2(config.adam_beta2),
        eps(config.adam_eps) {}

  // gradient-descent step on the negated objective
  void step(NlnParams& params, NlnGrads& grads, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    auto pb = blocks(params);
    auto gb = blocks(grads);
    auto mb = blocks(m);
    auto vb = blocks(v);
    for (std::size_t i = 0; i < pb.size(); ++i) {
      Eigen::VectorXd& p = *pb[i];
      const Eigen::VectorXd& g = *gb[i];
      Eigen::VectorXd& mm = *mb[i];
      Eigen::VectorXd& vv = *vb[i];
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv.array().matrix() +
           (1.0 - beta2) * g.array().square().matrix();
      p.array() -= lr * (mm.array() / bc1) /
                   ((vv.array() / bc2).sqrt() + eps);
    }
  }
};

double schedule(double start, double end, std::size_t epoch,
                std::size_t epochs) {
  if (epochs <= 1) return start;
  const double frac = double(epoch) / double(epochs - 1);
  return start + frac * (end - start);
}

}  // namespace

NlnParams train(const Eigen::MatrixXd& literal_bits,
                const Eigen::VectorXd& teacher, const NlnConfig& config) {
  check_config(config);
  if (literal_bits.rows() != teacher.size())
    throw std::invalid_argument("train: rows/scores mismatch");
  const std::size_t n = std::size_t(literal_bits.rows());
  const std::size_t input_bits = std::size_t(literal_bits.cols());

  Rng rng(config.seed);
  NlnParams params = init_params(input_bits, config, rng);
  if (config.epochs == 0) return params;

  std::vector<Eigen::VectorXd> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    inputs.push_back(augment(literal_bits.row(Eigen::Index(i)).transpose()));

  Adam adam(params, config);
  NlnGrads grads = make_grads(params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau =
        schedule(config.tau_start, config.tau_end, epoch, config.epochs);
    const double lr =
        schedule(config.lr_start, config.lr_end, epoch, config.epochs);
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, n - begin);
      if (size < 2) continue;  // no ranking pairs in a singleton batch
      std::vector<ForwardTrace> traces;
      traces.reserve(size);
      Eigen::VectorXd predictions = Eigen::VectorXd::Zero(Eigen::Index(size));
      Eigen::VectorXd targets = Eigen::VectorXd::Zero(Eigen::Index(size));
      GumbelNoise shared;
      if (!config.noise_per_instance) shared = draw_noise(params, rng);
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t idx = order[begin + i];
        ForwardTrace trace =
            config.noise_per_instance
                ? forward_soft(params, inputs[idx], tau, rng)
                : forward_soft(params, inputs[idx], tau, shared);
        predictions[Eigen::Index(i)] = trace.prediction;
        targets[Eigen::Index(i)] = teacher[Eigen::Index(idx)];
        traces.push_back(std::move(trace));
      }
      const Eigen::VectorXd obj_grad =
          ranking_objective_grad(predictions, targets);
      zero_grads(grads);
      for (std::size_t i = 0; i < size; ++i)
        backward(params, traces[i], tau, -obj_grad[Eigen::Index(i)], grads);
      adam.step(params, grads, lr);
    }
  }
  return params;
}

double grad_check(std::size_t input_bits, const NlnConfig& config, double tau,
                  Rng& rng) {
  constexpr std::size_t kBatch = 6;
  constexpr double kStep = 1e-5;

  NlnParams params = init_params(input_bits, config, rng);
  std::vector<Eigen::VectorXd> inputs;
  std::vector<GumbelNoise> noise;
  Eigen::VectorXd teacher(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) {
    Eigen::VectorXd bits = Eigen::VectorXd::Zero(Eigen::Index(input_bits));
    for (Eigen::Index b = 0; b < bits.size(); ++b)
      bits[b] = rng.below(2) ? 1.0 : 0.0;
    inputs.push_back(augment(bits));
    noise.push_back(draw_noise(params, rng));
    teacher[Eigen::Index(i)] = rng.normal();
  }

  auto objective = [&](const NlnParams& p) {
    Eigen::VectorXd predictions(kBatch);
    for (std::size_t i = 0; i < kBatch; ++i)
      predictions[Eigen::Index(i)] =
          forward_soft(p, inputs[i], tau, noise[i]).prediction;
    return ranking_objective(predictions, teacher);
  };

  // analytic gradient of the objective
  NlnGrads grads = make_grads(params);
  {
    Eigen::VectorXd predictions(kBatch);
    std::vector<ForwardTrace> traces;
    for (std::size_t i = 0; i < kBatch; ++i) {
      traces.push_back(forward_soft(params, inputs[i], tau, noise[i]));
      predictions[Eigen::Index(i)] = traces.back().prediction;
    }
    const Eigen::VectorXd obj_grad =
        ranking_objective_grad(predictions, teacher);
    for (std::size_t i = 0; i < kBatch; ++i)
      backward(params, traces[i], tau, obj_grad[Eigen::Index(i)], grads);
  }

  double max_rel_error = 0.0;
  auto pb = blocks(params);
  auto gb = blocks(grads);
  for (std::size_t b = 0; b < pb.size(); ++b) {
    Eigen::VectorXd& block = *pb[b];
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      const double saved = block[i];
      block[i] = saved + kStep;
      const double plus = objective(params);
      block[i] = saved - kStep;
      const double minus = objective(params);
      block[i] = saved;
      const double numeric = (plus - minus) / (2.0 * kStep);
      const double analytic = (*gb[b])[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      max_rel_error =
          std::max(max_rel_error, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel_error;
}

}  // namespace rudi
