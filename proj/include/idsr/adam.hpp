#pragma once

#include <cmath>

#include "idsr/model.hpp"

namespace idsr {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (alpha <= 0) throw ConfigError("learning rate must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ConfigError("adam betas must lie in [0, 1)");
    if (epsilon <= 0) throw ConfigError("adam epsilon must be positive");
  }
};

class Adam {
 public:
  Adam(const ModelConfig& model_cfg, const AdamConfig& cfg)
      : cfg_(cfg), m_(zero_params(model_cfg)), v_(zero_params(model_cfg)) {
    cfg.validate();
  }

  // one update with bias-corrected first/second moments
  void step(ModelParams& params, const ModelParams& grads) {
    ++t_;
    double corr1 = 1.0 - std::pow(cfg_.beta1, t_);
    double corr2 = 1.0 - std::pow(cfg_.beta2, t_);
    auto pm = begin_walk(m_);
    auto pv = begin_walk(v_);
    std::size_t slot = 0;
    for_each_param(grads, [&](const std::string&, const Mat& g) {
      Mat& m = *pm[slot];
      Mat& v = *pv[slot];
      ++slot;
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    });
    slot = 0;
    for_each_param(params, [&](const std::string&, Mat& p) {
      const Mat mhat = *pm[slot] / corr1;
      const Mat vhat = *pv[slot] / corr2;
      ++slot;
      p -= cfg_.alpha *
           (mhat.array() / (vhat.array().sqrt() + cfg_.epsilon)).matrix();
    });
  }

  long steps_taken() const { return t_; }
  ModelParams& first_moment() { return m_; }
  ModelParams& second_moment() { return v_; }
  void set_steps_taken(long t) { t_ = t; }

 private:
  static std::vector<Mat*> begin_walk(ModelParams& p) {
    std::vector<Mat*> out;
    for_each_param(p, [&](const std::string&, Mat& m) { out.push_back(&m); });
    return out;
  }

  AdamConfig cfg_;
  ModelParams m_, v_;
  long t_ = 0;
};

// Rescales grads in place when their global norm exceeds max_norm.
// Returns the pre-clip norm so callers can log clipping events.
inline double clip_global_norm(ModelParams& grads, double max_norm) {
  double norm = global_grad_norm(grads);
  if (norm > max_norm && norm > 0) scale_grads(grads, max_norm / norm);
  return norm;
}

}  // namespace idsr
