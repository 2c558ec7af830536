#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "idsr/common.hpp"
#include "idsr/rng.hpp"
#include "idsr/tape.hpp"

namespace idsr {

struct ModelConfig {
  int n_items = 0;
  int embed_dim = 100;   // item embedding / hidden size d_e
  int intent_dim = 100;  // attention projection size d
  int n_intents = 3;     // M; 0 disables intents (relevance-only model)
  double dropout = 0.1;

  void validate() const {
    if (n_items < 1) throw ConfigError("n_items must be positive");
    if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
    if (intent_dim != embed_dim)
      throw ConfigError(
          "intent_dim must equal embed_dim (the intent representations are "
          "dotted against embeddings and the encoder state)");
    if (n_intents < 0) throw ConfigError("n_intents must be non-negative");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must lie in [0, 1)");
  }
};

// gate weights act on the concatenation [x_t; h_{t-1}]
struct GruWeights {
  Mat update, reset, candidate;  // each hidden x (input + hidden)
};

struct IntentProjection {
  Mat query, key, value;  // each embed_dim x intent_dim
};

struct ModelParams {
  Mat item_embeddings;  // n_items x embed_dim
  GruWeights encoder;
  std::vector<IntentProjection> intents;
  GruWeights tracker;
  Mat tracker_bilinear;  // embed_dim x intent_dim
};

// Fixed iteration order; names are the checkpoint tensor keys.
template <class Params, class Fn>
void for_each_param(Params&& p, Fn&& fn) {
  fn("item_embeddings", p.item_embeddings);
  fn("encoder.update", p.encoder.update);
  fn("encoder.reset", p.encoder.reset);
  fn("encoder.candidate", p.encoder.candidate);
  for (std::size_t i = 0; i < p.intents.size(); ++i) {
    std::string tag = "intent" + std::to_string(i);
    fn(tag + ".query", p.intents[i].query);
    fn(tag + ".key", p.intents[i].key);
    fn(tag + ".value", p.intents[i].value);
  }
  fn("tracker.update", p.tracker.update);
  fn("tracker.reset", p.tracker.reset);
  fn("tracker.candidate", p.tracker.candidate);
  fn("tracker_bilinear", p.tracker_bilinear);
}

inline ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams p;
  int de = cfg.embed_dim, d = cfg.intent_dim;
  p.item_embeddings = Mat::Zero(cfg.n_items, de);
  auto gru = [&] {
    GruWeights w;
    w.update = Mat::Zero(de, 2 * de);
    w.reset = Mat::Zero(de, 2 * de);
    w.candidate = Mat::Zero(de, 2 * de);
    return w;
  };
  p.encoder = gru();
  p.tracker = gru();
  p.intents.resize(cfg.n_intents);
  for (auto& in : p.intents) {
    in.query = Mat::Zero(de, d);
    in.key = Mat::Zero(de, d);
    in.value = Mat::Zero(de, d);
  }
  p.tracker_bilinear = Mat::Zero(de, d);
  return p;
}

// Xavier-uniform: every matrix uniform in +-sqrt(6/(rows+cols)).
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p = zero_params(cfg);
  Rng rng(seed);
  for_each_param(p, [&](const std::string&, Mat& m) {
    double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = rng.next_symmetric(bound);
  });
  return p;
}

inline void zero_grads(ModelParams& g) {
  for_each_param(g, [](const std::string&, Mat& m) { m.setZero(); });
}

inline double global_grad_norm(const ModelParams& g) {
  double sq = 0.0;
  for_each_param(g, [&](const std::string&, const Mat& m) {
    sq += m.squaredNorm();
  });
  return std::sqrt(sq);
}

inline void scale_grads(ModelParams& g, double s) {
  for_each_param(g, [&](const std::string&, Mat& m) { m *= s; });
}

inline bool params_finite(const ModelParams& p) {
  bool ok = true;
  for_each_param(p, [&](const std::string&, const Mat& m) {
    if (!m.allFinite()) ok = false;
  });
  return ok;
}

struct GenerateOptions {
  double lambda = 0.5;
  int list_len = 10;
  int target = -1;  // when >= 0, retain per-step renormalized target probs
  const std::vector<int>* forced = nullptr;  // pinned selections (grad checks)
  Rng* dropout_rng = nullptr;                // non-null enables dropout
};

struct ForwardResult {
  Var f_u;                    // encoder final state, d_e x 1
  std::vector<Var> intents;   // M intent representations, d x 1
  Var intent_weights;         // M x 1 softmax; invalid when intents skipped
  Var p_rel;                  // |V| x 1
  std::vector<Var> p_cond;    // M of |V| x 1
  std::vector<int> selected;  // decoded list, length list_len
  std::vector<Var> step_scores;       // combined score vector per step
  std::vector<Var> step_unsat;        // unsatisfaction weights per step
  std::vector<Var> step_target_prob;  // renormalized target prob per step;
                                      // invalid entries once target selected
  int target_rank = -1;  // 0-based position of target in selected, or -1
  bool intents_active = false;
};

// The full network: GRU sequence encoder, per-intent attention over the
// hidden states, relevance and intent-conditional item distributions, and a
// tracker GRU that re-weights unsatisfied intents while the list is decoded
// greedily.
class IdsrModel {
 public:
  IdsrModel(ModelConfig cfg, std::uint64_t seed)
      : cfg_(cfg), params_(init_params(cfg, seed)) {
    cfg_.validate();
  }

  IdsrModel(ModelConfig cfg, ModelParams params)
      : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
  }

  const ModelConfig& cfg() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // grads may be null only when the tape is not recording
  ForwardResult generate(Tape& t, const std::vector<int>& inputs,
                         const GenerateOptions& opt,
                         ModelParams* grads = nullptr) const {
    if (inputs.empty()) throw Error("empty input sequence");
    for (int v : inputs)
      if (v < 0 || v >= cfg_.n_items)
        throw Error("input item " + std::to_string(v) + " out of range");
    if (opt.list_len < 1 || opt.list_len > cfg_.n_items)
      throw Error("list length " + std::to_string(opt.list_len) +
                  " exceeds catalog size " + std::to_string(cfg_.n_items));
    if (opt.lambda < 0.0 || opt.lambda > 1.0)
      throw ConfigError("lambda must lie in [0, 1]");
    if (opt.target >= cfg_.n_items)
      throw Error("target item " + std::to_string(opt.target) +
                  " out of range");
    if (t.recording() && !grads)
      throw Error("gradient storage required on a recording tape");
    ModelParams* g = grads ? grads : &detached_grads();

    ForwardResult out;
    out.intents_active = cfg_.n_intents > 0 && opt.lambda < 1.0;

    // encoder
    std::vector<Var> states;
    Var h = t.leaf(Mat::Zero(cfg_.embed_dim, 1));
    for (int v : inputs) {
      Var x = embed(t, *g, v, opt.dropout_rng);
      h = gru_cell(t, params_.encoder, g->encoder, h, x);
      states.push_back(h);
    }
    out.f_u = h;
    Var item_table = t.param(params_.item_embeddings, g->item_embeddings);
    out.p_rel = t.softmax(t.mul(item_table, out.f_u));

    if (out.intents_active) {
      Var hs = t.concat_cols(states);
      std::vector<Var> importance;
      for (int i = 0; i < cfg_.n_intents; ++i) {
        const auto& w = params_.intents[i];
        auto& wg = g->intents[i];
        Var q = t.mul(t.transpose(t.param(w.query, wg.query)), out.f_u);
        Var k = t.mul(t.transpose(t.param(w.key, wg.key)), hs);
        Var v = t.mul(t.transpose(t.param(w.value, wg.value)), hs);
        Var att = t.softmax(
            t.scale(t.mul(t.transpose(k), q),
                    1.0 / std::sqrt(static_cast<double>(cfg_.intent_dim))));
        Var f_i = t.mul(v, att);
        out.intents.push_back(f_i);
        importance.push_back(t.dot(out.f_u, f_i));
        out.p_cond.push_back(t.softmax(t.mul(item_table, f_i)));
      }
      out.intent_weights = t.softmax(t.stack_scalars(importance));
    }

    // greedy decode
    std::vector<char> taken(cfg_.n_items, 0);
    Var tracker_h = t.leaf(Mat::Zero(cfg_.embed_dim, 1));
    Var wy;
    if (out.intents_active)
      wy = t.param(params_.tracker_bilinear, g->tracker_bilinear);

    for (int step = 0; step < opt.list_len; ++step) {
      Var scores = out.p_rel;
      if (out.intents_active) {
        std::vector<Var> unsat_logits;
        Var hy_wy = t.mul(t.transpose(tracker_h), wy);  // 1 x d
        for (int i = 0; i < cfg_.n_intents; ++i)
          unsat_logits.push_back(t.neg(t.mul(hy_wy, out.intents[i])));
        Var unsat = t.softmax(t.stack_scalars(unsat_logits));
        out.step_unsat.push_back(unsat);

        scores = t.scale(out.p_rel, opt.lambda);
        for (int i = 0; i < cfg_.n_intents; ++i) {
          Var coef = t.scale(t.cmul(t.at(out.intent_weights, i),
                                    t.at(unsat, i)),
                             1.0 - opt.lambda);
          scores = t.add(scores, t.smul(coef, out.p_cond[i]));
        }
      }
      out.step_scores.push_back(scores);

      int pick;
      if (opt.forced) {
        pick = (*opt.forced)[step];
        if (pick < 0 || pick >= cfg_.n_items || taken[pick])
          throw Error("forced selection invalid at step " +
                      std::to_string(step));
      } else {
        pick = argmax_free(t.val(scores), taken);
      }

      if (opt.target >= 0 && !taken[opt.target]) {
        Var denom = t.sum(scores);
        for (int v = 0; v < cfg_.n_items; ++v)
          if (taken[v]) denom = t.sub(denom, t.at(scores, v));
        out.step_target_prob.push_back(
            t.div(t.at(scores, opt.target), denom));
      } else {
        out.step_target_prob.push_back(Var{});
      }

      taken[pick] = 1;
      out.selected.push_back(pick);
      if (pick == opt.target && out.target_rank < 0) out.target_rank = step;

      if (out.intents_active && step + 1 < opt.list_len) {
        Var x = embed(t, *g, pick, opt.dropout_rng);
        tracker_h = gru_cell(t, params_.tracker, g->tracker, tracker_h, x);
      }
    }
    return out;
  }

  // evaluation-mode ranking (no gradients, no dropout)
  std::vector<int> recommend(const std::vector<int>& inputs, double lambda,
                             int list_len) const {
    Tape t;
    t.set_recording(false);
    GenerateOptions opt;
    opt.lambda = lambda;
    opt.list_len = list_len;
    return generate(t, inputs, opt).selected;
  }

  // P(v|u) over the catalog, for score-based re-rankers
  Vec relevance_scores(const std::vector<int>& inputs) const {
    Tape t;
    t.set_recording(false);
    GenerateOptions opt;
    opt.lambda = 1.0;
    opt.list_len = 1;
    return t.val(generate(t, inputs, opt).p_rel).col(0);
  }

 private:
  Var embed(Tape& t, ModelParams& g, int item, Rng* dropout_rng) const {
    Var x = t.row_embed(params_.item_embeddings, g.item_embeddings, item);
    if (dropout_rng && cfg_.dropout > 0.0) {
      Mat mask(cfg_.embed_dim, 1);
      double keep = 1.0 - cfg_.dropout;
      for (int r = 0; r < cfg_.embed_dim; ++r)
        mask(r, 0) = dropout_rng->next_real() >= cfg_.dropout ? 1.0 / keep : 0.0;
      x = t.cmul(x, t.leaf(std::move(mask)));
    }
    return x;
  }

  // standard gated recurrence; gates read [x; h]
  Var gru_cell(Tape& t, const GruWeights& w, GruWeights& wg, Var h,
               Var x) const {
    Var cat = t.concat2(x, h);
    Var z = t.sigmoid(t.mul(t.param(w.update, wg.update), cat));
    Var r = t.sigmoid(t.mul(t.param(w.reset, wg.reset), cat));
    Var cat_c = t.concat2(x, t.cmul(r, h));
    Var hbar = t.tanh_(t.mul(t.param(w.candidate, wg.candidate), cat_c));
    return t.add(t.cmul(t.add_const(t.neg(z), 1.0), h), t.cmul(z, hbar));
  }

  static int argmax_free(const Mat& scores, const std::vector<char>& taken) {
    int best = -1;
    for (int v = 0; v < scores.rows(); ++v) {
      if (taken[v]) continue;
      if (best < 0 || scores(v, 0) > scores(best, 0)) best = v;
    }
    if (best < 0) throw Error("no candidates left to select");
    return best;
  }

  // scratch gradient storage for non-recording passes; never read
  ModelParams& detached_grads() const {
    thread_local ModelParams g;
    if (g.item_embeddings.rows() != cfg_.n_items ||
        g.item_embeddings.cols() != cfg_.embed_dim ||
        static_cast<int>(g.intents.size()) != cfg_.n_intents)
      g = zero_params(cfg_);
    return g;
  }

  ModelConfig cfg_;
  ModelParams params_;
};

}  // namespace idsr
