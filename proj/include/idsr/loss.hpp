#pragma once

#include <string>

#include "idsr/common.hpp"
#include "idsr/model.hpp"
#include "idsr/tape.hpp"

namespace idsr {

enum class PositionWeight { linear, constant };

inline PositionWeight parse_position_weight(const std::string& s) {
  if (s == "linear") return PositionWeight::linear;
  if (s == "constant") return PositionWeight::constant;
  throw ConfigError("unknown position weight '" + s +
                    "' (expected linear or constant)");
}

// List-wise relevance term. If the target was selected at (1-based)
// position t0, only that step contributes, scaled by the position weight;
// otherwise every step's renormalized target probability contributes.
inline Var relevance_loss(Tape& t, const ForwardResult& fr,
                          PositionWeight pw = PositionWeight::linear) {
  int n = static_cast<int>(fr.selected.size());
  if (n < 1) throw Error("relevance loss needs a non-empty list");
  if (static_cast<int>(fr.step_target_prob.size()) != n)
    throw Error("per-step target probabilities were not retained");

  if (fr.target_rank >= 0) {
    Var p = fr.step_target_prob[fr.target_rank];
    if (!p.valid()) throw Error("per-step target probabilities were not retained");
    double w = pw == PositionWeight::linear
                   ? static_cast<double>(fr.target_rank + 1)
                   : 1.0;
    return t.scale(t.log_(p), -w / n);
  }
  Var sum;
  for (int s = 0; s < n; ++s) {
    Var p = fr.step_target_prob[s];
    if (!p.valid()) throw Error("per-step target probabilities were not retained");
    Var lg = t.log_(p);
    sum = sum.valid() ? t.add(sum, lg) : lg;
  }
  return t.scale(sum, -1.0 / n);
}

// Intent-coverage term: minus the expected probability that at least one
// listed item serves each intent.
inline Var diversity_loss(Tape& t, const ForwardResult& fr) {
  if (!fr.intents_active) throw Error("diversity loss needs active intents");
  if (fr.selected.empty()) throw Error("diversity loss needs a non-empty list");
  Var acc;
  for (std::size_t i = 0; i < fr.p_cond.size(); ++i) {
    Var miss;  // product of (1 - P(v|a_i)) over the list
    for (int v : fr.selected) {
      Var q = t.add_const(t.neg(t.at(fr.p_cond[i], v)), 1.0);
      miss = miss.valid() ? t.cmul(miss, q) : q;
    }
    Var coverage = t.add_const(t.neg(miss), 1.0);
    Var term = t.cmul(t.at(fr.intent_weights, static_cast<int>(i)), coverage);
    acc = acc.valid() ? t.add(acc, term) : term;
  }
  return t.neg(acc);
}

struct LossBreakdown {
  Var total;
  double value = 0.0;
  double relevance = 0.0;  // L_rel before weighting (0 when absent)
  double diversity = 0.0;  // L_div before weighting (0 when absent)
  double lambda = 0.0;
};

// total = lambda * L_rel + (1 - lambda) * L_div
inline LossBreakdown idp_loss(Tape& t, const ForwardResult& fr, double lambda,
                              PositionWeight pw = PositionWeight::linear) {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("lambda must lie in [0, 1]");
  LossBreakdown out;
  out.lambda = lambda;

  Var rel, div;
  if (lambda > 0.0) {
    rel = relevance_loss(t, fr, pw);
    out.relevance = t.val(rel)(0, 0);
  }
  if (lambda < 1.0 && fr.intents_active) {
    div = diversity_loss(t, fr);
    out.diversity = t.val(div)(0, 0);
  }

  if (rel.valid() && div.valid())
    out.total = t.add(t.scale(rel, lambda), t.scale(div, 1.0 - lambda));
  else if (rel.valid())
    out.total = lambda == 1.0 ? rel : t.scale(rel, lambda);
  else if (div.valid())
    out.total = lambda == 0.0 ? div : t.scale(div, 1.0 - lambda);
  else
    throw Error("loss has no terms (lambda < 1 requires intents)");
  out.value = t.val(out.total)(0, 0);
  return out;
}

// next-item cross-entropy on the relevance distribution
inline Var ce_loss(Tape& t, const ForwardResult& fr, int target) {
  return t.neg(t.log_(t.at(fr.p_rel, target)));
}

}  // namespace idsr
