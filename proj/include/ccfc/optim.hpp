#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <utility>

#include "ccfc/autodiff.hpp"
#include "ccfc/model.hpp"

namespace ccfc {

// Bias-corrected Adam with lazy per-column moments for embedding tables:
// only columns that appear in a step's gradient move, and their moment
// columns are created/updated on first touch. The step counter is global.
struct AdamState {
  struct DenseMoments {
    Matrix m;
    Matrix v;
  };
  std::map<ParamId, DenseMoments> dense;
  // table param -> column -> (m, v) moment vectors
  std::map<ParamId, std::map<Index, std::pair<Vector, Vector>>> table;
  std::int64_t t = 0;
};

void adam_step(ParamStore& params, const GradBag& grads, AdamState& state, double lr,
               const Hyperparams& hyper, const std::set<ParamId>& frozen = {});

}  // namespace ccfc
