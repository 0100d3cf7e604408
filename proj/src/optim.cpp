#include "ccfc/optim.hpp"

#include <cmath>

namespace ccfc {

void adam_step(ParamStore& params, const GradBag& grads, AdamState& state, double lr,
               const Hyperparams& hyper, const std::set<ParamId>& frozen) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));

  for (const auto& [id, g] : grads.dense()) {
    if (frozen.count(id)) continue;
    Matrix& theta = params.edit(id);
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw InputError("adam: gradient shape mismatch for " + params.name(id));
    }
    auto [it, created] = state.dense.try_emplace(id);
    if (created) {
      it->second.m = Matrix::Zero(theta.rows(), theta.cols());
      it->second.v = Matrix::Zero(theta.rows(), theta.cols());
    }
    Matrix& m = it->second.m;
    Matrix& v = it->second.v;
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
    const Matrix update =
        (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + hyper.eps)).matrix();
    if (!update.allFinite()) {
      throw NumericError("adam: non-finite update for " + params.name(id));
    }
    theta -= update;
  }

  for (const auto& [id, cols] : grads.table_cols()) {
    if (frozen.count(id)) continue;
    Matrix& theta = params.edit(id);
    auto& moments = state.table[id];
    for (const auto& [col, g] : cols) {
      if (g.size() != theta.rows()) {
        throw InputError("adam: gradient shape mismatch for " + params.name(id));
      }
      auto [it, created] = moments.try_emplace(col);
      if (created) {
        it->second.first = Vector::Zero(theta.rows());
        it->second.second = Vector::Zero(theta.rows());
      }
      Vector& m = it->second.first;
      Vector& v = it->second.second;
      m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
      v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
      const Vector update =
          (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + hyper.eps)).matrix();
      if (!update.allFinite()) {
        throw NumericError("adam: non-finite update for " + params.name(id) + " column " +
                           std::to_string(col));
      }
      theta.col(col) -= update;
    }
  }
}

}  // namespace ccfc
