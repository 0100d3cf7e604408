#pragma once

#include <array>
#include <string>
#include <vector>

#include "ccfc/autodiff.hpp"
#include "ccfc/model.hpp"
#include "ccfc/sampling.hpp"

namespace ccfc {

enum class Variant { Full, NoContrastive, Pretrain };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct LossReport {
  double l_q = 0.0;
  double l_z = 0.0;
  double l_c = 0.0;
  double l_reg = 0.0;
  double total = 0.0;

  LossReport& operator+=(const LossReport& other);
  LossReport& operator/=(double divisor);
};

// -ln sigma(score_pos - score_neg) in softplus form
double loss_bpr(double score_pos, double score_neg);

// InfoNCE over one anchor: mean over positives of the log-sum-exp form of
// Eq-style softmax, each positive against the shared negative pool
double loss_contrastive(const Vector& q, const std::vector<Vector>& z_pos,
                        const std::vector<Vector>& z_neg, double tau);

// BPR matrix factorization over (user, pos item, neg item) triples with the
// collaborative encoders providing s_u and z_v
double loss_mf_pretrain(const std::vector<std::array<int, 3>>& triples, const ModelParams& params,
                        const InteractionDataset& train, const Hyperparams& hyper);

struct LossNodes {
  NodeId total = -1;
  NodeId l_q = -1;
  NodeId l_z = -1;
  NodeId l_c = -1;
  NodeId l_reg = -1;
};

// Records the whole batch objective onto the tape:
//   total = l_q + l_z + lambda*l_c + l2*l_reg
// where l_q/l_z sum BPR terms over the batch triples, l_c is the mean InfoNCE
// over (anchor, positive) pairs, and l_reg is the squared L2 norm of the
// parameters the batch touched. Variants drop l_z and/or l_c.
LossNodes build_batch_loss(Tape& tape, const ContrastiveBatch& batch, const ModelParams& params,
                           const AttributeSchema& schema, const InteractionDataset& train,
                           const Hyperparams& hyper, Variant variant, bool include_reg = true);

NodeId build_mf_loss(Tape& tape, const std::vector<std::array<int, 3>>& triples,
                     const ModelParams& params, const InteractionDataset& train,
                     const Hyperparams& hyper);

struct TapedLoss {
  Tape tape;
  LossNodes nodes;
  LossReport report;
};

// spec-facing wrapper: batch -> report + tape (backward-ready)
TapedLoss loss_total(const ContrastiveBatch& batch, const ModelParams& params,
                     const AttributeSchema& schema, const InteractionDataset& train,
                     const Hyperparams& hyper, Variant variant);

LossReport report_from_nodes(const Tape& tape, const LossNodes& nodes, const Hyperparams& hyper);

}  // namespace ccfc
