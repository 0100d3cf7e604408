#pragma once

#include <iosfwd>
#include <vector>

#include "ccfc/dataset.hpp"
#include "ccfc/loss.hpp"
#include "ccfc/model.hpp"
#include "ccfc/optim.hpp"

namespace ccfc {

struct EpochRecord {
  int epoch = 0;
  LossReport mean_loss;     // mean over the epoch's batches
  double val_ndcg10 = 0.0;  // validation NDCG@10
  double wall_sec = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  ModelParams params;  // best validation epoch (last good epoch on divergence)
  AdamState adam;
  RunHistory history;
  int best_epoch = -1;
  double best_val = -1.0;
  bool diverged = false;
};

// Joint multi-task training per the overall objective. Variants:
//   full            l_q + l_z + lambda*l_c + l2*reg
//   no-contrastive  l_q + l2*reg
//   pretrain        MF-pretrains the collaborative tables, freezes the item
//                   table, then optimizes l_q + lambda*l_c + l2*reg
// Early stopping on validation NDCG@10. Deterministic for a fixed seed and
// thread count; threads > 1 shards gradient work with a fixed merge order.
TrainResult train(const SplitBundle& bundle, const AttributeSchema& schema,
                  const Hyperparams& hyper, Variant variant, int threads = 1,
                  std::ostream* log = nullptr);

// One optimizer step over one batch; exposed for tests and gradient checks.
LossReport train_step(const ContrastiveBatch& batch, ModelParams& params,
                      const AttributeSchema& schema, const InteractionDataset& train_ds,
                      const Hyperparams& hyper, Variant variant, AdamState& state,
                      const std::set<ParamId>& frozen, int threads = 1);

}  // namespace ccfc
