#pragma once

#include <string>
#include <vector>

#include "ccfc/model.hpp"
#include "ccfc/optim.hpp"

namespace ccfc {

struct CheckpointMeta {
  int version = 1;
  std::string schema_hash;
  std::string dataset_hash;  // over the external id maps
  std::string variant = "full";
  Hyperparams hyper;
  int n_users = 0;
  int n_items = 0;
  std::vector<std::string> user_ids;  // id maps persisted with the arrays
  std::vector<std::string> item_ids;
};

// Binary format: magic "CCFC1", u64-LE metadata length, metadata JSON, then
// the parameter matrices as little-endian f64 in declared order
// (column-major), then the Adam moments. Bit-exact round trip.
void save_checkpoint(const ModelParams& params, const AdamState& state,
                     const CheckpointMeta& meta, const std::string& path);

struct Checkpoint {
  ModelParams params;
  AdamState adam;
  CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::string& path);

// Throws CompatError when the checkpoint cannot be applied to this
// schema/dataset combination.
void verify_compatible(const CheckpointMeta& meta, const AttributeSchema& schema,
                       const InteractionDataset& ds);

}  // namespace ccfc
