#pragma once

#include <cstdint>
#include <vector>

#include "ccfc/autodiff.hpp"
#include "ccfc/common.hpp"
#include "ccfc/dataset.hpp"
#include "ccfc/schema.hpp"

namespace ccfc {

struct Hyperparams {
  int d = 128;   // embedding dimensionality
  int h = 256;   // MLP hidden width, conventionally 2*d
  double tau = 0.1;
  double lambda = 0.5;
  double l2 = 1e-4;
  int n_pos = 10;
  int n_neg = 40;
  int batch_size = 1024;
  double lr = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 30;
  int patience = 5;
  double leaky_slope = 0.01;
  std::uint64_t seed = 42;
  // matrix-factorization pretraining phase (pretrain variant only)
  int mf_epochs = 20;
  double mf_lr = 1e-3;
  // mean instead of sum when pooling collaborative embeddings; off matches
  // the plain linear-combination form
  bool collab_mean_pool = false;

  void validate() const;
};

// All learnable matrices. Embedding tables are d x vocab with one embedding
// per column; the item table is indexed by users and the user table by items
// (an item is the multi-hot of its users and vice versa).
struct ModelParams {
  ParamStore store;
  std::vector<ParamId> field_params;  // per schema field: table or projection
  ParamId w1 = kNoParam;
  ParamId b1 = kNoParam;
  ParamId w2 = kNoParam;
  ParamId b2 = kNoParam;
  ParamId item_table = kNoParam;  // d x n_users
  ParamId user_table = kNoParam;  // d x n_items
  int d = 0;
  int h = 0;
  int n_users = 0;
  int n_items = 0;

  static ModelParams init(const AttributeSchema& schema, int n_users, int n_items,
                          const Hyperparams& hyper);
  void check_finite() const;
};

// --- forward (inference) encoders ---

// per-field attribute embeddings, one d-vector per schema field
std::vector<Vector> embed_attributes(int item, const ModelParams& params,
                                     const AttributeSchema& schema, const AttributeTable& attrs);

// concatenation in schema order; every part must have dimension d
Vector content_embedding(const std::vector<Vector>& attr_embs, int d);

// two-layer MLP over the content embedding: W2*leakyrelu(W1*c + b1) + b2
Vector cbce(const ModelParams& params, const Vector& content, double leaky_slope);

// convenience: attributes -> content -> cbce
Vector cbce_of_item(int item, const ModelParams& params, const AttributeSchema& schema,
                    const AttributeTable& attrs, double leaky_slope);

// sum over columns of the item table at the item's training users; requires
// the item to belong to the training split
Vector coce(const ModelParams& params, const InteractionDataset& train, int item,
            bool mean_pool = false);

// sum over columns of the user table at the user's training items
Vector uce(const ModelParams& params, const InteractionDataset& train, int user,
           bool mean_pool = false);

double predict(const Vector& a, const Vector& b);

// --- tape-recorded encoders (training path) ---

NodeId tape_cbce(Tape& tape, const ModelParams& params, const AttributeSchema& schema,
                 const AttributeTable& attrs, int item, double leaky_slope);
NodeId tape_coce(Tape& tape, const ModelParams& params, const InteractionDataset& train, int item,
                 bool mean_pool = false);
NodeId tape_uce(Tape& tape, const ModelParams& params, const InteractionDataset& train, int user,
                bool mean_pool = false);

}  // namespace ccfc
