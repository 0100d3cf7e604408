#pragma once

#include <array>
#include <utility>
#include <vector>

#include "ccfc/dataset.hpp"
#include "ccfc/model.hpp"
#include "ccfc/rng.hpp"

namespace ccfc {

// One training example: the anchor item with its BPR user pair and the
// sampled co-occurrence positives/negatives for the contrastive term.
struct BatchEntry {
  int item = -1;
  int user_pos = -1;
  int user_neg = -1;
  std::vector<int> pos_items;
  std::vector<int> neg_items;
};

struct ContrastiveBatch {
  std::vector<BatchEntry> entries;
};

// u+ uniform over the item's training users, u- uniform over the rest by
// rejection sampling. Errors when every user interacted with the item.
std::pair<int, int> sample_bpr_pair(int item, const InteractionDataset& train, Rng& rng);

int sample_negative_user(int item, const InteractionDataset& train, Rng& rng);

// Positives uniform from N+_v, with replacement when the set is smaller than
// n_pos; an isolated item uses itself as its sole positive. Negatives uniform
// from training items outside N+_v and v.
std::pair<std::vector<int>, std::vector<int>> sample_contrastive_sets(int item,
                                                                      const CoocIndex& cooc,
                                                                      int n_pos, int n_neg,
                                                                      Rng& rng);

// Deterministic function of (train, hyper, seed, epoch): a seeded shuffle of
// the training interactions chunked into batches, each entry completed with
// its sampled users and contrastive sets.
std::vector<ContrastiveBatch> assemble_epoch_batches(const InteractionDataset& train,
                                                     const CoocIndex& cooc,
                                                     const Hyperparams& hyper, int epoch);

// (user, pos item, neg item) triples for matrix-factorization pretraining
std::vector<std::array<int, 3>> assemble_mf_triples(const InteractionDataset& train,
                                                    const Hyperparams& hyper, int epoch);

}  // namespace ccfc
