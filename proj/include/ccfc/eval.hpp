#pragma once

#include <string>
#include <vector>

#include "ccfc/dataset.hpp"
#include "ccfc/model.hpp"
#include "ccfc/rng.hpp"

namespace ccfc {

struct RankingMetrics {
  std::vector<int> ks;
  std::vector<double> hr;    // aligned with ks
  std::vector<double> ndcg;  // aligned with ks
  int n_items = 0;           // items that entered the averages
};

struct EvalStats {
  int dropped_users = 0;   // relevant users absent from the training pool
  int skipped_items = 0;   // heldout items left with no relevant user
};

// scores(i) belongs to pool[i]; descending score, ties by ascending user index
std::vector<int> rank_by_scores(const std::vector<int>& pool, const Vector& scores);

// Cold path: score = <q_v, s_u> with q_v from attributes only. Users sorted
// by score descending, ties broken by ascending user index.
std::vector<int> rank_users_for_item(int item, const ModelParams& params,
                                     const AttributeSchema& schema, const AttributeTable& attrs,
                                     const InteractionDataset& train,
                                     const std::vector<int>& user_pool, const Hyperparams& hyper);

// Per-item HR@k as literally defined: (sum of top-k indicators over the
// relevant users) / k.
double hr_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k);

// conventional recall-style variant, divides by |relevant| instead of k
double hr_recall_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k);

// Per-item NDCG@k as literally defined: (1/|relevant|) * sum over relevant of
// 1[rank <= k] / log2(1 + rank), 1-based ranks, no ideal-DCG renormalization.
double ndcg_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k);

// Means over the heldout items of the per-item values. Relevant users with
// no training interactions are dropped (counted in stats); items left with
// no relevant user are skipped.
RankingMetrics evaluate(const InteractionDataset& train, const InteractionDataset& heldout,
                        const std::vector<int>& heldout_items, const ModelParams& params,
                        const AttributeSchema& schema, const std::vector<int>& ks,
                        const Hyperparams& hyper, EvalStats* stats = nullptr,
                        bool recall_style_hr = false);

struct DistanceRow {
  int pos_item = -1;
  int neg_item = -1;
  double d_pos = 0.0;  // ||q_{v+} - s_u||_2
  double d_neg = 0.0;  // ||q_{v-} - s_u||_2
  double diff = 0.0;   // d_neg - d_pos
};

std::vector<DistanceRow> distance_report(int user, const std::vector<int>& pos_items,
                                         const std::vector<int>& neg_items,
                                         const ModelParams& params, const AttributeSchema& schema,
                                         const InteractionDataset& train,
                                         const Hyperparams& hyper);

// Pairs each sampled positive (an item the user interacted with in training)
// with a non-interacted negative sharing the same value on match_field when
// one exists. match_field < 0 disables matching.
std::pair<std::vector<int>, std::vector<int>> sample_report_pairs(
    int user, const InteractionDataset& train, const AttributeSchema& schema, int n_pairs,
    int match_field, Rng& rng);

std::string metrics_json_lines(const RankingMetrics& metrics);
std::string metrics_table(const RankingMetrics& metrics);
std::string distance_csv(const std::vector<DistanceRow>& rows);

}  // namespace ccfc
