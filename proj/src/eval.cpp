#include "ccfc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ccfc {

namespace {

std::vector<int> training_user_pool(const InteractionDataset& train) {
  std::vector<int> pool;
  for (int u = 0; u < train.n_users; ++u) {
    if (!train.items_of_user[static_cast<std::size_t>(u)].empty()) pool.push_back(u);
  }
  return pool;
}

int rank_of(const std::vector<int>& ranked, int user) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == user) return static_cast<int>(i) + 1;  // 1-based
  }
  return -1;
}

}  // namespace

std::vector<int> rank_by_scores(const std::vector<int>& pool, const Vector& scores) {
  if (static_cast<Index>(pool.size()) != scores.size()) {
    throw InputError("rank_by_scores: pool and score sizes differ");
  }
  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return pool[static_cast<std::size_t>(a)] < pool[static_cast<std::size_t>(b)];
  });
  std::vector<int> ranked(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ranked[i] = pool[static_cast<std::size_t>(order[i])];
  }
  return ranked;
}

std::vector<int> rank_users_for_item(int item, const ModelParams& params,
                                     const AttributeSchema& schema, const AttributeTable& attrs,
                                     const InteractionDataset& train,
                                     const std::vector<int>& user_pool, const Hyperparams& hyper) {
  if (user_pool.empty()) throw InputError("rank_users_for_item: empty user pool");
  const Vector q = cbce_of_item(item, params, schema, attrs, hyper.leaky_slope);
  Vector scores(static_cast<Index>(user_pool.size()));
  for (std::size_t i = 0; i < user_pool.size(); ++i) {
    scores(static_cast<Index>(i)) =
        q.dot(uce(params, train, user_pool[i], hyper.collab_mean_pool));
  }
  return rank_by_scores(user_pool, scores);
}

double hr_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k) {
  if (k < 1) throw InputError("hr_at_k: k must be >= 1");
  if (relevant.empty()) throw InputError("hr_at_k: empty relevance set");
  int hits = 0;
  for (int user : relevant) {
    const int r = rank_of(ranked, user);
    if (r >= 1 && r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double hr_recall_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k) {
  if (k < 1) throw InputError("hr_recall_at_k: k must be >= 1");
  if (relevant.empty()) throw InputError("hr_recall_at_k: empty relevance set");
  int hits = 0;
  for (int user : relevant) {
    const int r = rank_of(ranked, user);
    if (r >= 1 && r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const std::vector<int>& ranked, const std::vector<int>& relevant, int k) {
  if (k < 1) throw InputError("ndcg_at_k: k must be >= 1");
  if (relevant.empty()) throw InputError("ndcg_at_k: empty relevance set");
  double acc = 0.0;
  for (int user : relevant) {
    const int r = rank_of(ranked, user);
    if (r >= 1 && r <= k) acc += 1.0 / std::log2(1.0 + static_cast<double>(r));
  }
  return acc / static_cast<double>(relevant.size());
}

RankingMetrics evaluate(const InteractionDataset& train, const InteractionDataset& heldout,
                        const std::vector<int>& heldout_items, const ModelParams& params,
                        const AttributeSchema& schema, const std::vector<int>& ks,
                        const Hyperparams& hyper, EvalStats* stats, bool recall_style_hr) {
  if (heldout_items.empty()) throw InputError("evaluate: empty heldout split");
  if (ks.empty()) throw InputError("evaluate: no k values");
  if (!train.attributes) throw InputError("evaluate: dataset has no attributes");
  const AttributeTable& attrs = *train.attributes;

  for (int v : heldout_items) {
    if (train.item_is_in_split(v)) {
      throw InputError("evaluate: item " + std::to_string(v) +
                       " is not cold; it belongs to the training split");
    }
  }

  const std::vector<int> pool = training_user_pool(train);
  if (pool.empty()) throw InputError("evaluate: no training users");

  // s_u for the whole pool once; every item scores against the same matrix
  Matrix S(params.d, static_cast<Index>(pool.size()));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    S.col(static_cast<Index>(i)) = uce(params, train, pool[i], hyper.collab_mean_pool);
  }

  EvalStats local;
  RankingMetrics metrics;
  metrics.ks = ks;
  metrics.hr.assign(ks.size(), 0.0);
  metrics.ndcg.assign(ks.size(), 0.0);

  for (int v : heldout_items) {
    std::vector<int> relevant;
    for (int u : heldout.users_of_item[static_cast<std::size_t>(v)]) {
      if (!train.items_of_user[static_cast<std::size_t>(u)].empty()) {
        relevant.push_back(u);
      } else {
        ++local.dropped_users;
      }
    }
    if (relevant.empty()) {
      ++local.skipped_items;
      continue;
    }
    const Vector q = cbce_of_item(v, params, schema, attrs, hyper.leaky_slope);
    Vector scores(static_cast<Index>(pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      scores(static_cast<Index>(i)) = q.dot(S.col(static_cast<Index>(i)));
    }
    const std::vector<int> ranked = rank_by_scores(pool, scores);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      metrics.hr[i] += recall_style_hr ? hr_recall_at_k(ranked, relevant, ks[i])
                                       : hr_at_k(ranked, relevant, ks[i]);
      metrics.ndcg[i] += ndcg_at_k(ranked, relevant, ks[i]);
    }
    ++metrics.n_items;
  }
  if (metrics.n_items == 0) {
    throw InputError("evaluate: no heldout item has a relevant training user");
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    metrics.hr[i] /= metrics.n_items;
    metrics.ndcg[i] /= metrics.n_items;
  }
  if (stats) *stats = local;
  return metrics;
}

std::vector<DistanceRow> distance_report(int user, const std::vector<int>& pos_items,
                                         const std::vector<int>& neg_items,
                                         const ModelParams& params, const AttributeSchema& schema,
                                         const InteractionDataset& train,
                                         const Hyperparams& hyper) {
  if (pos_items.size() != neg_items.size()) {
    throw InputError("distance_report: positive and negative lists must pair up");
  }
  if (!train.attributes) throw InputError("distance_report: dataset has no attributes");
  const AttributeTable& attrs = *train.attributes;
  const Vector s = uce(params, train, user, hyper.collab_mean_pool);

  std::vector<DistanceRow> rows;
  rows.reserve(pos_items.size());
  for (std::size_t i = 0; i < pos_items.size(); ++i) {
    DistanceRow row;
    row.pos_item = pos_items[i];
    row.neg_item = neg_items[i];
    const Vector q_pos = cbce_of_item(row.pos_item, params, schema, attrs, hyper.leaky_slope);
    const Vector q_neg = cbce_of_item(row.neg_item, params, schema, attrs, hyper.leaky_slope);
    row.d_pos = (q_pos - s).norm();
    row.d_neg = (q_neg - s).norm();
    row.diff = row.d_neg - row.d_pos;
    rows.push_back(row);
  }
  return rows;
}

std::pair<std::vector<int>, std::vector<int>> sample_report_pairs(
    int user, const InteractionDataset& train, const AttributeSchema& schema, int n_pairs,
    int match_field, Rng& rng) {
  if (user < 0 || user >= train.n_users) throw InputError("report: user index out of range");
  const std::vector<int>& interacted = train.items_of_user[static_cast<std::size_t>(user)];
  if (interacted.empty()) {
    throw InputError("report: user " + std::to_string(user) + " has no training interactions");
  }
  if (!train.attributes) throw InputError("report: dataset has no attributes");
  const AttributeTable& attrs = *train.attributes;

  const int take = std::min<int>(n_pairs, static_cast<int>(interacted.size()));
  std::vector<int> pos_idx = rng.sample_distinct(static_cast<int>(interacted.size()), take);
  std::vector<int> pos;
  for (int i : pos_idx) pos.push_back(interacted[static_cast<std::size_t>(i)]);

  // candidate negatives: training items the user did not interact with
  std::vector<int> candidates;
  for (int v = 0; v < train.n_items; ++v) {
    if (!train.item_is_in_split(v)) continue;
    if (std::binary_search(interacted.begin(), interacted.end(), v)) continue;
    candidates.push_back(v);
  }
  if (candidates.empty()) throw InputError("report: no negative candidates for this user");

  auto field_value = [&](int item) -> int {
    const AttributeValues& values = attrs[static_cast<std::size_t>(item)];
    const FieldValue& fv = values[static_cast<std::size_t>(match_field)];
    return fv.hot.empty() ? -1 : fv.hot.front();
  };

  std::vector<int> neg;
  for (int p : pos) {
    int pick = -1;
    if (match_field >= 0 && match_field < schema.field_count()) {
      std::vector<int> matched;
      for (int c : candidates) {
        if (field_value(c) == field_value(p)) matched.push_back(c);
      }
      if (!matched.empty()) {
        pick = matched[static_cast<std::size_t>(rng.next_below(matched.size()))];
      }
    }
    if (pick < 0) {
      pick = candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))];
    }
    neg.push_back(pick);
  }
  return {std::move(pos), std::move(neg)};
}

std::string metrics_json_lines(const RankingMetrics& metrics) {
  std::ostringstream out;
  out.precision(10);
  for (std::size_t i = 0; i < metrics.ks.size(); ++i) {
    out << "{\"k\":" << metrics.ks[i] << ",\"hr\":" << metrics.hr[i]
        << ",\"ndcg\":" << metrics.ndcg[i] << "}\n";
  }
  return out.str();
}

std::string metrics_table(const RankingMetrics& metrics) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "   k        HR      NDCG   (over " << metrics.n_items << " items)\n";
  for (std::size_t i = 0; i < metrics.ks.size(); ++i) {
    out.width(4);
    out << metrics.ks[i];
    out << "  " << metrics.hr[i] << "  " << metrics.ndcg[i] << "\n";
  }
  return out.str();
}

std::string distance_csv(const std::vector<DistanceRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "pair,d_pos,d_neg,diff\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << "G" << (i + 1) << "," << rows[i].d_pos << "," << rows[i].d_neg << "," << rows[i].diff
        << "\n";
  }
  return out.str();
}

}  // namespace ccfc
