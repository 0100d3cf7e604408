#include "ccfc/sampling.hpp"

#include <algorithm>

namespace ccfc {

namespace {

// rejection sampling with a deterministic enumeration fallback so degenerate
// shapes (tiny complements) cannot spin
int sample_outside(const std::vector<int>& universe, const std::vector<int>& excluded_sorted,
                   int extra_excluded, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int candidate =
        universe[static_cast<std::size_t>(rng.next_below(universe.size()))];
    if (candidate == extra_excluded) continue;
    if (std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), candidate)) continue;
    return candidate;
  }
  std::vector<int> complement;
  for (int candidate : universe) {
    if (candidate == extra_excluded) continue;
    if (std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), candidate)) continue;
    complement.push_back(candidate);
  }
  if (complement.empty()) return -1;
  return complement[static_cast<std::size_t>(rng.next_below(complement.size()))];
}

}  // namespace

int sample_negative_user(int item, const InteractionDataset& train, Rng& rng) {
  const std::vector<int>& users = train.users_of_item.at(static_cast<std::size_t>(item));
  if (static_cast<int>(users.size()) >= train.n_users) {
    throw InputError("sampling: item " + std::to_string(item) +
                     " was interacted with by every user; no negative user exists");
  }
  for (;;) {
    const int candidate = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(train.n_users)));
    if (!std::binary_search(users.begin(), users.end(), candidate)) return candidate;
  }
}

std::pair<int, int> sample_bpr_pair(int item, const InteractionDataset& train, Rng& rng) {
  const std::vector<int>& users = train.users_of_item.at(static_cast<std::size_t>(item));
  if (users.empty()) {
    throw InputError("sampling: item " + std::to_string(item) + " has no positive users");
  }
  const int u_pos = users[static_cast<std::size_t>(rng.next_below(users.size()))];
  const int u_neg = sample_negative_user(item, train, rng);
  return {u_pos, u_neg};
}

std::pair<std::vector<int>, std::vector<int>> sample_contrastive_sets(int item,
                                                                      const CoocIndex& cooc,
                                                                      int n_pos, int n_neg,
                                                                      Rng& rng) {
  if (n_pos < 0 || n_neg < 0) throw InputError("sampling: n_pos and n_neg must be >= 0");
  const std::vector<int>& positives = cooc.positives_of.at(static_cast<std::size_t>(item));

  std::vector<int> pos;
  pos.reserve(static_cast<std::size_t>(n_pos));
  if (n_pos > 0) {
    if (positives.empty()) {
      // self-view fallback: the item is its own positive
      pos.assign(static_cast<std::size_t>(n_pos), item);
    } else if (static_cast<int>(positives.size()) >= n_pos) {
      std::vector<int> distinct =
          rng.sample_distinct(static_cast<int>(positives.size()), n_pos);
      for (int idx : distinct) pos.push_back(positives[static_cast<std::size_t>(idx)]);
    } else {
      for (int i = 0; i < n_pos; ++i) {
        pos.push_back(positives[static_cast<std::size_t>(rng.next_below(positives.size()))]);
      }
    }
  }

  std::vector<int> neg;
  neg.reserve(static_cast<std::size_t>(n_neg));
  if (n_neg > 0) {
    const std::size_t excluded = positives.size() + 1;  // N+_v and v itself
    if (cooc.items.size() <= excluded) {
      throw InputError("sampling: item " + std::to_string(item) +
                       " has no valid contrastive negatives");
    }
    for (int i = 0; i < n_neg; ++i) {
      const int candidate = sample_outside(cooc.items, positives, item, rng);
      if (candidate < 0) {
        throw InputError("sampling: item " + std::to_string(item) +
                         " has no valid contrastive negatives");
      }
      neg.push_back(candidate);
    }
  }
  return {std::move(pos), std::move(neg)};
}

std::vector<ContrastiveBatch> assemble_epoch_batches(const InteractionDataset& train,
                                                     const CoocIndex& cooc,
                                                     const Hyperparams& hyper, int epoch) {
  if (train.interactions.empty()) throw InputError("sampling: empty training split");

  Rng rng = derive_rng(hyper.seed, {0xba7cu, static_cast<std::uint64_t>(epoch)});
  std::vector<std::size_t> order(train.interactions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<ContrastiveBatch> batches;
  const std::size_t batch_size = static_cast<std::size_t>(hyper.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    ContrastiveBatch batch;
    const std::size_t end = std::min(order.size(), start + batch_size);
    batch.entries.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& [u, v] = train.interactions[order[i]];
      BatchEntry entry;
      entry.item = v;
      entry.user_pos = u;
      entry.user_neg = sample_negative_user(v, train, rng);
      auto [pos, neg] = sample_contrastive_sets(v, cooc, hyper.n_pos, hyper.n_neg, rng);
      entry.pos_items = std::move(pos);
      entry.neg_items = std::move(neg);
      batch.entries.push_back(std::move(entry));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<std::array<int, 3>> assemble_mf_triples(const InteractionDataset& train,
                                                    const Hyperparams& hyper, int epoch) {
  if (train.interactions.empty()) throw InputError("sampling: empty training split");
  Rng rng = derive_rng(hyper.seed, {0x3f7au, static_cast<std::uint64_t>(epoch)});
  std::vector<std::size_t> order(train.interactions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  // training items only; a user who interacted with every training item has
  // no negative and is skipped
  std::vector<int> train_items;
  for (int v = 0; v < train.n_items; ++v) {
    if (train.item_is_in_split(v)) train_items.push_back(v);
  }

  std::vector<std::array<int, 3>> triples;
  triples.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& [u, v_pos] = train.interactions[idx];
    const std::vector<int>& items = train.items_of_user[static_cast<std::size_t>(u)];
    if (items.size() >= train_items.size()) continue;
    const int v_neg = sample_outside(train_items, items, -1, rng);
    if (v_neg < 0) continue;
    triples.push_back({u, v_pos, v_neg});
  }
  return triples;
}

}  // namespace ccfc
