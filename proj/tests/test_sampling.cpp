#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ccfc/sampling.hpp"
#include "helpers.hpp"

using namespace ccfc;
using ccfc::testing::make_dataset;

namespace {

// independent checker against the raw interaction sets
void check_batch_invariants(const ContrastiveBatch& batch, const InteractionDataset& train,
                            const CoocIndex& cooc) {
  const std::set<int> train_items(cooc.items.begin(), cooc.items.end());
  for (const BatchEntry& e : batch.entries) {
    CHECK(train.has_interaction(e.user_pos, e.item));
    CHECK_FALSE(train.has_interaction(e.user_neg, e.item));
    for (int p : e.pos_items) {
      CHECK(train_items.count(p) == 1);
      if (p == e.item) {
        // self-view fallback only fires for isolated items
        CHECK(cooc.positives_of[static_cast<std::size_t>(e.item)].empty());
        continue;
      }
      // shares at least one user with the anchor
      bool shares = false;
      for (int u : train.users_of_item[static_cast<std::size_t>(p)]) {
        if (train.has_interaction(u, e.item)) {
          shares = true;
          break;
        }
      }
      CHECK(shares);
    }
    for (int n : e.neg_items) {
      CHECK(train_items.count(n) == 1);
      CHECK(n != e.item);
      for (int u : train.users_of_item[static_cast<std::size_t>(n)]) {
        CHECK_FALSE(train.has_interaction(u, e.item));
      }
    }
  }
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("bpr pair is forced when only one choice exists") {
  const InteractionDataset train = make_dataset(2, 1, {{0, 0}});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto [u_pos, u_neg] = sample_bpr_pair(0, train, rng);
    CHECK(u_pos == 0);
    CHECK(u_neg == 1);
  }
}

TEST_CASE("bpr pair errors when every user interacted with the item") {
  const InteractionDataset train = make_dataset(2, 1, {{0, 0}, {1, 0}});
  Rng rng(1);
  CHECK_THROWS_AS(sample_bpr_pair(0, train, rng), InputError);
}

TEST_CASE("bpr sampling is deterministic under a fixed seed") {
  std::vector<std::pair<int, int>> inter;
  for (int u = 0; u < 8; ++u) inter.emplace_back(u, u % 3);
  const InteractionDataset train = make_dataset(10, 3, std::move(inter));
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_bpr_pair(i % 3, train, a) == sample_bpr_pair(i % 3, train, b));
  }
}

TEST_CASE("negative users are uniform over the complement (chi-squared)") {
  // |U_v| = 3 of 10 users; 7 negatives, df = 6, chi2_{0.99,6} = 16.812
  std::vector<std::pair<int, int>> inter = {{0, 0}, {1, 0}, {2, 0}};
  for (int u = 0; u < 10; ++u) inter.emplace_back(u, 1);  // make all 10 users exist
  const InteractionDataset train = make_dataset(10, 2, std::move(inter));
  Rng rng(2718);
  std::map<int, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_negative_user(0, train, rng)];
  CHECK(counts.size() == 7);
  for (const auto& [user, count] : counts) CHECK(user >= 3);
  const double expected = draws / 7.0;
  double chi2 = 0.0;
  for (const auto& [user, count] : counts) {
    chi2 += (count - expected) * (count - expected) / expected;
  }
  CHECK(chi2 < 16.812);
}

TEST_CASE("a single co-occurrence positive repeats to fill n_pos") {
  const InteractionDataset train = make_dataset(2, 3, {{0, 0}, {0, 1}, {1, 2}});
  const CoocIndex cooc = build_cooccurrence_index(train);
  REQUIRE(cooc.positives_of[0] == std::vector<int>{1});
  Rng rng(5);
  const auto [pos, neg] = sample_contrastive_sets(0, cooc, 3, 1, rng);
  CHECK(pos == std::vector<int>{1, 1, 1});
  CHECK(neg == std::vector<int>{2});
}

TEST_CASE("an isolated item uses itself as the sole positive") {
  const InteractionDataset train = make_dataset(2, 3, {{0, 0}, {0, 1}, {1, 2}});
  const CoocIndex cooc = build_cooccurrence_index(train);
  Rng rng(5);
  const auto [pos, neg] = sample_contrastive_sets(2, cooc, 2, 1, rng);
  CHECK(pos == std::vector<int>{2, 2});
  for (int n : neg) CHECK((n == 0 || n == 1));
}

TEST_CASE("errors when no contrastive negative exists") {
  const InteractionDataset train = make_dataset(1, 2, {{0, 0}, {0, 1}});
  const CoocIndex cooc = build_cooccurrence_index(train);
  Rng rng(5);
  CHECK_THROWS_AS(sample_contrastive_sets(0, cooc, 1, 1, rng), InputError);
}

TEST_CASE("sampled negatives share no user with the anchor (brute force)") {
  // 30-item random dataset
  Rng gen(9);
  std::vector<std::pair<int, int>> inter;
  for (int u = 0; u < 12; ++u) {
    for (int v = 0; v < 30; ++v) {
      if (gen.next_double() < 0.12) inter.emplace_back(u, v);
    }
  }
  inter.emplace_back(0, 0);
  const InteractionDataset train = make_dataset(12, 30, std::move(inter));
  const CoocIndex cooc = build_cooccurrence_index(train);
  Rng rng(11);
  for (int v = 0; v < 30; ++v) {
    if (train.users_of_item[static_cast<std::size_t>(v)].empty()) continue;
    if (cooc.items.size() <= cooc.positives_of[static_cast<std::size_t>(v)].size() + 1) continue;
    const auto [pos, neg] = sample_contrastive_sets(v, cooc, 4, 10, rng);
    for (int n : neg) {
      for (int u : train.users_of_item[static_cast<std::size_t>(n)]) {
        CHECK_FALSE(train.has_interaction(u, v));
      }
    }
    (void)pos;
  }
}

TEST_CASE("batch assembly is a pure function of (dataset, hyper, seed, epoch)") {
  const InteractionDataset train =
      make_dataset(4, 5, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 3}, {3, 4}, {2, 0}});
  const CoocIndex cooc = build_cooccurrence_index(train);
  Hyperparams hyper;
  hyper.batch_size = 3;
  hyper.n_pos = 2;
  hyper.n_neg = 2;
  hyper.seed = 123;
  const auto a = assemble_epoch_batches(train, cooc, hyper, 4);
  const auto b = assemble_epoch_batches(train, cooc, hyper, 4);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 3);  // 7 interactions in batches of 3
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].entries.size() == b[i].entries.size());
    for (std::size_t j = 0; j < a[i].entries.size(); ++j) {
      CHECK(a[i].entries[j].item == b[i].entries[j].item);
      CHECK(a[i].entries[j].user_pos == b[i].entries[j].user_pos);
      CHECK(a[i].entries[j].user_neg == b[i].entries[j].user_neg);
      CHECK(a[i].entries[j].pos_items == b[i].entries[j].pos_items);
      CHECK(a[i].entries[j].neg_items == b[i].entries[j].neg_items);
    }
  }
  // different epochs reshuffle
  const auto c = assemble_epoch_batches(train, cooc, hyper, 5);
  bool any_diff = false;
  for (std::size_t i = 0; i < std::min(a.size(), c.size()) && !any_diff; ++i) {
    for (std::size_t j = 0; j < std::min(a[i].entries.size(), c[i].entries.size()); ++j) {
      if (a[i].entries[j].item != c[i].entries[j].item ||
          a[i].entries[j].user_neg != c[i].entries[j].user_neg) {
        any_diff = true;
        break;
      }
    }
  }
  CHECK(any_diff);
}

TEST_CASE("assembled batches satisfy the contrastive invariants") {
  Rng gen(77);
  std::vector<std::pair<int, int>> inter;
  for (int u = 0; u < 15; ++u) {
    for (int v = 0; v < 20; ++v) {
      if (gen.next_double() < 0.15) inter.emplace_back(u, v);
    }
  }
  inter.emplace_back(0, 0);
  const InteractionDataset train = make_dataset(15, 20, std::move(inter));
  const CoocIndex cooc = build_cooccurrence_index(train);
  Hyperparams hyper;
  hyper.batch_size = 16;
  hyper.n_pos = 3;
  hyper.n_neg = 5;
  hyper.seed = 9;
  for (int epoch = 1; epoch <= 3; ++epoch) {
    for (const ContrastiveBatch& batch : assemble_epoch_batches(train, cooc, hyper, epoch)) {
      check_batch_invariants(batch, train, cooc);
    }
  }
}

TEST_CASE("mf triples pair each interaction with a non-interacted item") {
  const InteractionDataset train =
      make_dataset(4, 5, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 3}, {3, 4}});
  Hyperparams hyper;
  hyper.seed = 21;
  const auto triples = assemble_mf_triples(train, hyper, 1);
  CHECK(triples.size() == train.interactions.size());
  for (const auto& [u, v_pos, v_neg] : triples) {
    CHECK(train.has_interaction(u, v_pos));
    CHECK_FALSE(train.has_interaction(u, v_neg));
  }
}

}  // TEST_SUITE
