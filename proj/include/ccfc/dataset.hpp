#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ccfc/common.hpp"
#include "ccfc/schema.hpp"

namespace ccfc {

// Implicit-feedback dataset over dense user/item indices. Interactions are
// deduplicated and kept in first-appearance order, which is also the order
// that defines the external-id -> dense-index mapping. Immutable once built.
struct InteractionDataset {
  int n_users = 0;
  int n_items = 0;
  std::vector<std::pair<int, int>> interactions;  // (user, item), dedup
  std::vector<std::int64_t> timestamps;           // parallel to interactions
  std::vector<std::vector<int>> items_of_user;    // sorted ascending
  std::vector<std::vector<int>> users_of_item;    // sorted ascending
  std::vector<std::string> user_ids;              // dense index -> external id
  std::vector<std::string> item_ids;
  // 1 if the item belongs to this dataset view (split partition); all 1 for
  // unsplit datasets. Cold-start protocol checks key off this.
  std::vector<char> item_in_split;
  std::shared_ptr<const AttributeTable> attributes;

  bool has_interaction(int user, int item) const;
  bool item_is_in_split(int item) const {
    return item >= 0 && item < n_items && item_in_split[static_cast<std::size_t>(item)] != 0;
  }
  const AttributeValues& attrs_of(int item) const;
  std::string ids_hash() const;  // over user_ids + item_ids, compat guard
  void rebuild_index();          // items_of_user / users_of_item from interactions
  void validate() const;
};

InteractionDataset load_interactions(const std::string& path);
void save_interactions(const InteractionDataset& ds, const std::string& path);

// Attribute ingestion: one JSON object per line, dense fields from sidecar
// files `item_id \t f1,f2,...,fD`.
AttributeTable load_attributes(const std::string& path, const AttributeSchema& schema,
                               const std::map<std::string, std::string>& dense_paths,
                               const InteractionDataset& ds);
void attach_attributes(InteractionDataset& ds, AttributeTable table);

struct SplitBundle {
  InteractionDataset train;
  InteractionDataset valid;
  InteractionDataset test;
  std::vector<int> train_items;  // sorted partitions of the item set
  std::vector<int> valid_items;
  std::vector<int> test_items;
  std::uint64_t seed = 0;
};

// Cold-item protocol: partitions the item set with a seeded shuffle, each
// split owning exactly the interactions of its items. Ratios are
// (train, valid, test); valid/test sizes are floored, the remainder goes
// to train.
SplitBundle split_by_item(const InteractionDataset& ds, std::array<double, 3> ratios,
                          std::uint64_t seed);

// Contrastive positive sets: positives_of[v] = items sharing at least one
// user with v in the training interactions. Symmetric, self-free.
struct CoocIndex {
  std::vector<std::vector<int>> positives_of;  // sorted ascending
  std::vector<int> items;                      // training items, sorted

  bool contains(int item, int other) const;
};

CoocIndex build_cooccurrence_index(const InteractionDataset& train);

}  // namespace ccfc
