#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ccfc/dataset.hpp"
#include "ccfc/model.hpp"
#include "ccfc/schema.hpp"

namespace ccfc::testing {

// dataset over dense indices; ids are "u<i>" / "i<i>"
inline InteractionDataset make_dataset(int n_users, int n_items,
                                       std::vector<std::pair<int, int>> interactions) {
  InteractionDataset ds;
  ds.n_users = n_users;
  ds.n_items = n_items;
  for (int u = 0; u < n_users; ++u) ds.user_ids.push_back("u" + std::to_string(u));
  for (int v = 0; v < n_items; ++v) ds.item_ids.push_back("i" + std::to_string(v));
  ds.interactions = std::move(interactions);
  ds.timestamps.assign(ds.interactions.size(), 0);
  ds.rebuild_index();
  return ds;
}

// one-hot(3) "cat" + multi-hot(4) "tags"
inline AttributeSchema make_schema_cat_tags() {
  AttributeSchema schema;
  FieldSpec cat;
  cat.name = "cat";
  cat.kind = FieldKind::OneHot;
  cat.vocab = {"a", "b", "c"};
  cat.size = 3;
  FieldSpec tags;
  tags.name = "tags";
  tags.kind = FieldKind::MultiHot;
  tags.vocab = {"t0", "t1", "t2", "t3"};
  tags.size = 4;
  schema.fields = {cat, tags};
  return schema;
}

inline void attach_cat_tags_attrs(InteractionDataset& ds, const std::vector<int>& cats,
                                  const std::vector<std::vector<int>>& tag_sets) {
  AttributeTable table(static_cast<std::size_t>(ds.n_items));
  for (int v = 0; v < ds.n_items; ++v) {
    AttributeValues values(2);
    values[0].hot = {cats[static_cast<std::size_t>(v)]};
    values[1].hot = tag_sets[static_cast<std::size_t>(v)];
    table[static_cast<std::size_t>(v)] = std::move(values);
  }
  attach_attributes(ds, std::move(table));
}

// the shared gradient-check fixture: 3 users, 4 items, m=2 fields
struct GradFixture {
  InteractionDataset train;
  AttributeSchema schema;
  Hyperparams hyper;
};

inline GradFixture make_grad_fixture(std::uint64_t seed = 11, int d = 8, int h = 16,
                                     int n_pos = 2, int n_neg = 3) {
  GradFixture fx;
  fx.train = make_dataset(3, 4, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 3}});
  fx.schema = make_schema_cat_tags();
  attach_cat_tags_attrs(fx.train, {0, 1, 2, 1}, {{0, 2}, {1}, {}, {0, 1, 3}});
  fx.hyper.d = d;
  fx.hyper.h = h;
  fx.hyper.n_pos = n_pos;
  fx.hyper.n_neg = n_neg;
  fx.hyper.batch_size = 8;
  fx.hyper.tau = 0.5;
  fx.hyper.lambda = 0.7;
  fx.hyper.l2 = 1e-3;
  fx.hyper.seed = seed;
  return fx;
}

}  // namespace ccfc::testing
