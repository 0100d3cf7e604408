#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "ccfc/dataset.hpp"
#include "ccfc/rng.hpp"
#include "helpers.hpp"

using namespace ccfc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ccfc_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// O(|V|^2) pairwise-intersection oracle for the co-occurrence index
std::vector<std::set<int>> brute_force_cooc(const InteractionDataset& ds) {
  std::vector<std::set<int>> out(static_cast<std::size_t>(ds.n_items));
  for (int a = 0; a < ds.n_items; ++a) {
    for (int b = 0; b < ds.n_items; ++b) {
      if (a == b) continue;
      for (int u : ds.users_of_item[static_cast<std::size_t>(a)]) {
        if (ds.has_interaction(u, b)) {
          out[static_cast<std::size_t>(a)].insert(b);
          break;
        }
      }
    }
  }
  return out;
}

InteractionDataset random_dataset(int n_users, int n_items, double density, Rng& rng) {
  std::vector<std::pair<int, int>> inter;
  for (int u = 0; u < n_users; ++u) {
    for (int v = 0; v < n_items; ++v) {
      if (rng.next_double() < density) inter.emplace_back(u, v);
    }
  }
  if (inter.empty()) inter.emplace_back(0, 0);
  return ccfc::testing::make_dataset(n_users, n_items, std::move(inter));
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_interactions maps ids in first-appearance order") {
  const fs::path path = temp_file("basic.tsv");
  write_file(path, "a\tx\t100\nb\ty\t200\na\ty\t300\n");
  const InteractionDataset ds = load_interactions(path.string());
  CHECK(ds.n_users == 2);
  CHECK(ds.n_items == 2);
  CHECK(ds.interactions.size() == 3);
  CHECK(ds.user_ids[0] == "a");
  CHECK(ds.user_ids[1] == "b");
  CHECK(ds.item_ids[0] == "x");
  CHECK(ds.item_ids[1] == "y");
  CHECK(ds.has_interaction(0, 0));
  CHECK(ds.has_interaction(1, 1));
  CHECK(ds.has_interaction(0, 1));
  CHECK_FALSE(ds.has_interaction(1, 0));
}

TEST_CASE("load_interactions dedups repeated pairs") {
  const fs::path path = temp_file("dup.tsv");
  write_file(path, "a\tx\t1\na\tx\t2\nb\tx\t3\n");
  const InteractionDataset ds = load_interactions(path.string());
  CHECK(ds.interactions.size() == 2);
}

TEST_CASE("load_interactions rejects malformed lines with a line number") {
  const fs::path path = temp_file("bad.tsv");
  write_file(path, "a\tx\t1\nnot-a-line\n");
  CHECK_THROWS_WITH_AS(load_interactions(path.string()),
                       doctest::Contains("line 2"), InputError);
}

TEST_CASE("load_interactions rejects an empty file") {
  const fs::path path = temp_file("empty.tsv");
  write_file(path, "");
  CHECK_THROWS_AS(load_interactions(path.string()), InputError);
}

TEST_CASE("save/load round trip preserves the index sets") {
  const fs::path path = temp_file("roundtrip_src.tsv");
  write_file(path, "bob\tzed\t5\nann\tzed\t6\nbob\tyak\t7\ncid\txi\t8\n");
  const InteractionDataset ds = load_interactions(path.string());
  const fs::path out = temp_file("roundtrip_out.tsv");
  save_interactions(ds, out.string());
  const InteractionDataset ds2 = load_interactions(out.string());
  CHECK(ds2.n_users == ds.n_users);
  CHECK(ds2.n_items == ds.n_items);
  CHECK(ds2.user_ids == ds.user_ids);
  CHECK(ds2.item_ids == ds.item_ids);
  CHECK(ds2.interactions == ds.interactions);
  CHECK(ds2.items_of_user == ds.items_of_user);
  CHECK(ds2.users_of_item == ds.users_of_item);
}

TEST_CASE("load_attributes encodes one-hot and multi-hot per schema") {
  const fs::path inter = temp_file("attr_inter.tsv");
  write_file(inter, "u0\tm1\t1\nu0\tm2\t2\n");
  InteractionDataset ds = load_interactions(inter.string());

  AttributeSchema schema;
  FieldSpec genre;
  genre.name = "genre";
  genre.kind = FieldKind::MultiHot;
  genre.vocab = {"Action", "Comedy", "Drama"};
  genre.size = 3;
  FieldSpec image;
  image.name = "image";
  image.kind = FieldKind::Dense;
  image.size = 4;
  schema.fields = {genre, image};

  const fs::path attrs = temp_file("attrs.jsonl");
  write_file(attrs,
             "{\"item_id\": \"m1\", \"attrs\": {\"genre\": [\"Action\", \"Comedy\"]}}\n"
             "{\"item_id\": \"m2\", \"attrs\": {\"genre\": []}}\n");
  const fs::path dense = temp_file("image.tsv");
  write_file(dense, "m1\t0,0,0,0\nm2\t1.5,-2,0.25,4\n");

  const AttributeTable table =
      load_attributes(attrs.string(), schema, {{"image", dense.string()}}, ds);
  CHECK(table[0][0].hot == std::vector<int>{0, 1});  // exactly two ones
  CHECK(table[0][1].dense.isZero());                 // stored verbatim
  CHECK(table[1][0].hot.empty());
  CHECK(table[1][1].dense(3) == doctest::Approx(4.0));
}

TEST_CASE("load_attributes names item and field on a vocabulary error") {
  const fs::path inter = temp_file("attr_inter2.tsv");
  write_file(inter, "u0\tm1\t1\n");
  InteractionDataset ds = load_interactions(inter.string());
  AttributeSchema schema;
  FieldSpec genre;
  genre.name = "genre";
  genre.kind = FieldKind::OneHot;
  genre.vocab = {"Action"};
  genre.size = 1;
  schema.fields = {genre};
  const fs::path attrs = temp_file("attrs_bad.jsonl");
  write_file(attrs, "{\"item_id\": \"m1\", \"attrs\": {\"genre\": \"Actoin\"}}\n");
  CHECK_THROWS_WITH_AS(load_attributes(attrs.string(), schema, {}, ds),
                       doctest::Contains("genre"), InputError);
}

TEST_CASE("load_attributes rejects a missing item record") {
  const fs::path inter = temp_file("attr_inter3.tsv");
  write_file(inter, "u0\tm1\t1\nu0\tm2\t1\n");
  InteractionDataset ds = load_interactions(inter.string());
  AttributeSchema schema;
  FieldSpec genre;
  genre.name = "genre";
  genre.kind = FieldKind::OneHot;
  genre.vocab = {"Action"};
  genre.size = 1;
  schema.fields = {genre};
  const fs::path attrs = temp_file("attrs_missing.jsonl");
  write_file(attrs, "{\"item_id\": \"m1\", \"attrs\": {\"genre\": \"Action\"}}\n");
  CHECK_THROWS_WITH_AS(load_attributes(attrs.string(), schema, {}, ds),
                       doctest::Contains("m2"), InputError);
}

TEST_CASE("load_attributes rejects a dense dimension mismatch") {
  const fs::path inter = temp_file("attr_inter4.tsv");
  write_file(inter, "u0\tm1\t1\n");
  InteractionDataset ds = load_interactions(inter.string());
  AttributeSchema schema;
  FieldSpec image;
  image.name = "image";
  image.kind = FieldKind::Dense;
  image.size = 3;
  schema.fields = {image};
  const fs::path attrs = temp_file("attrs_d.jsonl");
  write_file(attrs, "{\"item_id\": \"m1\", \"attrs\": {}}\n");
  const fs::path dense = temp_file("image_bad.tsv");
  write_file(dense, "m1\t1,2\n");
  CHECK_THROWS_AS(load_attributes(attrs.string(), schema, {{"image", dense.string()}}, ds),
                  InputError);
}

TEST_CASE("split_by_item produces 70/15/15 item partitions") {
  std::vector<std::pair<int, int>> inter;
  for (int v = 0; v < 100; ++v) inter.emplace_back(v % 10, v);
  const InteractionDataset ds = ccfc::testing::make_dataset(10, 100, std::move(inter));
  const SplitBundle bundle = split_by_item(ds, {0.70, 0.15, 0.15}, 7);
  CHECK(bundle.train_items.size() == 70);
  CHECK(bundle.valid_items.size() == 15);
  CHECK(bundle.test_items.size() == 15);
}

TEST_CASE("split_by_item floors valid/test and gives the remainder to train") {
  std::vector<std::pair<int, int>> inter;
  for (int v = 0; v < 10; ++v) inter.emplace_back(0, v);
  const InteractionDataset ds = ccfc::testing::make_dataset(1, 10, std::move(inter));
  const SplitBundle bundle = split_by_item(ds, {0.8, 0.1, 0.1}, 3);
  CHECK(bundle.train_items.size() == 8);
  CHECK(bundle.valid_items.size() == 1);
  CHECK(bundle.test_items.size() == 1);
}

TEST_CASE("split_by_item is deterministic for a fixed seed") {
  Rng rng(99);
  const InteractionDataset ds = random_dataset(12, 40, 0.2, rng);
  const SplitBundle a = split_by_item(ds, {0.70, 0.15, 0.15}, 42);
  const SplitBundle b = split_by_item(ds, {0.70, 0.15, 0.15}, 42);
  CHECK(a.train_items == b.train_items);
  CHECK(a.valid_items == b.valid_items);
  CHECK(a.test_items == b.test_items);
  CHECK(a.train.interactions == b.train.interactions);
}

TEST_CASE("split_by_item never leaks a test item's interactions into train") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const InteractionDataset ds = random_dataset(15, 30, 0.25, rng);
    const SplitBundle bundle = split_by_item(ds, {0.70, 0.15, 0.15}, 1000 + trial);
    std::set<int> test_items(bundle.test_items.begin(), bundle.test_items.end());
    std::set<int> valid_items(bundle.valid_items.begin(), bundle.valid_items.end());
    for (const auto& [u, v] : bundle.train.interactions) {
      CHECK(test_items.count(v) == 0);
      CHECK(valid_items.count(v) == 0);
    }
    // union of split interactions equals the source's
    std::set<std::pair<int, int>> all;
    for (const auto& p : bundle.train.interactions) all.insert(p);
    for (const auto& p : bundle.valid.interactions) all.insert(p);
    for (const auto& p : bundle.test.interactions) all.insert(p);
    std::set<std::pair<int, int>> src(ds.interactions.begin(), ds.interactions.end());
    CHECK(all == src);
  }
}

TEST_CASE("split_by_item rejects a zero-item split") {
  const InteractionDataset ds = ccfc::testing::make_dataset(2, 3, {{0, 0}, {0, 1}, {1, 2}});
  CHECK_THROWS_AS(split_by_item(ds, {0.9, 0.05, 0.05}, 1), InputError);
}

TEST_CASE("cooc matches the definition on a hand fixture") {
  const InteractionDataset ds = ccfc::testing::make_dataset(2, 3, {{0, 0}, {0, 1}, {1, 2}});
  const CoocIndex cooc = build_cooccurrence_index(ds);
  CHECK(cooc.positives_of[0] == std::vector<int>{1});
  CHECK(cooc.positives_of[1] == std::vector<int>{0});
  CHECK(cooc.positives_of[2].empty());  // u1 interacted with nothing else
}

TEST_CASE("cooc inverted index equals the brute-force pairwise oracle") {
  Rng rng(7);
  const InteractionDataset ds = random_dataset(20, 30, 0.12, rng);
  const CoocIndex cooc = build_cooccurrence_index(ds);
  const auto oracle = brute_force_cooc(ds);
  for (int v = 0; v < ds.n_items; ++v) {
    const std::set<int> ours(cooc.positives_of[static_cast<std::size_t>(v)].begin(),
                             cooc.positives_of[static_cast<std::size_t>(v)].end());
    CHECK(ours == oracle[static_cast<std::size_t>(v)]);
  }
}

TEST_CASE("cooc symmetry and self-exclusion hold on random datasets") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const InteractionDataset ds = random_dataset(8 + trial, 25, 0.15, rng);
    const CoocIndex cooc = build_cooccurrence_index(ds);
    for (int v = 0; v < ds.n_items; ++v) {
      CHECK_FALSE(cooc.contains(v, v));
      for (int other : cooc.positives_of[static_cast<std::size_t>(v)]) {
        CHECK(cooc.contains(other, v));
      }
    }
  }
}

}  // TEST_SUITE
