#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccfc/dataset.hpp"
#include "ccfc/schema.hpp"

namespace ccfc {

// Desk-scale benchmark with a genre/star confound: every user has a latent
// liked-genre set and a disliked-star set; an item has one genre and one
// star; the user interacts iff the genre is liked and the star is not
// disliked, then interactions are subsampled at keep_rate. confound_rate is
// the target fraction of non-interactions caused solely by a disliked star
// on a liked genre.
struct SyntheticConfig {
  int n_users = 200;
  int n_items = 300;
  int n_genres = 6;
  int n_stars = 8;
  double confound_rate = 0.4;
  double keep_rate = 0.5;
  std::uint64_t seed = 1;
};

struct SyntheticTruth {
  std::vector<std::vector<int>> liked_genres;    // per user, sorted
  std::vector<std::vector<int>> disliked_stars;  // per user, sorted
  std::vector<int> item_genre;
  std::vector<int> item_star;

  bool qualifies(int user, int item) const;  // the pre-subsample rule
};

struct SyntheticData {
  InteractionDataset dataset;  // attributes attached
  AttributeSchema schema;
  SyntheticTruth truth;
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

// interactions.tsv, attributes.jsonl, schema.json, truth.json
void save_synthetic(const SyntheticData& data, const std::string& out_dir);

}  // namespace ccfc
