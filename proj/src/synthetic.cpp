#include "ccfc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ccfc/rng.hpp"

namespace ccfc {

using nlohmann::json;

bool SyntheticTruth::qualifies(int user, int item) const {
  const std::vector<int>& liked = liked_genres[static_cast<std::size_t>(user)];
  const std::vector<int>& disliked = disliked_stars[static_cast<std::size_t>(user)];
  if (!std::binary_search(liked.begin(), liked.end(), item_genre[static_cast<std::size_t>(item)])) {
    return false;
  }
  return !std::binary_search(disliked.begin(), disliked.end(),
                             item_star[static_cast<std::size_t>(item)]);
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  if (config.n_users < 2 || config.n_items < 2 || config.n_genres < 2 || config.n_stars < 2) {
    throw InputError("synth: all counts must be >= 2");
  }
  if (config.confound_rate < 0.0 || config.confound_rate > 1.0) {
    throw InputError("synth: confound_rate must be in [0,1]");
  }
  if (config.keep_rate <= 0.0 || config.keep_rate > 1.0) {
    throw InputError("synth: keep_rate must be in (0,1]");
  }

  Rng rng = derive_rng(config.seed, {0x517eu});
  SyntheticData out;
  SyntheticTruth& truth = out.truth;

  truth.item_genre.resize(static_cast<std::size_t>(config.n_items));
  truth.item_star.resize(static_cast<std::size_t>(config.n_items));
  for (int v = 0; v < config.n_items; ++v) {
    truth.item_genre[static_cast<std::size_t>(v)] =
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.n_genres)));
    truth.item_star[static_cast<std::size_t>(v)] =
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.n_stars)));
  }

  // Each user likes about a third of the genres. The disliked-star count is
  // solved from the confound target: with liked fraction g and disliked
  // fraction s, the star-caused share of non-interactions is
  // g*s / (1 - g + g*s).
  const int liked_count = std::max(1, static_cast<int>(std::lround(config.n_genres / 3.0)));
  const double g = static_cast<double>(liked_count) / config.n_genres;
  double star_frac;
  if (config.confound_rate >= 1.0) {
    star_frac = 1.0;
  } else {
    star_frac = config.confound_rate * (1.0 - g) / (g * (1.0 - config.confound_rate));
  }
  int disliked_count = static_cast<int>(std::lround(star_frac * config.n_stars));
  disliked_count = std::max(0, std::min(disliked_count, config.n_stars - 1));

  truth.liked_genres.resize(static_cast<std::size_t>(config.n_users));
  truth.disliked_stars.resize(static_cast<std::size_t>(config.n_users));
  for (int u = 0; u < config.n_users; ++u) {
    std::vector<int> liked = rng.sample_distinct(config.n_genres, liked_count);
    std::sort(liked.begin(), liked.end());
    truth.liked_genres[static_cast<std::size_t>(u)] = std::move(liked);
    std::vector<int> disliked = rng.sample_distinct(config.n_stars, disliked_count);
    std::sort(disliked.begin(), disliked.end());
    truth.disliked_stars[static_cast<std::size_t>(u)] = std::move(disliked);
  }

  InteractionDataset& ds = out.dataset;
  ds.n_users = config.n_users;
  ds.n_items = config.n_items;
  for (int u = 0; u < config.n_users; ++u) ds.user_ids.push_back("u" + std::to_string(u));
  for (int v = 0; v < config.n_items; ++v) ds.item_ids.push_back("i" + std::to_string(v));

  std::vector<int> item_qualify(static_cast<std::size_t>(config.n_items), 0);
  for (int u = 0; u < config.n_users; ++u) {
    int user_qualify = 0;
    for (int v = 0; v < config.n_items; ++v) {
      if (!truth.qualifies(u, v)) continue;
      ++user_qualify;
      ++item_qualify[static_cast<std::size_t>(v)];
      if (rng.next_double() < config.keep_rate) {
        ds.interactions.emplace_back(u, v);
        ds.timestamps.push_back(0);
      }
    }
    if (user_qualify == 0) {
      throw InputError("synth: user u" + std::to_string(u) + " has zero possible interactions");
    }
  }
  for (int v = 0; v < config.n_items; ++v) {
    if (item_qualify[static_cast<std::size_t>(v)] == 0) {
      throw InputError("synth: item i" + std::to_string(v) + " has zero possible interactions");
    }
  }
  ds.rebuild_index();

  AttributeSchema& schema = out.schema;
  FieldSpec genre_field;
  genre_field.name = "genre";
  genre_field.kind = FieldKind::OneHot;
  for (int i = 0; i < config.n_genres; ++i) genre_field.vocab.push_back("g" + std::to_string(i));
  genre_field.size = config.n_genres;
  FieldSpec star_field;
  star_field.name = "star";
  star_field.kind = FieldKind::OneHot;
  for (int i = 0; i < config.n_stars; ++i) star_field.vocab.push_back("s" + std::to_string(i));
  star_field.size = config.n_stars;
  schema.fields = {genre_field, star_field};

  AttributeTable table(static_cast<std::size_t>(config.n_items));
  for (int v = 0; v < config.n_items; ++v) {
    AttributeValues values(2);
    values[0].hot = {truth.item_genre[static_cast<std::size_t>(v)]};
    values[1].hot = {truth.item_star[static_cast<std::size_t>(v)]};
    table[static_cast<std::size_t>(v)] = std::move(values);
  }
  attach_attributes(ds, std::move(table));
  return out;
}

void save_synthetic(const SyntheticData& data, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  save_interactions(data.dataset, (dir / "interactions.tsv").string());
  data.schema.save((dir / "schema.json").string());

  std::ofstream attrs(dir / "attributes.jsonl");
  if (!attrs) throw InputError("synth: cannot write attributes.jsonl");
  for (int v = 0; v < data.dataset.n_items; ++v) {
    json rec;
    rec["item_id"] = data.dataset.item_ids[static_cast<std::size_t>(v)];
    rec["attrs"]["genre"] = "g" + std::to_string(data.truth.item_genre[static_cast<std::size_t>(v)]);
    rec["attrs"]["star"] = "s" + std::to_string(data.truth.item_star[static_cast<std::size_t>(v)]);
    attrs << rec.dump() << "\n";
  }

  json truth;
  truth["liked_genres"] = data.truth.liked_genres;
  truth["disliked_stars"] = data.truth.disliked_stars;
  truth["item_genre"] = data.truth.item_genre;
  truth["item_star"] = data.truth.item_star;
  std::ofstream tf(dir / "truth.json");
  if (!tf) throw InputError("synth: cannot write truth.json");
  tf << truth.dump(2) << "\n";
}

}  // namespace ccfc
