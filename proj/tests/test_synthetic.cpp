#include <doctest.h>

#include <cmath>

#include "ccfc/synthetic.hpp"

using namespace ccfc;

TEST_SUITE("synthetic") {

TEST_CASE("confound_rate 0 with keep_rate 1 is fully genre-determined") {
  SyntheticConfig config;
  config.n_users = 40;
  config.n_items = 60;
  config.confound_rate = 0.0;
  config.keep_rate = 1.0;
  config.seed = 5;
  const SyntheticData data = generate_synthetic(config);
  for (int u = 0; u < config.n_users; ++u) {
    CHECK(data.truth.disliked_stars[static_cast<std::size_t>(u)].empty());
    for (int v = 0; v < config.n_items; ++v) {
      const bool liked = std::binary_search(
          data.truth.liked_genres[static_cast<std::size_t>(u)].begin(),
          data.truth.liked_genres[static_cast<std::size_t>(u)].end(),
          data.truth.item_genre[static_cast<std::size_t>(v)]);
      CHECK(data.dataset.has_interaction(u, v) == liked);
    }
  }
}

TEST_CASE("fixed seed reproduces the dataset exactly") {
  SyntheticConfig config;
  config.seed = 77;
  const SyntheticData a = generate_synthetic(config);
  const SyntheticData b = generate_synthetic(config);
  CHECK(a.dataset.interactions == b.dataset.interactions);
  CHECK(a.truth.liked_genres == b.truth.liked_genres);
  CHECK(a.truth.disliked_stars == b.truth.disliked_stars);
  CHECK(a.truth.item_genre == b.truth.item_genre);
  CHECK(a.truth.item_star == b.truth.item_star);
}

TEST_CASE("interaction count sits in the analytic range of the generative rule") {
  SyntheticConfig config;
  config.n_users = 200;
  config.n_items = 300;
  config.seed = 2024;
  const SyntheticData data = generate_synthetic(config);

  // oracle: enumerate the rule over every (user, item) pair
  std::size_t qualifying = 0;
  for (int u = 0; u < config.n_users; ++u) {
    for (int v = 0; v < config.n_items; ++v) {
      if (data.truth.qualifies(u, v)) ++qualifying;
    }
  }
  const double mean = static_cast<double>(qualifying) * config.keep_rate;
  const double sigma = std::sqrt(static_cast<double>(qualifying) * config.keep_rate *
                                 (1.0 - config.keep_rate));
  const double count = static_cast<double>(data.dataset.interactions.size());
  CHECK(count > mean - 5.0 * sigma);
  CHECK(count < mean + 5.0 * sigma);

  // every kept interaction satisfies the rule
  for (const auto& [u, v] : data.dataset.interactions) {
    CHECK(data.truth.qualifies(u, v));
  }
}

TEST_CASE("invalid configs are rejected") {
  SyntheticConfig config;
  config.n_genres = 1;
  CHECK_THROWS_AS(generate_synthetic(config), InputError);
  config = SyntheticConfig{};
  config.confound_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(config), InputError);
}

TEST_CASE("attributes carry the genre/star assignment") {
  SyntheticConfig config;
  config.seed = 3;
  const SyntheticData data = generate_synthetic(config);
  REQUIRE(data.dataset.attributes);
  for (int v = 0; v < config.n_items; ++v) {
    const AttributeValues& values = data.dataset.attrs_of(v);
    CHECK(values[0].hot == std::vector<int>{data.truth.item_genre[static_cast<std::size_t>(v)]});
    CHECK(values[1].hot == std::vector<int>{data.truth.item_star[static_cast<std::size_t>(v)]});
  }
}

}  // TEST_SUITE
