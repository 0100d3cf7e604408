#include "ccfc/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ccfc/loss.hpp"

namespace ccfc {

using nlohmann::json;

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  if (doc.contains("data")) {
    const json& data = doc["data"];
    cfg.interactions_path = data.value("interactions", std::string());
    cfg.schema_path = data.value("schema", std::string());
    cfg.attributes_path = data.value("attributes", std::string());
    if (data.contains("dense_features")) {
      for (auto it = data["dense_features"].begin(); it != data["dense_features"].end(); ++it) {
        cfg.dense_feature_paths[it.key()] = it.value().get<std::string>();
      }
    }
  }
  if (doc.contains("split") && doc["split"].contains("ratios")) {
    const auto ratios = doc["split"]["ratios"].get<std::vector<double>>();
    if (ratios.size() != 3) throw InputError("config: split.ratios needs three values");
    cfg.split_ratios = {ratios[0], ratios[1], ratios[2]};
  }
  if (doc.contains("hyper")) {
    const json& h = doc["hyper"];
    Hyperparams& hp = cfg.hyper;
    hp.d = h.value("d", hp.d);
    hp.h = h.value("h", 2 * hp.d);
    hp.tau = h.value("tau", hp.tau);
    hp.lambda = h.value("lambda", hp.lambda);
    hp.l2 = h.value("l2", hp.l2);
    hp.n_pos = h.value("n_pos", hp.n_pos);
    hp.n_neg = h.value("n_neg", hp.n_neg);
    hp.batch_size = h.value("batch_size", hp.batch_size);
    hp.lr = h.value("lr", hp.lr);
    hp.beta1 = h.value("beta1", hp.beta1);
    hp.beta2 = h.value("beta2", hp.beta2);
    hp.eps = h.value("eps", hp.eps);
    hp.epochs = h.value("epochs", hp.epochs);
    hp.patience = h.value("patience", hp.patience);
    hp.leaky_slope = h.value("leaky_slope", hp.leaky_slope);
    hp.seed = h.value("seed", hp.seed);
    hp.mf_epochs = h.value("mf_epochs", hp.mf_epochs);
    hp.mf_lr = h.value("mf_lr", hp.mf_lr);
    hp.collab_mean_pool = h.value("collab_mean_pool", hp.collab_mean_pool);
  }
  cfg.variant = doc.value("variant", cfg.variant);
  if (doc.contains("eval_ks")) cfg.eval_ks = doc["eval_ks"].get<std::vector<int>>();
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.deterministic = doc.value("deterministic", cfg.deterministic);
  cfg.threads = doc.value("threads", cfg.threads);
  cfg.recall_style_hr = doc.value("recall_style_hr", cfg.recall_style_hr);
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    cfg.synth.n_users = s.value("n_users", cfg.synth.n_users);
    cfg.synth.n_items = s.value("n_items", cfg.synth.n_items);
    cfg.synth.n_genres = s.value("n_genres", cfg.synth.n_genres);
    cfg.synth.n_stars = s.value("n_stars", cfg.synth.n_stars);
    cfg.synth.confound_rate = s.value("confound_rate", cfg.synth.confound_rate);
    cfg.synth.keep_rate = s.value("keep_rate", cfg.synth.keep_rate);
    cfg.synth.seed = s.value("seed", cfg.synth.seed);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
  json doc;
  doc["data"] = {{"interactions", interactions_path},
                 {"schema", schema_path},
                 {"attributes", attributes_path}};
  json dense = json::object();
  for (const auto& [field, path] : dense_feature_paths) dense[field] = path;
  doc["data"]["dense_features"] = dense;
  doc["split"] = {{"ratios", std::vector<double>{split_ratios[0], split_ratios[1],
                                                 split_ratios[2]}}};
  doc["hyper"] = {{"d", hyper.d},
                  {"h", hyper.h},
                  {"tau", hyper.tau},
                  {"lambda", hyper.lambda},
                  {"l2", hyper.l2},
                  {"n_pos", hyper.n_pos},
                  {"n_neg", hyper.n_neg},
                  {"batch_size", hyper.batch_size},
                  {"lr", hyper.lr},
                  {"beta1", hyper.beta1},
                  {"beta2", hyper.beta2},
                  {"eps", hyper.eps},
                  {"epochs", hyper.epochs},
                  {"patience", hyper.patience},
                  {"leaky_slope", hyper.leaky_slope},
                  {"seed", hyper.seed},
                  {"mf_epochs", hyper.mf_epochs},
                  {"mf_lr", hyper.mf_lr},
                  {"collab_mean_pool", hyper.collab_mean_pool}};
  doc["variant"] = variant;
  doc["eval_ks"] = eval_ks;
  doc["out_dir"] = out_dir;
  doc["deterministic"] = deterministic;
  doc["threads"] = threads;
  doc["recall_style_hr"] = recall_style_hr;
  doc["synth"] = {{"n_users", synth.n_users},   {"n_items", synth.n_items},
                  {"n_genres", synth.n_genres}, {"n_stars", synth.n_stars},
                  {"confound_rate", synth.confound_rate}, {"keep_rate", synth.keep_rate},
                  {"seed", synth.seed}};
  return doc.dump(2);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("config: cannot write " + path);
  out << to_json_text() << "\n";
}

void RunConfig::validate() const {
  hyper.validate();
  (void)variant_from_string(variant);
  if (eval_ks.empty()) throw InputError("config: eval_ks must not be empty");
  for (int k : eval_ks) {
    if (k < 1) throw InputError("config: eval_ks entries must be >= 1");
  }
  if (threads < 1) throw InputError("config: threads must be >= 1");
  const double sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("config: split ratios must sum to 1");
}

void RunConfig::validate_data_paths() const {
  auto must_exist = [](const std::string& path, const char* what) {
    if (path.empty()) throw InputError(std::string("config: missing ") + what + " path");
    if (!std::filesystem::exists(path)) {
      throw InputError(std::string("config: ") + what + " file not found: " + path);
    }
  };
  must_exist(interactions_path, "interactions");
  must_exist(schema_path, "schema");
  must_exist(attributes_path, "attributes");
  for (const auto& [field, path] : dense_feature_paths) {
    must_exist(path, ("dense feature '" + field + "'").c_str());
  }
}

}  // namespace ccfc
