// ccfc: cold-start item recommendation trainer and evaluator.
//
// Subcommands: ingest, train, evaluate, synth, export, report.
// Exit codes: 0 success, 2 input error, 3 compatibility error,
// 4 numerical divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccfc/checkpoint.hpp"
#include "ccfc/config.hpp"
#include "ccfc/dataset.hpp"
#include "ccfc/eval.hpp"
#include "ccfc/loss.hpp"
#include "ccfc/synthetic.hpp"
#include "ccfc/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> d;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration JSON");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--variant", flags.variant, "full | no-contrastive | pretrain");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--threads", flags.threads, "worker threads (1 = deterministic mode)");
  cmd->add_option("--epochs", flags.epochs, "override max epochs");
  cmd->add_option("--lr", flags.lr, "override learning rate");
  cmd->add_option("--d", flags.d, "override embedding dimensionality");
}

ccfc::RunConfig resolve_config(const CommonFlags& flags) {
  ccfc::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = ccfc::RunConfig::load(flags.config_path);
  // precedence: config < CCFC_SEED < explicit flag
  if (const char* env_seed = std::getenv("CCFC_SEED")) {
    cfg.hyper.seed = std::strtoull(env_seed, nullptr, 10);
  }
  if (flags.seed) cfg.hyper.seed = *flags.seed;
  if (flags.variant) cfg.variant = *flags.variant;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.epochs) cfg.hyper.epochs = *flags.epochs;
  if (flags.lr) cfg.hyper.lr = *flags.lr;
  if (flags.d) {
    const bool h_was_default = cfg.hyper.h == 2 * cfg.hyper.d;
    cfg.hyper.d = *flags.d;
    if (h_was_default) cfg.hyper.h = 2 * cfg.hyper.d;
  }
  cfg.validate();
  return cfg;
}

struct LoadedData {
  ccfc::AttributeSchema schema;
  ccfc::InteractionDataset dataset;
  ccfc::SplitBundle bundle;
};

LoadedData load_and_split(const ccfc::RunConfig& cfg, std::uint64_t split_seed) {
  cfg.validate_data_paths();
  LoadedData out;
  out.schema = ccfc::AttributeSchema::load(cfg.schema_path);
  out.dataset = ccfc::load_interactions(cfg.interactions_path);
  ccfc::attach_attributes(out.dataset,
                          ccfc::load_attributes(cfg.attributes_path, out.schema,
                                                cfg.dense_feature_paths, out.dataset));
  out.bundle = ccfc::split_by_item(out.dataset, cfg.split_ratios, split_seed);
  return out;
}

void write_history(const ccfc::RunHistory& history, const std::string& path, bool deterministic) {
  std::ofstream out(path);
  if (!out) throw ccfc::InputError("train: cannot write " + path);
  for (const ccfc::EpochRecord& r : history.epochs) {
    json line;
    line["epoch"] = r.epoch;
    line["l_q"] = r.mean_loss.l_q;
    line["l_z"] = r.mean_loss.l_z;
    line["l_c"] = r.mean_loss.l_c;
    line["l_reg"] = r.mean_loss.l_reg;
    line["total"] = r.mean_loss.total;
    line["val_ndcg10"] = r.val_ndcg10;
    line["wall_sec"] = deterministic ? 0.0 : r.wall_sec;
    out << line.dump() << "\n";
  }
}

int cmd_ingest(const CommonFlags& flags) {
  const ccfc::RunConfig cfg = resolve_config(flags);
  const LoadedData data = load_and_split(cfg, cfg.hyper.seed);
  fs::create_directories(cfg.out_dir);

  std::ofstream users(fs::path(cfg.out_dir) / "ids_users.tsv");
  for (int u = 0; u < data.dataset.n_users; ++u) {
    users << u << '\t' << data.dataset.user_ids[static_cast<std::size_t>(u)] << '\n';
  }
  std::ofstream items(fs::path(cfg.out_dir) / "ids_items.tsv");
  for (int v = 0; v < data.dataset.n_items; ++v) {
    items << v << '\t' << data.dataset.item_ids[static_cast<std::size_t>(v)] << '\n';
  }

  json split;
  split["seed"] = data.bundle.seed;
  split["train_items"] = data.bundle.train_items;
  split["valid_items"] = data.bundle.valid_items;
  split["test_items"] = data.bundle.test_items;
  std::ofstream split_out(fs::path(cfg.out_dir) / "split_items.json");
  split_out << split.dump(2) << "\n";

  json summary;
  summary["n_users"] = data.dataset.n_users;
  summary["n_items"] = data.dataset.n_items;
  summary["n_interactions"] = data.dataset.interactions.size();
  summary["n_train_interactions"] = data.bundle.train.interactions.size();
  summary["n_valid_interactions"] = data.bundle.valid.interactions.size();
  summary["n_test_interactions"] = data.bundle.test.interactions.size();
  summary["schema_hash"] = data.schema.hash();
  summary["dataset_hash"] = data.dataset.ids_hash();
  std::ofstream summary_out(fs::path(cfg.out_dir) / "summary.json");
  summary_out << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  const ccfc::RunConfig cfg = resolve_config(flags);
  const LoadedData data = load_and_split(cfg, cfg.hyper.seed);
  const ccfc::Variant variant = ccfc::variant_from_string(cfg.variant);

  const ccfc::TrainResult result =
      ccfc::train(data.bundle, data.schema, cfg.hyper, variant, cfg.threads, &std::cout);

  fs::create_directories(cfg.out_dir);
  ccfc::CheckpointMeta meta;
  meta.schema_hash = data.schema.hash();
  meta.dataset_hash = data.dataset.ids_hash();
  meta.variant = cfg.variant;
  meta.hyper = cfg.hyper;
  meta.n_users = data.dataset.n_users;
  meta.n_items = data.dataset.n_items;
  meta.user_ids = data.dataset.user_ids;
  meta.item_ids = data.dataset.item_ids;
  ccfc::save_checkpoint(result.params, result.adam, meta,
                        (fs::path(cfg.out_dir) / "checkpoint.ccfc").string());
  write_history(result.history, (fs::path(cfg.out_dir) / "history.jsonl").string(),
                cfg.deterministic);
  cfg.save((fs::path(cfg.out_dir) / "config.json").string());

  if (result.diverged) {
    std::cerr << "training diverged; last good checkpoint written to " << cfg.out_dir << "\n";
    return 4;
  }
  std::cout << "checkpoint written to " << cfg.out_dir << " (best epoch " << result.best_epoch
            << ", val ndcg@10 " << result.best_val << ")\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_path,
                 std::vector<int> ks) {
  const ccfc::RunConfig cfg = resolve_config(flags);
  ccfc::Checkpoint ck = ccfc::load_checkpoint(checkpoint_path);

  // the checkpoint's seed reproduces the split its training used
  const LoadedData data = load_and_split(cfg, ck.meta.hyper.seed);
  ccfc::verify_compatible(ck.meta, data.schema, data.dataset);

  if (ks.empty()) ks = cfg.eval_ks;
  ccfc::EvalStats stats;
  const ccfc::RankingMetrics metrics =
      ccfc::evaluate(data.bundle.train, data.bundle.test, data.bundle.test_items, ck.params,
                     data.schema, ks, ck.meta.hyper, &stats, cfg.recall_style_hr);
  std::cout << ccfc::metrics_json_lines(metrics);
  std::cout << ccfc::metrics_table(metrics);
  if (stats.dropped_users > 0 || stats.skipped_items > 0) {
    std::cerr << "note: dropped " << stats.dropped_users
              << " relevant users absent from training; skipped " << stats.skipped_items
              << " items with no relevant user\n";
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "metrics.json");
    json arr = json::array();
    for (std::size_t i = 0; i < metrics.ks.size(); ++i) {
      arr.push_back({{"k", metrics.ks[i]}, {"hr", metrics.hr[i]}, {"ndcg", metrics.ndcg[i]}});
    }
    out << arr.dump(2) << "\n";
  }
  return 0;
}

int cmd_synth(const CommonFlags& flags) {
  ccfc::RunConfig cfg = resolve_config(flags);
  if (flags.seed) cfg.synth.seed = *flags.seed;
  const ccfc::SyntheticData data = ccfc::generate_synthetic(cfg.synth);
  ccfc::save_synthetic(data, cfg.out_dir);
  std::cout << "synthetic dataset with " << data.dataset.interactions.size()
            << " interactions written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_export(const CommonFlags& flags, const std::string& checkpoint_path) {
  const ccfc::RunConfig cfg = resolve_config(flags);
  ccfc::Checkpoint ck = ccfc::load_checkpoint(checkpoint_path);
  const LoadedData data = load_and_split(cfg, ck.meta.hyper.seed);
  ccfc::verify_compatible(ck.meta, data.schema, data.dataset);

  fs::create_directories(cfg.out_dir);
  const ccfc::AttributeTable& attrs = *data.dataset.attributes;
  const auto write_vec = [](std::ofstream& out, const ccfc::Vector& v) {
    for (ccfc::Index i = 0; i < v.size(); ++i) out << '\t' << v(i);
    out << '\n';
  };

  std::ofstream cbce_out(fs::path(cfg.out_dir) / "embeddings_cbce.tsv");
  for (int v = 0; v < data.dataset.n_items; ++v) {
    cbce_out << data.dataset.item_ids[static_cast<std::size_t>(v)];
    write_vec(cbce_out, ccfc::cbce_of_item(v, ck.params, data.schema, attrs,
                                           ck.meta.hyper.leaky_slope));
  }
  std::ofstream coce_out(fs::path(cfg.out_dir) / "embeddings_coce.tsv");
  for (int v = 0; v < data.dataset.n_items; ++v) {
    coce_out << data.dataset.item_ids[static_cast<std::size_t>(v)];
    if (data.bundle.train.item_is_in_split(v)) {
      write_vec(coce_out, ccfc::coce(ck.params, data.bundle.train, v,
                                     ck.meta.hyper.collab_mean_pool));
    } else {
      // cold item: the co-occurrence embedding is undefined
      write_vec(coce_out, ccfc::Vector::Zero(ck.params.d));
    }
  }
  std::ofstream uce_out(fs::path(cfg.out_dir) / "embeddings_uce.tsv");
  for (int u = 0; u < data.dataset.n_users; ++u) {
    uce_out << data.dataset.user_ids[static_cast<std::size_t>(u)];
    write_vec(uce_out, ccfc::uce(ck.params, data.bundle.train, u,
                                 ck.meta.hyper.collab_mean_pool));
  }
  std::cout << "embeddings written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& checkpoint_path,
               const std::string& user_id, int n_pairs, const std::string& match_field,
               const std::string& out_path) {
  const ccfc::RunConfig cfg = resolve_config(flags);
  ccfc::Checkpoint ck = ccfc::load_checkpoint(checkpoint_path);
  const LoadedData data = load_and_split(cfg, ck.meta.hyper.seed);
  ccfc::verify_compatible(ck.meta, data.schema, data.dataset);

  int user = -1;
  for (int u = 0; u < data.dataset.n_users; ++u) {
    if (data.dataset.user_ids[static_cast<std::size_t>(u)] == user_id) {
      user = u;
      break;
    }
  }
  if (user < 0) throw ccfc::InputError("report: unknown user id '" + user_id + "'");

  int field = 0;
  if (!match_field.empty()) {
    field = data.schema.field_index(match_field);
    if (field < 0) throw ccfc::InputError("report: unknown field '" + match_field + "'");
  }
  ccfc::Rng rng = ccfc::derive_rng(cfg.hyper.seed, {0x4e90u, static_cast<std::uint64_t>(user)});
  const auto [pos, neg] =
      ccfc::sample_report_pairs(user, data.bundle.train, data.schema, n_pairs, field, rng);
  const std::vector<ccfc::DistanceRow> rows = ccfc::distance_report(
      user, pos, neg, ck.params, data.schema, data.bundle.train, ck.meta.hyper);
  const std::string csv = ccfc::distance_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw ccfc::InputError("report: cannot write " + out_path);
    out << csv;
    std::cout << "distance report written to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CCFC cold-start item recommender"};
  app.require_subcommand(1);

  CommonFlags ingest_flags, train_flags, eval_flags, synth_flags, export_flags, report_flags;

  CLI::App* ingest = app.add_subcommand("ingest", "validate data and write split manifests");
  add_common(ingest, ingest_flags);

  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_flags);

  CLI::App* evaluate = app.add_subcommand("evaluate", "rank cold items from a checkpoint");
  add_common(evaluate, eval_flags);
  std::string eval_ckpt;
  std::vector<int> eval_ks;
  evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  evaluate->add_option("--ks", eval_ks, "metric cutoffs, e.g. --ks 5 10 20");

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  add_common(synth, synth_flags);

  CLI::App* exp = app.add_subcommand("export", "export embedding tables as TSV");
  add_common(exp, export_flags);
  std::string export_ckpt;
  exp->add_option("--checkpoint", export_ckpt, "checkpoint path")->required();

  CLI::App* report = app.add_subcommand("report", "item-to-user distance report CSV");
  add_common(report, report_flags);
  std::string report_ckpt, report_user, report_field = "", report_out;
  int report_pairs = 5;
  report->add_option("--checkpoint", report_ckpt, "checkpoint path")->required();
  report->add_option("--user", report_user, "external user id")->required();
  report->add_option("--pairs", report_pairs, "number of positive/negative pairs");
  report->add_option("--match-field", report_field, "categorical field negatives must match");
  report->add_option("--csv", report_out, "write the CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_flags);
    if (*train) return cmd_train(train_flags);
    if (*evaluate) return cmd_evaluate(eval_flags, eval_ckpt, eval_ks);
    if (*synth) return cmd_synth(synth_flags);
    if (*exp) return cmd_export(export_flags, export_ckpt);
    if (*report) {
      return cmd_report(report_flags, report_ckpt, report_user, report_pairs, report_field,
                        report_out);
    }
  } catch (const ccfc::CompatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ccfc::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ccfc::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
