#include "ccfc/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include "ccfc/eval.hpp"
#include "ccfc/sampling.hpp"

namespace ccfc {

namespace {

struct ShardResult {
  GradBag grads;
  double l_q = 0.0;
  double l_z = 0.0;
  double lc_pair_sum = 0.0;  // unscaled sum over (anchor, positive) pairs
};

// Main terms for a contiguous slice of the batch. The contrastive scale
// 1/n_pairs_total is applied inside the tape so gradients merge by plain
// summation.
ShardResult run_shard(const ContrastiveBatch& batch, std::size_t begin, std::size_t end,
                      const ModelParams& params, const AttributeSchema& schema,
                      const InteractionDataset& train_ds, const Hyperparams& hyper,
                      Variant variant, std::size_t n_pairs_total) {
  ContrastiveBatch slice;
  slice.entries.assign(batch.entries.begin() + static_cast<std::ptrdiff_t>(begin),
                       batch.entries.begin() + static_cast<std::ptrdiff_t>(end));
  Tape tape(params.store);

  // replicate build_batch_loss without the reg term; reg is handled once for
  // the whole batch by the caller
  Hyperparams shard_hyper = hyper;
  shard_hyper.l2 = 0.0;
  const LossNodes nodes = build_batch_loss(tape, slice, params, schema, train_ds, shard_hyper,
                                           variant, /*include_reg=*/false);

  ShardResult out;
  out.l_q = tape.scalar(nodes.l_q);
  out.l_z = tape.scalar(nodes.l_z);
  // undo the slice-local mean to recover the raw pair sum
  std::size_t slice_pairs = 0;
  if (variant != Variant::NoContrastive) {
    for (std::size_t i = begin; i < end; ++i) {
      slice_pairs += batch.entries[i].pos_items.size();
    }
  }
  out.lc_pair_sum = tape.scalar(nodes.l_c) * static_cast<double>(slice_pairs);

  // root for gradients: l_q + l_z + lambda * pair_sum / n_pairs_total
  NodeId root = tape.add(nodes.l_q, nodes.l_z);
  if (slice_pairs > 0 && n_pairs_total > 0) {
    const double rescale =
        static_cast<double>(slice_pairs) / static_cast<double>(n_pairs_total);
    root = tape.add(root, tape.scale(nodes.l_c, hyper.lambda * rescale));
  }
  out.grads = tape.backward(root);
  return out;
}

// squared L2 over the touched parameter set; gradients pre-scaled by l2
std::pair<double, GradBag> batch_reg(const GradBag& main_grads, const ModelParams& params,
                                     double l2) {
  Tape tape(params.store);
  std::vector<NodeId> terms;
  for (const auto& [id, g] : main_grads.dense()) {
    const NodeId flat = tape.param_flat(id);
    terms.push_back(tape.dot(flat, flat));
  }
  for (const auto& [id, cols] : main_grads.table_cols()) {
    for (const auto& [col, g] : cols) {
      const NodeId column = tape.lookup(id, {static_cast<int>(col)});
      terms.push_back(tape.dot(column, column));
    }
  }
  const NodeId root = tape.sum(terms);
  GradBag grads;
  if (l2 != 0.0) grads = tape.backward(root, l2);
  return {tape.scalar(root), std::move(grads)};
}

}  // namespace

LossReport train_step(const ContrastiveBatch& batch, ModelParams& params,
                      const AttributeSchema& schema, const InteractionDataset& train_ds,
                      const Hyperparams& hyper, Variant variant, AdamState& state,
                      const std::set<ParamId>& frozen, int threads) {
  LossReport report;
  GradBag grads;

  if (threads <= 1) {
    TapedLoss taped = loss_total(batch, params, schema, train_ds, hyper, variant);
    report = taped.report;
    grads = taped.tape.backward(taped.nodes.total);
  } else {
    std::size_t n_pairs_total = 0;
    if (variant != Variant::NoContrastive) {
      for (const BatchEntry& e : batch.entries) n_pairs_total += e.pos_items.size();
    }
    const std::size_t n = batch.entries.size();
    const std::size_t n_shards = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<ShardResult> results(n_shards);
    std::vector<std::thread> workers;
    workers.reserve(n_shards);
    for (std::size_t s = 0; s < n_shards; ++s) {
      const std::size_t begin = n * s / n_shards;
      const std::size_t end = n * (s + 1) / n_shards;
      workers.emplace_back([&, s, begin, end] {
        results[s] = run_shard(batch, begin, end, params, schema, train_ds, hyper, variant,
                               n_pairs_total);
      });
    }
    for (std::thread& w : workers) w.join();

    // fixed merge order keeps results deterministic for a given thread count
    for (const ShardResult& r : results) {
      report.l_q += r.l_q;
      report.l_z += r.l_z;
      report.l_c += r.lc_pair_sum;
      grads.merge(r.grads);
    }
    if (n_pairs_total > 0) report.l_c /= static_cast<double>(n_pairs_total);

    auto [reg_value, reg_grads] = batch_reg(grads, params, hyper.l2);
    report.l_reg = reg_value;
    grads.merge(reg_grads);
    report.total = report.l_q + report.l_z + hyper.lambda * report.l_c + hyper.l2 * report.l_reg;
  }

  if (!std::isfinite(report.total)) throw NumericError("train: non-finite batch loss");
  adam_step(params.store, grads, state, hyper.lr, hyper, frozen);
  return report;
}

namespace {

void mf_pretrain_phase(ModelParams& params, const InteractionDataset& train_ds,
                       const Hyperparams& hyper, std::ostream* log) {
  AdamState mf_state;
  for (int epoch = 1; epoch <= hyper.mf_epochs; ++epoch) {
    const std::vector<std::array<int, 3>> triples = assemble_mf_triples(train_ds, hyper, epoch);
    if (triples.empty()) throw InputError("pretrain: no usable MF triples");
    double epoch_loss = 0.0;
    const std::size_t batch_size = static_cast<std::size_t>(hyper.batch_size);
    for (std::size_t start = 0; start < triples.size(); start += batch_size) {
      const std::size_t end = std::min(triples.size(), start + batch_size);
      std::vector<std::array<int, 3>> chunk(triples.begin() + static_cast<std::ptrdiff_t>(start),
                                            triples.begin() + static_cast<std::ptrdiff_t>(end));
      Tape tape(params.store);
      const NodeId root = build_mf_loss(tape, chunk, params, train_ds, hyper);
      epoch_loss += tape.scalar(root);
      const GradBag grads = tape.backward(root);
      adam_step(params.store, grads, mf_state, hyper.mf_lr, hyper);
    }
    if (log) {
      *log << "mf epoch " << epoch << " loss " << epoch_loss / static_cast<double>(triples.size())
           << "\n";
    }
  }
}

}  // namespace

TrainResult train(const SplitBundle& bundle, const AttributeSchema& schema,
                  const Hyperparams& hyper, Variant variant, int threads, std::ostream* log) {
  hyper.validate();
  schema.validate();
  const InteractionDataset& train_ds = bundle.train;
  if (train_ds.interactions.empty()) throw InputError("train: empty training split");
  if (!train_ds.attributes) throw InputError("train: dataset has no attributes");

  const CoocIndex cooc = build_cooccurrence_index(train_ds);
  ModelParams params = ModelParams::init(schema, train_ds.n_users, train_ds.n_items, hyper);
  AdamState state;

  std::set<ParamId> frozen;
  if (variant == Variant::Pretrain) {
    mf_pretrain_phase(params, train_ds, hyper, log);
    frozen.insert(params.item_table);  // z_v fixed during the main phase
  }

  TrainResult result;
  result.history.epochs.reserve(static_cast<std::size_t>(hyper.epochs));

  // last-good snapshot for divergence recovery
  ModelParams snapshot = params;
  AdamState snapshot_state = state;

  ModelParams best_params = params;
  AdamState best_state = state;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    LossReport epoch_sum;
    int n_batches = 0;
    bool ok = true;
    try {
      const std::vector<ContrastiveBatch> batches =
          assemble_epoch_batches(train_ds, cooc, hyper, epoch);
      for (const ContrastiveBatch& batch : batches) {
        epoch_sum += train_step(batch, params, schema, train_ds, hyper, variant, state, frozen,
                                threads);
        ++n_batches;
      }
    } catch (const NumericError& e) {
      if (log) *log << "epoch " << epoch << " diverged: " << e.what() << "\n";
      ok = false;
    }
    if (!ok) {
      result.diverged = true;
      params = snapshot;
      state = snapshot_state;
      break;
    }
    LossReport mean = epoch_sum;
    if (n_batches > 0) mean /= static_cast<double>(n_batches);

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = mean;
    record.val_ndcg10 = evaluate(train_ds, bundle.valid, bundle.valid_items, params, schema, {10},
                                 hyper)
                            .ndcg[0];
    record.wall_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(record);
    if (log) {
      *log << "epoch " << epoch << " loss " << mean.total << " val ndcg@10 " << record.val_ndcg10
           << "\n";
    }

    snapshot = params;
    snapshot_state = state;

    if (record.val_ndcg10 > result.best_val) {
      result.best_val = record.val_ndcg10;
      result.best_epoch = epoch;
      best_params = params;
      best_state = state;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= hyper.patience) break;
    }
  }

  if (result.diverged || result.best_epoch < 0) {
    result.params = std::move(params);
    result.adam = std::move(state);
  } else {
    result.params = std::move(best_params);
    result.adam = std::move(best_state);
  }
  return result;
}

}  // namespace ccfc
