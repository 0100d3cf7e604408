#include "ccfc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ccfc {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no-contrastive") return Variant::NoContrastive;
  if (s == "pretrain") return Variant::Pretrain;
  throw InputError("variant must be one of full, no-contrastive, pretrain; got '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoContrastive: return "no-contrastive";
    case Variant::Pretrain: return "pretrain";
  }
  return "?";
}

LossReport& LossReport::operator+=(const LossReport& other) {
  l_q += other.l_q;
  l_z += other.l_z;
  l_c += other.l_c;
  l_reg += other.l_reg;
  total += other.total;
  return *this;
}

LossReport& LossReport::operator/=(double divisor) {
  l_q /= divisor;
  l_z /= divisor;
  l_c /= divisor;
  l_reg /= divisor;
  total /= divisor;
  return *this;
}

double loss_bpr(double score_pos, double score_neg) {
  if (!std::isfinite(score_pos) || !std::isfinite(score_neg)) {
    throw NumericError("loss_bpr: non-finite score");
  }
  // softplus(-(pos-neg)), stable on both tails
  const double margin = score_pos - score_neg;
  return margin >= 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

double loss_contrastive(const Vector& q, const std::vector<Vector>& z_pos,
                        const std::vector<Vector>& z_neg, double tau) {
  if (tau <= 0.0) throw InputError("loss_contrastive: tau must be > 0");
  if (z_pos.empty()) throw InputError("loss_contrastive: needs at least one positive");

  std::vector<double> neg_logits;
  neg_logits.reserve(z_neg.size());
  for (const Vector& z : z_neg) {
    const double logit = q.dot(z) / tau;
    if (!std::isfinite(logit)) throw NumericError("loss_contrastive: non-finite inner product");
    neg_logits.push_back(logit);
  }

  double acc = 0.0;
  for (const Vector& z : z_pos) {
    const double pos_logit = q.dot(z) / tau;
    if (!std::isfinite(pos_logit)) throw NumericError("loss_contrastive: non-finite inner product");
    // -ln softmax = logsumexp(pos, negs) - pos, with max shift
    double max_val = pos_logit;
    for (double n : neg_logits) max_val = std::max(max_val, n);
    double denom = std::exp(pos_logit - max_val);
    for (double n : neg_logits) denom += std::exp(n - max_val);
    acc += (max_val + std::log(denom)) - pos_logit;
  }
  return acc / static_cast<double>(z_pos.size());
}

double loss_mf_pretrain(const std::vector<std::array<int, 3>>& triples, const ModelParams& params,
                        const InteractionDataset& train, const Hyperparams& hyper) {
  double acc = 0.0;
  for (const auto& [u, v_pos, v_neg] : triples) {
    if (!train.has_interaction(u, v_pos)) {
      throw InputError("loss_mf_pretrain: (u=" + std::to_string(u) + ", v+=" +
                       std::to_string(v_pos) + ") is not a training interaction");
    }
    if (train.has_interaction(u, v_neg)) {
      throw InputError("loss_mf_pretrain: v-=" + std::to_string(v_neg) +
                       " is a positive item of user " + std::to_string(u));
    }
    const Vector s = uce(params, train, u, hyper.collab_mean_pool);
    const Vector z_p = coce(params, train, v_pos, hyper.collab_mean_pool);
    const Vector z_n = coce(params, train, v_neg, hyper.collab_mean_pool);
    acc += loss_bpr(s.dot(z_p), s.dot(z_n));
  }
  return acc;
}

namespace {

// shared per-batch node caches so repeated users/items record one subgraph
struct NodeCache {
  std::map<int, NodeId> cbce;
  std::map<int, NodeId> coce;
  std::map<int, NodeId> uce;
};

NodeId cached_cbce(Tape& tape, NodeCache& cache, const ModelParams& params,
                   const AttributeSchema& schema, const AttributeTable& attrs, int item,
                   double slope) {
  auto it = cache.cbce.find(item);
  if (it != cache.cbce.end()) return it->second;
  const NodeId id = tape_cbce(tape, params, schema, attrs, item, slope);
  cache.cbce.emplace(item, id);
  return id;
}

NodeId cached_coce(Tape& tape, NodeCache& cache, const ModelParams& params,
                   const InteractionDataset& train, int item, bool mean_pool) {
  auto it = cache.coce.find(item);
  if (it != cache.coce.end()) return it->second;
  const NodeId id = tape_coce(tape, params, train, item, mean_pool);
  cache.coce.emplace(item, id);
  return id;
}

NodeId cached_uce(Tape& tape, NodeCache& cache, const ModelParams& params,
                  const InteractionDataset& train, int user, bool mean_pool) {
  auto it = cache.uce.find(user);
  if (it != cache.uce.end()) return it->second;
  const NodeId id = tape_uce(tape, params, train, user, mean_pool);
  cache.uce.emplace(user, id);
  return id;
}

// squared L2 of everything the tape touched so far: whole dense parameters,
// touched table columns only
NodeId build_reg_term(Tape& tape) {
  const Tape::Touched touched = tape.touched();  // snapshot before reg lookups
  std::vector<NodeId> terms;
  for (ParamId id : touched.dense) {
    const NodeId flat = tape.param_flat(id);
    terms.push_back(tape.dot(flat, flat));
  }
  for (const auto& [id, cols] : touched.table_cols) {
    for (int col : cols) {
      const NodeId column = tape.lookup(id, {col});
      terms.push_back(tape.dot(column, column));
    }
  }
  return tape.sum(terms);
}

}  // namespace

LossNodes build_batch_loss(Tape& tape, const ContrastiveBatch& batch, const ModelParams& params,
                           const AttributeSchema& schema, const InteractionDataset& train,
                           const Hyperparams& hyper, Variant variant, bool include_reg) {
  if (batch.entries.empty()) throw InputError("loss: empty batch");
  if (!train.attributes) throw InputError("loss: training split has no attributes");
  const AttributeTable& attrs = *train.attributes;

  NodeCache cache;
  std::vector<NodeId> lq_terms;
  std::vector<NodeId> lz_terms;
  std::vector<NodeId> lc_pair_terms;

  for (const BatchEntry& entry : batch.entries) {
    const NodeId q = cached_cbce(tape, cache, params, schema, attrs, entry.item, hyper.leaky_slope);
    const NodeId s_pos = cached_uce(tape, cache, params, train, entry.user_pos,
                                    hyper.collab_mean_pool);
    const NodeId s_neg = cached_uce(tape, cache, params, train, entry.user_neg,
                                    hyper.collab_mean_pool);

    // l_q: -ln sigma(<q,s+> - <q,s->)
    const NodeId yq_margin =
        tape.add(tape.dot(q, s_pos), tape.scale(tape.dot(q, s_neg), -1.0));
    lq_terms.push_back(tape.scale(tape.log_sigmoid(yq_margin), -1.0));

    if (variant == Variant::Full) {
      const NodeId z = cached_coce(tape, cache, params, train, entry.item,
                                   hyper.collab_mean_pool);
      const NodeId yz_margin =
          tape.add(tape.dot(z, s_pos), tape.scale(tape.dot(z, s_neg), -1.0));
      lz_terms.push_back(tape.scale(tape.log_sigmoid(yz_margin), -1.0));
    }

    if (variant != Variant::NoContrastive) {
      std::vector<NodeId> neg_logits;
      neg_logits.reserve(entry.neg_items.size());
      for (int v_neg : entry.neg_items) {
        const NodeId z_neg = cached_coce(tape, cache, params, train, v_neg,
                                         hyper.collab_mean_pool);
        neg_logits.push_back(tape.scale(tape.dot(q, z_neg), 1.0 / hyper.tau));
      }
      for (int v_pos : entry.pos_items) {
        const NodeId z_pos = cached_coce(tape, cache, params, train, v_pos,
                                         hyper.collab_mean_pool);
        const NodeId pos_logit = tape.scale(tape.dot(q, z_pos), 1.0 / hyper.tau);
        std::vector<NodeId> pool;
        pool.reserve(neg_logits.size() + 1);
        pool.push_back(pos_logit);
        pool.insert(pool.end(), neg_logits.begin(), neg_logits.end());
        lc_pair_terms.push_back(
            tape.add(tape.log_sum_exp(pool), tape.scale(pos_logit, -1.0)));
      }
    }
  }

  LossNodes nodes;
  nodes.l_q = tape.sum(lq_terms);
  nodes.l_z = tape.sum(lz_terms);
  nodes.l_c = lc_pair_terms.empty()
                  ? tape.sum({})
                  : tape.scale(tape.sum(lc_pair_terms),
                               1.0 / static_cast<double>(lc_pair_terms.size()));
  nodes.l_reg = include_reg ? build_reg_term(tape) : tape.sum({});
  nodes.total = tape.add(tape.add(nodes.l_q, nodes.l_z),
                         tape.add(tape.scale(nodes.l_c, hyper.lambda),
                                  tape.scale(nodes.l_reg, hyper.l2)));
  if (!std::isfinite(tape.scalar(nodes.total))) {
    throw NumericError("loss: batch total is not finite");
  }
  return nodes;
}

NodeId build_mf_loss(Tape& tape, const std::vector<std::array<int, 3>>& triples,
                     const ModelParams& params, const InteractionDataset& train,
                     const Hyperparams& hyper) {
  if (triples.empty()) throw InputError("loss: empty triple list");
  NodeCache cache;
  std::vector<NodeId> terms;
  terms.reserve(triples.size());
  for (const auto& [u, v_pos, v_neg] : triples) {
    const NodeId s = cached_uce(tape, cache, params, train, u, hyper.collab_mean_pool);
    const NodeId z_pos = cached_coce(tape, cache, params, train, v_pos, hyper.collab_mean_pool);
    const NodeId z_neg = cached_coce(tape, cache, params, train, v_neg, hyper.collab_mean_pool);
    const NodeId margin =
        tape.add(tape.dot(s, z_pos), tape.scale(tape.dot(s, z_neg), -1.0));
    terms.push_back(tape.scale(tape.log_sigmoid(margin), -1.0));
  }
  const NodeId root = tape.sum(terms);
  if (!std::isfinite(tape.scalar(root))) throw NumericError("loss: MF total is not finite");
  return root;
}

LossReport report_from_nodes(const Tape& tape, const LossNodes& nodes, const Hyperparams& hyper) {
  LossReport report;
  report.l_q = tape.scalar(nodes.l_q);
  report.l_z = tape.scalar(nodes.l_z);
  report.l_c = tape.scalar(nodes.l_c);
  report.l_reg = tape.scalar(nodes.l_reg);
  report.total = tape.scalar(nodes.total);
  (void)hyper;
  return report;
}

TapedLoss loss_total(const ContrastiveBatch& batch, const ModelParams& params,
                     const AttributeSchema& schema, const InteractionDataset& train,
                     const Hyperparams& hyper, Variant variant) {
  TapedLoss out{Tape(params.store), LossNodes{}, LossReport{}};
  out.nodes = build_batch_loss(out.tape, batch, params, schema, train, hyper, variant);
  out.report = report_from_nodes(out.tape, out.nodes, hyper);
  return out;
}

}  // namespace ccfc
