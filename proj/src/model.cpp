#include "ccfc/model.hpp"

#include <cmath>

#include "ccfc/rng.hpp"

namespace ccfc {

void Hyperparams::validate() const {
  if (d < 1 || h < 1 || batch_size < 1 || epochs < 1) {
    throw InputError("hyper: d, h, batch_size and epochs must be >= 1");
  }
  if (tau <= 0.0) throw InputError("hyper: tau must be > 0");
  if (lambda < 0.0) throw InputError("hyper: lambda must be >= 0");
  if (l2 < 0.0) throw InputError("hyper: l2 must be >= 0");
  if (n_pos < 0 || n_neg < 0) throw InputError("hyper: n_pos and n_neg must be >= 0");
  if (leaky_slope <= 0.0 || leaky_slope >= 1.0) {
    throw InputError("hyper: leaky_slope must be in (0,1)");
  }
  if (lr <= 0.0 || mf_lr <= 0.0) throw InputError("hyper: learning rates must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw InputError("hyper: betas must be in [0,1)");
  }
  if (eps <= 0.0) throw InputError("hyper: eps must be > 0");
  if (patience < 1) throw InputError("hyper: patience must be >= 1");
  if (mf_epochs < 1) throw InputError("hyper: mf_epochs must be >= 1");
}

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.next_uniform(-bound, bound);
  }
}

void fill_normal(Matrix& m, double stddev, Rng& rng) {
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) m(r, c) = stddev * rng.next_normal();
  }
}

double xavier_bound(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ModelParams ModelParams::init(const AttributeSchema& schema, int n_users, int n_items,
                              const Hyperparams& hyper) {
  schema.validate();
  hyper.validate();
  if (n_users < 1 || n_items < 1) throw InputError("model: need at least one user and item");

  ModelParams p;
  p.d = hyper.d;
  p.h = hyper.h;
  p.n_users = n_users;
  p.n_items = n_items;

  Rng rng = derive_rng(hyper.seed, {0x1417u});
  const int m = schema.field_count();
  for (int f = 0; f < m; ++f) {
    const FieldSpec& spec = schema.fields[static_cast<std::size_t>(f)];
    if (spec.kind == FieldKind::Dense) {
      const ParamId id = p.store.add("proj." + spec.name, ParamKind::Dense, p.d, spec.size);
      fill_uniform(p.store.edit(id), xavier_bound(spec.size, p.d), rng);
      p.field_params.push_back(id);
    } else {
      const ParamId id = p.store.add("attr." + spec.name, ParamKind::Table, p.d, spec.size);
      fill_normal(p.store.edit(id), 0.01, rng);
      p.field_params.push_back(id);
    }
  }
  const Index md = static_cast<Index>(m) * p.d;
  p.w1 = p.store.add("mlp.w1", ParamKind::Dense, p.h, md);
  fill_uniform(p.store.edit(p.w1), xavier_bound(md, p.h), rng);
  p.b1 = p.store.add("mlp.b1", ParamKind::Dense, p.h, 1);
  p.w2 = p.store.add("mlp.w2", ParamKind::Dense, p.d, p.h);
  fill_uniform(p.store.edit(p.w2), xavier_bound(p.h, p.d), rng);
  p.b2 = p.store.add("mlp.b2", ParamKind::Dense, p.d, 1);
  p.item_table = p.store.add("item_table", ParamKind::Table, p.d, n_users);
  fill_normal(p.store.edit(p.item_table), 0.01, rng);
  p.user_table = p.store.add("user_table", ParamKind::Table, p.d, n_items);
  fill_normal(p.store.edit(p.user_table), 0.01, rng);
  return p;
}

void ModelParams::check_finite() const {
  for (ParamId id = 0; id < store.count(); ++id) {
    if (!store.value(id).allFinite()) {
      throw NumericError("model: parameter " + store.name(id) + " has non-finite entries");
    }
  }
}

std::vector<Vector> embed_attributes(int item, const ModelParams& params,
                                     const AttributeSchema& schema, const AttributeTable& attrs) {
  if (item < 0 || item >= static_cast<int>(attrs.size())) {
    throw InputError("embed_attributes: item index out of range");
  }
  const AttributeValues& values = attrs[static_cast<std::size_t>(item)];
  if (static_cast<int>(values.size()) != schema.field_count()) {
    throw InputError("embed_attributes: item attributes do not match the schema");
  }
  std::vector<Vector> out;
  out.reserve(values.size());
  for (int f = 0; f < schema.field_count(); ++f) {
    const FieldSpec& spec = schema.fields[static_cast<std::size_t>(f)];
    const FieldValue& value = values[static_cast<std::size_t>(f)];
    const ParamId pid = params.field_params[static_cast<std::size_t>(f)];
    const Matrix& W = params.store.value(pid);
    if (spec.kind == FieldKind::Dense) {
      if (value.dense.size() != spec.size) {
        throw InputError("embed_attributes: dense field '" + spec.name + "' dimension mismatch");
      }
      out.push_back(W * value.dense);
    } else {
      Vector e = Vector::Zero(params.d);
      for (int hot : value.hot) {
        if (hot < 0 || hot >= spec.size) {
          throw InputError("embed_attributes: field '" + spec.name + "' index " +
                           std::to_string(hot) + " out of vocab range");
        }
        e += W.col(hot);
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

Vector content_embedding(const std::vector<Vector>& attr_embs, int d) {
  if (attr_embs.empty()) throw InputError("content_embedding: no attribute embeddings");
  Vector c(static_cast<Index>(attr_embs.size()) * d);
  Index at = 0;
  for (const Vector& e : attr_embs) {
    if (e.size() != d) throw InputError("content_embedding: part has wrong dimension");
    c.segment(at, d) = e;
    at += d;
  }
  return c;
}

Vector cbce(const ModelParams& params, const Vector& content, double leaky_slope) {
  const Matrix& W1 = params.store.value(params.w1);
  if (content.size() != W1.cols()) {
    throw InputError("cbce: content embedding has size " + std::to_string(content.size()) +
                     ", expected " + std::to_string(W1.cols()));
  }
  Vector hidden = W1 * content + params.store.value(params.b1).col(0);
  hidden = hidden.unaryExpr([leaky_slope](double t) { return t >= 0.0 ? t : leaky_slope * t; });
  Vector q = params.store.value(params.w2) * hidden + params.store.value(params.b2).col(0);
  if (!q.allFinite()) throw NumericError("cbce: non-finite output");
  return q;
}

Vector cbce_of_item(int item, const ModelParams& params, const AttributeSchema& schema,
                    const AttributeTable& attrs, double leaky_slope) {
  return cbce(params, content_embedding(embed_attributes(item, params, schema, attrs), params.d),
              leaky_slope);
}

Vector coce(const ModelParams& params, const InteractionDataset& train, int item,
            bool mean_pool) {
  if (!train.item_is_in_split(item)) {
    throw InputError("coce: item " + std::to_string(item) +
                     " is cold (not a training item); the co-occurrence embedding is undefined");
  }
  const std::vector<int>& users = train.users_of_item[static_cast<std::size_t>(item)];
  Vector z = Vector::Zero(params.d);
  const Matrix& W = params.store.value(params.item_table);
  for (int u : users) z += W.col(u);
  if (mean_pool && !users.empty()) z /= static_cast<double>(users.size());
  return z;
}

Vector uce(const ModelParams& params, const InteractionDataset& train, int user, bool mean_pool) {
  if (user < 0 || user >= train.n_users) throw InputError("uce: user index out of range");
  const std::vector<int>& items = train.items_of_user[static_cast<std::size_t>(user)];
  Vector s = Vector::Zero(params.d);
  const Matrix& W = params.store.value(params.user_table);
  for (int v : items) s += W.col(v);
  if (mean_pool && !items.empty()) s /= static_cast<double>(items.size());
  return s;
}

double predict(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw InputError("predict: embedding sizes " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  return a.dot(b);
}

NodeId tape_cbce(Tape& tape, const ModelParams& params, const AttributeSchema& schema,
                 const AttributeTable& attrs, int item, double leaky_slope) {
  if (item < 0 || item >= static_cast<int>(attrs.size())) {
    throw InputError("tape_cbce: item index out of range");
  }
  const AttributeValues& values = attrs[static_cast<std::size_t>(item)];
  if (static_cast<int>(values.size()) != schema.field_count()) {
    throw InputError("tape_cbce: item attributes do not match the schema");
  }
  std::vector<NodeId> parts;
  parts.reserve(values.size());
  for (int f = 0; f < schema.field_count(); ++f) {
    const FieldSpec& spec = schema.fields[static_cast<std::size_t>(f)];
    const FieldValue& value = values[static_cast<std::size_t>(f)];
    const ParamId pid = params.field_params[static_cast<std::size_t>(f)];
    if (spec.kind == FieldKind::Dense) {
      parts.push_back(tape.affine(pid, kNoParam, tape.constant(value.dense)));
    } else if (value.hot.empty()) {
      // all-zero multi-hot embeds to the zero vector and carries no gradient
      parts.push_back(tape.constant(Vector::Zero(params.d)));
    } else {
      parts.push_back(tape.lookup(pid, value.hot));
    }
  }
  const NodeId content = tape.concat(parts);
  const NodeId hidden = tape.leaky_relu(tape.affine(params.w1, params.b1, content), leaky_slope);
  return tape.affine(params.w2, params.b2, hidden);
}

NodeId tape_coce(Tape& tape, const ModelParams& params, const InteractionDataset& train, int item,
                 bool mean_pool) {
  if (!train.item_is_in_split(item)) {
    throw InputError("tape_coce: item " + std::to_string(item) + " is cold (not a training item)");
  }
  const std::vector<int>& users = train.users_of_item[static_cast<std::size_t>(item)];
  if (users.empty()) return tape.constant(Vector::Zero(params.d));
  const double coeff = mean_pool ? 1.0 / static_cast<double>(users.size()) : 1.0;
  return tape.lookup(params.item_table, users, coeff);
}

NodeId tape_uce(Tape& tape, const ModelParams& params, const InteractionDataset& train, int user,
                bool mean_pool) {
  if (user < 0 || user >= train.n_users) throw InputError("tape_uce: user index out of range");
  const std::vector<int>& items = train.items_of_user[static_cast<std::size_t>(user)];
  if (items.empty()) return tape.constant(Vector::Zero(params.d));
  const double coeff = mean_pool ? 1.0 / static_cast<double>(items.size()) : 1.0;
  return tape.lookup(params.user_table, items, coeff);
}

}  // namespace ccfc
