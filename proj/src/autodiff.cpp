#include "ccfc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccfc/rng.hpp"

namespace ccfc {

ParamId ParamStore::add(std::string name, ParamKind kind, Index rows, Index cols) {
  Entry e;
  e.name = std::move(name);
  e.kind = kind;
  e.value = Matrix::Zero(rows, cols);
  entries_.push_back(std::move(e));
  reads_.push_back(0);
  return static_cast<ParamId>(entries_.size()) - 1;
}

void GradBag::add_dense(ParamId id, const Matrix& g) {
  auto it = dense_.find(id);
  if (it == dense_.end()) {
    dense_.emplace(id, g);
  } else {
    it->second += g;
  }
}

void GradBag::add_table_col(ParamId id, Index col, const Vector& g) {
  auto& cols = cols_[id];
  auto it = cols.find(col);
  if (it == cols.end()) {
    cols.emplace(col, g);
  } else {
    it->second += g;
  }
}

bool GradBag::touches(ParamId id) const {
  return dense_.count(id) > 0 || cols_.count(id) > 0;
}

Matrix GradBag::densified(ParamId id, Index rows, Index cols) const {
  Matrix out = Matrix::Zero(rows, cols);
  auto dit = dense_.find(id);
  if (dit != dense_.end()) out += dit->second;
  auto cit = cols_.find(id);
  if (cit != cols_.end()) {
    for (const auto& [col, g] : cit->second) out.col(col) += g;
  }
  return out;
}

void GradBag::merge(const GradBag& other) {
  for (const auto& [id, g] : other.dense_) add_dense(id, g);
  for (const auto& [id, cols] : other.cols_) {
    for (const auto& [col, g] : cols) add_table_col(id, col, g);
  }
}

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }

void Tape::require_vector(NodeId id, const char* prim) const {
  if (node(id).scalar) {
    throw InputError(std::string(prim) + ": input node is a scalar, expected a vector");
  }
}

void Tape::require_scalar(NodeId id, const char* prim) const {
  if (!node(id).scalar) {
    throw InputError(std::string(prim) + ": input node is a vector, expected a scalar");
  }
}

bool Tape::is_scalar(NodeId id) const { return node(id).scalar; }

double Tape::scalar(NodeId id) const {
  const Node& n = node(id);
  if (!n.scalar) throw InputError("tape: node is not a scalar");
  return n.s;
}

const Vector& Tape::vec(NodeId id) const {
  const Node& n = node(id);
  if (n.scalar) throw InputError("tape: node is not a vector");
  return n.v;
}

NodeId Tape::constant(Vector v) {
  Node n;
  n.op = Op::Constant;
  n.v = std::move(v);
  return push(std::move(n));
}

NodeId Tape::lookup(ParamId table, std::vector<int> ids, double coeff) {
  const Matrix& W = params_->value(table);
  if (ids.empty()) throw InputError("table-lookup: empty id list");
  Node n;
  n.op = Op::Lookup;
  n.param = table;
  n.c = coeff;
  n.v = Vector::Zero(W.rows());
  for (int id : ids) {
    if (id < 0 || id >= W.cols()) {
      throw InputError("table-lookup: id " + std::to_string(id) + " out of range for " +
                       params_->name(table) + " with " + std::to_string(W.cols()) + " columns");
    }
    n.v += W.col(id);
    touched_.table_cols[table].insert(id);
  }
  if (coeff != 1.0) n.v *= coeff;
  n.ids = std::move(ids);
  return push(std::move(n));
}

NodeId Tape::param_flat(ParamId dense_param) {
  const Matrix& W = params_->value(dense_param);
  Node n;
  n.op = Op::ParamFlat;
  n.param = dense_param;
  n.v = Eigen::Map<const Vector>(W.data(), W.size());
  touched_.dense.insert(dense_param);
  return push(std::move(n));
}

NodeId Tape::affine(ParamId w, ParamId b, NodeId x) {
  require_vector(x, "affine");
  const Matrix& W = params_->value(w);
  const Vector& xv = node(x).v;
  if (W.cols() != xv.size()) {
    throw InputError("affine: weight " + params_->name(w) + " is " + std::to_string(W.rows()) +
                     "x" + std::to_string(W.cols()) + " but input has size " +
                     std::to_string(xv.size()));
  }
  Node n;
  n.op = Op::Affine;
  n.param = w;
  n.bias = b;
  n.in = {x};
  n.v = W * xv;
  touched_.dense.insert(w);
  if (b != kNoParam) {
    const Matrix& B = params_->value(b);
    if (B.cols() != 1 || B.rows() != n.v.size()) {
      throw InputError("affine: bias " + params_->name(b) + " shape mismatch");
    }
    n.v += B.col(0);
    touched_.dense.insert(b);
  }
  return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId x, double negative_slope) {
  require_vector(x, "leaky-relu");
  const Vector& xv = node(x).v;
  Node n;
  n.op = Op::LeakyRelu;
  n.in = {x};
  n.c = negative_slope;
  n.v = xv.unaryExpr([negative_slope](double t) { return t >= 0.0 ? t : negative_slope * t; });
  for (Index i = 0; i < xv.size(); ++i) {
    min_abs_relu_in_ = std::min(min_abs_relu_in_, std::abs(xv(i)));
  }
  return push(std::move(n));
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw InputError("concat: empty part list");
  Index total = 0;
  for (NodeId p : parts) {
    require_vector(p, "concat");
    total += node(p).v.size();
  }
  Node n;
  n.op = Op::Concat;
  n.in = parts;
  n.v = Vector(total);
  Index at = 0;
  for (NodeId p : parts) {
    const Vector& pv = node(p).v;
    n.v.segment(at, pv.size()) = pv;
    at += pv.size();
  }
  return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
  require_vector(a, "inner-product");
  require_vector(b, "inner-product");
  const Vector& av = node(a).v;
  const Vector& bv = node(b).v;
  if (av.size() != bv.size()) {
    throw InputError("inner-product: sizes " + std::to_string(av.size()) + " and " +
                     std::to_string(bv.size()) + " differ");
  }
  Node n;
  n.op = Op::Dot;
  n.in = {a, b};
  n.scalar = true;
  n.s = av.dot(bv);
  return push(std::move(n));
}

NodeId Tape::log_sigmoid(NodeId s) {
  require_scalar(s, "log-sigmoid");
  const double x = node(s).s;
  Node n;
  n.op = Op::LogSigmoid;
  n.in = {s};
  n.scalar = true;
  // ln sigma(x), stable on both tails
  n.s = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  return push(std::move(n));
}

NodeId Tape::log_sum_exp(const std::vector<NodeId>& terms) {
  if (terms.empty()) throw InputError("log-sum-exp: empty term list");
  double max_val = -std::numeric_limits<double>::infinity();
  for (NodeId t : terms) {
    require_scalar(t, "log-sum-exp");
    max_val = std::max(max_val, node(t).s);
  }
  double acc = 0.0;
  for (NodeId t : terms) acc += std::exp(node(t).s - max_val);
  Node n;
  n.op = Op::LogSumExp;
  n.in = terms;
  n.scalar = true;
  n.s = max_val + std::log(acc);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_scalar(a, "scalar-add");
  require_scalar(b, "scalar-add");
  Node n;
  n.op = Op::Add;
  n.in = {a, b};
  n.scalar = true;
  n.s = node(a).s + node(b).s;
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  require_scalar(a, "scalar-mul");
  require_scalar(b, "scalar-mul");
  Node n;
  n.op = Op::Mul;
  n.in = {a, b};
  n.scalar = true;
  n.s = node(a).s * node(b).s;
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  require_scalar(a, "scalar-mul");
  Node n;
  n.op = Op::Scale;
  n.in = {a};
  n.c = c;
  n.scalar = true;
  n.s = node(a).s * c;
  return push(std::move(n));
}

NodeId Tape::sum(const std::vector<NodeId>& terms) {
  double acc = 0.0;
  for (NodeId t : terms) {
    require_scalar(t, "sum");
    acc += node(t).s;
  }
  Node n;
  n.op = Op::Sum;
  n.in = terms;
  n.scalar = true;
  n.s = acc;
  return push(std::move(n));
}

GradBag Tape::backward(NodeId root, double seed_gradient) const {
  const Node& root_node = node(root);
  if (!root_node.scalar) throw InputError("backward: root node is not a scalar");

  const std::size_t n = nodes_.size();
  std::vector<double> sadj(n, 0.0);
  std::vector<Vector> vadj(n);
  std::vector<char> live(n, 0);
  sadj[static_cast<std::size_t>(root)] = seed_gradient;
  live[static_cast<std::size_t>(root)] = 1;

  auto vec_adj = [&](NodeId id) -> Vector& {
    Vector& a = vadj[static_cast<std::size_t>(id)];
    if (a.size() == 0) a = Vector::Zero(node(id).v.size());
    live[static_cast<std::size_t>(id)] = 1;
    return a;
  };
  auto touch_scalar = [&](NodeId id, double g) {
    sadj[static_cast<std::size_t>(id)] += g;
    live[static_cast<std::size_t>(id)] = 1;
  };

  GradBag bag;
  for (NodeId id = static_cast<NodeId>(n) - 1; id >= 0; --id) {
    if (!live[static_cast<std::size_t>(id)]) continue;
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    switch (nd.op) {
      case Op::Constant:
        break;
      case Op::Lookup: {
        const Vector& g = vadj[static_cast<std::size_t>(id)];
        if (g.size() == 0) break;
        if (nd.c == 1.0) {
          for (int col : nd.ids) bag.add_table_col(nd.param, col, g);
        } else {
          const Vector scaled = nd.c * g;
          for (int col : nd.ids) bag.add_table_col(nd.param, col, scaled);
        }
        break;
      }
      case Op::ParamFlat: {
        const Vector& g = vadj[static_cast<std::size_t>(id)];
        if (g.size() == 0) break;
        bag.add_dense(nd.param,
                      Eigen::Map<const Matrix>(g.data(), params_->rows(nd.param),
                                               params_->cols(nd.param)));
        break;
      }
      case Op::Affine: {
        const Vector& g = vadj[static_cast<std::size_t>(id)];
        if (g.size() == 0) break;
        const Vector& x = node(nd.in[0]).v;
        bag.add_dense(nd.param, g * x.transpose());
        if (nd.bias != kNoParam) bag.add_dense(nd.bias, g);
        vec_adj(nd.in[0]).noalias() += params_->value(nd.param).transpose() * g;
        break;
      }
      case Op::LeakyRelu: {
        const Vector& g = vadj[static_cast<std::size_t>(id)];
        if (g.size() == 0) break;
        const Vector& x = node(nd.in[0]).v;
        Vector& ga = vec_adj(nd.in[0]);
        for (Index i = 0; i < x.size(); ++i) {
          // adjoint at exactly 0 uses the positive branch
          ga(i) += g(i) * (x(i) >= 0.0 ? 1.0 : nd.c);
        }
        break;
      }
      case Op::Concat: {
        const Vector& g = vadj[static_cast<std::size_t>(id)];
        if (g.size() == 0) break;
        Index at = 0;
        for (NodeId p : nd.in) {
          const Index len = node(p).v.size();
          vec_adj(p) += g.segment(at, len);
          at += len;
        }
        break;
      }
      case Op::Dot: {
        const double g = sadj[static_cast<std::size_t>(id)];
        vec_adj(nd.in[0]) += g * node(nd.in[1]).v;
        vec_adj(nd.in[1]) += g * node(nd.in[0]).v;
        break;
      }
      case Op::LogSigmoid: {
        const double g = sadj[static_cast<std::size_t>(id)];
        const double x = node(nd.in[0]).s;
        // d/dx ln sigma(x) = sigma(-x)
        const double sig_neg = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x))
                                        : 1.0 / (1.0 + std::exp(x));
        touch_scalar(nd.in[0], g * sig_neg);
        break;
      }
      case Op::LogSumExp: {
        const double g = sadj[static_cast<std::size_t>(id)];
        for (NodeId t : nd.in) {
          touch_scalar(t, g * std::exp(node(t).s - nd.s));
        }
        break;
      }
      case Op::Add: {
        const double g = sadj[static_cast<std::size_t>(id)];
        touch_scalar(nd.in[0], g);
        touch_scalar(nd.in[1], g);
        break;
      }
      case Op::Mul: {
        const double g = sadj[static_cast<std::size_t>(id)];
        touch_scalar(nd.in[0], g * node(nd.in[1]).s);
        touch_scalar(nd.in[1], g * node(nd.in[0]).s);
        break;
      }
      case Op::Scale: {
        touch_scalar(nd.in[0], sadj[static_cast<std::size_t>(id)] * nd.c);
        break;
      }
      case Op::Sum: {
        const double g = sadj[static_cast<std::size_t>(id)];
        for (NodeId t : nd.in) touch_scalar(t, g);
        break;
      }
    }
  }
  return bag;
}

GradCheckReport gradient_check(const std::function<NodeId(Tape&)>& builder, ParamStore& params,
                               double h, int max_coords, std::uint64_t seed) {
  Tape base(params);
  const NodeId root = builder(base);
  const double base_val = base.scalar(root);
  if (!std::isfinite(base_val)) throw NumericError("gradient_check: loss is not finite");
  const GradBag bag = base.backward(root);
  const double base_margin = base.min_abs_relu_input();

  // candidates: every entry of dense parameters, entries of touched table
  // columns; untouched table columns have identically zero analytic and
  // numeric gradients and carry no information
  struct Coord {
    ParamId param;
    Index row, col;
  };
  std::vector<Coord> coords;
  for (ParamId id = 0; id < params.count(); ++id) {
    if (params.kind(id) == ParamKind::Dense) {
      for (Index c = 0; c < params.cols(id); ++c) {
        for (Index r = 0; r < params.rows(id); ++r) coords.push_back({id, r, c});
      }
    }
  }
  for (const auto& [id, cols] : bag.table_cols()) {
    for (const auto& [col, g] : cols) {
      for (Index r = 0; r < g.size(); ++r) coords.push_back({id, r, col});
    }
  }

  Rng rng = derive_rng(seed, {0x6cadu});
  for (std::size_t i = coords.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(coords[i - 1], coords[j]);
  }
  if (static_cast<int>(coords.size()) > max_coords) {
    coords.resize(static_cast<std::size_t>(max_coords));
  }

  auto eval_at = [&](ParamId id, Index r, Index c, double value, double& margin) {
    const double saved = params.edit(id)(r, c);
    params.edit(id)(r, c) = value;
    Tape t(params);
    const NodeId rt = builder(t);
    const double out = t.scalar(rt);
    margin = t.min_abs_relu_input();
    params.edit(id)(r, c) = saved;
    if (!std::isfinite(out)) throw NumericError("gradient_check: perturbed loss is not finite");
    return out;
  };

  GradCheckReport report;
  for (const Coord& coord : coords) {
    const double theta = params.edit(coord.param)(coord.row, coord.col);
    double margin_plus = 0.0, margin_minus = 0.0;
    const double f_plus = eval_at(coord.param, coord.row, coord.col, theta + h, margin_plus);
    const double f_minus = eval_at(coord.param, coord.row, coord.col, theta - h, margin_minus);
    if (std::min({base_margin, margin_plus, margin_minus}) < 10.0 * h) {
      ++report.skipped;
      continue;
    }
    const double cd = (f_plus - f_minus) / (2.0 * h);
    double analytic = 0.0;
    if (params.kind(coord.param) == ParamKind::Dense) {
      auto it = bag.dense().find(coord.param);
      if (it != bag.dense().end()) analytic = it->second(coord.row, coord.col);
    } else {
      auto it = bag.table_cols().find(coord.param);
      if (it != bag.table_cols().end()) {
        auto cit = it->second.find(coord.col);
        if (cit != it->second.end()) analytic = cit->second(coord.row);
      }
    }
    const double denom = std::max({std::abs(analytic), std::abs(cd), 1e-12});
    report.max_rel_err = std::max(report.max_rel_err, std::abs(analytic - cd) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace ccfc
