#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccfc/common.hpp"

namespace ccfc {

enum class ParamKind {
  Dense,  // whole-matrix gradients (MLP layers, projections)
  Table   // embedding table, per-column gradients via lookups
};

using ParamId = int;
inline constexpr ParamId kNoParam = -1;

// Registry of learnable matrices. Vectors (biases) are stored as n x 1.
// Reads through value() are counted, which lets tests assert that the cold
// inference path never touches the item table.
class ParamStore {
 public:
  ParamId add(std::string name, ParamKind kind, Index rows, Index cols);

  int count() const { return static_cast<int>(entries_.size()); }
  const std::string& name(ParamId id) const { return entries_.at(static_cast<std::size_t>(id)).name; }
  ParamKind kind(ParamId id) const { return entries_.at(static_cast<std::size_t>(id)).kind; }
  Index rows(ParamId id) const { return entries_.at(static_cast<std::size_t>(id)).value.rows(); }
  Index cols(ParamId id) const { return entries_.at(static_cast<std::size_t>(id)).value.cols(); }

  const Matrix& value(ParamId id) const {
    ++reads_[static_cast<std::size_t>(id)];
    return entries_.at(static_cast<std::size_t>(id)).value;
  }
  Matrix& edit(ParamId id) { return entries_.at(static_cast<std::size_t>(id)).value; }

  std::uint64_t reads(ParamId id) const { return reads_.at(static_cast<std::size_t>(id)); }

 private:
  struct Entry {
    std::string name;
    ParamKind kind;
    Matrix value;
  };
  std::vector<Entry> entries_;
  mutable std::vector<std::uint64_t> reads_;
};

// Gradients keyed by parameter: dense matrices for Dense parameters,
// per-column vectors for Table parameters. Parameters that were not touched
// are simply absent.
class GradBag {
 public:
  void add_dense(ParamId id, const Matrix& g);
  void add_table_col(ParamId id, Index col, const Vector& g);

  bool touches(ParamId id) const;
  bool empty() const { return dense_.empty() && cols_.empty(); }

  const std::map<ParamId, Matrix>& dense() const { return dense_; }
  const std::map<ParamId, std::map<Index, Vector>>& table_cols() const { return cols_; }

  // dense matrix view of this parameter's gradient (zeros where untouched)
  Matrix densified(ParamId id, Index rows, Index cols) const;

  void merge(const GradBag& other);  // summation

 private:
  std::map<ParamId, Matrix> dense_;
  std::map<ParamId, std::map<Index, Vector>> cols_;
};

using NodeId = int;

// Reverse-mode tape over the nine primitives the model needs. Nodes are
// topologically ordered by construction; forward values are cached at record
// time; backward() replays adjoints into a GradBag. A tape belongs to one
// worker and reads parameters through a shared const ParamStore.
class Tape {
 public:
  explicit Tape(const ParamStore& params) : params_(&params) {}

  // leaves
  NodeId constant(Vector v);
  // coeff * sum of the table's columns at `ids` (one id = plain lookup,
  // coeff 1/|ids| = mean pooling)
  NodeId lookup(ParamId table, std::vector<int> ids, double coeff = 1.0);
  // a dense parameter viewed as a flat vector (column-major), for norms
  NodeId param_flat(ParamId dense_param);

  // vector ops
  NodeId affine(ParamId w, ParamId b, NodeId x);  // W*x + b, b may be kNoParam
  NodeId leaky_relu(NodeId x, double negative_slope);
  NodeId concat(const std::vector<NodeId>& parts);

  // scalar ops
  NodeId dot(NodeId a, NodeId b);
  NodeId log_sigmoid(NodeId s);
  NodeId log_sum_exp(const std::vector<NodeId>& terms);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId sum(const std::vector<NodeId>& terms);  // empty list -> 0

  bool is_scalar(NodeId id) const;
  double scalar(NodeId id) const;
  const Vector& vec(NodeId id) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // smallest |x| seen at any leaky-relu input; +inf when no relu recorded.
  // Used by the finite-difference kink guard.
  double min_abs_relu_input() const { return min_abs_relu_in_; }

  struct Touched {
    std::set<ParamId> dense;
    std::map<ParamId, std::set<int>> table_cols;
  };
  const Touched& touched() const { return touched_; }

  GradBag backward(NodeId root, double seed_gradient = 1.0) const;

 private:
  enum class Op {
    Constant,
    Lookup,
    ParamFlat,
    Affine,
    LeakyRelu,
    Concat,
    Dot,
    LogSigmoid,
    LogSumExp,
    Add,
    Mul,
    Scale,
    Sum
  };

  struct Node {
    Op op;
    std::vector<NodeId> in;
    ParamId param = kNoParam;
    ParamId bias = kNoParam;
    std::vector<int> ids;  // lookup columns
    double c = 0.0;        // scale constant / leaky slope
    Vector v;              // vector value
    double s = 0.0;        // scalar value
    bool scalar = false;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void require_vector(NodeId id, const char* prim) const;
  void require_scalar(NodeId id, const char* prim) const;

  const ParamStore* params_;
  std::vector<Node> nodes_;
  double min_abs_relu_in_ = std::numeric_limits<double>::infinity();
  Touched touched_;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;
};

// Central finite differences against backward(). The builder must construct
// the same loss (same data, same sampling) into any tape it is given.
// Coordinates where any leaky-relu input sits within 10*h of its kink are
// skipped and counted.
GradCheckReport gradient_check(const std::function<NodeId(Tape&)>& builder, ParamStore& params,
                               double h, int max_coords, std::uint64_t seed);

}  // namespace ccfc
