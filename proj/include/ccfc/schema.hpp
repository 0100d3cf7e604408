#pragma once

#include <string>
#include <vector>

#include "ccfc/common.hpp"

namespace ccfc {

enum class FieldKind { OneHot, MultiHot, Dense };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& s);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::OneHot;
  int size = 0;  // vocab size for categorical kinds, dimension for dense
  std::vector<std::string> vocab;  // categorical kinds only, size() == size
};

// Ordered list of item attribute fields. The order defines the layout of the
// content embedding and of the parameter tables, so it is part of the model
// identity (see hash()).
struct AttributeSchema {
  std::vector<FieldSpec> fields;

  int field_count() const { return static_cast<int>(fields.size()); }
  int field_index(const std::string& name) const;  // -1 if absent
  int vocab_index(int field, const std::string& token) const;  // -1 if absent

  void validate() const;
  std::string canonical_json() const;
  std::string hash() const;  // hex FNV-1a over canonical_json()

  static AttributeSchema from_json_text(const std::string& text);
  static AttributeSchema load(const std::string& path);
  void save(const std::string& path) const;
};

// Values of one field for one item. Categorical fields use `hot`
// (sorted vocab indices, exactly one entry for one-hot); dense fields
// use `dense`.
struct FieldValue {
  std::vector<int> hot;
  Vector dense;
};

using AttributeValues = std::vector<FieldValue>;  // one per schema field
using AttributeTable = std::vector<AttributeValues>;  // indexed by item

std::uint64_t fnv1a64(const std::string& data);
std::string to_hex(std::uint64_t value);

}  // namespace ccfc
