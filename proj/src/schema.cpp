#include "ccfc/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ccfc {

using nlohmann::json;

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::OneHot: return "one-hot";
    case FieldKind::MultiHot: return "multi-hot";
    case FieldKind::Dense: return "dense";
  }
  return "?";
}

FieldKind field_kind_from_string(const std::string& s) {
  if (s == "one-hot") return FieldKind::OneHot;
  if (s == "multi-hot") return FieldKind::MultiHot;
  if (s == "dense") return FieldKind::Dense;
  throw InputError("unknown field kind '" + s + "'");
}

int AttributeSchema::field_index(const std::string& name) const {
  for (int i = 0; i < field_count(); ++i) {
    if (fields[static_cast<std::size_t>(i)].name == name) return i;
  }
  return -1;
}

int AttributeSchema::vocab_index(int field, const std::string& token) const {
  const FieldSpec& f = fields.at(static_cast<std::size_t>(field));
  for (int i = 0; i < static_cast<int>(f.vocab.size()); ++i) {
    if (f.vocab[static_cast<std::size_t>(i)] == token) return i;
  }
  return -1;
}

void AttributeSchema::validate() const {
  if (fields.empty()) throw InputError("schema: needs at least one field");
  std::set<std::string> seen;
  for (const FieldSpec& f : fields) {
    if (f.name.empty()) throw InputError("schema: empty field name");
    if (!seen.insert(f.name).second) {
      throw InputError("schema: duplicate field '" + f.name + "'");
    }
    if (f.size < 1) {
      throw InputError("schema: field '" + f.name + "' has size < 1");
    }
    if (f.kind != FieldKind::Dense &&
        static_cast<int>(f.vocab.size()) != f.size) {
      throw InputError("schema: field '" + f.name + "' vocab size mismatch");
    }
  }
}

std::string AttributeSchema::canonical_json() const {
  json out;
  out["fields"] = json::array();
  for (const FieldSpec& f : fields) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = to_string(f.kind);
    if (f.kind == FieldKind::Dense) {
      jf["dim"] = f.size;
    } else {
      jf["vocab"] = f.vocab;
    }
    out["fields"].push_back(jf);
  }
  return out.dump();
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string AttributeSchema::hash() const { return to_hex(fnv1a64(canonical_json())); }

AttributeSchema AttributeSchema::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.contains("fields") || !doc["fields"].is_array()) {
    throw InputError("schema: missing 'fields' array");
  }
  AttributeSchema schema;
  for (const json& jf : doc["fields"]) {
    FieldSpec f;
    f.name = jf.value("name", std::string());
    f.kind = field_kind_from_string(jf.value("kind", std::string()));
    if (f.kind == FieldKind::Dense) {
      f.size = jf.value("dim", 0);
    } else {
      if (!jf.contains("vocab") || !jf["vocab"].is_array()) {
        throw InputError("schema: categorical field '" + f.name + "' needs a vocab");
      }
      for (const json& v : jf["vocab"]) f.vocab.push_back(v.get<std::string>());
      f.size = static_cast<int>(f.vocab.size());
    }
    schema.fields.push_back(std::move(f));
  }
  schema.validate();
  return schema;
}

AttributeSchema AttributeSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("schema: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void AttributeSchema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("schema: cannot write " + path);
  out << canonical_json() << "\n";
}

}  // namespace ccfc
