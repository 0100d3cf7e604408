#include "ccfc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ccfc/rng.hpp"

namespace ccfc {

using nlohmann::json;

bool InteractionDataset::has_interaction(int user, int item) const {
  if (user < 0 || user >= n_users) return false;
  const std::vector<int>& items = items_of_user[static_cast<std::size_t>(user)];
  return std::binary_search(items.begin(), items.end(), item);
}

const AttributeValues& InteractionDataset::attrs_of(int item) const {
  if (!attributes || item < 0 || item >= static_cast<int>(attributes->size())) {
    throw InputError("dataset: no attributes for item index " + std::to_string(item));
  }
  return (*attributes)[static_cast<std::size_t>(item)];
}

std::string InteractionDataset::ids_hash() const {
  std::string joined;
  for (const std::string& s : user_ids) {
    joined += s;
    joined += '\n';
  }
  joined += '|';
  for (const std::string& s : item_ids) {
    joined += s;
    joined += '\n';
  }
  return to_hex(fnv1a64(joined));
}

void InteractionDataset::rebuild_index() {
  items_of_user.assign(static_cast<std::size_t>(n_users), {});
  users_of_item.assign(static_cast<std::size_t>(n_items), {});
  for (const auto& [u, v] : interactions) {
    items_of_user[static_cast<std::size_t>(u)].push_back(v);
    users_of_item[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& v : items_of_user) std::sort(v.begin(), v.end());
  for (auto& v : users_of_item) std::sort(v.begin(), v.end());
  if (item_in_split.size() != static_cast<std::size_t>(n_items)) {
    item_in_split.assign(static_cast<std::size_t>(n_items), 1);
  }
}

void InteractionDataset::validate() const {
  if (interactions.size() != timestamps.size()) {
    throw InputError("dataset: timestamps out of sync with interactions");
  }
  std::size_t edge_count = 0;
  for (const auto& v : items_of_user) edge_count += v.size();
  if (edge_count != interactions.size()) {
    throw InputError("dataset: index out of sync with interactions");
  }
  for (const auto& [u, v] : interactions) {
    if (u < 0 || u >= n_users || v < 0 || v >= n_items) {
      throw InputError("dataset: interaction references out-of-range index");
    }
    if (!std::binary_search(items_of_user[static_cast<std::size_t>(u)].begin(),
                            items_of_user[static_cast<std::size_t>(u)].end(), v) ||
        !std::binary_search(users_of_item[static_cast<std::size_t>(v)].begin(),
                            users_of_item[static_cast<std::size_t>(v)].end(), u)) {
      throw InputError("dataset: index sets disagree with interaction list");
    }
  }
}

namespace {

// one line: user_id <TAB> item_id <TAB> timestamp
bool parse_tsv_line(const std::string& line, std::string& user, std::string& item,
                    std::int64_t& ts) {
  const std::size_t tab1 = line.find('\t');
  if (tab1 == std::string::npos || tab1 == 0) return false;
  const std::size_t tab2 = line.find('\t', tab1 + 1);
  if (tab2 == std::string::npos || tab2 == tab1 + 1) return false;
  user = line.substr(0, tab1);
  item = line.substr(tab1 + 1, tab2 - tab1 - 1);
  std::string ts_str = line.substr(tab2 + 1);
  while (!ts_str.empty() && (ts_str.back() == '\r' || ts_str.back() == '\n')) ts_str.pop_back();
  if (ts_str.empty()) return false;
  const char* first = ts_str.data();
  const char* last = first + ts_str.size();
  auto [ptr, ec] = std::from_chars(first, last, ts);
  return ec == std::errc() && ptr == last;
}

}  // namespace

InteractionDataset load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("interactions: cannot open " + path);

  InteractionDataset ds;
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;
  std::unordered_set<std::uint64_t> seen_pairs;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string user_id, item_id;
    std::int64_t ts = 0;
    if (!parse_tsv_line(line, user_id, item_id, ts)) {
      throw InputError("interactions: malformed line " + std::to_string(line_no) + " in " + path);
    }
    auto [uit, u_new] = user_index.try_emplace(user_id, static_cast<int>(ds.user_ids.size()));
    if (u_new) ds.user_ids.push_back(user_id);
    auto [iit, i_new] = item_index.try_emplace(item_id, static_cast<int>(ds.item_ids.size()));
    if (i_new) ds.item_ids.push_back(item_id);
    const int u = uit->second;
    const int v = iit->second;
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
        static_cast<std::uint32_t>(v);
    if (!seen_pairs.insert(key).second) continue;  // interactions form a set
    ds.interactions.emplace_back(u, v);
    ds.timestamps.push_back(ts);
  }
  if (ds.interactions.empty()) {
    throw InputError("interactions: no interactions found in " + path);
  }
  ds.n_users = static_cast<int>(ds.user_ids.size());
  ds.n_items = static_cast<int>(ds.item_ids.size());
  ds.rebuild_index();
  return ds;
}

void save_interactions(const InteractionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("interactions: cannot write " + path);
  // first-appearance order is preserved, so a reload reproduces the mapping
  for (std::size_t i = 0; i < ds.interactions.size(); ++i) {
    const auto& [u, v] = ds.interactions[i];
    out << ds.user_ids[static_cast<std::size_t>(u)] << '\t'
        << ds.item_ids[static_cast<std::size_t>(v)] << '\t' << ds.timestamps[i] << '\n';
  }
}

namespace {

std::vector<int> parse_categorical(const json& value, const AttributeSchema& schema, int field,
                                   const std::string& item_id) {
  const FieldSpec& spec = schema.fields[static_cast<std::size_t>(field)];
  std::vector<std::string> tokens;
  if (value.is_string()) {
    tokens.push_back(value.get<std::string>());
  } else if (value.is_array()) {
    for (const json& t : value) tokens.push_back(t.get<std::string>());
  } else {
    throw InputError("attributes: item '" + item_id + "' field '" + spec.name +
                     "' must be a string or array of strings");
  }
  if (spec.kind == FieldKind::OneHot && tokens.size() != 1) {
    throw InputError("attributes: item '" + item_id + "' field '" + spec.name +
                     "' is one-hot and needs exactly one value");
  }
  std::vector<int> hot;
  for (const std::string& t : tokens) {
    const int idx = schema.vocab_index(field, t);
    if (idx < 0) {
      throw InputError("attributes: item '" + item_id + "' field '" + spec.name +
                       "': unknown vocabulary token '" + t + "'");
    }
    hot.push_back(idx);
  }
  std::sort(hot.begin(), hot.end());
  hot.erase(std::unique(hot.begin(), hot.end()), hot.end());
  return hot;
}

std::unordered_map<std::string, Vector> load_dense_sidecar(const std::string& path, int dim,
                                                           const std::string& field_name) {
  std::ifstream in(path);
  if (!in) throw InputError("attributes: cannot open dense file " + path);
  std::unordered_map<std::string, Vector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw InputError("attributes: malformed line " + std::to_string(line_no) + " in " + path);
    }
    const std::string item_id = line.substr(0, tab);
    Vector vec(dim);
    int count = 0;
    std::size_t pos = tab + 1;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      if (count >= dim) {
        ++count;  // counts past the end signal a dimension mismatch below
        break;
      }
      try {
        vec(count) = std::stod(line.substr(pos, comma - pos));
      } catch (const std::exception&) {
        throw InputError("attributes: bad float at line " + std::to_string(line_no) + " in " +
                         path);
      }
      ++count;
      pos = comma + 1;
    }
    if (count != dim) {
      throw InputError("attributes: item '" + item_id + "' field '" + field_name + "' has " +
                       std::to_string(count) + " values, schema says " + std::to_string(dim));
    }
    out[item_id] = std::move(vec);
  }
  return out;
}

}  // namespace

AttributeTable load_attributes(const std::string& path, const AttributeSchema& schema,
                               const std::map<std::string, std::string>& dense_paths,
                               const InteractionDataset& ds) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw InputError("attributes: cannot open " + path);

  // dense fields come from sidecar files keyed by external item id
  std::vector<std::unordered_map<std::string, Vector>> dense_by_field(
      static_cast<std::size_t>(schema.field_count()));
  for (int f = 0; f < schema.field_count(); ++f) {
    const FieldSpec& spec = schema.fields[static_cast<std::size_t>(f)];
    if (spec.kind != FieldKind::Dense) continue;
    auto it = dense_paths.find(spec.name);
    if (it == dense_paths.end()) {
      throw InputError("attributes: no dense file configured for field '" + spec.name + "'");
    }
    dense_by_field[static_cast<std::size_t>(f)] = load_dense_sidecar(it->second, spec.size, spec.name);
  }

  std::unordered_map<std::string, int> item_index;
  for (int v = 0; v < ds.n_items; ++v) item_index[ds.item_ids[static_cast<std::size_t>(v)]] = v;

  AttributeTable table(static_cast<std::size_t>(ds.n_items));
  std::vector<char> filled(static_cast<std::size_t>(ds.n_items), 0);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError("attributes: invalid JSON at line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    const std::string item_id = rec.value("item_id", std::string());
    auto iit = item_index.find(item_id);
    if (iit == item_index.end()) {
      throw InputError("attributes: unknown item '" + item_id + "' at line " +
                       std::to_string(line_no));
    }
    const int v = iit->second;
    if (filled[static_cast<std::size_t>(v)]) {
      throw InputError("attributes: duplicate record for item '" + item_id + "'");
    }
    const json attrs = rec.value("attrs", json::object());
    for (auto it = attrs.begin(); it != attrs.end(); ++it) {
      const int f = schema.field_index(it.key());
      if (f < 0) {
        throw InputError("attributes: item '" + item_id + "' has unknown field '" + it.key() + "'");
      }
      if (schema.fields[static_cast<std::size_t>(f)].kind == FieldKind::Dense) {
        throw InputError("attributes: dense field '" + it.key() +
                         "' must come from its sidecar file, not the JSONL");
      }
    }

    AttributeValues values(static_cast<std::size_t>(schema.field_count()));
    for (int f = 0; f < schema.field_count(); ++f) {
      const FieldSpec& spec = schema.fields[static_cast<std::size_t>(f)];
      if (spec.kind == FieldKind::Dense) {
        auto dit = dense_by_field[static_cast<std::size_t>(f)].find(item_id);
        if (dit == dense_by_field[static_cast<std::size_t>(f)].end()) {
          throw InputError("attributes: item '" + item_id + "' missing dense field '" + spec.name +
                           "'");
        }
        values[static_cast<std::size_t>(f)].dense = dit->second;
      } else {
        if (!attrs.contains(spec.name)) {
          if (spec.kind == FieldKind::OneHot) {
            throw InputError("attributes: item '" + item_id + "' missing one-hot field '" +
                             spec.name + "'");
          }
          // multi-hot with no values is an all-zeros vector
          continue;
        }
        values[static_cast<std::size_t>(f)].hot =
            parse_categorical(attrs[spec.name], schema, f, item_id);
      }
    }
    table[static_cast<std::size_t>(v)] = std::move(values);
    filled[static_cast<std::size_t>(v)] = 1;
  }

  for (int v = 0; v < ds.n_items; ++v) {
    if (!filled[static_cast<std::size_t>(v)]) {
      throw InputError("attributes: missing record for item '" +
                       ds.item_ids[static_cast<std::size_t>(v)] + "'");
    }
  }
  return table;
}

void attach_attributes(InteractionDataset& ds, AttributeTable table) {
  if (static_cast<int>(table.size()) != ds.n_items) {
    throw InputError("attributes: table size does not match item count");
  }
  ds.attributes = std::make_shared<const AttributeTable>(std::move(table));
}

namespace {

InteractionDataset make_split(const InteractionDataset& src, const std::vector<char>& take_item) {
  InteractionDataset out;
  out.n_users = src.n_users;
  out.n_items = src.n_items;
  out.user_ids = src.user_ids;
  out.item_ids = src.item_ids;
  out.attributes = src.attributes;
  out.item_in_split.assign(static_cast<std::size_t>(src.n_items), 0);
  for (int v = 0; v < src.n_items; ++v) {
    out.item_in_split[static_cast<std::size_t>(v)] = take_item[static_cast<std::size_t>(v)];
  }
  for (std::size_t i = 0; i < src.interactions.size(); ++i) {
    const auto& [u, v] = src.interactions[i];
    if (take_item[static_cast<std::size_t>(v)]) {
      out.interactions.emplace_back(u, v);
      out.timestamps.push_back(src.timestamps[i]);
    }
  }
  out.items_of_user.assign(static_cast<std::size_t>(out.n_users), {});
  out.users_of_item.assign(static_cast<std::size_t>(out.n_items), {});
  for (const auto& [u, v] : out.interactions) {
    out.items_of_user[static_cast<std::size_t>(u)].push_back(v);
    out.users_of_item[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& vec : out.items_of_user) std::sort(vec.begin(), vec.end());
  for (auto& vec : out.users_of_item) std::sort(vec.begin(), vec.end());
  return out;
}

}  // namespace

SplitBundle split_by_item(const InteractionDataset& ds, std::array<double, 3> ratios,
                          std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("split: ratios must sum to 1");
  if (ds.n_items == 0 || ds.interactions.empty()) throw InputError("split: empty dataset");

  std::vector<int> order(static_cast<std::size_t>(ds.n_items));
  for (int v = 0; v < ds.n_items; ++v) order[static_cast<std::size_t>(v)] = v;
  Rng rng = derive_rng(seed, {0x5114u});
  rng.shuffle(order);

  // floor valid/test, remainder to train
  const int n = ds.n_items;
  const int n_valid = static_cast<int>(std::floor(ratios[1] * n));
  const int n_test = static_cast<int>(std::floor(ratios[2] * n));
  const int n_train = n - n_valid - n_test;
  if (n_train <= 0 || n_valid <= 0 || n_test <= 0) {
    throw InputError("split: a split would receive zero items");
  }

  SplitBundle bundle;
  bundle.seed = seed;
  std::vector<char> in_train(static_cast<std::size_t>(n), 0);
  std::vector<char> in_valid(static_cast<std::size_t>(n), 0);
  std::vector<char> in_test(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    if (i < n_train) {
      in_train[static_cast<std::size_t>(v)] = 1;
      bundle.train_items.push_back(v);
    } else if (i < n_train + n_valid) {
      in_valid[static_cast<std::size_t>(v)] = 1;
      bundle.valid_items.push_back(v);
    } else {
      in_test[static_cast<std::size_t>(v)] = 1;
      bundle.test_items.push_back(v);
    }
  }
  std::sort(bundle.train_items.begin(), bundle.train_items.end());
  std::sort(bundle.valid_items.begin(), bundle.valid_items.end());
  std::sort(bundle.test_items.begin(), bundle.test_items.end());

  bundle.train = make_split(ds, in_train);
  bundle.valid = make_split(ds, in_valid);
  bundle.test = make_split(ds, in_test);
  return bundle;
}

bool CoocIndex::contains(int item, int other) const {
  if (item < 0 || item >= static_cast<int>(positives_of.size())) return false;
  const std::vector<int>& pos = positives_of[static_cast<std::size_t>(item)];
  return std::binary_search(pos.begin(), pos.end(), other);
}

CoocIndex build_cooccurrence_index(const InteractionDataset& train) {
  if (train.interactions.empty()) throw InputError("cooc: empty training split");
  CoocIndex index;
  index.positives_of.assign(static_cast<std::size_t>(train.n_items), {});
  for (int v = 0; v < train.n_items; ++v) {
    if (train.item_is_in_split(v)) index.items.push_back(v);
  }
  // inverted index over users: N+_v is the union of V_u over u in U_v
  for (int v = 0; v < train.n_items; ++v) {
    const std::vector<int>& users = train.users_of_item[static_cast<std::size_t>(v)];
    if (users.empty()) continue;
    std::vector<int>& pos = index.positives_of[static_cast<std::size_t>(v)];
    for (int u : users) {
      const std::vector<int>& items = train.items_of_user[static_cast<std::size_t>(u)];
      pos.insert(pos.end(), items.begin(), items.end());
    }
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    auto self = std::lower_bound(pos.begin(), pos.end(), v);
    if (self != pos.end() && *self == v) pos.erase(self);
  }
  return index;
}

}  // namespace ccfc
