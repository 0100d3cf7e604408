#include "ccfc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ccfc {

using nlohmann::json;

namespace {

constexpr char kMagic[5] = {'C', 'C', 'F', 'C', '1'};

void write_u64(std::ostream& out, std::uint64_t value) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (in.gcount() != 8) throw InputError("checkpoint: truncated file");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return value;
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    write_u64(out, std::bit_cast<std::uint64_t>(data[i]));
  }
}

void read_doubles(std::istream& in, double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(read_u64(in));
  }
}

json hyper_to_json(const Hyperparams& h) {
  json j;
  j["d"] = h.d;
  j["h"] = h.h;
  j["tau"] = h.tau;
  j["lambda"] = h.lambda;
  j["l2"] = h.l2;
  j["n_pos"] = h.n_pos;
  j["n_neg"] = h.n_neg;
  j["batch_size"] = h.batch_size;
  j["lr"] = h.lr;
  j["beta1"] = h.beta1;
  j["beta2"] = h.beta2;
  j["eps"] = h.eps;
  j["epochs"] = h.epochs;
  j["patience"] = h.patience;
  j["leaky_slope"] = h.leaky_slope;
  j["seed"] = h.seed;
  j["mf_epochs"] = h.mf_epochs;
  j["mf_lr"] = h.mf_lr;
  j["collab_mean_pool"] = h.collab_mean_pool;
  return j;
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.d = j.value("d", h.d);
  h.h = j.value("h", 2 * h.d);
  h.tau = j.value("tau", h.tau);
  h.lambda = j.value("lambda", h.lambda);
  h.l2 = j.value("l2", h.l2);
  h.n_pos = j.value("n_pos", h.n_pos);
  h.n_neg = j.value("n_neg", h.n_neg);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.lr = j.value("lr", h.lr);
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.eps = j.value("eps", h.eps);
  h.epochs = j.value("epochs", h.epochs);
  h.patience = j.value("patience", h.patience);
  h.leaky_slope = j.value("leaky_slope", h.leaky_slope);
  h.seed = j.value("seed", h.seed);
  h.mf_epochs = j.value("mf_epochs", h.mf_epochs);
  h.mf_lr = j.value("mf_lr", h.mf_lr);
  h.collab_mean_pool = j.value("collab_mean_pool", h.collab_mean_pool);
  return h;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const AdamState& state,
                     const CheckpointMeta& meta, const std::string& path) {
  json doc;
  doc["version"] = meta.version;
  doc["schema_hash"] = meta.schema_hash;
  doc["dataset_hash"] = meta.dataset_hash;
  doc["variant"] = meta.variant;
  doc["hyper"] = hyper_to_json(meta.hyper);
  doc["n_users"] = meta.n_users;
  doc["n_items"] = meta.n_items;
  doc["user_ids"] = meta.user_ids;
  doc["item_ids"] = meta.item_ids;

  json jparams = json::array();
  for (ParamId id = 0; id < params.store.count(); ++id) {
    json jp;
    jp["name"] = params.store.name(id);
    jp["kind"] = params.store.kind(id) == ParamKind::Table ? "table" : "dense";
    jp["rows"] = params.store.rows(id);
    jp["cols"] = params.store.cols(id);
    jparams.push_back(jp);
  }
  doc["params"] = jparams;
  doc["layout"] = {{"field_params", params.field_params}, {"w1", params.w1},
                   {"b1", params.b1},                     {"w2", params.w2},
                   {"b2", params.b2},                     {"item_table", params.item_table},
                   {"user_table", params.user_table},     {"d", params.d},
                   {"h", params.h}};

  json jadam;
  jadam["t"] = state.t;
  json jdense = json::array();
  for (const auto& [id, moments] : state.dense) jdense.push_back(id);
  jadam["dense"] = jdense;
  json jtable = json::object();
  for (const auto& [id, cols] : state.table) {
    json jcols = json::array();
    for (const auto& [col, mv] : cols) jcols.push_back(col);
    jtable[std::to_string(id)] = jcols;
  }
  jadam["table"] = jtable;
  doc["adam"] = jadam;

  const std::string meta_text = doc.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

  for (ParamId id = 0; id < params.store.count(); ++id) {
    const Matrix& m = params.store.value(id);
    write_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
  }
  for (const auto& [id, moments] : state.dense) {
    write_doubles(out, moments.m.data(), static_cast<std::size_t>(moments.m.size()));
    write_doubles(out, moments.v.data(), static_cast<std::size_t>(moments.v.size()));
  }
  for (const auto& [id, cols] : state.table) {
    for (const auto& [col, mv] : cols) {
      write_doubles(out, mv.first.data(), static_cast<std::size_t>(mv.first.size()));
      write_doubles(out, mv.second.data(), static_cast<std::size_t>(mv.second.size()));
    }
  }
  if (!out) throw InputError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (in.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0) {
    throw InputError("checkpoint: bad magic, not a CCFC1 file: " + path);
  }
  const std::uint64_t meta_len = read_u64(in);
  if (meta_len > (1ull << 31)) throw InputError("checkpoint: corrupt metadata length");
  std::string meta_text(meta_len, '\0');
  in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
  if (static_cast<std::uint64_t>(in.gcount()) != meta_len) {
    throw InputError("checkpoint: truncated file");
  }
  json doc;
  try {
    doc = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint: corrupt metadata: ") + e.what());
  }
  if (doc.value("version", 0) != 1) {
    throw CompatError("checkpoint: unsupported version " + std::to_string(doc.value("version", 0)));
  }

  Checkpoint ck;
  ck.meta.version = doc["version"].get<int>();
  ck.meta.schema_hash = doc.value("schema_hash", std::string());
  ck.meta.dataset_hash = doc.value("dataset_hash", std::string());
  ck.meta.variant = doc.value("variant", std::string("full"));
  ck.meta.hyper = hyper_from_json(doc.value("hyper", json::object()));
  ck.meta.n_users = doc.value("n_users", 0);
  ck.meta.n_items = doc.value("n_items", 0);
  ck.meta.user_ids = doc.value("user_ids", std::vector<std::string>{});
  ck.meta.item_ids = doc.value("item_ids", std::vector<std::string>{});

  ModelParams& p = ck.params;
  const json& layout = doc.at("layout");
  p.field_params = layout.at("field_params").get<std::vector<ParamId>>();
  p.w1 = layout.at("w1").get<ParamId>();
  p.b1 = layout.at("b1").get<ParamId>();
  p.w2 = layout.at("w2").get<ParamId>();
  p.b2 = layout.at("b2").get<ParamId>();
  p.item_table = layout.at("item_table").get<ParamId>();
  p.user_table = layout.at("user_table").get<ParamId>();
  p.d = layout.at("d").get<int>();
  p.h = layout.at("h").get<int>();
  p.n_users = ck.meta.n_users;
  p.n_items = ck.meta.n_items;

  for (const json& jp : doc.at("params")) {
    const ParamKind kind = jp.at("kind").get<std::string>() == "table" ? ParamKind::Table
                                                                       : ParamKind::Dense;
    p.store.add(jp.at("name").get<std::string>(), kind, jp.at("rows").get<Index>(),
                jp.at("cols").get<Index>());
  }
  for (ParamId id = 0; id < p.store.count(); ++id) {
    Matrix& m = p.store.edit(id);
    read_doubles(in, m.data(), static_cast<std::size_t>(m.size()));
  }

  const json& jadam = doc.at("adam");
  ck.adam.t = jadam.at("t").get<std::int64_t>();
  for (const json& jid : jadam.at("dense")) {
    const ParamId id = jid.get<ParamId>();
    AdamState::DenseMoments moments;
    moments.m = Matrix::Zero(p.store.rows(id), p.store.cols(id));
    moments.v = Matrix::Zero(p.store.rows(id), p.store.cols(id));
    read_doubles(in, moments.m.data(), static_cast<std::size_t>(moments.m.size()));
    read_doubles(in, moments.v.data(), static_cast<std::size_t>(moments.v.size()));
    ck.adam.dense.emplace(id, std::move(moments));
  }
  for (auto it = jadam.at("table").begin(); it != jadam.at("table").end(); ++it) {
    const ParamId id = std::stoi(it.key());
    auto& cols = ck.adam.table[id];
    for (const json& jcol : it.value()) {
      const Index col = jcol.get<Index>();
      Vector m = Vector::Zero(p.store.rows(id));
      Vector v = Vector::Zero(p.store.rows(id));
      read_doubles(in, m.data(), static_cast<std::size_t>(m.size()));
      read_doubles(in, v.data(), static_cast<std::size_t>(v.size()));
      cols.emplace(col, std::make_pair(std::move(m), std::move(v)));
    }
  }
  return ck;
}

void verify_compatible(const CheckpointMeta& meta, const AttributeSchema& schema,
                       const InteractionDataset& ds) {
  if (meta.schema_hash != schema.hash()) {
    throw CompatError("checkpoint: schema hash " + meta.schema_hash +
                      " does not match the configured schema " + schema.hash());
  }
  if (meta.n_users != ds.n_users || meta.n_items != ds.n_items) {
    throw CompatError("checkpoint: dataset size mismatch (checkpoint " +
                      std::to_string(meta.n_users) + "x" + std::to_string(meta.n_items) +
                      ", data " + std::to_string(ds.n_users) + "x" + std::to_string(ds.n_items) +
                      ")");
  }
  if (meta.dataset_hash != ds.ids_hash()) {
    throw CompatError("checkpoint: dataset id mapping differs from the configured data");
  }
}

}  // namespace ccfc
