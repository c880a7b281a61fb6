#pragma once

// Canonical JSON encoding of the abstract model's values. Object keys are
// emitted sorted (nlohmann::json's default object type is an ordered std::map),
// so `dump()` of equal values is byte-identical.

#include <json.hpp>

#include "isoguard/core.hpp"

namespace isoguard {

using json = nlohmann::json;

class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json to_json(const TxId& t) { return json{{"cl", t.cl}, {"sn", t.sn}}; }

inline TxId txid_from_json(const json& j) {
  if (!j.is_object() || !j.contains("cl") || !j.contains("sn")) {
    throw format_error("txid must be an object with \"cl\" and \"sn\": " + j.dump());
  }
  return TxId{j.at("cl").get<std::string>(), j.at("sn").get<std::uint64_t>()};
}

inline json to_json(const Version& v) {
  json readers = json::array();
  for (const auto& r : v.readers) readers.push_back(to_json(r));
  return json{{"value", v.value}, {"writer", to_json(v.writer)}, {"readers", readers}};
}

inline json to_json(const KVStore& kvs) {
  json out = json::object();
  for (const auto& [k, vl] : kvs) {
    json list = json::array();
    for (const auto& v : vl) list.push_back(to_json(v));
    out[k] = std::move(list);
  }
  return out;
}

inline KVStore kvstore_from_json(const json& j) {
  KVStore kvs;
  for (const auto& [k, list] : j.items()) {
    auto& vl = kvs[k];
    for (const auto& v : list) {
      Version ver{v.at("value").get<std::string>(), txid_from_json(v.at("writer")), {}};
      for (const auto& r : v.at("readers")) ver.readers.insert(txid_from_json(r));
      vl.push_back(std::move(ver));
    }
  }
  return kvs;
}

inline json to_json(const View& u) {
  json out = json::object();
  for (const auto& [k, idx] : u) out[k] = json(std::vector<std::size_t>(idx.begin(), idx.end()));
  return out;
}

inline View view_from_json(const json& j) {
  View u;
  for (const auto& [k, idx] : j.items()) {
    auto& s = u[k];
    for (const auto& i : idx) s.insert(i.get<std::size_t>());
  }
  return u;
}

inline json to_json(const Fingerprint& f) {
  json out = json::object();
  for (const auto& [k, ops] : f) {
    if (ops.empty()) continue;
    json e = json::object();
    if (ops.read) e["R"] = *ops.read;
    if (ops.write) e["W"] = *ops.write;
    out[k] = std::move(e);
  }
  return out;
}

inline Fingerprint fingerprint_from_json(const json& j) {
  Fingerprint f;
  for (const auto& [k, e] : j.items()) {
    KeyOps ops;
    if (e.contains("R")) ops.read = e.at("R").get<std::string>();
    if (e.contains("W")) ops.write = e.at("W").get<std::string>();
    f[k] = std::move(ops);
  }
  return f;
}

inline json to_json(const Config& cfg) {
  json views = json::object();
  for (const auto& [cl, u] : cfg.views) views[cl] = to_json(u);
  return json{{"kvs", to_json(cfg.kvs)}, {"views", views}};
}

inline json to_json(const DepEdge& e) {
  return json{{"from", to_json(e.from)}, {"to", to_json(e.to)}, {"kind", to_string(e.kind)}};
}

/// Canonical serialization used for bit-exact comparisons and hashing.
template <class T>
std::string canonical(const T& value) {
  return to_json(value).dump();
}

}  // namespace isoguard
