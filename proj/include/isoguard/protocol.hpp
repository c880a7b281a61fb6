#pragma once

// Pieces shared by the protocol models: transaction footprints, the bounded
// scope a protocol is instantiated with, and the client control states.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "isoguard/core.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard {

struct Intent {
  bool read = false;
  bool write = false;

  auto operator<=>(const Intent&) const = default;
};

/// Keys a transaction touches and how.
using Footprint = std::map<Key, Intent>;

inline std::string footprint_to_string(const Footprint& fp) {
  std::string out;
  for (const auto& [k, in] : fp) {
    if (!in.read && !in.write) continue;
    if (!out.empty()) out += ',';
    if (in.read) out += 'r';
    if (in.write) out += 'w';
    out += k;
  }
  return out;
}

/// Parses "rA,wB,rwC".
inline Footprint parse_footprint(const std::string& text) {
  Footprint fp;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) {
      Intent in;
      std::size_t i = 0;
      for (; i < item.size() && (item[i] == 'r' || item[i] == 'w'); ++i) (item[i] == 'r' ? in.read : in.write) = true;
      if (i == 0 || i == item.size()) throw std::invalid_argument("bad footprint item: " + item);
      auto& slot = fp[item.substr(i)];
      slot.read = slot.read || in.read;
      slot.write = slot.write || in.write;
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (fp.empty()) throw std::invalid_argument("empty footprint");
  return fp;
}

/// Every non-empty footprint over `keys` (4^n - 1 of them), in a fixed order.
inline std::vector<Footprint> all_footprints(const std::vector<Key>& keys) {
  std::vector<Footprint> out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < keys.size(); ++i) total *= 4;
  for (std::size_t code = 1; code < total; ++code) {
    Footprint fp;
    std::size_t c = code;
    for (const auto& k : keys) {
      std::size_t d = c % 4;
      c /= 4;
      if (d != 0) fp[k] = Intent{(d & 1) != 0, (d & 2) != 0};
    }
    out.push_back(std::move(fp));
  }
  return out;
}

/// Bounds of one protocol instance.
struct Scope {
  std::vector<ClientId> clients;
  std::vector<Key> keys;
  std::size_t txns_per_client = 1;
  std::size_t value_domain = 1;
  std::uint64_t ts_bound = 9;
  std::size_t depth_bound = 64;
  /// Candidate footprints per client; each transaction of the client picks one
  /// when it prepares.
  std::map<ClientId, std::vector<Footprint>> footprints;

  void validate() const {
    if (clients.empty()) throw std::invalid_argument("scope: at least one client required");
    if (keys.empty()) throw std::invalid_argument("scope: at least one key required");
    if (txns_per_client < 1 || value_domain < 1 || ts_bound < 1 || depth_bound < 1) {
      throw std::invalid_argument("scope: all bounds must be >= 1");
    }
    for (const auto& cl : clients) {
      if (!is_client_id(cl)) throw std::invalid_argument("scope: reserved client id " + cl);
      auto it = footprints.find(cl);
      if (it == footprints.end() || it->second.empty()) {
        throw std::invalid_argument("scope: no footprints for client " + cl);
      }
      for (const auto& fp : it->second) {
        bool any = false;
        for (const auto& [k, in] : fp) {
          if (!std::count(keys.begin(), keys.end(), k)) throw std::invalid_argument("scope: footprint uses unknown key " + k);
          any = any || in.read || in.write;
        }
        if (!any) throw std::invalid_argument("scope: empty footprint for client " + cl);
      }
    }
  }

  const std::vector<Footprint>& candidates(const ClientId& cl) const { return footprints.at(cl); }
};

inline std::vector<Key> key_names(std::size_t n) {
  std::vector<Key> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < 26 ? std::string(1, static_cast<char>('A' + i)) : "K" + std::to_string(i));
  }
  return out;
}

inline std::vector<ClientId> client_names(std::size_t n) {
  std::vector<ClientId> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

/// Scope with clients c1..cn, keys A, B, ... and every footprint allowed.
inline Scope make_scope(std::size_t n_clients, std::size_t n_keys, std::size_t txns_per_client = 1) {
  Scope s;
  s.clients = client_names(n_clients);
  s.keys = key_names(n_keys);
  s.txns_per_client = txns_per_client;
  for (const auto& cl : s.clients) s.footprints[cl] = all_footprints(s.keys);
  return s;
}

inline json to_json(const Scope& s) {
  json fps = json::object();
  for (const auto& [cl, list] : s.footprints) {
    json arr = json::array();
    for (const auto& fp : list) arr.push_back(footprint_to_string(fp));
    fps[cl] = std::move(arr);
  }
  return json{{"clients", s.clients},         {"keys", s.keys},           {"txns_per_client", s.txns_per_client},
              {"value_domain", s.value_domain}, {"ts_bound", s.ts_bound}, {"depth_bound", s.depth_bound},
              {"footprints", fps}};
}

inline Scope scope_from_json(const json& j) {
  Scope s;
  s.clients = j.at("clients").get<std::vector<ClientId>>();
  s.keys = j.at("keys").get<std::vector<Key>>();
  s.txns_per_client = j.value("txns_per_client", std::size_t{1});
  s.value_domain = j.value("value_domain", std::size_t{1});
  s.ts_bound = j.value("ts_bound", std::uint64_t{9});
  s.depth_bound = j.value("depth_bound", std::size_t{64});
  for (const auto& [cl, arr] : j.at("footprints").items()) {
    auto& list = s.footprints[cl];
    for (const auto& fp : arr) list.push_back(parse_footprint(fp.get<std::string>()));
  }
  s.validate();
  return s;
}

/// Values written by the protocols are unique per (transaction, key, choice).
inline Value write_value(const TxId& t, const Key& k, std::size_t choice) {
  Value v = t.cl + "." + std::to_string(t.sn) + ":" + k;
  if (choice > 0) v += "#" + std::to_string(choice);
  return v;
}

enum class ClPhase { Init, Prepared, Committed, Aborted };

inline const char* to_string(ClPhase p) {
  switch (p) {
    case ClPhase::Init: return "cl_init";
    case ClPhase::Prepared: return "cl_prepared";
    case ClPhase::Committed: return "cl_committed";
    case ClPhase::Aborted: return "cl_aborted";
  }
  return "?";
}

}  // namespace isoguard
