#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polaron/common.hpp"
#include "polaron/gibbs.hpp"
#include "polaron/renewal.hpp"

namespace polaron {

using json = nlohmann::json;

// full round-trip precision for every floating-point artifact
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t content_hash(std::string_view bytes) { return fnv1a64(bytes); }

inline std::string content_hash_hex(std::string_view bytes) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(content_hash(bytes)));
    return buf;
}

// ---------------------------------------------------------------- config ---

enum class FieldType { f64, i64, u64, str, f64_list };

struct Field {
    std::string key;
    FieldType type = FieldType::f64;
    std::string default_value;  // empty string + required=true: must be given
    bool required = false;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct Schema {
    std::string subcommand;
    std::vector<Field> fields;
};

struct RunConfig {
    std::string subcommand;
    std::map<std::string, std::string> values;

    const std::string& raw(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw config_error("config: missing key '" + key + "'");
        return it->second;
    }
    double get_f64(const std::string& key) const {
        try {
            std::size_t pos = 0;
            double v = std::stod(raw(key), &pos);
            if (pos != raw(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw config_error("config: key '" + key + "' is not a number: '" + raw(key) + "'");
        }
    }
    long long get_i64(const std::string& key) const {
        try {
            std::size_t pos = 0;
            long long v = std::stoll(raw(key), &pos);
            if (pos != raw(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw config_error("config: key '" + key + "' is not an integer: '" + raw(key) + "'");
        }
    }
    std::uint64_t get_u64(const std::string& key) const {
        try {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(raw(key), &pos);
            if (pos != raw(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw config_error("config: key '" + key + "' is not an unsigned integer: '" + raw(key) + "'");
        }
    }
    std::vector<double> get_f64_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(raw(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw config_error("config: key '" + key + "' has a non-numeric list entry: '" + tok + "'");
            }
        }
        if (out.empty()) throw config_error("config: key '" + key + "' is an empty list");
        return out;
    }
};

inline std::map<std::string, std::string> parse_key_values(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("config: expected 'key = value', got '" + line + "'");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));
        if (key.empty()) throw config_error("config: empty key in line '" + line + "'");
        kv[key] = val;
    }
    return kv;
}

// File values first, flag overrides on top; defaults fill the rest. Unknown
// keys and out-of-range values are rejected by name.
inline RunConfig parse_config(const Schema& schema, const std::map<std::string, std::string>& file_values,
                              const std::map<std::string, std::string>& overrides) {
    RunConfig rc;
    rc.subcommand = schema.subcommand;
    auto known = [&](const std::string& k) {
        for (const auto& f : schema.fields)
            if (f.key == k) return true;
        return false;
    };
    for (const auto& [k, v] : file_values)
        if (!known(k)) throw config_error("config: unknown key '" + k + "' for subcommand " + schema.subcommand);
    for (const auto& [k, v] : overrides)
        if (!known(k)) throw config_error("config: unknown key '" + k + "' for subcommand " + schema.subcommand);
    for (const auto& f : schema.fields) {
        auto ito = overrides.find(f.key);
        auto itf = file_values.find(f.key);
        if (ito != overrides.end())
            rc.values[f.key] = ito->second;
        else if (itf != file_values.end())
            rc.values[f.key] = itf->second;
        else if (!f.default_value.empty() || !f.required)
            rc.values[f.key] = f.default_value;
        else
            throw config_error("config: missing required key '" + f.key + "'");
    }
    // type and range validation
    for (const auto& f : schema.fields) {
        if (rc.values[f.key].empty() && !f.required) continue;
        switch (f.type) {
            case FieldType::f64: {
                double v = rc.get_f64(f.key);
                if (v < f.lo || v > f.hi)
                    throw config_error("config: key '" + f.key + "' out of range [" + fmt17(f.lo) + ", " +
                                       fmt17(f.hi) + "]: " + fmt17(v));
                break;
            }
            case FieldType::i64: {
                double v = double(rc.get_i64(f.key));
                if (v < f.lo || v > f.hi) throw config_error("config: key '" + f.key + "' out of range");
                break;
            }
            case FieldType::u64:
                rc.get_u64(f.key);
                break;
            case FieldType::f64_list:
                rc.get_f64_list(f.key);
                break;
            case FieldType::str:
                break;
        }
    }
    return rc;
}

// effective config as text, reparseable (round-trip idempotent)
inline std::string emit_config(const RunConfig& rc) {
    std::ostringstream os;
    os << "# effective config for " << rc.subcommand << "\n";
    for (const auto& [k, v] : rc.values) os << k << " = " << v << "\n";
    return os.str();
}

// ------------------------------------------------------------- artifacts ---

inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw io_error("write_file_atomic: cannot open " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw io_error("write_file_atomic: short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("write_file_atomic: rename to " + path.string() + " failed: " + ec.message());
}

struct Artifact {
    std::string name;
    std::string content;
};

struct RunResult {
    json config_echo;
    std::string input_hash;
    double wall_clock_s = 0;  // excluded from the reproducibility claim
    std::string status = "ok";
};

// Writes every artifact atomically, then the manifest (name, bytes, content
// hash per artifact) as run_result.json.
inline json write_results(const std::filesystem::path& dir, const RunResult& rr, const std::vector<Artifact>& arts) {
    std::filesystem::create_directories(dir);
    json manifest = json::array();
    for (const auto& a : arts) {
        write_file_atomic(dir / a.name, a.content);
        manifest.push_back({{"name", a.name},
                            {"bytes", a.content.size()},
                            {"hash", content_hash_hex(a.content)}});
    }
    json result = {{"config", rr.config_echo},
                   {"input_hash", rr.input_hash},
                   {"manifest", manifest},
                   {"wall_clock_s", rr.wall_clock_s},
                   {"status", rr.status}};
    write_file_atomic(dir / "run_result.json", result.dump(2) + "\n");
    return result;
}

// ------------------------------------------- mixing configuration JSON ---

inline json mixing_to_json(const MixingConfiguration& mc) {
    json segs = json::array();
    for (const auto& s : mc.segments) {
        if (s.dormant) {
            segs.push_back({{"type", "gap"}, {"length", s.length}});
        } else {
            json ivs = json::array();
            for (const auto& iv : s.cluster.intervals) ivs.push_back({iv.s, iv.t});
            segs.push_back({{"type", "cluster"}, {"intervals", ivs}, {"u", s.u.u}});
        }
    }
    return {{"horizon", mc.horizon}, {"segments", segs}};
}

inline MixingConfiguration mixing_from_json(const json& j) {
    MixingConfiguration mc;
    mc.horizon = j.at("horizon").get<double>();
    for (const auto& s : j.at("segments")) {
        Segment seg;
        if (s.at("type") == "gap") {
            seg.dormant = true;
            seg.length = s.at("length").get<double>();
        } else {
            seg.dormant = false;
            std::vector<Interval> ivs;
            for (const auto& iv : s.at("intervals")) ivs.push_back({iv[0].get<double>(), iv[1].get<double>()});
            seg.cluster = make_cluster(std::move(ivs));
            seg.u.u = s.at("u").get<std::vector<double>>();
            seg.length = seg.cluster.j_length();
        }
        mc.segments.push_back(std::move(seg));
    }
    return mc;
}

// -------------------------------------------------- path binary format ---
// "POLPATH1" | u64 n_paths | u64 n_increments | f64 delta | payload doubles
// (path-major, increment-major, xyz), little-endian.

inline std::string encode_paths(const std::vector<DiscretePath>& paths, double delta) {
    std::string out;
    out.reserve(32 + paths.size() * (paths.empty() ? 0 : paths[0].increments.size()) * 24);
    out.append("POLPATH1");
    auto put_u64 = [&](std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    auto put_f64 = [&](double v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    put_u64(paths.size());
    put_u64(paths.empty() ? 0 : paths[0].increments.size());
    put_f64(delta);
    for (const auto& p : paths) {
        if (!paths.empty() && p.increments.size() != paths[0].increments.size())
            throw io_error("encode_paths: ragged path lengths");
        for (const auto& g : p.increments) {
            put_f64(g.x);
            put_f64(g.y);
            put_f64(g.z);
        }
    }
    return out;
}

inline std::vector<DiscretePath> decode_paths(std::string_view bytes) {
    if (bytes.size() < 32 || bytes.substr(0, 8) != "POLPATH1") throw io_error("decode_paths: bad magic");
    auto get_u64 = [&](std::size_t off) {
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + off, 8);
        return v;
    };
    auto get_f64 = [&](std::size_t off) {
        double v;
        std::memcpy(&v, bytes.data() + off, 8);
        return v;
    };
    std::uint64_t n_paths = get_u64(8), n_inc = get_u64(16);
    double delta = get_f64(24);
    if (bytes.size() != 32 + n_paths * n_inc * 24) throw io_error("decode_paths: truncated payload");
    std::vector<DiscretePath> out(n_paths);
    std::size_t off = 32;
    for (auto& p : out) {
        p.delta = delta;
        p.increments.resize(n_inc);
        for (auto& g : p.increments) {
            g = {get_f64(off), get_f64(off + 8), get_f64(off + 16)};
            off += 24;
        }
    }
    return out;
}

}  // namespace polaron
