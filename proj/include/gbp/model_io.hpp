#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gbp/energy.hpp"
#include "gbp/presheaf.hpp"
#include "gbp/transform.hpp"

namespace gbp {

// JSON model files. Two mutually exclusive structural forms:
//   {"poset": {"elements": [...], "leq": [[lo,hi],...]},
//    "presheaf": {"sets": {elem: n}, "maps": {"a->b": [idx,...]}}}
//   {"graphical": {"variables": [{"name":..,"card":..},...],
//                  "regions": [{"name":..,"vars":[..]},...]}}
// plus "hamiltonians" {elem: [h,...]} or "factors" {elem: [f,...]} (omitted
// elements default to zeros / ones) and optional "weights" {elem: [w,...]}.
// The string "inf" encodes +infinity in hamiltonian arrays.

using Json = nlohmann::ordered_json;

struct Model {
    Presheaf F;
    FieldBundle H;
    FieldBundle weights;
    bool has_factors = false;
    std::vector<Field> factors;
};

namespace io_detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& path) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        size_t byte = e.byte;
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                         e.what());
    }
}

inline const Json& require(const Json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(ctx + ": missing key '" + key + "'");
    return *it;
}

inline double number_or_inf(const Json& v, const std::string& ctx) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && v.get<std::string>() == "inf") return kInf;
    throw ParseError(ctx + ": expected a number or \"inf\"");
}

inline Field parse_field(const Json& arr, int expected, const std::string& ctx) {
    if (!arr.is_array()) throw ParseError(ctx + ": expected an array");
    if (static_cast<int>(arr.size()) != expected)
        throw ParseError(ctx + ": expected " + std::to_string(expected) + " entries, got " +
                         std::to_string(arr.size()));
    Field out(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) out[i] = number_or_inf(arr[i], ctx);
    return out;
}

// Per-element arrays keyed by element name; missing elements get `fill`.
inline FieldBundle parse_bundle(const Json& j, const Presheaf& F, double fill,
                                const std::string& ctx) {
    FieldBundle out(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) out[a].assign(F.card(a), fill);
    if (!j.is_object()) throw ParseError(ctx + ": expected an object keyed by element name");
    for (auto it = j.begin(); it != j.end(); ++it) {
        int a = F.poset().idx(it.key());
        out[a] = parse_field(it.value(), F.card(a), ctx + "['" + it.key() + "']");
    }
    return out;
}

inline Presheaf presheaf_from_graphical(const Json& g) {
    std::vector<std::pair<std::string, int>> vars;
    for (const auto& v : require(g, "variables", "graphical")) {
        if (!v.is_object()) throw ParseError("graphical.variables: expected objects");
        vars.emplace_back(require(v, "name", "variable").get<std::string>(),
                          require(v, "card", "variable").get<int>());
    }
    std::vector<std::pair<std::string, std::vector<std::string>>> regions;
    for (const auto& r : require(g, "regions", "graphical")) {
        if (!r.is_object()) throw ParseError("graphical.regions: expected objects");
        std::vector<std::string> rv;
        for (const auto& v : require(r, "vars", "region")) rv.push_back(v.get<std::string>());
        regions.emplace_back(require(r, "name", "region").get<std::string>(), std::move(rv));
    }
    return Presheaf::graphical(make_graphical_spec(vars, regions));
}

inline Presheaf presheaf_from_explicit(const Json& j) {
    const Json& jp = require(j, "poset", "model");
    std::vector<std::string> elems;
    for (const auto& e : require(jp, "elements", "poset")) elems.push_back(e.get<std::string>());
    std::vector<std::pair<std::string, std::string>> rel;
    for (const auto& pr : require(jp, "leq", "poset")) {
        if (!pr.is_array() || pr.size() != 2) throw ParseError("poset.leq: expected [lo, hi] pairs");
        rel.emplace_back(pr[0].get<std::string>(), pr[1].get<std::string>());
    }
    Poset P(elems, rel);
    const Json& js = require(j, "presheaf", "model");
    const Json& sets = require(js, "sets", "presheaf");
    std::vector<int> cards(P.size());
    for (int a = 0; a < P.size(); ++a) {
        auto it = sets.find(P.name(a));
        if (it == sets.end())
            throw ParseError("presheaf.sets: missing element '" + P.name(a) + "'");
        cards[a] = it->get<int>();
    }
    const Json& maps = require(js, "maps", "presheaf");
    const auto& prs = P.pairs();
    std::vector<std::vector<int>> arr(prs.size());
    std::vector<bool> seen(prs.size(), false);
    for (auto it = maps.begin(); it != maps.end(); ++it) {
        const std::string& key = it.key();
        size_t pos = key.find("->");
        if (pos == std::string::npos)
            throw ParseError("presheaf.maps: key '" + key + "' is not of the form 'a->b'");
        int a = P.idx(key.substr(0, pos));
        int b = P.idx(key.substr(pos + 2));
        int k = P.pair_index(a, b);  // throws NotComparable for unrelated pairs
        arr[k].clear();
        for (const auto& v : it.value()) arr[k].push_back(v.get<int>());
        seen[k] = true;
    }
    for (size_t k = 0; k < prs.size(); ++k)
        if (!seen[k])
            throw ParseError("presheaf.maps: missing map '" + P.name(prs[k].first) + "->" +
                             P.name(prs[k].second) + "'");
    return Presheaf(P, std::move(cards), std::move(arr));
}

}  // namespace io_detail

inline Model model_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("model: expected a JSON object");
    bool graphical = j.contains("graphical");
    if (graphical && (j.contains("poset") || j.contains("presheaf")))
        throw ParseError("model: give either 'graphical' or 'poset'+'presheaf', not both");
    Presheaf F = graphical ? io_detail::presheaf_from_graphical(j["graphical"])
                           : io_detail::presheaf_from_explicit(j);
    if (j.contains("hamiltonians") && j.contains("factors"))
        throw ParseError("model: give either 'hamiltonians' or 'factors', not both");
    Model m{std::move(F), {}, {}, false, {}};
    if (j.contains("factors")) {
        FieldBundle f = io_detail::parse_bundle(j["factors"], m.F, 1.0, "factors");
        m.factors.assign(f.begin(), f.end());
        m.has_factors = true;
        m.H = hamiltonians_from_factors(m.F, m.factors);
    } else if (j.contains("hamiltonians")) {
        m.H = io_detail::parse_bundle(j["hamiltonians"], m.F, 0.0, "hamiltonians");
    } else {
        m.H = zero_fields(m.F);
    }
    if (j.contains("weights")) {
        m.weights = io_detail::parse_bundle(j["weights"], m.F, 1.0, "weights");
        for (int a = 0; a < m.F.poset().size(); ++a)
            for (double w : m.weights[a])
                if (!(w > 0.0) || std::isinf(w))
                    throw ValidationError("weights must be positive and finite at '" +
                                          m.F.poset().name(a) + "'");
    } else {
        m.weights = unit_weights(m.F);
    }
    return m;
}

inline Model load_model(const std::string& path) {
    return model_from_json(io_detail::parse_json(io_detail::read_file(path), path));
}

// {"observe": {"var": value, ...}} -> (variable index, value) pairs.
inline std::vector<std::pair<int, int>> load_evidence(const std::string& path,
                                                      const GraphicalSpec& spec) {
    Json j = io_detail::parse_json(io_detail::read_file(path), path);
    const Json& obs = io_detail::require(j, "observe", "evidence");
    if (!obs.is_object()) throw ParseError("evidence.observe: expected an object");
    std::vector<std::pair<int, int>> out;
    for (auto it = obs.begin(); it != obs.end(); ++it) {
        if (!it.value().is_number_integer())
            throw ParseError("evidence.observe['" + it.key() + "']: expected an integer");
        out.emplace_back(spec.var_index(it.key()), it.value().get<int>());
    }
    return out;
}

// Beliefs / marginals file: {elem: [p,...]}. Every element must be present.
inline FieldBundle load_field_bundle(const std::string& path, const Presheaf& F) {
    Json j = io_detail::parse_json(io_detail::read_file(path), path);
    if (!j.is_object()) throw ParseError("beliefs: expected a JSON object");
    FieldBundle out(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) {
        auto it = j.find(F.poset().name(a));
        if (it == j.end()) throw ParseError("beliefs: missing element '" + F.poset().name(a) + "'");
        out[a] = io_detail::parse_field(*it, F.card(a), "beliefs['" + F.poset().name(a) + "']");
    }
    return out;
}

struct LoadedTransformation {
    Model source;
    Model target;
    NaturalTransformation phi;
};

// Components of a transformation file, validated against supplied models.
inline NaturalTransformation transformation_with(const std::string& path, const Presheaf& src,
                                                 const Presheaf& tgt) {
    Json j = io_detail::parse_json(io_detail::read_file(path), path);
    const Json& comps = io_detail::require(j, "components", "transformation");
    std::vector<std::vector<int>> c(src.poset().size());
    for (int a = 0; a < src.poset().size(); ++a) {
        auto it = comps.find(src.poset().name(a));
        if (it == comps.end())
            throw ParseError("transformation.components: missing element '" + src.poset().name(a) + "'");
        if (!it->is_array()) throw ParseError("transformation.components: expected arrays of indices");
        for (const auto& v : *it) c[a].push_back(v.get<int>());
    }
    return NaturalTransformation(src, tgt, std::move(c));
}

// {"source": path, "target": path, "components": {elem: [idx,...]}}; paths are
// resolved relative to the transformation file.
inline LoadedTransformation load_transformation(const std::string& path) {
    Json j = io_detail::parse_json(io_detail::read_file(path), path);
    auto resolve = [&](const std::string& rel) {
        std::filesystem::path p(rel);
        if (p.is_absolute()) return p.string();
        return (std::filesystem::path(path).parent_path() / p).string();
    };
    Model src = load_model(resolve(io_detail::require(j, "source", "transformation").get<std::string>()));
    Model tgt = load_model(resolve(io_detail::require(j, "target", "transformation").get<std::string>()));
    NaturalTransformation phi = transformation_with(path, src.F, tgt.F);
    return LoadedTransformation{std::move(src), std::move(tgt), std::move(phi)};
}

// ---- canonical emission (fixed layout, 17-significant-digit floats) ----

namespace io_detail {

inline std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '"' || ch == '\\') {
            out += '\\';
            out += ch;
        } else if (static_cast<unsigned char>(ch) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
            out += buf;
        } else {
            out += ch;
        }
    }
    return out;
}

inline std::string number_token(double v) {
    if (std::isnan(v)) throw ValidationError("cannot serialize NaN");
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v == 0.0 ? 0.0 : v);  // folds -0
    return buf;
}

inline std::string field_token(const Field& f) {
    std::string out = "[";
    for (size_t i = 0; i < f.size(); ++i) {
        if (i) out += ", ";
        out += number_token(f[i]);
    }
    return out + "]";
}

}  // namespace io_detail

// {elem: [x,...]} with elements in declaration order, one per line.
inline std::string bundle_json(const Presheaf& F, const FieldBundle& B) {
    std::string out = "{\n";
    for (int a = 0; a < F.poset().size(); ++a) {
        out += "  \"" + io_detail::escape(F.poset().name(a)) + "\": " +
               io_detail::field_token(B[a]);
        out += (a + 1 < F.poset().size()) ? ",\n" : "\n";
    }
    return out + "}\n";
}

inline std::string beliefs_json(const Presheaf& F, const FieldBundle& beliefs) {
    return bundle_json(F, beliefs);
}

// Explicit-form normal form: graphical structure is expanded, factors are
// folded into hamiltonians, weights always present.
inline std::string canonical_model_json(const Model& m) {
    const Poset& P = m.F.poset();
    std::string out = "{\n  \"poset\": {\"elements\": [";
    for (int a = 0; a < P.size(); ++a) {
        if (a) out += ", ";
        out += "\"" + io_detail::escape(P.name(a)) + "\"";
    }
    out += "], \"leq\": [";
    bool first = true;
    for (int lo = 0; lo < P.size(); ++lo)
        for (int hi = 0; hi < P.size(); ++hi)
            if (lo != hi && P.leq(lo, hi)) {
                if (!first) out += ", ";
                first = false;
                out += "[\"" + io_detail::escape(P.name(lo)) + "\", \"" +
                       io_detail::escape(P.name(hi)) + "\"]";
            }
    out += "]},\n  \"presheaf\": {\"sets\": {";
    for (int a = 0; a < P.size(); ++a) {
        if (a) out += ", ";
        out += "\"" + io_detail::escape(P.name(a)) + "\": " + std::to_string(m.F.card(a));
    }
    out += "}, \"maps\": {";
    const auto& prs = P.pairs();
    for (size_t k = 0; k < prs.size(); ++k) {
        if (k) out += ", ";
        out += "\"" + io_detail::escape(P.name(prs[k].first)) + "->" +
               io_detail::escape(P.name(prs[k].second)) + "\": [";
        const auto& arr = m.F.map_strict(prs[k].first, prs[k].second);
        for (size_t i = 0; i < arr.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(arr[i]);
        }
        out += "]";
    }
    out += "}},\n  \"hamiltonians\": {\n";
    for (int a = 0; a < P.size(); ++a) {
        out += "    \"" + io_detail::escape(P.name(a)) + "\": " + io_detail::field_token(m.H[a]);
        out += (a + 1 < P.size()) ? ",\n" : "\n";
    }
    out += "  },\n  \"weights\": {\n";
    for (int a = 0; a < P.size(); ++a) {
        out += "    \"" + io_detail::escape(P.name(a)) + "\": " +
               io_detail::field_token(m.weights[a]);
        out += (a + 1 < P.size()) ? ",\n" : "\n";
    }
    return out + "  }\n}\n";
}

// {"elements": [...], "mu": [[hi, lo, value] for lo <= hi], "c": {elem: value}}
inline std::string mobius_json(const Poset& P) {
    std::string out = "{\n  \"elements\": [";
    for (int a = 0; a < P.size(); ++a) {
        if (a) out += ", ";
        out += "\"" + io_detail::escape(P.name(a)) + "\"";
    }
    out += "],\n  \"mu\": [";
    bool first = true;
    for (int a = 0; a < P.size(); ++a)
        for (int b = 0; b < P.size(); ++b)
            if (P.leq(b, a)) {
                if (!first) out += ", ";
                first = false;
                out += "[\"" + io_detail::escape(P.name(a)) + "\", \"" +
                       io_detail::escape(P.name(b)) + "\", " + std::to_string(P.mu(a, b)) + "]";
            }
    out += "],\n  \"c\": {";
    for (int a = 0; a < P.size(); ++a) {
        if (a) out += ", ";
        out += "\"" + io_detail::escape(P.name(a)) + "\": " + std::to_string(P.c(a));
    }
    return out + "}\n}\n";
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
}

}  // namespace gbp
