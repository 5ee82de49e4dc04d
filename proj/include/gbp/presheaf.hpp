#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gbp/errors.hpp"
#include "gbp/linalg.hpp"
#include "gbp/poset.hpp"

namespace gbp {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Real vector over one finite set F_a.
using Field = std::vector<double>;
// One Field per poset element (beliefs, Hamiltonians, weights...).
using FieldBundle = std::vector<Field>;
// One Field per strict comparable pair (a,b), living over F_b, in the
// poset's canonical a-major pair order.
using MessageBundle = std::vector<Field>;

// Variables with finite domains plus regions (subsets of variables).
// Region states are mixed-radix encoded, little-endian in global variable
// declaration order: the first-declared variable in a region is the least
// significant digit.
struct GraphicalSpec {
    std::vector<std::string> var_names;
    std::vector<int> var_card;
    std::vector<std::string> region_names;
    std::vector<std::vector<int>> region_vars;  // ascending global var indices

    int num_vars() const { return static_cast<int>(var_names.size()); }
    int num_regions() const { return static_cast<int>(region_names.size()); }

    int var_index(const std::string& v) const {
        for (int i = 0; i < num_vars(); ++i)
            if (var_names[i] == v) return i;
        throw UnknownElement("variable '" + v + "'");
    }

    int region_size(int r) const {
        long long s = 1;
        for (int v : region_vars[r]) s *= var_card[v];
        if (s > std::numeric_limits<int>::max()) throw SearchSpaceTooLarge("region too large");
        return static_cast<int>(s);
    }

    // Index of the region state induced by a full per-variable assignment.
    int encode_region(int r, const std::vector<int>& full_state) const {
        int x = 0, mult = 1;
        for (int v : region_vars[r]) {
            x += full_state[v] * mult;
            mult *= var_card[v];
        }
        return x;
    }

    // Per-variable states of region state x (aligned with region_vars[r]).
    std::vector<int> decode_region(int r, int x) const {
        std::vector<int> states;
        states.reserve(region_vars[r].size());
        for (int v : region_vars[r]) {
            states.push_back(x % var_card[v]);
            x /= var_card[v];
        }
        return states;
    }
};

// Helper for building a GraphicalSpec from names.
inline GraphicalSpec make_graphical_spec(
    const std::vector<std::pair<std::string, int>>& variables,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& regions) {
    GraphicalSpec s;
    for (const auto& [name, card] : variables) {
        if (card <= 0) throw ValidationError("variable '" + name + "' has non-positive domain");
        s.var_names.push_back(name);
        s.var_card.push_back(card);
    }
    std::set<std::vector<int>> seen;
    for (const auto& [rname, rvars] : regions) {
        if (rvars.empty()) throw EmptyRegion("region '" + rname + "'");
        std::vector<int> idx;
        for (const auto& v : rvars) idx.push_back(s.var_index(v));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        if (!seen.insert(idx).second) throw DuplicateRegion("region '" + rname + "'");
        s.region_names.push_back(rname);
        s.region_vars.push_back(std::move(idx));
    }
    return s;
}

// Finite-set presheaf: a finite set per poset element, plus index-array maps
// F^a_b for every strict pair b < a (identity on a = a is implicit).
class Presheaf {
public:
    Presheaf() = default;

    Presheaf(Poset poset, std::vector<int> cards,
             std::vector<std::vector<int>> strict_pair_maps)
        : poset_(std::move(poset)), card_(std::move(cards)), maps_(std::move(strict_pair_maps)) {
        validate_structure();
    }

    // Graphical presheaf: poset is region inclusion, maps drop coordinates.
    static Presheaf graphical(const GraphicalSpec& spec) {
        std::vector<std::pair<std::string, std::string>> rels;
        for (int b = 0; b < spec.num_regions(); ++b)
            for (int a = 0; a < spec.num_regions(); ++a)
                if (a != b && std::includes(spec.region_vars[a].begin(), spec.region_vars[a].end(),
                                            spec.region_vars[b].begin(), spec.region_vars[b].end()))
                    rels.emplace_back(spec.region_names[b], spec.region_names[a]);
        Poset p(spec.region_names, rels);
        std::vector<int> cards(p.size());
        for (int a = 0; a < p.size(); ++a) cards[a] = spec.region_size(a);
        std::vector<std::vector<int>> maps(p.pairs().size());
        for (size_t k = 0; k < p.pairs().size(); ++k) {
            auto [a, b] = p.pairs()[k];
            std::vector<int>& arr = maps[k];
            arr.resize(cards[a]);
            std::vector<int> full(spec.num_vars(), 0);
            for (int x = 0; x < cards[a]; ++x) {
                auto st = spec.decode_region(a, x);
                for (size_t i = 0; i < st.size(); ++i) full[spec.region_vars[a][i]] = st[i];
                arr[x] = spec.encode_region(b, full);
            }
        }
        Presheaf F(std::move(p), std::move(cards), std::move(maps));
        F.graphical_ = spec;
        return F;
    }

    const Poset& poset() const { return poset_; }
    int card(int a) const { return card_[a]; }
    const std::vector<int>& cards() const { return card_; }

    // F^a_b applied to one state (b <= a; identity when b == a).
    int apply(int a, int b, int x) const {
        if (a == b) return x;
        return maps_[poset_.pair_index(a, b)][x];
    }
    const std::vector<int>& map_strict(int a, int b) const {
        return maps_[poset_.pair_index(a, b)];
    }

    bool is_graphical() const { return graphical_.has_value(); }
    const GraphicalSpec& graphical_spec() const {
        if (!graphical_) throw ValidationError("model is not graphical");
        return *graphical_;
    }

    bool same_poset(const Presheaf& other) const {
        if (poset_.size() != other.poset_.size()) return false;
        for (int i = 0; i < poset_.size(); ++i) {
            if (poset_.name(i) != other.poset_.name(i)) return false;
            for (int j = 0; j < poset_.size(); ++j)
                if (poset_.leq(i, j) != other.poset_.leq(i, j)) return false;
        }
        return true;
    }

    // Offsets of each element's block in a flattened FieldBundle.
    std::vector<int> field_offsets() const {
        std::vector<int> off(poset_.size() + 1, 0);
        for (int a = 0; a < poset_.size(); ++a) off[a + 1] = off[a] + card_[a];
        return off;
    }
    // Offsets of each pair's block in a flattened MessageBundle.
    std::vector<int> message_offsets() const {
        const auto& prs = poset_.pairs();
        std::vector<int> off(prs.size() + 1, 0);
        for (size_t k = 0; k < prs.size(); ++k) off[k + 1] = off[k] + card_[prs[k].second];
        return off;
    }

private:
    void validate_structure() const {
        if (static_cast<int>(card_.size()) != poset_.size())
            throw ValidationError("set sizes do not cover all poset elements");
        for (int a = 0; a < poset_.size(); ++a)
            if (card_[a] <= 0) throw ValidationError("empty set at '" + poset_.name(a) + "'");
        if (maps_.size() != poset_.pairs().size())
            throw ValidationError("maps do not cover all comparable pairs");
        for (size_t k = 0; k < maps_.size(); ++k) {
            auto [a, b] = poset_.pairs()[k];
            if (static_cast<int>(maps_[k].size()) != card_[a])
                throw ValidationError("map " + poset_.name(a) + "->" + poset_.name(b) +
                                      " has wrong domain size");
            for (int v : maps_[k])
                if (v < 0 || v >= card_[b])
                    throw ValidationError("map " + poset_.name(a) + "->" + poset_.name(b) +
                                          " has out-of-range value");
        }
        // composition coherence on all comparable triples c <= b <= a
        for (int a = 0; a < poset_.size(); ++a)
            for (int b = 0; b < poset_.size(); ++b) {
                if (!poset_.strictly_below(b, a)) continue;
                for (int c = 0; c < poset_.size(); ++c) {
                    if (!poset_.strictly_below(c, b)) continue;
                    for (int x = 0; x < card_[a]; ++x)
                        if (apply(b, c, apply(a, b, x)) != apply(a, c, x))
                            throw ValidationError("maps do not compose on (" + poset_.name(a) +
                                                  "," + poset_.name(b) + "," + poset_.name(c) + ")");
                }
            }
    }

    Poset poset_;
    std::vector<int> card_;
    std::vector<std::vector<int>> maps_;
    std::optional<GraphicalSpec> graphical_;
};

inline FieldBundle zero_fields(const Presheaf& F) {
    FieldBundle v(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) v[a].assign(F.card(a), 0.0);
    return v;
}

inline MessageBundle zero_messages(const Presheaf& F) {
    const auto& prs = F.poset().pairs();
    MessageBundle l(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) l[k].assign(F.card(prs[k].second), 0.0);
    return l;
}

inline FieldBundle unit_weights(const Presheaf& F) {
    FieldBundle w(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) w[a].assign(F.card(a), 1.0);
    return w;
}

// Linearized pushforward F̃^a_b: fiber sums.
inline Field pushforward(const Presheaf& F, int a, int b, const Field& u) {
    if (!F.poset().leq(b, a))
        throw NotComparable(F.poset().name(b) + " <= " + F.poset().name(a) + " does not hold");
    Field out(F.card(b), 0.0);
    for (int x = 0; x < F.card(a); ++x) out[F.apply(a, b, x)] += u[x];
    return out;
}

// Dual map: precomposition with F^a_b.
inline Field pullback(const Presheaf& F, int a, int b, const Field& l) {
    if (!F.poset().leq(b, a))
        throw NotComparable(F.poset().name(b) + " <= " + F.poset().name(a) + " does not hold");
    Field out(F.card(a));
    for (int x = 0; x < F.card(a); ++x) out[x] = l[F.apply(a, b, x)];
    return out;
}

// Adjoint of the pushforward w.r.t. diagonal weighted products:
// result(x) = (w_b(F^a_b x) / w_a(x)) * v(F^a_b x). Unit weights: pullback.
inline Field adjoint(const Presheaf& F, const FieldBundle& w, int a, int b, const Field& v) {
    if (!F.poset().leq(b, a))
        throw NotComparable(F.poset().name(b) + " <= " + F.poset().name(a) + " does not hold");
    Field out(F.card(a));
    for (int x = 0; x < F.card(a); ++x) {
        int y = F.apply(a, b, x);
        out[x] = (w[b][y] / w[a][x]) * v[y];
    }
    return out;
}

// All compatible index tuples (one state per element).
inline std::vector<std::vector<int>> sections(const Presheaf& F, double cap = 1e7) {
    double total = 1.0;
    for (int a = 0; a < F.poset().size(); ++a) total *= F.card(a);
    if (total > cap) throw SearchSpaceTooLarge("section enumeration space exceeds cap");
    std::vector<std::vector<int>> out;
    std::vector<int> tup(F.poset().size(), 0);
    const auto& prs = F.poset().pairs();
    while (true) {
        bool ok = true;
        for (const auto& [a, b] : prs)
            if (F.apply(a, b, tup[a]) != tup[b]) { ok = false; break; }
        if (ok) out.push_back(tup);
        int i = 0;
        for (; i < F.poset().size(); ++i) {
            if (++tup[i] < F.card(i)) break;
            tup[i] = 0;
        }
        if (i == F.poset().size()) break;
    }
    return out;
}

// Orthonormal basis of the vector-space limit {v : pushforward(v_a) = v_b}.
inline std::vector<FieldBundle> linear_sections_basis(const Presheaf& F) {
    auto off = F.field_offsets();
    auto moff = F.message_offsets();
    const auto& prs = F.poset().pairs();
    linalg::Matrix A(moff.back(), off.back());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        for (int x = 0; x < F.card(a); ++x) A.at(moff[k] + F.apply(a, b, x), off[a] + x) += 1.0;
        for (int y = 0; y < F.card(b); ++y) A.at(moff[k] + y, off[b] + y) -= 1.0;
    }
    auto null_rows = linalg::nullspace(A);
    std::vector<FieldBundle> basis;
    for (const auto& row : null_rows) {
        FieldBundle v = zero_fields(F);
        for (int a = 0; a < F.poset().size(); ++a)
            for (int x = 0; x < F.card(a); ++x) v[a][x] = row[off[a] + x];
        basis.push_back(std::move(v));
    }
    return basis;
}

// Max violation of Q being a probabilistic section: negativity, mass != 1,
// or marginalization mismatch across any pair.
inline double section_residual(const Presheaf& F, const FieldBundle& Q) {
    double r = 0.0;
    for (int a = 0; a < F.poset().size(); ++a) {
        double mass = 0.0;
        for (double q : Q[a]) {
            r = std::max(r, -q);
            mass += q;
        }
        r = std::max(r, std::fabs(mass - 1.0));
    }
    for (const auto& [a, b] : F.poset().pairs()) {
        Field p = pushforward(F, a, b, Q[a]);
        for (int y = 0; y < F.card(b); ++y) r = std::max(r, std::fabs(p[y] - Q[b][y]));
    }
    return r;
}

inline bool probabilistic_section_check(const Presheaf& F, const FieldBundle& Q, double tol) {
    return section_residual(F, Q) <= tol;
}

}  // namespace gbp
