#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gbp/energy.hpp"
#include "gbp/oracle.hpp"
#include "gbp/presheaf.hpp"
#include "gbp/rng.hpp"
#include "gbp/transform.hpp"

namespace gbp {

// Randomized instances for property tests: posets, partition presheaves over a
// common universe, coarsenings (always surjective and natural by construction),
// and graphical models on trees and loopy graphs.

inline Poset random_poset(Rng& rng, int n, double p = 0.4) {
    std::vector<std::string> names(n);
    for (int i = 0; i < n; ++i) names[i] = "p" + std::to_string(i);
    std::vector<std::pair<std::string, std::string>> rel;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(p)) rel.emplace_back(names[i], names[j]);
    return Poset(names, rel);
}

namespace detail {
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int x, int y) {
        int rx = find(x), ry = find(y);
        if (rx != ry) parent[rx] = ry;
    }
    int roots(std::vector<int>& out) {
        out.clear();
        for (int u = 0; u < static_cast<int>(parent.size()); ++u)
            if (find(u) == u) out.push_back(u);
        return static_cast<int>(out.size());
    }
};

inline std::vector<int> canonical_labels(UnionFind& uf) {
    const int n = static_cast<int>(uf.parent.size());
    std::vector<int> lab(n);
    std::unordered_map<int, int> seen;
    for (int u = 0; u < n; ++u) {
        int r = uf.find(u);
        auto it = seen.find(r);
        if (it == seen.end()) {
            int id = static_cast<int>(seen.size());
            seen.emplace(r, id);
            lab[u] = id;
        } else {
            lab[u] = it->second;
        }
    }
    return lab;
}

// Merge u,u' whenever they share a block of `finer`.
inline void absorb_partition(UnionFind& uf, const std::vector<int>& finer) {
    std::unordered_map<int, int> rep;
    for (int u = 0; u < static_cast<int>(finer.size()); ++u) {
        auto it = rep.find(finer[u]);
        if (it == rep.end())
            rep.emplace(finer[u], u);
        else
            uf.unite(u, it->second);
    }
}

// Elements ordered by ascending up-set size, so everything above a comes first.
inline std::vector<int> top_down_order(const Poset& P) {
    std::vector<int> order(P.size()), up(P.size(), 0);
    for (int a = 0; a < P.size(); ++a)
        for (int b = 0; b < P.size(); ++b)
            if (P.leq(a, b)) ++up[a];
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return up[i] < up[j]; });
    return order;
}

inline Presheaf presheaf_from_labels(const Poset& P, const std::vector<std::vector<int>>& labels) {
    const int U = static_cast<int>(labels[0].size());
    std::vector<int> cards(P.size());
    for (int a = 0; a < P.size(); ++a) {
        int mx = 0;
        for (int u = 0; u < U; ++u) mx = std::max(mx, labels[a][u]);
        cards[a] = mx + 1;
    }
    const auto& prs = P.pairs();
    std::vector<std::vector<int>> maps(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        maps[k].assign(cards[a], 0);
        for (int u = 0; u < U; ++u) maps[k][labels[a][u]] = labels[b][u];
    }
    return Presheaf(P, std::move(cards), std::move(maps));
}
}  // namespace detail

struct PartitionPresheaf {
    Presheaf F;
    std::vector<std::vector<int>> labels;  // labels[a][u] = block of universe point u at a
};

// Partition presheaf over a universe of `universe` points: each element's set
// is the blocks of a partition, coarsening the partitions of everything above
// it, with maps sending blocks to the blocks containing them.
inline PartitionPresheaf random_partition_presheaf(Rng& rng, const Poset& P, int universe,
                                                   int max_blocks = 6) {
    std::vector<std::vector<int>> labels(P.size());
    for (int a : detail::top_down_order(P)) {
        detail::UnionFind uf(universe);
        for (int b = 0; b < P.size(); ++b)
            if (b != a && P.leq(a, b)) detail::absorb_partition(uf, labels[b]);
        int extra = rng.uniform_int(universe / 2 + 1);
        for (int t = 0; t < extra; ++t)
            uf.unite(rng.uniform_int(universe), rng.uniform_int(universe));
        std::vector<int> roots;
        while (uf.roots(roots) > max_blocks) {
            int i = rng.uniform_int(static_cast<int>(roots.size()));
            int j = rng.uniform_int(static_cast<int>(roots.size()) - 1);
            if (j >= i) ++j;
            uf.unite(roots[i], roots[j]);
        }
        labels[a] = detail::canonical_labels(uf);
    }
    Presheaf F = detail::presheaf_from_labels(P, labels);
    return PartitionPresheaf{std::move(F), std::move(labels)};
}

struct CoarseningResult {
    NaturalTransformation phi;             // F -> G, surjective by construction
    std::vector<std::vector<int>> labels;  // target-side labels over the universe
};

// A random coarser partition presheaf G on the same poset, together with the
// blockwise map F -> G.
inline CoarseningResult random_coarsening(Rng& rng, const Presheaf& F,
                                          const std::vector<std::vector<int>>& labelsF,
                                          int universe) {
    const Poset& P = F.poset();
    std::vector<std::vector<int>> labelsG(P.size());
    for (int a : detail::top_down_order(P)) {
        detail::UnionFind uf(universe);
        detail::absorb_partition(uf, labelsF[a]);
        for (int b = 0; b < P.size(); ++b)
            if (b != a && P.leq(a, b)) detail::absorb_partition(uf, labelsG[b]);
        int extra = rng.uniform_int(3);
        for (int t = 0; t < extra; ++t)
            uf.unite(rng.uniform_int(universe), rng.uniform_int(universe));
        labelsG[a] = detail::canonical_labels(uf);
    }
    Presheaf G = detail::presheaf_from_labels(P, labelsG);
    std::vector<std::vector<int>> comps(P.size());
    for (int a = 0; a < P.size(); ++a) {
        comps[a].assign(F.card(a), 0);
        for (int u = 0; u < universe; ++u) comps[a][labelsF[a][u]] = labelsG[a][u];
    }
    NaturalTransformation phi(F, std::move(G), std::move(comps));
    return CoarseningResult{std::move(phi), std::move(labelsG)};
}

struct GraphicalLabels {
    int universe;
    std::vector<std::vector<int>> labels;  // labels[a][u] = region state of config u
};

// The tautological labeling of a graphical presheaf by full configurations,
// suitable as input to random_coarsening.
inline GraphicalLabels graphical_labels(const Presheaf& F) {
    const GraphicalSpec& spec = F.graphical_spec();
    const int U = static_cast<int>(oracle_total_configs(spec, 1e6));
    std::vector<std::vector<int>> labels(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) labels[a].resize(U);
    detail::ConfigIter it(spec);
    int u = 0;
    do {
        for (int a = 0; a < F.poset().size(); ++a)
            labels[a][u] = spec.encode_region(a, it.digits);
        ++u;
    } while (it.advance());
    return GraphicalLabels{U, std::move(labels)};
}

struct GraphicalModel {
    Presheaf F;
    std::vector<Field> factors;
    FieldBundle H;
};

namespace detail {
inline GraphicalModel graph_model(Rng& rng, int nvars, int card,
                                  const std::vector<std::pair<int, int>>& edges, double beta) {
    std::vector<std::pair<std::string, int>> vars;
    for (int i = 0; i < nvars; ++i) vars.emplace_back("x" + std::to_string(i), card);
    std::vector<std::pair<std::string, std::vector<std::string>>> regions;
    for (int i = 0; i < nvars; ++i)
        regions.emplace_back("v" + std::to_string(i),
                             std::vector<std::string>{"x" + std::to_string(i)});
    for (auto [u, v] : edges)
        regions.emplace_back(
            "e" + std::to_string(u) + "_" + std::to_string(v),
            std::vector<std::string>{"x" + std::to_string(u), "x" + std::to_string(v)});
    GraphicalSpec spec = make_graphical_spec(vars, regions);
    Presheaf F = Presheaf::graphical(spec);
    std::vector<Field> factors(F.poset().size());
    for (int a = 0; a < F.poset().size(); ++a) {
        factors[a].resize(F.card(a));
        for (double& f : factors[a]) f = std::exp(rng.uniform(-beta, beta));
    }
    FieldBundle H = hamiltonians_from_factors(F, factors);
    return GraphicalModel{std::move(F), std::move(factors), std::move(H)};
}
}  // namespace detail

// Random tree-structured pairwise model: singleton regions for every variable
// plus one two-variable region per tree edge.
inline GraphicalModel random_tree_model(Rng& rng, int nvars, int card = 2, double beta = 1.0) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < nvars; ++v) {
        int u = rng.uniform_int(v);
        edges.emplace_back(u, v);
    }
    return detail::graph_model(rng, nvars, card, edges, beta);
}

// Random connected pairwise model whose graph has `extra_edges` independent
// cycles (a spanning tree plus that many chords).
inline GraphicalModel random_loopy_model(Rng& rng, int nvars, int extra_edges, int card = 2,
                                         double beta = 0.3) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < nvars; ++v) edges.emplace_back(rng.uniform_int(v), v);
    int added = 0, guard = 0;
    while (added < extra_edges && ++guard < 1000) {
        int u = rng.uniform_int(nvars), v = rng.uniform_int(nvars);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        bool dup = false;
        for (auto [x, y] : edges)
            if ((x == u && y == v) || (x == v && y == u)) dup = true;
        if (dup) continue;
        edges.emplace_back(u, v);
        ++added;
    }
    if (added < extra_edges) throw ValidationError("could not place the requested chords");
    return detail::graph_model(rng, nvars, card, edges, beta);
}

inline FieldBundle random_hamiltonians(Rng& rng, const Presheaf& F, double lo = -2.0,
                                       double hi = 2.0) {
    FieldBundle H = zero_fields(F);
    for (auto& f : H)
        for (double& x : f) x = rng.uniform(lo, hi);
    return H;
}

// Positive weights with log-uniform spread in [e^-1, e^1].
inline FieldBundle random_weights(Rng& rng, const Presheaf& F) {
    FieldBundle w = unit_weights(F);
    for (auto& f : w)
        for (double& x : f) x = std::exp(rng.uniform(-1.0, 1.0));
    return w;
}

inline MessageBundle random_message_bundle(Rng& rng, const Presheaf& F, double lo = -2.0,
                                           double hi = 2.0) {
    MessageBundle l = zero_messages(F);
    for (auto& f : l)
        for (double& x : f) x = rng.uniform(lo, hi);
    return l;
}

struct LiftedInstance {
    Presheaf F;                 // refined tree model (source)
    NaturalTransformation phi;  // variable-level binning onto the coarse model
    FieldBundle K;              // energies on the target
    FieldBundle HF;             // pullback of K along phi (constant on fibers)
};

// A tree model refined variable by variable: every variable of the coarse
// model splits into one or more fine states via a surjective binning map,
// region components are the product maps, and the energies are pulled back
// along the binning so the coarse model carries the same information.
// Variable-level binnings are exactly the transformations along which
// fixed points transport: region-level mergers that straddle variables
// leave a fiber-count defect in the pushed increment.
inline LiftedInstance make_lifted_instance(Rng& rng, int nvars) {
    std::vector<std::pair<std::string, std::vector<std::string>>> regions;
    for (int i = 0; i < nvars; ++i) regions.push_back({"v" + std::to_string(i), {"x" + std::to_string(i)}});
    for (int v = 1; v < nvars; ++v) {
        int u = rng.uniform_int(v);
        regions.push_back({"e" + std::to_string(u) + "_" + std::to_string(v),
                           {"x" + std::to_string(u), "x" + std::to_string(v)}});
    }

    std::vector<std::pair<std::string, int>> vars_f, vars_g;
    std::vector<std::vector<int>> bins(nvars);  // fine state -> coarse state, per variable
    for (int i = 0; i < nvars; ++i) {
        int card_g = 2 + rng.uniform_int(2);
        int card_f = card_g + 1 + rng.uniform_int(2);
        std::vector<int>& b = bins[i];
        for (int s = 0; s < card_g; ++s) b.push_back(s);  // keeps the map surjective
        for (int s = card_g; s < card_f; ++s) b.push_back(rng.uniform_int(card_g));
        for (int s = card_f - 1; s > 0; --s) std::swap(b[s], b[rng.uniform_int(s + 1)]);
        vars_f.push_back({"x" + std::to_string(i), card_f});
        vars_g.push_back({"x" + std::to_string(i), card_g});
    }

    Presheaf F = Presheaf::graphical(make_graphical_spec(vars_f, regions));
    Presheaf G = Presheaf::graphical(make_graphical_spec(vars_g, regions));
    const GraphicalSpec& sf = F.graphical_spec();
    const GraphicalSpec& sg = G.graphical_spec();

    std::vector<std::vector<int>> comps(F.poset().size());
    std::vector<int> full(nvars, 0);
    for (int a = 0; a < F.poset().size(); ++a) {
        comps[a].resize(F.card(a));
        for (int x = 0; x < F.card(a); ++x) {
            std::vector<int> st = sf.decode_region(a, x);
            for (size_t i = 0; i < st.size(); ++i) full[sf.region_vars[a][i]] = bins[sf.region_vars[a][i]][st[i]];
            comps[a][x] = sg.encode_region(a, full);
        }
    }
    NaturalTransformation phi(F, G, std::move(comps));

    FieldBundle K = random_hamiltonians(rng, G, -1.0, 1.0);
    FieldBundle HF = zero_fields(F);
    for (int a = 0; a < F.poset().size(); ++a)
        for (int x = 0; x < F.card(a); ++x) HF[a][x] = K[a][phi.apply(a, x)];
    return LiftedInstance{std::move(F), std::move(phi), std::move(K), std::move(HF)};
}

}  // namespace gbp
