#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gbp/calculus.hpp"
#include "gbp/mp.hpp"
#include "gbp/presheaf.hpp"
#include "gbp/rng.hpp"

namespace gbp {

// Per-element maps phi_a: F_a -> G_a over a shared poset, commuting with
// the presheaf maps. Validated at construction.
struct NaturalTransformation {
    Presheaf source;
    Presheaf target;
    std::vector<std::vector<int>> comps;

    NaturalTransformation(Presheaf F, Presheaf G, std::vector<std::vector<int>> c)
        : source(std::move(F)), target(std::move(G)), comps(std::move(c)) {
        if (!source.same_poset(target))
            throw PosetMismatch("source and target live over different posets");
        const int n = source.poset().size();
        if (static_cast<int>(comps.size()) != n)
            throw ValidationError("transformation components do not cover all elements");
        for (int a = 0; a < n; ++a) {
            if (static_cast<int>(comps[a].size()) != source.card(a))
                throw ValidationError("component at '" + source.poset().name(a) +
                                      "' has wrong domain size");
            for (int v : comps[a])
                if (v < 0 || v >= target.card(a))
                    throw ValidationError("component at '" + source.poset().name(a) +
                                          "' has out-of-range value");
        }
        for (const auto& [a, b] : source.poset().pairs())
            for (int x = 0; x < source.card(a); ++x)
                if (target.apply(a, b, comps[a][x]) != comps[b][source.apply(a, b, x)])
                    throw NaturalityFailed("square " + source.poset().name(a) + "->" +
                                           source.poset().name(b) + " does not commute");
    }

    int apply(int a, int x) const { return comps[a][x]; }

    bool is_surjective() const {
        for (int a = 0; a < source.poset().size(); ++a) {
            std::vector<bool> hit(target.card(a), false);
            for (int v : comps[a]) hit[v] = true;
            for (bool h : hit)
                if (!h) return false;
        }
        return true;
    }
};

inline bool validate(const NaturalTransformation& phi) {
    for (const auto& [a, b] : phi.source.poset().pairs())
        for (int x = 0; x < phi.source.card(a); ++x)
            if (phi.target.apply(a, b, phi.comps[a][x]) != phi.comps[b][phi.source.apply(a, b, x)])
                return false;
    return true;
}

// Fiber sums at one element.
inline Field push_vector(const NaturalTransformation& phi, int a, const Field& u) {
    Field out(phi.target.card(a), 0.0);
    for (int x = 0; x < phi.source.card(a); ++x) out[phi.apply(a, x)] += u[x];
    return out;
}

// Adjoint of push_vector w.r.t. weighted products on both sides:
// result(x) = (w_G(phi x) / w_F(x)) * v(phi x).
inline Field phi_adjoint(const NaturalTransformation& phi, const FieldBundle& wF,
                         const FieldBundle& wG, int a, const Field& v) {
    Field out(phi.source.card(a));
    for (int x = 0; x < phi.source.card(a); ++x) {
        int y = phi.apply(a, x);
        out[x] = (wG[a][y] / wF[a][x]) * v[y];
    }
    return out;
}

// Fiber sizes on the source: the weights that make phi_adjoint a section of
// push_vector (push o adjoint = id on the image).
inline FieldBundle phi_weights(const NaturalTransformation& phi) {
    const int n = phi.source.poset().size();
    FieldBundle w(n);
    for (int a = 0; a < n; ++a) {
        Field fib(phi.target.card(a), 0.0);
        for (int x = 0; x < phi.source.card(a); ++x) fib[phi.apply(a, x)] += 1.0;
        w[a].resize(phi.source.card(a));
        for (int x = 0; x < phi.source.card(a); ++x) w[a][x] = fib[phi.apply(a, x)];
    }
    return w;
}

// Generalization carrying target weights along: w_F(x) = fiber * w_G(phi x).
inline FieldBundle phi_weights_for(const NaturalTransformation& phi, const FieldBundle& wG) {
    FieldBundle w = phi_weights(phi);
    for (int a = 0; a < phi.source.poset().size(); ++a)
        for (int x = 0; x < phi.source.card(a); ++x) w[a][x] *= wG[a][phi.apply(a, x)];
    return w;
}

// Binned energies: per-fiber log-sum-exp, +inf outside the image.
inline FieldBundle push_hamiltonian(const NaturalTransformation& phi, const FieldBundle& H) {
    const int n = phi.source.poset().size();
    FieldBundle out(n);
    for (int a = 0; a < n; ++a) {
        Field mx(phi.target.card(a), -kInf);
        for (int x = 0; x < phi.source.card(a); ++x)
            mx[phi.apply(a, x)] = std::max(mx[phi.apply(a, x)], -H[a][x]);
        Field sum(phi.target.card(a), 0.0);
        for (int x = 0; x < phi.source.card(a); ++x) {
            int y = phi.apply(a, x);
            if (!std::isinf(mx[y])) sum[y] += std::exp(-H[a][x] - mx[y]);
        }
        out[a].assign(phi.target.card(a), kInf);
        for (int y = 0; y < phi.target.card(a); ++y)
            if (!std::isinf(mx[y])) out[a][y] = -(mx[y] + std::log(sum[y]));
    }
    return out;
}

// phi_1 on message bundles: push at the target component of each pair.
inline MessageBundle push_messages(const NaturalTransformation& phi, const MessageBundle& l) {
    const auto& prs = phi.source.poset().pairs();
    MessageBundle out(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        int b = prs[k].second;
        out[k] = push_vector(phi, b, l[k]);
    }
    return out;
}

// phi_1 dagger: adjoint at the target component of each pair.
inline MessageBundle lift_messages(const NaturalTransformation& phi, const FieldBundle& wF,
                                   const FieldBundle& wG, const MessageBundle& l) {
    const auto& prs = phi.source.poset().pairs();
    MessageBundle out(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        int b = prs[k].second;
        out[k] = phi_adjoint(phi, wF, wG, b, l[k]);
    }
    return out;
}

inline NaturalTransformation compose(const NaturalTransformation& phi,
                                     const NaturalTransformation& psi) {
    if (!phi.target.same_poset(psi.source) || phi.target.cards() != psi.source.cards())
        throw Mismatch("inner presheaves do not agree");
    for (const auto& [a, b] : phi.target.poset().pairs())
        if (phi.target.map_strict(a, b) != psi.source.map_strict(a, b))
            throw Mismatch("inner presheaf maps do not agree on " + phi.target.poset().name(a) +
                           "->" + phi.target.poset().name(b));
    std::vector<std::vector<int>> comps(phi.comps.size());
    for (size_t a = 0; a < comps.size(); ++a) {
        comps[a].resize(phi.comps[a].size());
        for (size_t x = 0; x < comps[a].size(); ++x)
            comps[a][x] = psi.comps[a][phi.comps[a][x]];
    }
    return NaturalTransformation(phi.source, psi.target, std::move(comps));
}

struct ImageSubpresheaf {
    Presheaf image;
    NaturalTransformation embedding;  // image -> target
};

// The image im(phi) restricted from the target, with its inclusion.
inline ImageSubpresheaf image_subpresheaf(const NaturalTransformation& phi) {
    const int n = phi.source.poset().size();
    std::vector<std::vector<int>> states(n);   // image states, ascending
    std::vector<std::vector<int>> pos(n);      // target state -> image index
    for (int a = 0; a < n; ++a) {
        pos[a].assign(phi.target.card(a), -1);
        std::vector<bool> hit(phi.target.card(a), false);
        for (int x = 0; x < phi.source.card(a); ++x) hit[phi.apply(a, x)] = true;
        for (int y = 0; y < phi.target.card(a); ++y)
            if (hit[y]) {
                pos[a][y] = static_cast<int>(states[a].size());
                states[a].push_back(y);
            }
    }
    std::vector<int> cards(n);
    for (int a = 0; a < n; ++a) cards[a] = static_cast<int>(states[a].size());
    const auto& prs = phi.source.poset().pairs();
    std::vector<std::vector<int>> maps(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        maps[k].resize(cards[a]);
        for (int i = 0; i < cards[a]; ++i)
            maps[k][i] = pos[b][phi.target.apply(a, b, states[a][i])];
    }
    Presheaf im(phi.source.poset(), std::move(cards), std::move(maps));
    std::vector<std::vector<int>> emb(n);
    for (int a = 0; a < n; ++a) emb[a] = states[a];
    return ImageSubpresheaf{im, NaturalTransformation(im, phi.target, std::move(emb))};
}

namespace detail {
inline MessageBundle random_bundle(const Presheaf& F, Rng& rng, double lo, double hi) {
    MessageBundle l = zero_messages(F);
    for (auto& f : l)
        for (auto& x : f) x = rng.uniform(lo, hi);
    return l;
}

inline double rel_sup_diff(const MessageBundle& u, const MessageBundle& v) {
    double diff = 0.0, scale = 1.0;
    for (size_t k = 0; k < u.size(); ++k)
        for (size_t i = 0; i < u[k].size(); ++i) {
            diff = std::max(diff, std::fabs(u[k][i] - v[k][i]));
            scale = std::max({scale, std::fabs(u[k][i]), std::fabs(v[k][i])});
        }
    return diff / scale;
}
}  // namespace detail

// Intertwining of the increment: the binned increment against the lifted,
// advanced, re-pushed one, over random message bundles on the target.
// Holds for arbitrary positive diagonal weights on both sides. Residuals
// are sup-norm relative to max(1, |lhs|, |rhs|).
inline double check_theorem1(const NaturalTransformation& phi, const FieldBundle& H,
                             const FieldBundle& wF, const FieldBundle& wG, int trials, Rng& rng) {
    if (!validate(phi)) throw NaturalityFailed("transformation does not commute");
    FieldBundle Ht = push_hamiltonian(phi, H);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        MessageBundle lG = detail::random_bundle(phi.target, rng, -2.0, 2.0);
        MessageBundle lhs = delta_mp(phi.target, Ht, wG, lG);
        MessageBundle lF = lift_messages(phi, wF, wG, lG);
        MessageBundle rhs = push_messages(phi, delta_mp(phi.source, H, wF, lF));
        worst = std::max(worst, detail::rel_sup_diff(lhs, rhs));
    }
    return worst;
}

struct IsometryResult {
    double push_adjoint_residual;      // |push(adjoint(v)) - v| on im(phi)
    double product_residual;           // |<adj f, adj g>_phi - <f,g>| on im(phi)
    bool push_adjoint_identity;
    bool product_preserved;
};

// The phi-weighted product makes the adjoint a right inverse of the push and
// an isometry on the image.
inline IsometryResult check_isometry(const NaturalTransformation& phi, const FieldBundle& wG,
                                     int trials, Rng& rng, double tol = 1e-12) {
    FieldBundle wF = phi_weights_for(phi, wG);
    const int n = phi.source.poset().size();
    std::vector<std::vector<bool>> on_image(n);
    for (int a = 0; a < n; ++a) {
        on_image[a].assign(phi.target.card(a), false);
        for (int x = 0; x < phi.source.card(a); ++x) on_image[a][phi.apply(a, x)] = true;
    }
    auto random_image_field = [&](int a) {
        Field v(phi.target.card(a));
        for (int y = 0; y < phi.target.card(a); ++y)
            v[y] = on_image[a][y] ? rng.uniform(-2.0, 2.0) : 0.0;
        return v;
    };
    IsometryResult res{0.0, 0.0, false, false};
    for (int t = 0; t < trials; ++t)
        for (int a = 0; a < n; ++a) {
            Field f = random_image_field(a), g = random_image_field(a);
            Field roundtrip = push_vector(phi, a, phi_adjoint(phi, wF, wG, a, f));
            for (int y = 0; y < phi.target.card(a); ++y)
                if (on_image[a][y])
                    res.push_adjoint_residual =
                        std::max(res.push_adjoint_residual, std::fabs(roundtrip[y] - f[y]));
            double lhs = inner_field(wF[a], phi_adjoint(phi, wF, wG, a, f),
                                     phi_adjoint(phi, wF, wG, a, g));
            double rhs = inner_field(wG[a], f, g);
            res.product_residual = std::max(res.product_residual, std::fabs(lhs - rhs));
        }
    res.push_adjoint_identity = res.push_adjoint_residual <= tol;
    res.product_preserved = res.product_residual <= tol;
    return res;
}

// Full-map intertwining under surjectivity with the phi-weighted product on
// the source and the standard product on the target.
inline double check_theorem3(const NaturalTransformation& phi, const FieldBundle& H, int trials,
                             Rng& rng) {
    if (!phi.is_surjective()) throw NotSurjective("full-map intertwining needs surjective components");
    FieldBundle wF = phi_weights(phi);
    FieldBundle wG = unit_weights(phi.target);
    FieldBundle Ht = push_hamiltonian(phi, H);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        MessageBundle lG = detail::random_bundle(phi.target, rng, -2.0, 2.0);
        MessageBundle lhs = mp_step(phi.target, Ht, wG, lG, 1.0);
        MessageBundle lF = lift_messages(phi, wF, wG, lG);
        MessageBundle rhs = push_messages(phi, mp_step(phi.source, H, wF, lF, 1.0));
        worst = std::max(worst, detail::rel_sup_diff(lhs, rhs));
    }
    return worst;
}

}  // namespace gbp
