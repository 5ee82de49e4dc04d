#pragma once

#include "gbp/presheaf.hpp"

namespace gbp {

// delta(v)(a->b) = pushforward(v_a) - v_b.
inline MessageBundle delta(const Presheaf& F, const FieldBundle& v) {
    const auto& prs = F.poset().pairs();
    MessageBundle out(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        out[k] = pushforward(F, a, b, v[a]);
        for (int y = 0; y < F.card(b); ++y) out[k][y] -= v[b][y];
    }
    return out;
}

// d_dual(l)(a) = sum_{b<a} adjoint(l_{a->b}) - sum_{b>a} l_{b->a}: the
// adjoint of delta w.r.t. the weighted products.
inline FieldBundle d_dual(const Presheaf& F, const FieldBundle& w, const MessageBundle& l) {
    FieldBundle out = zero_fields(F);
    const auto& prs = F.poset().pairs();
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        Field adj = adjoint(F, w, a, b, l[k]);
        for (int x = 0; x < F.card(a); ++x) out[a][x] += adj[x];
        for (int y = 0; y < F.card(b); ++y) out[b][y] -= l[k][y];
    }
    return out;
}

// zeta_functor(v)(a) = sum_{b<=a} adjoint-transport of v_b (b=a term is v_a).
inline FieldBundle zeta_functor(const Presheaf& F, const FieldBundle& w, const FieldBundle& v) {
    const int n = F.poset().size();
    FieldBundle out(n);
    for (int a = 0; a < n; ++a) {
        out[a] = v[a];
        for (int b = 0; b < n; ++b) {
            if (b == a || !F.poset().leq(b, a)) continue;
            Field adj = adjoint(F, w, a, b, v[b]);
            for (int x = 0; x < F.card(a); ++x) out[a][x] += adj[x];
        }
    }
    return out;
}

// mu_functor(v)(a) = sum_{b<=a} mu(a,b) * adjoint-transport of v_b;
// inverse of zeta_functor at the same weights.
inline FieldBundle mu_functor(const Presheaf& F, const FieldBundle& w, const FieldBundle& v) {
    const int n = F.poset().size();
    FieldBundle out = zero_fields(F);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (!F.poset().leq(b, a)) continue;
            double mu = static_cast<double>(F.poset().mu(a, b));
            if (mu == 0.0) continue;
            if (b == a) {
                for (int x = 0; x < F.card(a); ++x) out[a][x] += mu * v[a][x];
            } else {
                Field adj = adjoint(F, w, a, b, v[b]);
                for (int x = 0; x < F.card(a); ++x) out[a][x] += mu * adj[x];
            }
        }
    }
    return out;
}

// mu_dual_covariant(v)(a)(x) = sum_{b<=a} mu(a,b) * v_b(F^a_b(x)):
// Möbius inversion with plain pullback transport.
inline FieldBundle mu_dual_covariant(const Presheaf& F, const FieldBundle& v) {
    const int n = F.poset().size();
    FieldBundle out = zero_fields(F);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (!F.poset().leq(b, a)) continue;
            double mu = static_cast<double>(F.poset().mu(a, b));
            if (mu == 0.0) continue;
            for (int x = 0; x < F.card(a); ++x) out[a][x] += mu * v[b][F.apply(a, b, x)];
        }
    return out;
}

// zeta with pullback transport (inverse of mu_dual_covariant).
inline FieldBundle zeta_dual_covariant(const Presheaf& F, const FieldBundle& v) {
    const int n = F.poset().size();
    FieldBundle out = zero_fields(F);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (!F.poset().leq(b, a)) continue;
            for (int x = 0; x < F.card(a); ++x) out[a][x] += v[b][F.apply(a, b, x)];
        }
    return out;
}

// Telescoped form of zeta_functor(-d_dual(l)): at each a, the weighted sum
// of messages l_{p->q} over pairs crossing into a (q <= a, p not<= a).
// Interior pairs cancel; only crossing terms survive.
inline FieldBundle crossing_sums(const Presheaf& F, const FieldBundle& w, const MessageBundle& l) {
    const int n = F.poset().size();
    FieldBundle out = zero_fields(F);
    const auto& prs = F.poset().pairs();
    for (int a = 0; a < n; ++a)
        for (size_t k = 0; k < prs.size(); ++k) {
            auto [p, q] = prs[k];
            if (!F.poset().leq(q, a) || F.poset().leq(p, a)) continue;
            for (int x = 0; x < F.card(a); ++x) {
                int y = F.apply(a, q, x);
                out[a][x] += (w[q][y] / w[a][x]) * l[k][y];
            }
        }
    return out;
}

// Weighted inner products.
inline double inner_field(const Field& w, const Field& u, const Field& v) {
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += w[i] * u[i] * v[i];
    return s;
}

inline double inner_fields(const FieldBundle& w, const FieldBundle& u, const FieldBundle& v) {
    double s = 0.0;
    for (size_t a = 0; a < u.size(); ++a) s += inner_field(w[a], u[a], v[a]);
    return s;
}

// Pairing on message bundles: per-pair product weighted by the target w_b.
inline double inner_messages(const Presheaf& F, const FieldBundle& w, const MessageBundle& l,
                             const MessageBundle& m) {
    const auto& prs = F.poset().pairs();
    double s = 0.0;
    for (size_t k = 0; k < prs.size(); ++k) s += inner_field(w[prs[k].second], l[k], m[k]);
    return s;
}

inline double sup_norm(const FieldBundle& v) {
    double r = 0.0;
    for (const auto& f : v)
        for (double x : f) r = std::max(r, std::fabs(x));
    return r;
}

inline double sup_diff(const MessageBundle& l, const MessageBundle& m) {
    double r = 0.0;
    for (size_t k = 0; k < l.size(); ++k)
        for (size_t i = 0; i < l[k].size(); ++i) {
            double a = l[k][i], b = m[k][i];
            if (a == b) continue;  // covers matched -inf entries
            r = std::max(r, std::fabs(a - b));
        }
    return r;
}

}  // namespace gbp
