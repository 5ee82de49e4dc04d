#pragma once

#include <cmath>

#include "gbp/calculus.hpp"
#include "gbp/linalg.hpp"
#include "gbp/presheaf.hpp"

namespace gbp {

// H_a(x) = sum_{b<=a} -ln f_b(F^a_b x). Zero factor entries encode +inf.
inline FieldBundle hamiltonians_from_factors(const Presheaf& F, const FieldBundle& factors) {
    const int n = F.poset().size();
    FieldBundle phi(n);
    for (int a = 0; a < n; ++a) {
        phi[a].resize(F.card(a));
        for (int x = 0; x < F.card(a); ++x) {
            double f = factors[a][x];
            if (f < 0.0) throw NegativeFactor("factor at '" + F.poset().name(a) + "' is negative");
            phi[a][x] = (f == 0.0) ? kInf : -std::log(f);
        }
    }
    FieldBundle H = zero_fields(F);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (!F.poset().leq(b, a)) continue;
            for (int x = 0; x < F.card(a); ++x) H[a][x] += phi[b][F.apply(a, b, x)];
        }
    return H;
}

// Finite-support states must map to finite-support states (masking defines
// a subobject); checked only when masks are present.
inline void validate_support(const Presheaf& F, const FieldBundle& H) {
    bool masked = false;
    for (const auto& h : H)
        for (double v : h) masked |= std::isinf(v);
    if (!masked) return;
    for (const auto& [a, b] : F.poset().pairs())
        for (int x = 0; x < F.card(a); ++x)
            if (!std::isinf(H[a][x]) && std::isinf(H[b][F.apply(a, b, x)]))
                throw ValidationError("masked states are not a subobject across " +
                                      F.poset().name(a) + "->" + F.poset().name(b));
}

// Differential of the local free energy FE_a(h) = <h,H_a> + <h, ln h>:
// result(a)(x) = H_a(x) + ln v_a(x) + 1. Masked states give +inf.
inline FieldBundle fe_differential(const FieldBundle& H, const FieldBundle& v) {
    FieldBundle out(H.size());
    for (size_t a = 0; a < H.size(); ++a) {
        out[a].resize(H[a].size());
        for (size_t x = 0; x < H[a].size(); ++x) {
            if (std::isinf(H[a][x])) {
                out[a][x] = kInf;
                continue;
            }
            if (v[a][x] <= 0.0)
                throw NonPositiveBelief("belief entry <= 0 on a finite-support state");
            out[a][x] = H[a][x] + std::log(v[a][x]) + 1.0;
        }
    }
    return out;
}

// Inverse of fe_differential: result(a)(x) = exp(-H_a(x) + w_a(x) l_a(x) - 1),
// with exp(-inf) = 0 on masked states.
inline FieldBundle g_H(const FieldBundle& H, const FieldBundle& w, const FieldBundle& l) {
    FieldBundle out(H.size());
    for (size_t a = 0; a < H.size(); ++a) {
        out[a].resize(H[a].size());
        for (size_t x = 0; x < H[a].size(); ++x)
            out[a][x] = std::isinf(H[a][x]) ? 0.0 : std::exp(-H[a][x] + w[a][x] * l[a][x] - 1.0);
    }
    return out;
}

inline double entropy(const Field& p) {
    double s = 0.0;
    for (double q : p)
        if (q > 0.0) s -= q * std::log(q);
    return s;
}

// F_Bethe(Q) = sum_a c(a) (E_{Q_a}[H_a] - S(Q_a)); 0*ln 0 = 0 and 0*inf = 0.
// Positive mass on a masked state makes the result +inf.
inline double bethe_free_energy(const Presheaf& F, const FieldBundle& H, const FieldBundle& Q,
                                double norm_tol = 1e-8) {
    double total = 0.0;
    bool masked_mass = false;
    for (int a = 0; a < F.poset().size(); ++a) {
        double mass = 0.0, energy = 0.0, neg_entropy = 0.0;
        for (int x = 0; x < F.card(a); ++x) {
            double q = Q[a][x];
            if (q < -norm_tol) throw NotNormalized("negative belief at '" + F.poset().name(a) + "'");
            mass += q;
            if (q > 0.0) {
                if (std::isinf(H[a][x])) {
                    masked_mass = true;  // infinitely costly regardless of c(a)
                    continue;
                }
                energy += q * H[a][x];
                neg_entropy += q * std::log(q);
            }
        }
        if (std::fabs(mass - 1.0) > norm_tol)
            throw NotNormalized("beliefs at '" + F.poset().name(a) + "' sum to " + std::to_string(mass));
        total += static_cast<double>(F.poset().c(a)) * (energy + neg_entropy);
    }
    return masked_mass ? kInf : total;
}

struct CriticalityResult {
    double r_section;
    double r_critical;
};

// Certifies Q as a Bethe critical point: r_section measures membership in
// the probabilistic sections; r_critical is the least-squares residual of
//   mu_dual_covariant(fe_differential(H,Q)) = d_dual(l) + per-component mass
// over message bundles l and one mass multiplier per comparability
// component (the normalization constraint's Lagrange direction). Masked
// states are excluded from the system (the support subobject carries it).
inline CriticalityResult criticality_residual(const Presheaf& F, const FieldBundle& H,
                                              const FieldBundle& Q, double rank_tol = 1e-10) {
    const int n = F.poset().size();
    CriticalityResult out{section_residual(F, Q), 0.0};

    // indices of finite-support states per element, and row offsets
    std::vector<std::vector<int>> fin(n);
    std::vector<int> roff(n + 1, 0);
    for (int a = 0; a < n; ++a) {
        for (int x = 0; x < F.card(a); ++x)
            if (!std::isinf(H[a][x])) fin[a].push_back(x);
        roff[a + 1] = roff[a] + static_cast<int>(fin[a].size());
    }
    std::vector<std::vector<int>> fin_pos(n);
    for (int a = 0; a < n; ++a) {
        fin_pos[a].assign(F.card(a), -1);
        for (size_t i = 0; i < fin[a].size(); ++i) fin_pos[a][fin[a][i]] = static_cast<int>(i);
    }

    FieldBundle y_bundle = mu_dual_covariant(F, fe_differential(H, Q));
    std::vector<double> y(roff[n]);
    for (int a = 0; a < n; ++a)
        for (size_t i = 0; i < fin[a].size(); ++i) y[roff[a] + i] = y_bundle[a][fin[a][i]];

    // columns: one per finite target state of every pair, plus one mass
    // column per comparability component
    const auto& prs = F.poset().pairs();
    std::vector<int> coff(prs.size() + 1, 0);
    for (size_t k = 0; k < prs.size(); ++k)
        coff[k + 1] = coff[k] + static_cast<int>(fin[prs[k].second].size());
    const auto& comps = F.poset().components();
    const int ncols = coff[prs.size()] + static_cast<int>(comps.size());

    linalg::Matrix A(roff[n], ncols);
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        for (size_t i = 0; i < fin[a].size(); ++i) {
            int x = fin[a][i];
            int pos = fin_pos[b][F.apply(a, b, x)];
            A.at(roff[a] + static_cast<int>(i), coff[k] + pos) += 1.0;
        }
        for (size_t j = 0; j < fin[b].size(); ++j)
            A.at(roff[b] + static_cast<int>(j), coff[k] + static_cast<int>(j)) -= 1.0;
    }
    for (size_t ci = 0; ci < comps.size(); ++ci) {
        int rep = comps[ci][0];
        for (size_t i = 0; i < fin[rep].size(); ++i)
            A.at(roff[rep] + static_cast<int>(i), coff[prs.size()] + static_cast<int>(ci)) = 1.0;
    }

    out.r_critical = linalg::lstsq(std::move(A), std::move(y), rank_tol).residual_norm;
    return out;
}

}  // namespace gbp
