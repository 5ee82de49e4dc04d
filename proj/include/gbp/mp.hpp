#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gbp/bp.hpp"
#include "gbp/calculus.hpp"
#include "gbp/energy.hpp"
#include "gbp/linalg.hpp"
#include "gbp/presheaf.hpp"

namespace gbp {

namespace detail {
// Log-scale inner state s_a = -H_a + w_a * u_a - 1 with u the crossing sums;
// exp(s) is the unnormalized belief bundle the increment differences.
inline FieldBundle mp_log_state(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                                const MessageBundle& l) {
    FieldBundle u = crossing_sums(F, w, l);
    FieldBundle s(u.size());
    for (size_t a = 0; a < u.size(); ++a) {
        s[a].resize(u[a].size());
        for (size_t x = 0; x < u[a].size(); ++x)
            s[a][x] = std::isinf(H[a][x]) ? -kInf : -H[a][x] + w[a][x] * u[a][x] - 1.0;
    }
    return s;
}
}  // namespace detail

// The increment: pushforward of the unnormalized beliefs minus their target
// value, per pair. Evaluated per pair with a shared max-shift over both
// terms so the subtraction stays exact while the exponentials stay bounded.
inline MessageBundle delta_mp(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                              const MessageBundle& l) {
    FieldBundle s = detail::mp_log_state(F, H, w, l);
    const auto& prs = F.poset().pairs();
    MessageBundle out(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        double shift = -kInf;
        for (int x = 0; x < F.card(a); ++x) shift = std::max(shift, s[a][x]);
        for (int y = 0; y < F.card(b); ++y) shift = std::max(shift, s[b][y]);
        out[k].assign(F.card(b), 0.0);
        if (std::isinf(shift) && shift < 0) continue;  // everything masked
        Field pushed(F.card(b), 0.0);
        for (int x = 0; x < F.card(a); ++x)
            pushed[F.apply(a, b, x)] += std::exp(s[a][x] - shift);
        double scale = std::exp(shift);
        for (int y = 0; y < F.card(b); ++y) {
            double diff = pushed[y] - std::exp(s[b][y] - shift);
            out[k][y] = (diff == 0.0) ? 0.0 : scale * diff;
        }
    }
    return out;
}

inline MessageBundle mp_step(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                             const MessageBundle& l, double damping) {
    MessageBundle dm = delta_mp(F, H, w, l);
    MessageBundle out = l;
    for (size_t k = 0; k < out.size(); ++k)
        for (size_t y = 0; y < out[k].size(); ++y) out[k][y] += damping * dm[k][y];
    return out;
}

// Normalized beliefs of the current messages.
inline FieldBundle beliefs_mp(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                              const MessageBundle& l) {
    FieldBundle s = detail::mp_log_state(F, H, w, l);
    FieldBundle out(s.size());
    for (size_t a = 0; a < s.size(); ++a) {
        double z = log_sum_exp(s[a]);
        if (std::isinf(z) && z < 0)
            throw AllMassMasked("all states of '" + F.poset().name(static_cast<int>(a)) + "' have zero mass");
        out[a].resize(s[a].size());
        for (size_t x = 0; x < s[a].size(); ++x) out[a][x] = std::exp(s[a][x] - z);
    }
    return out;
}

namespace detail {
// Increment per pair, divided by the larger of the two element masses. The
// fixed-point equation is invariant under a global mass rescaling, and the
// absolute increment vanishes spuriously when all masses drift toward zero,
// so both the stopping rule and the refinement objective must be measured
// relative to mass. Computed with the larger log-mass as the shift so the
// exponentials stay in [0, 1].
inline double mp_scaled_increment(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                                  const MessageBundle& l, MessageBundle& out) {
    FieldBundle s = mp_log_state(F, H, w, l);
    const int n = F.poset().size();
    std::vector<double> lz(n);
    for (int a = 0; a < n; ++a) lz[a] = log_sum_exp(s[a]);
    const auto& prs = F.poset().pairs();
    out.resize(prs.size());
    double rel = 0.0;
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        out[k].assign(F.card(b), 0.0);
        double shift = std::max(lz[a], lz[b]);
        if (std::isinf(shift) && shift < 0) continue;  // both sides fully masked
        for (int x = 0; x < F.card(a); ++x) out[k][F.apply(a, b, x)] += std::exp(s[a][x] - shift);
        for (int y = 0; y < F.card(b); ++y) {
            out[k][y] -= std::exp(s[b][y] - shift);
            rel = std::max(rel, std::fabs(out[k][y]));
        }
    }
    return rel;
}
}  // namespace detail

struct TransferResult {
    MessageBundle messages;
    double calibration_residual;  // 2-norm obstruction; zero iff transferable
};

// BP fixed points carry per-element normalization constants that the MP
// fixed-point equation does not tolerate. Normalize per pair, then solve the
// small least-squares system for per-pair shifts gamma and per-component
// constants kappa with (sum of gamma crossing into a) + ln Z_a = kappa_C(a).
// The residual is the obstruction: it vanishes on trees and on graphs whose
// comparability components have nonzero total overcounting.
inline TransferResult transfer_bp_to_mp(const Presheaf& F, const FieldBundle& H,
                                        const MessageBundle& log_m) {
    MessageBundle lm = normalize_log_messages(log_m);
    FieldBundle lb = log_beliefs_bp(F, H, lm);
    const int n = F.poset().size();
    std::vector<double> lnZ(n);
    for (int a = 0; a < n; ++a) lnZ[a] = log_sum_exp(lb[a]);

    const auto& prs = F.poset().pairs();
    const auto& comps = F.poset().components();
    linalg::Matrix A(n, static_cast<int>(prs.size() + comps.size()));
    for (int a = 0; a < n; ++a) {
        for (size_t k = 0; k < prs.size(); ++k) {
            auto [p, q] = prs[k];
            if (F.poset().leq(q, a) && !F.poset().leq(p, a)) A.at(a, static_cast<int>(k)) = 1.0;
        }
        for (size_t ci = 0; ci < comps.size(); ++ci)
            for (int e : comps[ci])
                if (e == a) A.at(a, static_cast<int>(prs.size() + ci)) = -1.0;
    }
    std::vector<double> rhs(n);
    for (int a = 0; a < n; ++a) rhs[a] = -lnZ[a];
    auto sol = linalg::lstsq(A, rhs, 1e-12);

    TransferResult out;
    out.messages = std::move(lm);
    for (size_t k = 0; k < prs.size(); ++k)
        for (auto& v : out.messages[k]) v += sol.x[k];
    std::vector<double> fit = linalg::matvec(A, sol.x);
    double res = 0.0;
    for (int a = 0; a < n; ++a) res += (fit[a] - rhs[a]) * (fit[a] - rhs[a]);
    out.calibration_residual = std::sqrt(res);
    return out;
}

// MP messages are BP log-messages as they stand.
inline MessageBundle transfer_mp_to_bp(const MessageBundle& l) { return l; }

struct MpResult {
    MessageBundle messages;
    FieldBundle beliefs;
    bool converged = false;
    int iterations = 0;
    double last_delta = 0.0;  // final mass-relative increment norm
    std::vector<std::pair<double, double>> trace;  // (relative increment norm, Bethe energy)
};

// Solves the fixed-point equation in two phases per attempt: a damped
// iteration on the mass-relative increment (tracking the best iterate seen),
// then Gauss-Newton with backtracking on the stacked relative increment. The
// equation also has exact fixed points on the boundary of the positive cone
// (some belief entries collapse to zero) whose beliefs differ from the
// interior ones; a converged attempt whose unmasked beliefs collapse is
// retried, and only kept if every restart lands on the boundary as well.
// The first retry is seeded by transferring the fixed point of the damped
// log-domain iteration (rescaled to the requested weights), which sits at
// the interior point whenever that iteration converges; later retries use
// seeded random starts.
inline MpResult mp_run(const Presheaf& F, const FieldBundle& H, const FieldBundle& w,
                       const RunOptions& opt, const MessageBundle* init = nullptr) {
    constexpr int kRestarts = 6;
    constexpr int kGnIters = 80;
    constexpr int kStallLimit = 30;
    constexpr double kCollapseTol = 1e-9;
    const int phase1_iters = std::min(opt.max_iters, 300);

    const auto& prs = F.poset().pairs();
    int dim = 0;
    for (const auto& pr : prs) dim += F.card(pr.second);
    const bool use_gn = dim > 0 && dim <= 600;

    auto flatten = [&](const MessageBundle& m) {
        std::vector<double> x;
        x.reserve(dim);
        for (const auto& f : m) x.insert(x.end(), f.begin(), f.end());
        return x;
    };
    auto unflatten = [&](const std::vector<double>& x) {
        MessageBundle m(prs.size());
        size_t i = 0;
        for (size_t k = 0; k < prs.size(); ++k) {
            m[k].assign(x.begin() + i, x.begin() + i + F.card(prs[k].second));
            i += F.card(prs[k].second);
        }
        return m;
    };

    MpResult res;
    MpResult fallback;  // best collapsed / non-converged attempt, reported if nothing better
    double fallback_rel = kInf;
    Rng restart_rng(opt.seed ^ 0x5bf0a8b1e3c2d47fULL);

    for (int attempt = 0; attempt < kRestarts; ++attempt) {
        MessageBundle l;
        bool have_init = false;
        if (attempt == 0) {
            l = init ? *init : initial_messages(F, opt);
            have_init = true;
        } else if (attempt == 1) {
            try {
                RunOptions bopt = opt;
                bopt.random_init = false;
                bopt.tol = std::max(opt.tol, 1e-10);
                BpResult bp = bp_run(F, H, bopt);
                if (bp.converged) {
                    TransferResult tr = transfer_bp_to_mp(F, H, bp.log_messages);
                    l = std::move(tr.messages);
                    for (size_t k = 0; k < prs.size(); ++k) {
                        int b = prs[k].second;
                        for (int y = 0; y < F.card(b); ++y) l[k][y] /= w[b][y];
                    }
                    have_init = true;
                }
            } catch (const Error&) {
                // fall through to a random start
            }
        }
        if (!have_init) {
            l.resize(prs.size());
            for (size_t k = 0; k < prs.size(); ++k) {
                l[k].resize(F.card(prs[k].second));
                for (auto& v : l[k]) v = restart_rng.uniform(-1.0, 1.0);
            }
        }

        // Phase 1: damped iteration, keeping the best iterate seen.
        MessageBundle dm;
        double rel = detail::mp_scaled_increment(F, H, w, l, dm);
        MessageBundle best = l;
        double best_rel = rel;
        int stall = 0;
        for (int it = 0; it < phase1_iters; ++it) {
            res.trace.emplace_back(rel, std::isfinite(rel)
                                            ? bethe_free_energy(F, H, beliefs_mp(F, H, w, l))
                                            : std::numeric_limits<double>::quiet_NaN());
            ++res.iterations;
            if (!std::isfinite(rel) || rel < opt.tol) break;
            for (size_t k = 0; k < l.size(); ++k)
                for (size_t y = 0; y < l[k].size(); ++y) l[k][y] += opt.damping * dm[k][y];
            rel = detail::mp_scaled_increment(F, H, w, l, dm);
            if (rel < best_rel) {
                best = l;
                best_rel = rel;
                stall = 0;
            } else if (++stall > kStallLimit) {
                break;
            }
        }

        // Phase 2: Gauss-Newton with backtracking from the best iterate.
        std::vector<double> x = flatten(best);
        rel = best_rel;
        if (use_gn) {
            MessageBundle scratch;
            auto stacked = [&](const std::vector<double>& v, double& rel_out) {
                rel_out = detail::mp_scaled_increment(F, H, w, unflatten(v), scratch);
                return flatten(scratch);
            };
            for (int gi = 0; gi < kGnIters && std::isfinite(rel) && rel >= opt.tol; ++gi) {
                double rel_here = rel;
                std::vector<double> r0 = stacked(x, rel_here);
                double amp = 1.0;
                for (double v : x) amp = std::max(amp, std::fabs(v));
                const double h = 1e-7 * amp;
                linalg::Matrix J(static_cast<int>(r0.size()), dim);
                std::vector<double> xp = x;
                for (int j = 0; j < dim; ++j) {
                    xp[j] += h;
                    double ignore = 0.0;
                    std::vector<double> rp = stacked(xp, ignore);
                    xp[j] = x[j];
                    for (size_t i = 0; i < r0.size(); ++i)
                        J.at(static_cast<int>(i), j) = (rp[i] - r0[i]) / h;
                }
                std::vector<double> neg(r0.size());
                for (size_t i = 0; i < r0.size(); ++i) neg[i] = -r0[i];
                auto sol = linalg::lstsq(J, neg, 1e-12);
                const double base = linalg::norm2(r0);
                double t = 1.0;
                bool accepted = false;
                while (t > 1e-12) {
                    std::vector<double> xt = x;
                    for (int j = 0; j < dim; ++j) xt[j] += t * sol.x[j];
                    double rel_t = 0.0;
                    std::vector<double> rt = stacked(xt, rel_t);
                    if (std::isfinite(rel_t) && linalg::norm2(rt) <= (1.0 - 1e-4 * t) * base) {
                        x = std::move(xt);
                        rel = rel_t;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                ++res.iterations;
                res.trace.emplace_back(rel, bethe_free_energy(F, H, beliefs_mp(F, H, w, unflatten(x))));
                if (!accepted) break;
            }
        }

        MessageBundle lf = unflatten(x);
        if (std::isfinite(rel) && rel < opt.tol) {
            FieldBundle beliefs = beliefs_mp(F, H, w, lf);
            bool collapsed = false;
            for (size_t a = 0; a < beliefs.size() && !collapsed; ++a)
                for (size_t xi = 0; xi < beliefs[a].size(); ++xi)
                    if (!std::isinf(H[a][xi]) && beliefs[a][xi] < kCollapseTol) {
                        collapsed = true;
                        break;
                    }
            if (!collapsed) {
                res.messages = std::move(lf);
                res.beliefs = std::move(beliefs);
                res.converged = true;
                res.last_delta = rel;
                return res;
            }
            if (rel < fallback_rel) {
                fallback.messages = std::move(lf);
                fallback.beliefs = std::move(beliefs);
                fallback.converged = true;
                fallback.last_delta = rel;
                fallback_rel = rel;
            }
        } else if (!std::isfinite(rel) ? fallback_rel == kInf : rel < fallback_rel) {
            fallback.messages = std::move(lf);
            fallback.beliefs.clear();
            fallback.converged = false;
            fallback.last_delta = rel;
            if (std::isfinite(rel)) {
                fallback.beliefs = beliefs_mp(F, H, w, fallback.messages);
                fallback_rel = rel;
            }
        }
    }

    fallback.iterations = res.iterations;
    fallback.trace = std::move(res.trace);
    return fallback;
}

}  // namespace gbp
