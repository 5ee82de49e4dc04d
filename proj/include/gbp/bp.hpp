#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gbp/energy.hpp"
#include "gbp/presheaf.hpp"
#include "gbp/rng.hpp"

namespace gbp {

inline double log_sum_exp(const Field& v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (std::isinf(m) && m < 0) return -kInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Log of the pushforward of exp(lv): per-fiber log-sum-exp.
inline Field push_log_sum_exp(const Presheaf& F, int a, int b, const Field& lv) {
    Field mx(F.card(b), -kInf);
    for (int x = 0; x < F.card(a); ++x) mx[F.apply(a, b, x)] = std::max(mx[F.apply(a, b, x)], lv[x]);
    Field out(F.card(b), -kInf);
    Field sum(F.card(b), 0.0);
    for (int x = 0; x < F.card(a); ++x) {
        int y = F.apply(a, b, x);
        if (!std::isinf(mx[y])) sum[y] += std::exp(lv[x] - mx[y]);
    }
    for (int y = 0; y < F.card(b); ++y)
        if (!std::isinf(mx[y])) out[y] = mx[y] + std::log(sum[y]);
    return out;
}

// Bottom-up aggregates: ln n_{b->a}(x_b) = sum over messages m_{c->b} from
// elements c above b that do not sit below a. Indexed by the same pair
// order as the messages themselves.
inline MessageBundle bottom_up(const Presheaf& F, const MessageBundle& log_m) {
    const auto& prs = F.poset().pairs();
    MessageBundle out = zero_messages(F);
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        for (size_t j = 0; j < prs.size(); ++j) {
            auto [c, q] = prs[j];
            if (q != b || F.poset().leq(c, a)) continue;
            for (int y = 0; y < F.card(b); ++y) out[k][y] += log_m[j][y];
        }
    }
    return out;
}

// Unnormalized log beliefs: ln btilde_a = -H_a + sum of all messages
// crossing into the down-set of a (source p not<= a, target q <= a). This is
// the aggregated form of the belief product over bottom-up messages n_{b->a}
// for every b <= a, including b = a, whose aggregate collects the messages
// arriving at a itself.
inline FieldBundle log_beliefs_bp(const Presheaf& F, const FieldBundle& H,
                                  const MessageBundle& log_m) {
    const int n = F.poset().size();
    const auto& prs = F.poset().pairs();
    FieldBundle out(n);
    for (int a = 0; a < n; ++a) {
        out[a].resize(F.card(a));
        for (int x = 0; x < F.card(a); ++x) out[a][x] = -H[a][x];
        for (size_t k = 0; k < prs.size(); ++k) {
            auto [p, q] = prs[k];
            if (!F.poset().leq(q, a) || F.poset().leq(p, a)) continue;
            for (int x = 0; x < F.card(a); ++x) out[a][x] += log_m[k][F.apply(a, q, x)];
        }
    }
    return out;
}

// Normalized beliefs per element.
inline FieldBundle beliefs_bp(const Presheaf& F, const FieldBundle& H, const MessageBundle& log_m) {
    FieldBundle lb = log_beliefs_bp(F, H, log_m);
    FieldBundle out(lb.size());
    for (size_t a = 0; a < lb.size(); ++a) {
        double z = log_sum_exp(lb[a]);
        if (std::isinf(z) && z < 0)
            throw AllMassMasked("all states of '" + F.poset().name(static_cast<int>(a)) + "' have zero mass");
        out[a].resize(lb[a].size());
        for (size_t x = 0; x < lb[a].size(); ++x) out[a][x] = std::exp(lb[a][x] - z);
    }
    return out;
}

// Condensed update: ln m'_{a->b} = ln m_{a->b} + ln push(btilde_a) - ln btilde_b.
// Masked target states keep their message at -inf.
inline MessageBundle bp_step(const Presheaf& F, const FieldBundle& H, const MessageBundle& log_m) {
    FieldBundle lb = log_beliefs_bp(F, H, log_m);
    const auto& prs = F.poset().pairs();
    MessageBundle out(prs.size());
    for (size_t k = 0; k < prs.size(); ++k) {
        auto [a, b] = prs[k];
        Field pushed = push_log_sum_exp(F, a, b, lb[a]);
        out[k].resize(F.card(b));
        for (int y = 0; y < F.card(b); ++y)
            out[k][y] = std::isinf(lb[b][y]) ? -kInf : log_m[k][y] + pushed[y] - lb[b][y];
    }
    return out;
}

// Per-pair log-sum-exp shifted to zero: the canonical representative of a
// message's equivalence class under additive constants.
inline MessageBundle normalize_log_messages(const MessageBundle& log_m) {
    MessageBundle out(log_m.size());
    for (size_t k = 0; k < log_m.size(); ++k) {
        double z = log_sum_exp(log_m[k]);
        if (std::isinf(z))
            throw AllMassMasked("message " + std::to_string(k) + " has no mass");
        out[k].resize(log_m[k].size());
        for (size_t y = 0; y < log_m[k].size(); ++y)
            out[k][y] = std::isinf(log_m[k][y]) ? -kInf : log_m[k][y] - z;
    }
    return out;
}

struct RunOptions {
    int max_iters = 2000;
    double tol = 1e-10;
    double damping = 0.5;
    bool random_init = false;
    std::uint64_t seed = 0;
};

struct BpResult {
    MessageBundle log_messages;
    FieldBundle beliefs;
    bool converged = false;
    int iterations = 0;
    double last_delta = 0.0;
    std::vector<std::pair<double, double>> trace;  // (change norm, Bethe energy)
};

inline MessageBundle initial_messages(const Presheaf& F, const RunOptions& opt) {
    MessageBundle l = zero_messages(F);
    if (opt.random_init) {
        Rng r(opt.seed);
        for (auto& f : l)
            for (auto& x : f) x = r.uniform(-0.1, 0.1);
    }
    return l;
}

// Synchronous damped iteration of the condensed rule, normalized each step.
inline BpResult bp_run(const Presheaf& F, const FieldBundle& H, const RunOptions& opt) {
    BpResult res;
    MessageBundle log_m = initial_messages(F, opt);
    const auto& prs = F.poset().pairs();
    for (size_t k = 0; k < prs.size(); ++k) {
        auto b = prs[k].second;
        for (int y = 0; y < F.card(b); ++y)
            if (std::isinf(H[b][y])) log_m[k][y] = -kInf;
    }
    log_m = normalize_log_messages(log_m);
    for (int it = 0; it < opt.max_iters; ++it) {
        MessageBundle stepped = bp_step(F, H, log_m);
        MessageBundle cand(stepped.size());
        for (size_t k = 0; k < stepped.size(); ++k) {
            cand[k].resize(stepped[k].size());
            for (size_t y = 0; y < stepped[k].size(); ++y) {
                double prev = log_m[k][y], next = stepped[k][y];
                cand[k][y] = (std::isinf(prev) || std::isinf(next))
                                 ? -kInf
                                 : (1.0 - opt.damping) * prev + opt.damping * next;
            }
        }
        cand = normalize_log_messages(cand);
        double diff = sup_diff(cand, log_m);
        log_m = std::move(cand);
        res.iterations = it + 1;
        res.last_delta = diff;
        double bethe = std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(diff)) bethe = bethe_free_energy(F, H, beliefs_bp(F, H, log_m));
        res.trace.emplace_back(diff, bethe);
        if (!std::isfinite(diff)) break;
        if (diff < opt.tol) {
            res.converged = true;
            break;
        }
    }
    res.log_messages = std::move(log_m);
    res.beliefs = beliefs_bp(F, H, res.log_messages);
    return res;
}

}  // namespace gbp
