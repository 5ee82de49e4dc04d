#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbp/errors.hpp"

namespace gbp {

// Finite poset over named elements. Stores the full order relation
// (reflexive-transitive closure), not just covers: every formula downstream
// quantifies over b <= a directly.
class Poset {
public:
    Poset() = default;

    // relation_pairs are (lo, hi) meaning lo <= hi; any relation is accepted
    // and closed off. Rejects if the closure has a 2-cycle.
    Poset(std::vector<std::string> elements,
          const std::vector<std::pair<std::string, std::string>>& relation_pairs)
        : names_(std::move(elements)) {
        const int n = static_cast<int>(names_.size());
        for (int i = 0; i < n; ++i) {
            if (index_.count(names_[i]))
                throw ValidationError("duplicate element '" + names_[i] + "'");
            index_[names_[i]] = i;
        }
        leq_.assign(static_cast<size_t>(n) * n, 0);
        for (int i = 0; i < n; ++i) leq_at(i, i) = 1;
        for (const auto& [lo, hi] : relation_pairs)
            leq_at(idx(lo), idx(hi)) = 1;
        // Warshall closure
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                if (leq_at(i, k))
                    for (int j = 0; j < n; ++j)
                        if (leq_at(k, j)) leq_at(i, j) = 1;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (leq_at(i, j) && leq_at(j, i))
                    throw CycleError("'" + names_[i] + "' and '" + names_[j] +
                                     "' are mutually comparable");
        build_tables();
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& elements() const { return names_; }
    const std::string& name(int a) const { return names_[a]; }

    int idx(const std::string& e) const {
        auto it = index_.find(e);
        if (it == index_.end()) throw UnknownElement("'" + e + "'");
        return it->second;
    }
    bool contains(const std::string& e) const { return index_.count(e) != 0; }

    // b <= a
    bool leq(int b, int a) const { return leq_at(b, a) != 0; }
    bool strictly_below(int b, int a) const { return b != a && leq(b, a); }

    // Strict comparable pairs (a, b) with b < a, canonical a-major order.
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
    int pair_index(int a, int b) const {
        auto it = pair_index_.find(key(a, b));
        if (it == pair_index_.end())
            throw NotComparable(name(b) + " < " + name(a) + " does not hold");
        return it->second;
    }

    // Integer Möbius coefficients: mu(a,b) nonzero only for b <= a.
    long long mu(int a, int b) const { return mu_[static_cast<size_t>(a) * size() + b]; }
    // Overcounting coefficients c(a) = sum_{b >= a} mu(b, a).
    long long c(int a) const { return c_[a]; }

    // zeta(lambda)(a) = sum_{b <= a} lambda(b)
    template <typename T>
    std::vector<T> zeta_scalar(const std::vector<T>& lambda) const {
        std::vector<T> out(size(), T(0));
        for (int a = 0; a < size(); ++a)
            for (int b = 0; b < size(); ++b)
                if (leq(b, a)) out[a] += lambda[b];
        return out;
    }

    // mobius(lambda)(a) = sum_{b <= a} mu(a,b) lambda(b); inverse of zeta_scalar
    template <typename T>
    std::vector<T> mobius_scalar(const std::vector<T>& lambda) const {
        std::vector<T> out(size(), T(0));
        for (int a = 0; a < size(); ++a)
            for (int b = 0; b < size(); ++b)
                if (leq(b, a)) out[a] += T(mu(a, b)) * lambda[b];
        return out;
    }

    // Connected components of the comparability graph, each sorted.
    const std::vector<std::vector<int>>& components() const { return components_; }

    // Some linear extension (used for the unitriangular inversion; exposed
    // because deterministic iteration order is occasionally useful).
    const std::vector<int>& linear_extension() const { return linext_; }

private:
    std::uint8_t& leq_at(int b, int a) { return leq_[static_cast<size_t>(b) * names_.size() + a]; }
    std::uint8_t leq_at(int b, int a) const { return leq_[static_cast<size_t>(b) * names_.size() + a]; }
    static long long key(int a, int b) { return (static_cast<long long>(a) << 32) | static_cast<unsigned>(b); }

    void build_tables() {
        const int n = size();
        // linear extension: stable sort by down-set size
        linext_.resize(n);
        std::iota(linext_.begin(), linext_.end(), 0);
        std::stable_sort(linext_.begin(), linext_.end(), [&](int x, int y) {
            return down_size(x) < down_size(y);
        });
        // mu by back-substitution over integers:
        // mu(a,a) = 1, mu(a,b) = -sum_{c: b < c <= a} mu(a,c)
        mu_.assign(static_cast<size_t>(n) * n, 0);
        for (int a = 0; a < n; ++a) {
            for (int i = n - 1; i >= 0; --i) {
                int b = linext_[i];
                if (!leq(b, a)) continue;
                if (b == a) {
                    mu_[static_cast<size_t>(a) * n + b] = 1;
                    continue;
                }
                long long s = 0;
                for (int c = 0; c < n; ++c)
                    if (c != b && leq(b, c) && leq(c, a))
                        s += mu_[static_cast<size_t>(a) * n + c];
                mu_[static_cast<size_t>(a) * n + b] = -s;
            }
        }
        c_.assign(n, 0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (leq(a, b)) c_[a] += mu_[static_cast<size_t>(b) * n + a];
        // strict pairs, a-major
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (b != a && leq(b, a)) {
                    pair_index_[key(a, b)] = static_cast<int>(pairs_.size());
                    pairs_.emplace_back(a, b);
                }
        // comparability components
        std::vector<int> comp(n, -1);
        int nc = 0;
        for (int s = 0; s < n; ++s) {
            if (comp[s] != -1) continue;
            std::vector<int> stack{s};
            comp[s] = nc;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                for (int v = 0; v < n; ++v)
                    if (comp[v] == -1 && (leq(u, v) || leq(v, u))) {
                        comp[v] = nc;
                        stack.push_back(v);
                    }
            }
            ++nc;
        }
        components_.assign(nc, {});
        for (int i = 0; i < n; ++i) components_[comp[i]].push_back(i);
    }

    int down_size(int a) const {
        int s = 0;
        for (int b = 0; b < size(); ++b) s += leq(b, a) ? 1 : 0;
        return s;
    }

    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::uint8_t> leq_;
    std::vector<long long> mu_, c_;
    std::vector<std::pair<int, int>> pairs_;
    std::unordered_map<long long, int> pair_index_;
    std::vector<std::vector<int>> components_;
    std::vector<int> linext_;
};

}  // namespace gbp
