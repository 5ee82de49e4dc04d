#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gbp/energy.hpp"
#include "gbp/presheaf.hpp"

namespace gbp {

// Brute-force ground truth over the full configuration space of a graphical
// model. Everything here enumerates joints, so sizes are capped.

inline long long oracle_total_configs(const GraphicalSpec& spec, double cap = 1e7) {
    double t = 1.0;
    for (int c : spec.var_card) t *= static_cast<double>(c);
    if (t > cap)
        throw SearchSpaceTooLarge("joint space has " + std::to_string(t) +
                                  " configurations (cap " + std::to_string(cap) + ")");
    long long n = 1;
    for (int c : spec.var_card) n *= c;
    return n;
}

namespace detail {
// Odometer over variable digits, least-significant digit = variable 0.
struct ConfigIter {
    const GraphicalSpec& spec;
    std::vector<int> digits;
    explicit ConfigIter(const GraphicalSpec& s) : spec(s), digits(s.var_card.size(), 0) {}
    bool advance() {
        for (size_t i = 0; i < digits.size(); ++i) {
            if (++digits[i] < spec.var_card[i]) return true;
            digits[i] = 0;
        }
        return false;
    }
};
}  // namespace detail

struct ExactJoint {
    std::vector<double> p;  // normalized, little-endian mixed-radix over variables
    double log_z;           // log of the normalizing constant (-log_z = exact free energy)
};

// Normalized product of nonnegative region factors over the joint space.
inline ExactJoint exact_joint(const GraphicalSpec& spec, const std::vector<Field>& factors) {
    if (factors.size() != spec.region_names.size())
        throw ValidationError("factor count does not match region count");
    for (size_t r = 0; r < factors.size(); ++r) {
        if (static_cast<int>(factors[r].size()) != spec.region_size(static_cast<int>(r)))
            throw ValidationError("factor on region '" + spec.region_names[r] +
                                  "' has wrong length");
        for (double f : factors[r])
            if (!(f >= 0.0)) throw NegativeFactor("factor on region '" + spec.region_names[r] +
                                                  "' has a negative or NaN entry");
    }
    long long n = oracle_total_configs(spec);
    std::vector<double> p(static_cast<size_t>(n));
    detail::ConfigIter it(spec);
    long long u = 0;
    do {
        double v = 1.0;
        for (size_t r = 0; r < factors.size(); ++r)
            v *= factors[r][spec.encode_region(static_cast<int>(r), it.digits)];
        p[static_cast<size_t>(u++)] = v;
    } while (it.advance());
    double z = 0.0;
    for (double v : p) z += v;
    if (!(z > 0.0) || !std::isfinite(z))
        throw ZeroPartition("all configurations have zero mass");
    for (double& v : p) v /= z;
    return ExactJoint{std::move(p), std::log(z)};
}

struct ConditionedJoint {
    std::vector<double> p;  // conditional joint, normalized
    double log_mass;        // log probability of the observation
};

// Condition a normalized joint on a partial assignment {var index -> value}.
inline ConditionedJoint condition_joint(const GraphicalSpec& spec, const std::vector<double>& joint,
                                        const std::vector<std::pair<int, int>>& observed) {
    for (auto [v, s] : observed) {
        if (v < 0 || v >= static_cast<int>(spec.var_card.size()))
            throw UnknownElement("observed variable index out of range");
        if (s < 0 || s >= spec.var_card[v])
            throw ValidationError("observed value out of range for variable '" +
                                  spec.var_names[v] + "'");
    }
    std::vector<double> p(joint.size(), 0.0);
    detail::ConfigIter it(spec);
    long long u = 0;
    double mass = 0.0;
    do {
        bool ok = true;
        for (auto [v, s] : observed)
            if (it.digits[v] != s) {
                ok = false;
                break;
            }
        if (ok) {
            p[static_cast<size_t>(u)] = joint[static_cast<size_t>(u)];
            mass += joint[static_cast<size_t>(u)];
        }
        ++u;
    } while (it.advance());
    if (!(mass > 0.0)) throw ZeroEvidence("observation has zero probability");
    for (double& v : p) v /= mass;
    return ConditionedJoint{std::move(p), std::log(mass)};
}

// Marginal of a normalized joint onto an ascending list of variable indices,
// little-endian in that list.
inline Field marginal_of_vars(const GraphicalSpec& spec, const std::vector<double>& joint,
                              const std::vector<int>& vars) {
    long long sz = 1;
    for (int v : vars) sz *= spec.var_card[v];
    Field m(static_cast<size_t>(sz), 0.0);
    detail::ConfigIter it(spec);
    long long u = 0;
    do {
        long long y = 0, mult = 1;
        for (int v : vars) {
            y += it.digits[v] * mult;
            mult *= spec.var_card[v];
        }
        m[static_cast<size_t>(y)] += joint[static_cast<size_t>(u++)];
    } while (it.advance());
    return m;
}

// Per-region marginals by fiber summation; aligned with the region poset.
inline FieldBundle exact_marginals(const GraphicalSpec& spec, const std::vector<double>& joint) {
    FieldBundle out(spec.region_names.size());
    for (size_t r = 0; r < spec.region_names.size(); ++r)
        out[r] = marginal_of_vars(spec, joint, spec.region_vars[r]);
    return out;
}

// View of a graphical model as a plain graph: regions must have one or two
// variables, two-variable regions are edges, and the edge set must be acyclic.
struct TreeGraph {
    int nvars = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> degree;
};

inline TreeGraph tree_graph(const GraphicalSpec& spec) {
    TreeGraph g;
    g.nvars = static_cast<int>(spec.var_card.size());
    g.degree.assign(g.nvars, 0);
    std::vector<int> root(g.nvars);
    for (int v = 0; v < g.nvars; ++v) root[v] = v;
    auto find = [&](int x) {
        while (root[x] != x) x = root[x] = root[root[x]];
        return x;
    };
    for (size_t r = 0; r < spec.region_vars.size(); ++r) {
        const auto& rv = spec.region_vars[r];
        if (rv.size() == 1) continue;
        if (rv.size() != 2)
            throw NotTree("region '" + spec.region_names[r] + "' has " +
                          std::to_string(rv.size()) + " variables; graphs need 1 or 2");
        for (const auto& e : g.edges)
            if (e.first == rv[0] && e.second == rv[1])
                throw NotTree("duplicate edge on variables '" + spec.var_names[rv[0]] + "','" +
                              spec.var_names[rv[1]] + "'");
        int ra = find(rv[0]), rb = find(rv[1]);
        if (ra == rb) throw NotTree("edge regions form a cycle");
        root[ra] = rb;
        g.edges.emplace_back(rv[0], rv[1]);
        ++g.degree[rv[0]];
        ++g.degree[rv[1]];
    }
    return g;
}

// max over configurations of |P(x) - prod_e P_e(x_e) * prod_v P_v(x_v)^{1-d(v)}|.
inline double tree_factorization_check(const GraphicalSpec& spec, const std::vector<double>& joint) {
    TreeGraph g = tree_graph(spec);
    std::vector<Field> pv(g.nvars);
    for (int v = 0; v < g.nvars; ++v) pv[v] = marginal_of_vars(spec, joint, {v});
    std::vector<Field> pe(g.edges.size());
    for (size_t e = 0; e < g.edges.size(); ++e)
        pe[e] = marginal_of_vars(spec, joint, {g.edges[e].first, g.edges[e].second});
    double worst = 0.0;
    detail::ConfigIter it(spec);
    long long u = 0;
    do {
        double t = 1.0;
        for (size_t e = 0; e < g.edges.size(); ++e) {
            auto [a, b] = g.edges[e];
            t *= pe[e][static_cast<size_t>(it.digits[a] + spec.var_card[a] * it.digits[b])];
        }
        for (int v = 0; v < g.nvars; ++v)
            t *= std::pow(pv[v][static_cast<size_t>(it.digits[v])], 1.0 - g.degree[v]);
        worst = std::max(worst, std::fabs(joint[static_cast<size_t>(u++)] - t));
    } while (it.advance());
    return worst;
}

// |S(P) - [sum_e S(P_e) - sum_v (d(v)-1) S(P_v)]| for Markov joints on acyclic graphs.
inline double entropy_decomposition_check(const GraphicalSpec& spec,
                                          const std::vector<double>& joint) {
    TreeGraph g = tree_graph(spec);
    double rhs = 0.0;
    for (size_t e = 0; e < g.edges.size(); ++e)
        rhs += entropy(marginal_of_vars(spec, joint, {g.edges[e].first, g.edges[e].second}));
    for (int v = 0; v < g.nvars; ++v)
        rhs -= (g.degree[v] - 1.0) * entropy(marginal_of_vars(spec, joint, {v}));
    return std::fabs(entropy(joint) - rhs);
}

// Free energy of a distribution Q against energies -ln P(., y_obs):
// F(Q) = E_Q[-ln P(x, y)] - S(Q).
inline double two_block_free_energy(const std::vector<double>& joint, int nx, int y_obs,
                                    const std::vector<double>& q) {
    double f = 0.0;
    for (int x = 0; x < nx; ++x) {
        if (q[x] == 0.0) continue;
        f += q[x] * (-std::log(joint[static_cast<size_t>(x + nx * y_obs)]) + std::log(q[x]));
    }
    return f;
}

// |F(posterior) + ln P_Y(y_obs)| for a normalized joint over (X, Y) stored
// with X least significant. The minimum of F is attained at the posterior.
inline double variational_identity_check(const std::vector<double>& joint, int nx, int y_obs) {
    if (nx <= 0 || joint.size() % static_cast<size_t>(nx) != 0)
        throw ValidationError("joint length is not a multiple of the X block size");
    int ny = static_cast<int>(joint.size()) / nx;
    if (y_obs < 0 || y_obs >= ny) throw ValidationError("observed Y value out of range");
    double py = 0.0;
    for (int x = 0; x < nx; ++x) py += joint[static_cast<size_t>(x + nx * y_obs)];
    if (!(py > 0.0)) throw ZeroEvidence("observed Y value has zero probability");
    std::vector<double> q(nx);
    for (int x = 0; x < nx; ++x) q[x] = joint[static_cast<size_t>(x + nx * y_obs)] / py;
    return std::fabs(two_block_free_energy(joint, nx, y_obs, q) + std::log(py));
}

// Model-level version: observed variables form the Y block, the rest form X.
inline double variational_residual(const GraphicalSpec& spec, const std::vector<Field>& factors,
                                   const std::vector<std::pair<int, int>>& observed) {
    if (observed.empty()) throw ValidationError("no observed variables");
    ExactJoint ej = exact_joint(spec, factors);
    for (auto [v, s] : observed) {
        if (v < 0 || v >= static_cast<int>(spec.var_card.size()))
            throw UnknownElement("observed variable index out of range");
        if (s < 0 || s >= spec.var_card[v])
            throw ValidationError("observed value out of range for variable '" +
                                  spec.var_names[v] + "'");
    }
    double py = 0.0;
    double f = 0.0;
    // First pass: mass of the observation.
    {
        detail::ConfigIter it(spec);
        long long u = 0;
        do {
            bool ok = true;
            for (auto [v, s] : observed)
                if (it.digits[v] != s) {
                    ok = false;
                    break;
                }
            if (ok) py += ej.p[static_cast<size_t>(u)];
            ++u;
        } while (it.advance());
    }
    if (!(py > 0.0)) throw ZeroEvidence("observation has zero probability");
    // Second pass: F at the posterior, with energies -ln P(x, y_obs).
    {
        detail::ConfigIter it(spec);
        long long u = 0;
        do {
            bool ok = true;
            for (auto [v, s] : observed)
                if (it.digits[v] != s) {
                    ok = false;
                    break;
                }
            double pu = ej.p[static_cast<size_t>(u++)];
            if (ok && pu > 0.0) {
                double qx = pu / py;
                f += qx * (-std::log(pu) + std::log(qx));
            }
        } while (it.advance());
    }
    return std::fabs(f + std::log(py));
}

// Mask every region state inconsistent with the observation. The surviving
// support sets are closed under the presheaf maps by construction.
inline FieldBundle conditioning_to_hamiltonian(const Presheaf& F, FieldBundle H,
                                               const std::vector<std::pair<int, int>>& observed) {
    const GraphicalSpec& spec = F.graphical_spec();
    for (auto [v, s] : observed) {
        if (v < 0 || v >= static_cast<int>(spec.var_card.size()))
            throw UnknownElement("observed variable index out of range");
        if (s < 0 || s >= spec.var_card[v])
            throw ValidationError("observed value out of range for variable '" +
                                  spec.var_names[v] + "'");
    }
    for (int a = 0; a < F.poset().size(); ++a) {
        bool any_alive = false;
        for (int x = 0; x < F.card(a); ++x) {
            std::vector<int> st = spec.decode_region(a, x);
            bool ok = true;
            for (auto [v, s] : observed) {
                for (size_t i = 0; i < spec.region_vars[a].size(); ++i)
                    if (spec.region_vars[a][i] == v && st[i] != s) {
                        ok = false;
                        break;
                    }
                if (!ok) break;
            }
            if (!ok)
                H[a][x] = kInf;
            else if (!std::isinf(H[a][x]))
                any_alive = true;
        }
        if (!any_alive)
            throw InconsistentEvidence("observation empties region '" + F.poset().name(a) + "'");
    }
    return H;
}

}  // namespace gbp
