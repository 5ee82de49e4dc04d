#pragma once

#include <string>
#include <utility>
#include <vector>

#include <gbp/gbp.hpp>

// Pairwise chain model: variables x1..xN (binary), vertex regions v1..vN,
// edge regions e12, e23, ...
inline gbp::Presheaf path_graph(int nv) {
    std::vector<std::pair<std::string, int>> vars;
    for (int i = 0; i < nv; ++i) vars.emplace_back("x" + std::to_string(i + 1), 2);
    std::vector<std::pair<std::string, std::vector<std::string>>> regions;
    for (int i = 0; i < nv; ++i)
        regions.emplace_back("v" + std::to_string(i + 1),
                             std::vector<std::string>{"x" + std::to_string(i + 1)});
    for (int i = 0; i + 1 < nv; ++i)
        regions.emplace_back(
            "e" + std::to_string(i + 1) + std::to_string(i + 2),
            std::vector<std::string>{"x" + std::to_string(i + 1), "x" + std::to_string(i + 2)});
    return gbp::Presheaf::graphical(gbp::make_graphical_spec(vars, regions));
}

inline double max_bundle_diff(const gbp::FieldBundle& u, const gbp::FieldBundle& v) {
    double r = 0.0;
    for (size_t a = 0; a < u.size(); ++a)
        for (size_t x = 0; x < u[a].size(); ++x) {
            if (u[a][x] == v[a][x]) continue;
            r = std::max(r, std::fabs(u[a][x] - v[a][x]));
        }
    return r;
}

inline double max_message_diff(const gbp::MessageBundle& u, const gbp::MessageBundle& v) {
    return gbp::sup_diff(u, v);
}
