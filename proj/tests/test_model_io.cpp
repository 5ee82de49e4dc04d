#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "helpers.hpp"

using namespace gbp;

namespace {

std::string models_dir() { return GBP_MODELS_DIR; }

std::string model_path(const std::string& name) { return models_dir() + "/" + name; }

// Scratch file that cleans up after itself.
struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content) {
        static int counter = 0;
        path = (std::filesystem::temp_directory_path() /
                ("gbp_io_test_" + std::to_string(counter++) + ".json"))
                   .string();
        write_file(path, content);
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("all shipped models load and validate", "[model_io]") {
    for (const std::string name : {"path2.json", "path3.json", "cycle3.json", "multicycle.json",
                                   "bin_source.json", "bin_target.json", "explicit_chain.json"}) {
        Model m = load_model(model_path(name));
        CHECK(m.F.poset().size() > 0);
        CHECK_NOTHROW(validate_support(m.F, m.H));
        CHECK(section_residual(m.F, m.weights) >= 0.0);  // shape sanity
    }
}

TEST_CASE("factor models fold into energies, explicit models load as given", "[model_io]") {
    Model p2 = load_model(model_path("path2.json"));
    CHECK(p2.has_factors);
    CHECK(p2.F.is_graphical());
    int v1 = p2.F.poset().idx("v1");
    CHECK(p2.H[v1][0] == Catch::Approx(-std::log(2.0)).margin(1e-15));

    Model ec = load_model(model_path("explicit_chain.json"));
    CHECK_FALSE(ec.has_factors);
    CHECK_FALSE(ec.F.is_graphical());
    const Poset& P = ec.F.poset();
    REQUIRE(P.size() == 2);
    int top = P.idx("top"), bottom = P.idx("bottom");
    CHECK(ec.F.card(top) == 3);
    CHECK(ec.F.card(bottom) == 2);
    CHECK(ec.F.map_strict(top, bottom) == std::vector<int>{0, 1, 1});
    CHECK(ec.H[top] == Field{0.2, -0.1, 0.4});
    CHECK(ec.weights[top] == Field{1.0, 1.0, 1.0});
}

TEST_CASE("evidence files map variable names to observations", "[model_io]") {
    Model p3 = load_model(model_path("path3.json"));
    auto obs = load_evidence(model_path("path3_evidence.json"), p3.F.graphical_spec());
    REQUIRE(obs.size() == 1);
    CHECK(obs[0].first == 2);
    CHECK(obs[0].second == 1);

    TempFile missing("{}");
    CHECK_THROWS_AS(load_evidence(missing.path, p3.F.graphical_spec()), ParseError);
    TempFile frac(R"({"observe": {"x2": 0.5}})");
    CHECK_THROWS_AS(load_evidence(frac.path, p3.F.graphical_spec()), ParseError);
    TempFile unknown(R"({"observe": {"zz": 0}})");
    CHECK_THROWS_AS(load_evidence(unknown.path, p3.F.graphical_spec()), UnknownElement);
}

TEST_CASE("transformation files resolve model paths and validate", "[model_io]") {
    LoadedTransformation tr = load_transformation(model_path("bin_transform.json"));
    CHECK(tr.phi.is_surjective());
    CHECK(validate(tr.phi));
    int v0 = tr.source.F.poset().idx("v0");
    CHECK(tr.phi.comps[v0] == std::vector<int>{0, 1, 1});

    Rng rng(3);
    CHECK(check_theorem3(tr.phi, tr.source.H, 5, rng) < 1e-9);

    TempFile no_comps(R"({"source": "a.json", "target": "b.json"})");
    CHECK_THROWS_AS(load_transformation(no_comps.path), ParseError);
    TempFile partial(R"({"components": {"v0": [0, 1, 1]}})");
    CHECK_THROWS_AS(transformation_with(partial.path, tr.source.F, tr.target.F), ParseError);
}

TEST_CASE("canonical emission is a fixed point of parse-then-emit", "[model_io]") {
    for (const std::string name : {"path2.json", "path3.json", "cycle3.json", "multicycle.json",
                                   "bin_source.json", "bin_target.json", "explicit_chain.json"}) {
        Model m = load_model(model_path(name));
        std::string text1 = canonical_model_json(m);
        TempFile round(text1);
        std::string text2 = canonical_model_json(load_model(round.path));
        CHECK(text1 == text2);
    }
}

TEST_CASE("infinities round-trip through the string encoding", "[model_io]") {
    TempFile masked(R"({
      "graphical": {
        "variables": [{"name": "x", "card": 2}],
        "regions": [{"name": "v", "vars": ["x"]}]
      },
      "hamiltonians": {"v": ["inf", 0.25]}
    })");
    Model m = load_model(masked.path);
    CHECK(std::isinf(m.H[0][0]));
    CHECK(m.H[0][1] == 0.25);
    std::string text = canonical_model_json(m);
    CHECK(text.find("\"inf\"") != std::string::npos);
    TempFile round(text);
    Model m2 = load_model(round.path);
    CHECK(std::isinf(m2.H[0][0]));
}

TEST_CASE("numbers are emitted with full precision and no negative zero", "[model_io]") {
    Presheaf F = path_graph(2);
    Model m{F, zero_fields(F), unit_weights(F), false, {}};
    m.H[0][0] = -0.0;
    m.H[0][1] = 0.1;  // not exactly representable; needs all 17 digits
    std::string text = canonical_model_json(m);
    CHECK(text.find("-0") == std::string::npos);
    CHECK(text.find("0.1000000000000000") != std::string::npos);
}

TEST_CASE("malformed model files raise parse or validation errors", "[model_io]") {
    CHECK_THROWS_AS(load_model(model_path("no_such_file.json")), ParseError);

    TempFile syntax("{\"graphical\": ");
    CHECK_THROWS_AS(load_model(syntax.path), ParseError);

    TempFile array("[1, 2]");
    CHECK_THROWS_AS(load_model(array.path), ParseError);

    TempFile both_forms(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "poset": {"elements": ["a"], "leq": []}
    })");
    CHECK_THROWS_AS(load_model(both_forms.path), ParseError);

    TempFile both_energy(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "hamiltonians": {"v": [0, 0]},
      "factors": {"v": [1, 1]}
    })");
    CHECK_THROWS_AS(load_model(both_energy.path), ParseError);

    TempFile wrong_len(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "hamiltonians": {"v": [0, 0, 0]}
    })");
    CHECK_THROWS_AS(load_model(wrong_len.path), ParseError);

    TempFile bad_inf(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "hamiltonians": {"v": ["infinity", 0]}
    })");
    CHECK_THROWS_AS(load_model(bad_inf.path), ParseError);

    TempFile bad_weights(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "weights": {"v": [1.0, 0.0]}
    })");
    CHECK_THROWS_AS(load_model(bad_weights.path), ValidationError);

    TempFile unknown_elem(R"({
      "graphical": {"variables": [{"name": "x", "card": 2}],
                    "regions": [{"name": "v", "vars": ["x"]}]},
      "hamiltonians": {"zz": [0, 0]}
    })");
    CHECK_THROWS_AS(load_model(unknown_elem.path), UnknownElement);

    TempFile missing_map(R"({
      "poset": {"elements": ["a", "b"], "leq": [["b", "a"]]},
      "presheaf": {"sets": {"a": 2, "b": 2}, "maps": {}}
    })");
    CHECK_THROWS_AS(load_model(missing_map.path), ParseError);
}

TEST_CASE("field bundle files must cover every element", "[model_io]") {
    Model p2 = load_model(model_path("path2.json"));
    TempFile good(R"({"v0": [0.5, 0.5], "v1": [0.25, 0.75], "e01": [0.1, 0.2, 0.3, 0.4]})");
    FieldBundle b = load_field_bundle(good.path, p2.F);
    CHECK(b[p2.F.poset().idx("v1")] == Field{0.25, 0.75});

    TempFile incomplete(R"({"v0": [0.5, 0.5]})");
    CHECK_THROWS_AS(load_field_bundle(incomplete.path, p2.F), ParseError);
    TempFile short_arr(R"({"v0": [0.5], "v1": [0.25, 0.75], "e01": [0.1, 0.2, 0.3, 0.4]})");
    CHECK_THROWS_AS(load_field_bundle(short_arr.path, p2.F), ParseError);
}
