#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "helpers.hpp"

using namespace gbp;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

// Runs the driver with stderr dropped; stdout and the exit code come back.
RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(GBP_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string model_arg(const std::string& name) {
    return "--model \"" + std::string(GBP_MODELS_DIR) + "/" + name + "\"";
}

std::string path_arg(const std::string& flag, const std::string& name) {
    return "--" + flag + " \"" + std::string(GBP_MODELS_DIR) + "/" + name + "\"";
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

double bundle_distance(const Json& a, const Json& b) {
    double worst = 0.0;
    for (auto it = a.begin(); it != a.end(); ++it) {
        const Json& other = b.at(it.key());
        for (size_t i = 0; i < it.value().size(); ++i)
            worst = std::max(worst, std::fabs(it.value()[i].get<double>() -
                                              other[i].get<double>()));
    }
    return worst;
}

}  // namespace

TEST_CASE("inference agrees with enumeration and is reproducible", "[cli]") {
    for (const std::string algo : {"mp", "bp"}) {
        RunResult inferred = run_cli("infer " + model_arg("path3.json") + " --algo " + algo);
        REQUIRE(inferred.code == 0);
        RunResult again = run_cli("infer " + model_arg("path3.json") + " --algo " + algo);
        CHECK(inferred.out == again.out);  // byte-identical reruns

        RunResult exact = run_cli("exact " + model_arg("path3.json"));
        REQUIRE(exact.code == 0);
        CHECK(bundle_distance(Json::parse(inferred.out), Json::parse(exact.out)) < 1e-8);
    }
}

TEST_CASE("seeded random starts are reproducible", "[cli]") {
    std::string args = "infer " + model_arg("path3.json") + " --random-init --seed 5";
    RunResult r1 = run_cli(args);
    RunResult r2 = run_cli(args);
    REQUIRE(r1.code == 0);
    CHECK(r1.out == r2.out);
}

TEST_CASE("evidence conditions both solvers and the oracle alike", "[cli]") {
    std::string common = model_arg("path3.json") + " " + path_arg("evidence", "path3_evidence.json");
    RunResult inferred = run_cli("infer " + common);
    REQUIRE(inferred.code == 0);
    RunResult exact = run_cli("exact " + common);
    REQUIRE(exact.code == 0);
    CHECK(bundle_distance(Json::parse(inferred.out), Json::parse(exact.out)) < 1e-8);
    // the observed variable's belief is pinned
    Json j = Json::parse(inferred.out);
    CHECK(j.at("v2")[1].get<double>() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("results can be written to a file instead of stdout", "[cli]") {
    std::string out = temp_path("gbp_cli_beliefs.json");
    RunResult piped = run_cli("infer " + model_arg("path2.json"));
    REQUIRE(piped.code == 0);
    RunResult filed = run_cli("infer " + model_arg("path2.json") + " --out \"" + out + "\"");
    REQUIRE(filed.code == 0);
    CHECK(filed.out.empty());
    CHECK(io_detail::read_file(out) == piped.out);
    std::remove(out.c_str());
}

TEST_CASE("acyclic models pass the tree certificates and cyclic ones are rejected", "[cli]") {
    CHECK(run_cli("check tree " + model_arg("path2.json")).code == 0);
    CHECK(run_cli("check tree " + model_arg("path3.json")).code == 0);
    CHECK(run_cli("check tree " + model_arg("cycle3.json")).code == 3);
}

TEST_CASE("the variational certificate passes under evidence", "[cli]") {
    RunResult r = run_cli("check variational " + model_arg("path3.json") + " " +
                          path_arg("evidence", "path3_evidence.json"));
    CHECK(r.code == 0);
    CHECK(r.out.find("variational_residual") != std::string::npos);
}

TEST_CASE("converged beliefs certify as critical points", "[cli]") {
    std::string beliefs = temp_path("gbp_cli_critical.json");
    for (const std::string name : {"path3.json", "multicycle.json"}) {
        REQUIRE(run_cli("infer " + model_arg(name) + " --algo bp --out \"" + beliefs + "\"")
                    .code == 0);
        RunResult r = run_cli("check critical " + model_arg(name) + " --beliefs \"" + beliefs +
                              "\"");
        CHECK(r.code == 0);
        CHECK(r.out.find("r_section") != std::string::npos);
        CHECK(r.out.find("r_critical") != std::string::npos);
    }
    // uniform beliefs marginalize consistently but sit at no critical point
    write_file(beliefs,
               "{\"v0\": [0.5, 0.5], \"v1\": [0.5, 0.5], \"v2\": [0.5, 0.5],\n"
               " \"e01\": [0.25, 0.25, 0.25, 0.25], \"e12\": [0.25, 0.25, 0.25, 0.25]}\n");
    CHECK(run_cli("check critical " + model_arg("path3.json") + " --beliefs \"" + beliefs +
                  "\"")
              .code == 2);
    std::remove(beliefs.c_str());
}

TEST_CASE("transport identities verify along the shipped binning", "[cli]") {
    RunResult t1 = run_cli("check intertwine " + path_arg("transform", "bin_transform.json") +
                           " --theorem 1 --trials 40");
    CHECK(t1.code == 0);
    CHECK(t1.out.find("max_residual") != std::string::npos);
    CHECK(run_cli("check intertwine " + path_arg("transform", "bin_transform.json") +
                  " --theorem 3 --trials 40")
              .code == 0);

    // explicit model pair overrides the paths inside the file
    CHECK(run_cli("check intertwine " + path_arg("transform", "bin_transform.json") + " " +
                  model_arg("bin_source.json") + " " + path_arg("target-model", "bin_target.json"))
              .code == 0);
    CHECK(run_cli("check intertwine " + path_arg("transform", "bin_transform.json") + " " +
                  model_arg("bin_source.json"))
              .code == 3);
}

TEST_CASE("transported models are emitted canonically", "[cli]") {
    RunResult r1 = run_cli("transform apply " + path_arg("transform", "bin_transform.json"));
    REQUIRE(r1.code == 0);
    RunResult r2 = run_cli("transform apply " + path_arg("transform", "bin_transform.json"));
    CHECK(r1.out == r2.out);
    Model out = model_from_json(Json::parse(r1.out));
    CHECK(out.F.poset().size() == 3);

    // the emitted energies are the fiberwise binned source energies
    LoadedTransformation tr = load_transformation(std::string(GBP_MODELS_DIR) +
                                                  "/bin_transform.json");
    FieldBundle pushed = push_hamiltonian(tr.phi, tr.source.H);
    CHECK(max_bundle_diff(out.H, pushed) < 1e-15);
}

TEST_CASE("order reports carry the Mobius function and counting numbers", "[cli]") {
    RunResult r = run_cli("poset mobius " + model_arg("explicit_chain.json"));
    REQUIRE(r.code == 0);
    Json j = Json::parse(r.out);
    CHECK(j.at("c").at("bottom").get<int>() == 0);
    CHECK(j.at("c").at("top").get<int>() == 1);
    bool found = false;
    for (const auto& triple : j.at("mu"))
        if (triple[0] == "top" && triple[1] == "bottom") {
            CHECK(triple[2].get<int>() == -1);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("usage problems and bad inputs exit with one", "[cli]") {
    CHECK(run_cli("").code == 1);                                  // no subcommand
    CHECK(run_cli("infer").code == 1);                             // missing --model
    CHECK(run_cli("infer --model /nonexistent.json").code == 1);   // unreadable file
    CHECK(run_cli("infer " + model_arg("path2.json") + " --algo nope").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
}

TEST_CASE("non-convergence within budget exits with two", "[cli]") {
    RunResult r = run_cli("infer " + model_arg("multicycle.json") +
                          " --algo bp --max-iters 3 --tol 1e-14");
    CHECK(r.code == 2);
}

TEST_CASE("structural violations exit with three", "[cli]") {
    std::string bad = temp_path("gbp_cli_badweights.json");
    write_file(bad,
               "{\"graphical\": {\"variables\": [{\"name\": \"x\", \"card\": 2}],\n"
               "  \"regions\": [{\"name\": \"v\", \"vars\": [\"x\"]}]},\n"
               " \"weights\": {\"v\": [1.0, -1.0]}}\n");
    CHECK(run_cli("infer --model \"" + bad + "\"").code == 3);
    std::remove(bad.c_str());

    // evidence on a non-graphical model cannot name variables
    CHECK(run_cli("infer " + model_arg("explicit_chain.json") + " " +
                  path_arg("evidence", "path3_evidence.json"))
              .code == 3);
}
