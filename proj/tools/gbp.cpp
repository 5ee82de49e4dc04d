// Command-line driver: inference, exact oracles, structural checks, and
// transformation transport for presheaf models. Results go to stdout (or
// --out); diagnostics go to stderr. Runs with the same inputs and seed
// produce byte-identical output.
//
// Exit codes: 0 success, 1 usage or parse failure, 2 non-convergence or a
// residual above tolerance, 3 validation failure.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gbp/gbp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitResidual = 2;
constexpr int kExitInvalid = 3;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
    } else {
        gbp::write_file(out_path, text);
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

gbp::Model load_model_checked(const std::string& path) {
    gbp::Model m = gbp::load_model(path);
    gbp::validate_support(m.F, m.H);
    return m;
}

std::vector<std::pair<int, int>> load_observations(const std::string& path, const gbp::Model& m) {
    if (!m.F.is_graphical())
        throw gbp::ValidationError("evidence requires a graphical model (named variables)");
    return gbp::load_evidence(path, m.F.graphical_spec());
}

std::vector<gbp::Field> model_factors(const gbp::Model& m) {
    if (m.has_factors) return m.factors;
    std::vector<gbp::Field> f(m.H.size());
    for (size_t a = 0; a < m.H.size(); ++a) {
        f[a].resize(m.H[a].size());
        for (size_t x = 0; x < m.H[a].size(); ++x) f[a][x] = std::exp(-m.H[a][x]);
    }
    return f;
}

struct InferArgs {
    std::string model, algo = "mp", evidence, out;
    gbp::RunOptions opt;
};

int run_infer(const InferArgs& a) {
    gbp::Model m = load_model_checked(a.model);
    if (!a.evidence.empty()) {
        m.H = gbp::conditioning_to_hamiltonian(m.F, m.H, load_observations(a.evidence, m));
        gbp::validate_support(m.F, m.H);
    }
    bool converged = false;
    gbp::FieldBundle beliefs;
    int iterations = 0;
    double residual = 0.0;
    if (a.algo == "bp") {
        gbp::BpResult r = gbp::bp_run(m.F, m.H, a.opt);
        converged = r.converged;
        beliefs = std::move(r.beliefs);
        iterations = r.iterations;
        residual = r.last_delta;
    } else {
        gbp::MpResult r = gbp::mp_run(m.F, m.H, m.weights, a.opt);
        converged = r.converged;
        beliefs = std::move(r.beliefs);
        iterations = r.iterations;
        residual = r.last_delta;
    }
    std::fprintf(stderr, "%s: %s after %d iterations, residual %.3g\n", a.algo.c_str(),
                 converged ? "converged" : "did not converge", iterations, residual);
    if (!beliefs.empty()) emit(gbp::beliefs_json(m.F, beliefs), a.out);
    return converged ? kExitOk : kExitResidual;
}

struct ExactArgs {
    std::string model, evidence, out;
};

int run_exact(const ExactArgs& a) {
    gbp::Model m = load_model_checked(a.model);
    if (!m.F.is_graphical())
        throw gbp::ValidationError("exact inference requires a graphical model");
    const gbp::GraphicalSpec& spec = m.F.graphical_spec();
    gbp::ExactJoint joint = gbp::exact_joint(spec, model_factors(m));
    std::vector<double> p = std::move(joint.p);
    std::fprintf(stderr, "log partition function %.17g\n", joint.log_z);
    if (!a.evidence.empty()) {
        gbp::ConditionedJoint c =
            gbp::condition_joint(spec, p, load_observations(a.evidence, m));
        p = std::move(c.p);
        std::fprintf(stderr, "log evidence mass %.17g\n", c.log_mass);
    }
    emit(gbp::beliefs_json(m.F, gbp::exact_marginals(spec, p)), a.out);
    return kExitOk;
}

struct CriticalArgs {
    std::string model, beliefs;
    double tol_section = 1e-8, tol_critical = 1e-6;
};

int run_check_critical(const CriticalArgs& a) {
    gbp::Model m = load_model_checked(a.model);
    gbp::FieldBundle Q = gbp::load_field_bundle(a.beliefs, m.F);
    gbp::CriticalityResult r = gbp::criticality_residual(m.F, m.H, Q);
    std::printf("r_section %s\nr_critical %s\n", fmt(r.r_section).c_str(), fmt(r.r_critical).c_str());
    return (r.r_section < a.tol_section && r.r_critical < a.tol_critical) ? kExitOk : kExitResidual;
}

struct IntertwineArgs {
    std::string model, target_model, transform;
    int theorem = 1;
    int trials = 100;
    std::uint64_t seed = 0;
    double tol = 1e-9;
};

int run_check_intertwine(const IntertwineArgs& a) {
    gbp::Model src, tgt;
    gbp::NaturalTransformation phi = [&]() {
        if (!a.model.empty() || !a.target_model.empty()) {
            if (a.model.empty() || a.target_model.empty())
                throw gbp::ValidationError("--model and --target-model must be given together");
            src = load_model_checked(a.model);
            tgt = load_model_checked(a.target_model);
            return gbp::transformation_with(a.transform, src.F, tgt.F);
        }
        gbp::LoadedTransformation tr = gbp::load_transformation(a.transform);
        src = std::move(tr.source);
        tgt = std::move(tr.target);
        return std::move(tr.phi);
    }();
    gbp::Rng rng(a.seed);
    double worst = 0.0;
    if (a.theorem == 1) {
        worst = gbp::check_theorem1(phi, src.H, src.weights, tgt.weights, a.trials, rng);
    } else {
        worst = gbp::check_theorem3(phi, src.H, a.trials, rng);
    }
    std::printf("max_residual %s\n", fmt(worst).c_str());
    return worst < a.tol ? kExitOk : kExitResidual;
}

struct TreeArgs {
    std::string model;
    double tol = 1e-10;
};

int run_check_tree(const TreeArgs& a) {
    gbp::Model m = load_model_checked(a.model);
    if (!m.F.is_graphical())
        throw gbp::ValidationError("tree identities require a graphical model");
    const gbp::GraphicalSpec& spec = m.F.graphical_spec();
    gbp::tree_graph(spec);  // throws NotTree otherwise
    gbp::ExactJoint joint = gbp::exact_joint(spec, model_factors(m));
    double fact = gbp::tree_factorization_check(spec, joint.p);
    double ent = gbp::entropy_decomposition_check(spec, joint.p);
    double bethe =
        gbp::bethe_free_energy(m.F, m.H, gbp::exact_marginals(spec, joint.p)) + joint.log_z;
    std::printf("factorization %s\nentropy_decomposition %s\nbethe_vs_exact %s\n",
                fmt(fact).c_str(), fmt(ent).c_str(), fmt(std::fabs(bethe)).c_str());
    bool ok = fact < a.tol && ent < a.tol && std::fabs(bethe) < a.tol;
    return ok ? kExitOk : kExitResidual;
}

struct VariationalArgs {
    std::string model, evidence;
    double tol = 1e-10;
};

int run_check_variational(const VariationalArgs& a) {
    gbp::Model m = load_model_checked(a.model);
    if (!m.F.is_graphical())
        throw gbp::ValidationError("the variational identity requires a graphical model");
    double r = gbp::variational_residual(m.F.graphical_spec(), model_factors(m),
                                         load_observations(a.evidence, m));
    std::printf("variational_residual %s\n", fmt(r).c_str());
    return r < a.tol ? kExitOk : kExitResidual;
}

struct TransformApplyArgs {
    std::string transform, model, out;
};

int run_transform_apply(const TransformApplyArgs& a) {
    gbp::LoadedTransformation tr = gbp::load_transformation(a.transform);
    gbp::Model src = std::move(tr.source);
    gbp::NaturalTransformation phi = std::move(tr.phi);
    if (!a.model.empty()) {
        src = load_model_checked(a.model);
        phi = gbp::transformation_with(a.transform, src.F, tr.target.F);
    }
    gbp::Model out;
    out.F = tr.target.F;
    out.H = gbp::push_hamiltonian(phi, src.H);
    out.weights = tr.target.weights;
    emit(gbp::canonical_model_json(out), a.out);
    return kExitOk;
}

struct MobiusArgs {
    std::string model, out;
};

int run_poset_mobius(const MobiusArgs& a) {
    gbp::Model m = gbp::load_model(a.model);
    emit(gbp::mobius_json(m.F.poset()), a.out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"belief propagation and operator-form message passing on finite presheaves"};
    app.require_subcommand(1);

    InferArgs infer_args;
    CLI::App* infer = app.add_subcommand("infer", "run an iterative algorithm on a model");
    infer->add_option("--model", infer_args.model, "model JSON file")->required();
    infer->add_option("--algo", infer_args.algo, "algorithm: mp or bp")
        ->check(CLI::IsMember({"mp", "bp"}));
    infer->add_option("--damping", infer_args.opt.damping, "update damping in (0, 1]");
    infer->add_option("--tol", infer_args.opt.tol, "convergence tolerance");
    infer->add_option("--max-iters", infer_args.opt.max_iters, "iteration budget");
    infer->add_option("--seed", infer_args.opt.seed, "seed for randomized starts");
    infer->add_flag("--random-init", infer_args.opt.random_init, "randomize the initial messages");
    infer->add_option("--evidence", infer_args.evidence, "evidence JSON file");
    infer->add_option("--out", infer_args.out, "write beliefs here instead of stdout");

    ExactArgs exact_args;
    CLI::App* exact = app.add_subcommand("exact", "exact marginals by enumeration");
    exact->add_option("--model", exact_args.model, "model JSON file")->required();
    exact->add_option("--evidence", exact_args.evidence, "evidence JSON file");
    exact->add_option("--out", exact_args.out, "write marginals here instead of stdout");

    CLI::App* check = app.add_subcommand("check", "structural and numerical certificates");
    check->require_subcommand(1);

    CriticalArgs critical_args;
    CLI::App* critical = check->add_subcommand("critical", "certify beliefs as a free-energy critical point");
    critical->add_option("--model", critical_args.model, "model JSON file")->required();
    critical->add_option("--beliefs", critical_args.beliefs, "beliefs JSON file")->required();
    critical->add_option("--tol-section", critical_args.tol_section, "section residual tolerance");
    critical->add_option("--tol-critical", critical_args.tol_critical, "criticality residual tolerance");

    IntertwineArgs intertwine_args;
    CLI::App* intertwine = check->add_subcommand("intertwine", "verify transport identities along a transformation");
    intertwine->add_option("--transform", intertwine_args.transform, "transformation JSON file")->required();
    intertwine->add_option("--model", intertwine_args.model, "source model (overrides the file's source)");
    intertwine->add_option("--target-model", intertwine_args.target_model, "target model (overrides the file's target)");
    intertwine->add_option("--theorem", intertwine_args.theorem, "identity to check: 1 or 3")
        ->check(CLI::IsMember({1, 3}));
    intertwine->add_option("--trials", intertwine_args.trials, "random message bundles to try");
    intertwine->add_option("--seed", intertwine_args.seed, "seed for the trials");
    intertwine->add_option("--tol", intertwine_args.tol, "pass threshold on the max residual");

    TreeArgs tree_args;
    CLI::App* tree = check->add_subcommand("tree", "exactness identities for acyclic pairwise models");
    tree->add_option("--model", tree_args.model, "model JSON file")->required();
    tree->add_option("--tol", tree_args.tol, "pass threshold on each residual");

    VariationalArgs variational_args;
    CLI::App* variational = check->add_subcommand("variational", "two-block free-energy identity under evidence");
    variational->add_option("--model", variational_args.model, "model JSON file")->required();
    variational->add_option("--evidence", variational_args.evidence, "evidence JSON file")->required();
    variational->add_option("--tol", variational_args.tol, "pass threshold on the residual");

    TransformApplyArgs apply_args;
    CLI::App* transform = app.add_subcommand("transform", "transport models along a transformation");
    transform->require_subcommand(1);
    CLI::App* apply = transform->add_subcommand("apply", "emit the target model with the pushed energies");
    apply->add_option("--transform", apply_args.transform, "transformation JSON file")->required();
    apply->add_option("--model", apply_args.model, "source model (overrides the file's source)");
    apply->add_option("--out", apply_args.out, "write the target model here instead of stdout");

    MobiusArgs mobius_args;
    CLI::App* poset = app.add_subcommand("poset", "order-theoretic reports");
    poset->require_subcommand(1);
    CLI::App* mobius = poset->add_subcommand("mobius", "dump the Mobius function and counting numbers");
    mobius->add_option("--model", mobius_args.model, "model JSON file")->required();
    mobius->add_option("--out", mobius_args.out, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (infer->parsed()) return run_infer(infer_args);
        if (exact->parsed()) return run_exact(exact_args);
        if (check->parsed()) {
            if (critical->parsed()) return run_check_critical(critical_args);
            if (intertwine->parsed()) return run_check_intertwine(intertwine_args);
            if (tree->parsed()) return run_check_tree(tree_args);
            if (variational->parsed()) return run_check_variational(variational_args);
        }
        if (transform->parsed() && apply->parsed()) return run_transform_apply(apply_args);
        if (poset->parsed() && mobius->parsed()) return run_poset_mobius(mobius_args);
    } catch (const gbp::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const gbp::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    }
    return kExitUsage;
}
