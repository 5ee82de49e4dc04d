#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace gbp;

namespace {

Presheaf point_presheaf(int card) {
    return Presheaf(Poset({"pt"}, {}), {card}, {});
}

// A chained pair of coarsenings of a random partition presheaf.
struct ChainInstance {
    Presheaf F;
    FieldBundle H;
    NaturalTransformation phi;  // F -> G
    NaturalTransformation psi;  // G -> K
};

ChainInstance chain_instance(Rng& rng) {
    Poset P = random_poset(rng, 2 + rng.uniform_int(4));
    int universe = 4 + rng.uniform_int(4);
    PartitionPresheaf pp = random_partition_presheaf(rng, P, universe);
    CoarseningResult c1 = random_coarsening(rng, pp.F, pp.labels, universe);
    CoarseningResult c2 = random_coarsening(rng, c1.phi.target, c1.labels, universe);
    FieldBundle H = random_hamiltonians(rng, pp.F);
    return ChainInstance{pp.F, std::move(H), c1.phi, c2.phi};
}

}  // namespace

TEST_CASE("transformations validate shape and naturality", "[transform]") {
    CHECK_NOTHROW(NaturalTransformation(point_presheaf(3), point_presheaf(2), {{0, 1, 1}}));
    CHECK_THROWS_AS(NaturalTransformation(point_presheaf(3), point_presheaf(2), {{0, 1}}),
                    ValidationError);
    CHECK_THROWS_AS(NaturalTransformation(point_presheaf(3), point_presheaf(2), {{0, 1, 2}}),
                    ValidationError);
    CHECK_THROWS_AS(
        NaturalTransformation(point_presheaf(2), Presheaf(Poset({"qt"}, {}), {2}, {}), {{0, 1}}),
        PosetMismatch);

    Poset C({"b", "a"}, {{"b", "a"}});
    Presheaf F(C, {2, 2}, {{0, 1}});
    CHECK_NOTHROW(NaturalTransformation(F, F, {{0, 1}, {0, 1}}));
    CHECK_THROWS_AS(NaturalTransformation(F, F, {{0, 1}, {1, 0}}), NaturalityFailed);
}

TEST_CASE("pushes, adjoints and fiber weights on a single element", "[transform]") {
    NaturalTransformation phi(point_presheaf(3), point_presheaf(2), {{0, 1, 1}});
    CHECK(phi.is_surjective());
    CHECK(push_vector(phi, 0, {1.0, 2.0, 3.0}) == Field{1.0, 5.0});

    FieldBundle wF = phi_weights(phi);
    CHECK(wF[0] == Field{1.0, 2.0, 2.0});
    FieldBundle wG{{1.0, 1.0}};
    Field lifted = phi_adjoint(phi, wF, wG, 0, {4.0, 6.0});
    CHECK(lifted == Field{4.0, 3.0, 3.0});
    CHECK(push_vector(phi, 0, lifted) == Field{4.0, 6.0});

    NaturalTransformation skip(point_presheaf(2), point_presheaf(3), {{0, 1}});
    CHECK_FALSE(skip.is_surjective());
    FieldBundle pushed = push_hamiltonian(skip, {{-std::log(1.0), -std::log(2.0)}});
    CHECK(pushed[0][0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(pushed[0][1] == Catch::Approx(-std::log(2.0)).margin(1e-14));
    CHECK(std::isinf(pushed[0][2]));  // never hit

    Rng rng(1);
    CHECK_THROWS_AS(check_theorem3(skip, FieldBundle{{0.0, 0.0}}, 1, rng), NotSurjective);
}

TEST_CASE("binned energies merge fibers by log-sum-exp", "[transform]") {
    NaturalTransformation phi(point_presheaf(3), point_presheaf(2), {{0, 1, 1}});
    FieldBundle H{{-std::log(1.0), -std::log(2.0), -std::log(3.0)}};
    FieldBundle out = push_hamiltonian(phi, H);
    CHECK(out[0][0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(out[0][1] == Catch::Approx(-std::log(5.0)).margin(1e-14));

    // masked fiber entries drop out; fully masked fibers stay masked
    FieldBundle Hm{{kInf, -std::log(2.0), kInf}};
    FieldBundle outm = push_hamiltonian(phi, Hm);
    CHECK(std::isinf(outm[0][0]));
    CHECK(outm[0][1] == Catch::Approx(-std::log(2.0)).margin(1e-14));
}

TEST_CASE("the increment intertwines with coarsening at any weights", "[transform]") {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        ChainInstance ci = chain_instance(rng);
        FieldBundle wF = random_weights(rng, ci.phi.source);
        FieldBundle wG = random_weights(rng, ci.phi.target);
        CHECK(check_theorem1(ci.phi, ci.H, wF, wG, 20, rng) < 1e-9);
    }
}

TEST_CASE("fiber weights make the lift an isometry onto the image", "[transform]") {
    Rng rng(15);
    for (int t = 0; t < 10; ++t) {
        ChainInstance ci = chain_instance(rng);
        FieldBundle wG = random_weights(rng, ci.phi.target);
        IsometryResult res = check_isometry(ci.phi, wG, 5, rng);
        CHECK(res.push_adjoint_identity);
        CHECK(res.product_preserved);
        CHECK(res.push_adjoint_residual < 1e-12);
        CHECK(res.product_residual < 1e-12);
    }
}

TEST_CASE("the full update intertwines along surjective coarsenings", "[transform]") {
    Rng rng(25);
    for (int t = 0; t < 10; ++t) {
        ChainInstance ci = chain_instance(rng);
        REQUIRE(ci.phi.is_surjective());
        CHECK(check_theorem3(ci.phi, ci.H, 20, rng) < 1e-9);
    }
}

TEST_CASE("coarsening twice equals coarsening along the composite", "[transform]") {
    Rng rng(35);
    for (int t = 0; t < 8; ++t) {
        ChainInstance ci = chain_instance(rng);
        NaturalTransformation chi = compose(ci.phi, ci.psi);

        FieldBundle once = push_hamiltonian(chi, ci.H);
        FieldBundle twice = push_hamiltonian(ci.psi, push_hamiltonian(ci.phi, ci.H));
        CHECK(max_bundle_diff(once, twice) < 1e-12);

        // transported increments agree on random coarse bundles
        const Presheaf& K = ci.psi.target;
        FieldBundle wK = unit_weights(K);
        FieldBundle wChi = phi_weights(chi);
        FieldBundle wPsi = phi_weights(ci.psi);
        FieldBundle HG = push_hamiltonian(ci.phi, ci.H);
        for (int r = 0; r < 5; ++r) {
            MessageBundle lK = random_message_bundle(rng, K);
            MessageBundle direct = push_messages(
                chi, delta_mp(chi.source, ci.H, wChi, lift_messages(chi, wChi, wK, lK)));
            MessageBundle chained = push_messages(
                ci.psi, delta_mp(ci.psi.source, HG, wPsi, lift_messages(ci.psi, wPsi, wK, lK)));
            CHECK(detail::rel_sup_diff(direct, chained) < 1e-10);
        }
    }
}

TEST_CASE("composition requires matching inner presheaves", "[transform]") {
    NaturalTransformation phi(point_presheaf(3), point_presheaf(2), {{0, 1, 1}});
    NaturalTransformation psi(point_presheaf(2), point_presheaf(2), {{0, 1}});
    CHECK_NOTHROW(compose(phi, psi));
    NaturalTransformation bad(point_presheaf(4), point_presheaf(2), {{0, 0, 1, 1}});
    CHECK_THROWS_AS(compose(phi, bad), Mismatch);
}

TEST_CASE("restricting to the image gives an embedded subobject", "[transform]") {
    NaturalTransformation skip(point_presheaf(2), point_presheaf(4), {{1, 3}});
    ImageSubpresheaf im = image_subpresheaf(skip);
    CHECK(im.image.card(0) == 2);
    CHECK(im.embedding.comps[0] == std::vector<int>{1, 3});
    CHECK(validate(im.embedding));
}

TEST_CASE("solving the coarse model and lifting solves the fine model", "[transform]") {
    Rng rng(11);
    for (int t = 0; t < 6; ++t) {
        LiftedInstance li = make_lifted_instance(rng, 3 + rng.uniform_int(3));
        const Presheaf& G = li.phi.target;
        FieldBundle Ht = push_hamiltonian(li.phi, li.HF);
        RunOptions opt;
        opt.tol = 1e-12;
        MpResult coarse = mp_run(G, Ht, unit_weights(G), opt);
        REQUIRE(coarse.converged);

        FieldBundle wF = phi_weights(li.phi);
        MessageBundle lF = lift_messages(li.phi, wF, unit_weights(G), coarse.messages);
        MessageBundle dF = delta_mp(li.F, li.HF, wF, lF);
        double fine_norm = 0.0;
        for (const auto& f : dF)
            for (double x : f) fine_norm = std::max(fine_norm, std::fabs(x));
        CHECK(fine_norm < 1e-8);

        MessageBundle lG = push_messages(li.phi, lF);
        MessageBundle dG = delta_mp(G, Ht, unit_weights(G), lG);
        double coarse_norm = 0.0;
        for (const auto& f : dG)
            for (double x : f) coarse_norm = std::max(coarse_norm, std::fabs(x));
        CHECK(coarse_norm < 1e-6);
    }
}
