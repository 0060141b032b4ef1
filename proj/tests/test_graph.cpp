#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "causalhbm/graph.hpp"
#include "oracles.hpp"

using namespace causalhbm;

namespace {

Dag chain3() { return make_dag(3, {{0, 1}, {1, 2}}); }

}  // namespace

TEST_CASE("topological order") {
    CHECK(topological_order(make_dag(2, {{0, 1}})) == std::vector<int>{0, 1});
    CHECK(topological_order(make_dag(3, {})) == std::vector<int>{0, 1, 2});

    Dag cyclic = make_dag(2, {{0, 1}});
    cyclic.edges(1, 0) = true;
    CHECK_THROWS_AS(topological_order(cyclic), CyclicGraphError);
}

TEST_CASE("descendants") {
    const Dag g = chain3();
    CHECK(descendants(g, 0) == std::vector<int>{1, 2});
    CHECK(descendants(g, 2).empty());
    const Dag diamond = make_dag(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
    CHECK(descendants(diamond, 0) == std::vector<int>{1, 2, 3});
}

TEST_CASE("d-separation basics") {
    const Dag chain = chain3();
    CHECK(d_separated(chain, 0, 2, mask_of({1})));
    CHECK_FALSE(d_separated(chain, 0, 2, 0));

    const Dag collider = make_dag(3, {{0, 1}, {2, 1}});
    CHECK(d_separated(collider, 0, 2, 0));
    CHECK_FALSE(d_separated(collider, 0, 2, mask_of({1})));
}

TEST_CASE("d-separation matches brute-force path enumeration") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(3));  // 3..5 nodes
        const Dag g = oracles::random_dag(n, 0.5, rng);
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) {
                if (x == y) continue;
                const NodeMask all = (NodeMask{1} << n) - 1;
                const NodeMask candidates = all & ~node_bit(x) & ~node_bit(y);
                const NodeMask z = candidates & rng.bits();
                CHECK(d_separated(g, x, y, z) == oracles::d_separated_bruteforce(g, x, y, z));
            }
        }
    }
}

TEST_CASE("shd examples") {
    const Dag g = chain3();
    CHECK(shd(g, g) == 0);
    CHECK(shd(make_dag(3, {{0, 1}}), make_dag(3, {{0, 1}, {0, 2}})) == 1);
    // Reversal flips two slots: brute-force over all edge slots.
    const Dag fwd = make_dag(2, {{0, 1}});
    Dag rev = make_dag(2, {});
    rev.edges(1, 0) = true;
    CHECK(shd(fwd, rev) == oracles::shd_bruteforce(fwd, rev));
    CHECK(shd(fwd, rev) == 2);

    CHECK_THROWS_AS(shd(make_dag(2, {}), make_dag(3, {})), ShapeMismatchError);
}

TEST_CASE("shd is a metric on labelled dags") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6
        const Dag a = oracles::random_dag(n, 0.4, rng);
        const Dag b = oracles::random_dag(n, 0.4, rng);
        const Dag c = oracles::random_dag(n, 0.4, rng);
        CHECK(shd(a, a) == 0);
        CHECK(shd(a, b) == shd(b, a));
        CHECK(shd(a, c) <= shd(a, b) + shd(b, c));
        CHECK(shd(a, b) == oracles::shd_bruteforce(a, b));
    }
}

TEST_CASE("valid adjustment sets") {
    const Dag chain = chain3();
    CHECK(valid_adjustment(chain, 0, 2, 0));
    CHECK_FALSE(valid_adjustment(chain, 0, 2, mask_of({1})));  // mediator conditioned

    // Confounder 2 -> 0, 2 -> 1 with direct edge 0 -> 1: adjusting for the
    // confounder closes the back door.
    const Dag confounded = make_dag(3, {{2, 0}, {2, 1}, {0, 1}});
    CHECK(valid_adjustment(confounded, 0, 1, mask_of({2})));
    CHECK_FALSE(valid_adjustment(confounded, 0, 1, 0));
}

TEST_CASE("sid fixed cases match the analytic oracle") {
    const Dag chain = chain3();
    const Dag empty = make_dag(3, {});
    CHECK(sid(chain, chain) == 0);
    CHECK(sid(empty, empty) == 0);

    Rng rng(3);
    const Scm scm_chain = oracles::random_scm_on(chain, rng);
    CHECK(sid(chain, empty) == oracles::sid_oracle(scm_chain, empty));
    CHECK(sid(chain, empty) == 3);  // reversed-direction pairs are wrong under no adjustment

    const Scm scm_empty = oracles::random_scm_on(empty, rng);
    CHECK(sid(empty, chain) == oracles::sid_oracle(scm_empty, chain));
    CHECK(sid(empty, chain) == 0);
}

TEST_CASE("sid equals the linear-gaussian oracle on random pairs") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(3));  // 3..5
        const Dag g_true = oracles::random_dag(n, 0.5, rng);
        const Dag g_other = oracles::random_dag(n, 0.5, rng);
        const Scm scm = oracles::random_scm_on(g_true, rng);
        CHECK(sid(g_true, g_other) == oracles::sid_oracle(scm, g_other));
    }
}

TEST_CASE("sid bounds") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(4));
        const Dag a = oracles::random_dag(n, 0.5, rng);
        const Dag b = oracles::random_dag(n, 0.5, rng);
        CHECK(sid(a, a) == 0);
        const int v = sid(a, b);
        CHECK(v >= 0);
        CHECK(v <= n * (n - 1));
    }
}

TEST_CASE("dag invariants") {
    CHECK_NOTHROW(validate(default_reference_dag()));

    // Target with an outgoing edge.
    Dag bad = make_dag(3, {{0, 1}});
    bad.edges(2, 0) = true;
    CHECK_FALSE(is_valid(bad));

    // Intervention node with a parent.
    std::vector<NodeRole> roles{NodeRole::Intervention, NodeRole::Covariate, NodeRole::Target};
    CHECK_THROWS_AS(validate(make_dag(3, {{1, 0}, {0, 2}}, roles)), InvalidDagError);

    // Intervention node with no path to the target.
    CHECK_THROWS_AS(validate(make_dag(3, {{1, 2}}, roles)), InvalidDagError);
}
