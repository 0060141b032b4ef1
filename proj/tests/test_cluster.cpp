#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "causalhbm/cluster.hpp"
#include "causalhbm/rng.hpp"

using namespace causalhbm;

namespace {

DistanceMatrix planted_blocks(int n, double within, double between) {
    DistanceMatrix m;
    m.n = n;
    m.d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const bool same = (i < n / 2) == (j < n / 2);
            m.d(i, j) = same ? within : between;
        }
    }
    return m;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
        }
    }
    return true;
}

// Exhaustive label-permutation oracle for macro F1 (C = 2 only).
double f1_macro_bruteforce_c2(const std::vector<int>& pred, const std::vector<int>& truth) {
    double best = -1.0;
    for (const bool swap : {false, true}) {
        double sum = 0.0;
        for (const int g : {0, 1}) {
            const int mapped = swap ? 1 - g : g;
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const bool in_pred = pred[i] == mapped;
                const bool in_true = truth[i] == g;
                tp += in_pred && in_true;
                fp += in_pred && !in_true;
                fn += !in_pred && in_true;
            }
            sum += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
        }
        best = std::max(best, sum / 2.0);
    }
    return best;
}

}  // namespace

TEST_CASE("affinity is the guarded reciprocal") {
    DistanceMatrix m;
    m.n = 2;
    m.d = Eigen::MatrixXd::Zero(2, 2);
    m.d(0, 1) = m.d(1, 0) = 2.0;
    const Eigen::MatrixXd a = affinity(m);
    CHECK(a(0, 1) == doctest::Approx(1.0 / (2.0 + 1e-8)).epsilon(1e-15));
    CHECK(a(0, 0) == 0.0);
    CHECK(a(1, 1) == 0.0);
    CHECK(a(0, 1) == a(1, 0));
}

TEST_CASE("spectral clustering recovers planted blocks") {
    const DistanceMatrix m = planted_blocks(20, 0.1, 10.0);
    const Eigen::MatrixXd a = affinity(m);
    const GroupAssignment got = spectral_cluster(a, 2, 0);
    std::vector<int> expected(20, 0);
    for (int i = 10; i < 20; ++i) expected[i] = 1;
    CHECK(same_partition(got.labels, expected));

    // C = 1 collapses to a single label.
    const GroupAssignment one = spectral_cluster(a, 1, 0);
    CHECK(std::all_of(one.labels.begin(), one.labels.end(), [](int l) { return l == 0; }));

    // Same seed, same labels.
    CHECK(spectral_cluster(a, 2, 7).labels == spectral_cluster(a, 2, 7).labels);

    // Uniform positive scaling of the affinity changes nothing.
    CHECK(spectral_cluster(a, 2, 7).labels == spectral_cluster(7.3 * a, 2, 7).labels);
}

TEST_CASE("degenerate affinity is rejected") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = a(1, 0) = 1.0;  // node 2 is isolated
    CHECK_THROWS_AS(spectral_cluster(a, 2, 0), DegenerateAffinityError);
}

TEST_CASE("every group is nonempty") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        DistanceMatrix m;
        m.n = 12;
        m.d = Eigen::MatrixXd::Zero(m.n, m.n);
        for (int i = 0; i < m.n; ++i) {
            for (int j = i + 1; j < m.n; ++j) {
                m.d(i, j) = m.d(j, i) = rng.uniform(0.5, 2.0);
            }
        }
        const GroupAssignment got = spectral_cluster(affinity(m), 4, trial);
        std::vector<int> counts(4, 0);
        for (const int l : got.labels) ++counts[l];
        for (const int c : counts) CHECK(c > 0);
    }
}

TEST_CASE("assign_new_task picks the nearest task's label") {
    GroupAssignment trained{2, {0, 0, 1, 1}};
    Eigen::VectorXd d(4);
    d << 5, 3, 0, 2;
    CHECK(assign_new_task(d, trained) == 1);  // zero distance at task 2
    d << 1, 1, 1, 1;
    CHECK(assign_new_task(d, trained) == 0);  // tie -> lowest index
}

TEST_CASE("group recovery f1") {
    const std::vector<int> truth{0, 0, 0, 1, 1, 1};
    CHECK(group_recovery_f1(truth, truth) == doctest::Approx(1.0));
    const std::vector<int> flipped{1, 1, 1, 0, 0, 0};
    CHECK(group_recovery_f1(flipped, truth) == doctest::Approx(1.0));

    // n = 40, half of one group mislabeled (10 wrong): value frozen from the
    // exhaustive permutation oracle.
    std::vector<int> t40(40, 0), p40(40, 0);
    for (int i = 20; i < 40; ++i) t40[i] = 1;
    for (int i = 30; i < 40; ++i) p40[i] = 1;  // 10 of group 1 predicted as 0
    const double oracle = f1_macro_bruteforce_c2(p40, t40);
    CHECK(group_recovery_f1(p40, t40) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(group_recovery_f1(p40, t40) == doctest::Approx((0.8 + 2.0 / 3.0) / 2.0).epsilon(1e-12));

    // Permutation invariance on random label vectors.
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> truth_r(12), pred_r(12);
        for (int i = 0; i < 12; ++i) {
            truth_r[i] = static_cast<int>(rng.uniform_int(3));
            pred_r[i] = static_cast<int>(rng.uniform_int(3));
        }
        std::vector<int> swapped(12);
        for (int i = 0; i < 12; ++i) swapped[i] = (pred_r[i] + 1) % 3;
        CHECK(group_recovery_f1(pred_r, truth_r) ==
              doctest::Approx(group_recovery_f1(swapped, truth_r)).epsilon(1e-12));
        const double f1 = group_recovery_f1(pred_r, truth_r);
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        if (same_partition(pred_r, truth_r)) {
            CHECK(f1 == doctest::Approx(1.0));
        }
    }

    // Micro score equals overall agreement after matching.
    CHECK(group_recovery_f1_micro(p40, t40) == doctest::Approx(30.0 / 40.0));
    CHECK_THROWS_AS(group_recovery_f1({0, 1}, {0}), LengthMismatchError);
}
