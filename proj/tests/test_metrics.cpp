#include <doctest.h>

#include <queue>
#include <random>
#include <sstream>

#include "lesionseg/metrics.hpp"

using namespace lesionseg;

namespace {

BinaryMask3D mask_from(Dims3 d, std::initializer_list<int> ones) {
    BinaryMask3D m(d);
    for (int i : ones)
        m.data()[std::size_t(i)] = 1;
    return m;
}

BinaryMask3D random_mask(Dims3 d, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    BinaryMask3D m(d);
    for (auto& v : m.data())
        v = unit(rng) < p;
    return m;
}

// Independent flood-fill (BFS) component labeling, 26-connectivity.
int bfs_components(const BinaryMask3D& m, std::vector<int>& labels) {
    const Dims3& d = m.dims();
    labels.assign(m.data().size(), 0);
    int next = 0;
    for (int z0 = 0; z0 < d.nz; ++z0)
        for (int y0 = 0; y0 < d.ny; ++y0)
            for (int x0 = 0; x0 < d.nx; ++x0) {
                const std::size_t start = m.index(x0, y0, z0);
                if (!m.data()[start] || labels[start])
                    continue;
                ++next;
                std::queue<std::array<int, 3>> q;
                q.push({x0, y0, z0});
                labels[start] = next;
                while (!q.empty()) {
                    auto [x, y, z] = q.front();
                    q.pop();
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int xx = x + dx, yy = y + dy, zz = z + dz;
                                if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx || yy >= d.ny ||
                                    zz >= d.nz)
                                    continue;
                                const std::size_t i = m.index(xx, yy, zz);
                                if (m.data()[i] && !labels[i]) {
                                    labels[i] = next;
                                    q.push({xx, yy, zz});
                                }
                            }
                }
            }
    return next;
}

// Brute-force lesion metrics straight from the definitions.
LesionMetrics brute_lesion_metrics(const BinaryMask3D& pred, const BinaryMask3D& gt) {
    std::vector<int> pl, gl;
    const int np = bfs_components(pred, pl);
    const int ng = bfs_components(gt, gl);
    int detected = 0;
    for (int k = 1; k <= ng; ++k) {
        bool hit = false;
        for (std::size_t i = 0; i < gl.size(); ++i)
            if (gl[i] == k && pred.data()[i])
                hit = true;
        detected += hit;
    }
    int false_pos = 0;
    for (int k = 1; k <= np; ++k) {
        bool hit = false;
        for (std::size_t i = 0; i < pl.size(); ++i)
            if (pl[i] == k && gt.data()[i])
                hit = true;
        false_pos += !hit;
    }
    LesionMetrics m;
    m.ltpr = ng == 0 ? 1.0 : double(detected) / ng;
    m.lfpr = np == 0 ? 0.0 : double(false_pos) / np;
    return m;
}

} // namespace

TEST_CASE("voxel metrics basics and conventions") {
    const Dims3 d{3, 3, 3};
    BinaryMask3D gt = mask_from(d, {0, 1, 2});

    SUBCASE("perfect prediction") {
        VoxelMetrics m = voxel_metrics(gt, gt);
        CHECK(m.dsc == 1.0);
        CHECK(m.ppv == 1.0);
        CHECK(m.tpr == 1.0);
    }
    SUBCASE("empty prediction, nonempty gt") {
        VoxelMetrics m = voxel_metrics(BinaryMask3D(d), gt);
        CHECK(m.dsc == 0.0);
        CHECK(m.ppv == 1.0); // empty-pred convention
        CHECK(m.tpr == 0.0);
    }
    SUBCASE("both empty") {
        VoxelMetrics m = voxel_metrics(BinaryMask3D(d), BinaryMask3D(d));
        CHECK(m.dsc == 1.0);
        CHECK(m.ppv == 1.0);
        CHECK(m.tpr == 1.0);
    }
    SUBCASE("two predicted, two true, one overlap") {
        BinaryMask3D pred = mask_from(d, {0, 9});
        BinaryMask3D gt2 = mask_from(d, {0, 18});
        VoxelMetrics m = voxel_metrics(pred, gt2);
        CHECK(m.dsc == doctest::Approx(0.5));
        CHECK(m.ppv == doctest::Approx(0.5));
        CHECK(m.tpr == doctest::Approx(0.5));
    }
    SUBCASE("dims mismatch throws") {
        CHECK_THROWS_AS(voxel_metrics(BinaryMask3D({2, 2, 2}), gt), config_error);
    }
}

TEST_CASE("voxel metric symmetries") {
    const Dims3 d{6, 6, 6};
    for (int k = 0; k < 20; ++k) {
        BinaryMask3D a = random_mask(d, 0.3, 100 + k);
        BinaryMask3D b = random_mask(d, 0.3, 200 + k);
        CHECK(voxel_metrics(a, b).dsc == doctest::Approx(voxel_metrics(b, a).dsc));
        CHECK(voxel_metrics(a, b).ppv == doctest::Approx(voxel_metrics(b, a).tpr));
    }
}

TEST_CASE("lesion metrics basics") {
    const Dims3 d{10, 10, 1};

    SUBCASE("perfect prediction") {
        BinaryMask3D gt = mask_from(d, {0, 55});
        LesionMetrics m = lesion_metrics(gt, gt);
        CHECK(m.ltpr == 1.0);
        CHECK(m.lfpr == 0.0);
    }
    SUBCASE("one of two gt blobs found plus one spurious blob") {
        BinaryMask3D gt = mask_from(d, {0, 1, 55, 56});  // two separated blobs
        BinaryMask3D pred = mask_from(d, {0, 1, 90});    // covers first, one spurious
        LesionMetrics m = lesion_metrics(pred, gt);
        CHECK(m.ltpr == doctest::Approx(0.5));
        CHECK(m.lfpr == doctest::Approx(0.5));
    }
    SUBCASE("empty prediction") {
        BinaryMask3D gt = mask_from(d, {0});
        LesionMetrics m = lesion_metrics(BinaryMask3D(d), gt);
        CHECK(m.ltpr == 0.0);
        CHECK(m.lfpr == 0.0); // no predicted lesions to be false
    }
    SUBCASE("empty gt") {
        LesionMetrics m = lesion_metrics(mask_from(d, {3}), BinaryMask3D(d));
        CHECK(m.ltpr == 1.0);
        CHECK(m.lfpr == 1.0);
    }
}

TEST_CASE("lesion metrics match the flood-fill oracle on random masks") {
    const Dims3 d{12, 12, 12};
    for (int k = 0; k < 40; ++k) {
        BinaryMask3D pred = random_mask(d, 0.08, 1000 + k);
        BinaryMask3D gt = random_mask(d, 0.08, 2000 + k);
        LesionMetrics got = lesion_metrics(pred, gt);
        LesionMetrics want = brute_lesion_metrics(pred, gt);
        CHECK(got.ltpr == want.ltpr);
        CHECK(got.lfpr == want.lfpr);
    }
}

TEST_CASE("volume correlation") {
    CHECK(volume_correlation({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    CHECK(volume_correlation({5, 4, 3}, {1, 2, 3}) == doctest::Approx(-1.0));
    CHECK(volume_correlation({2, 4, 6}, {1, 2, 3}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(volume_correlation({1.0}, {2.0}), config_error);
    CHECK_THROWS_AS(volume_correlation({1, 1, 1}, {1, 2, 3}), config_error);

    // invariance to positive affine rescaling
    std::vector<double> a = {3, 1, 4, 1, 5}, b = {2, 7, 1, 8, 2};
    const double r = volume_correlation(a, b);
    std::vector<double> a2 = a;
    for (double& x : a2)
        x = 2.5 * x + 7.0;
    CHECK(volume_correlation(a2, b) == doctest::Approx(r));
}

TEST_CASE("composite score") {
    CHECK(composite_score(1, 1, 1, 0, 1) == doctest::Approx(1.0));
    CHECK(composite_score(0, 0, 0, 1, 0) == doctest::Approx(0.0));
    // Weighted-sum evaluation at a published operating point
    CHECK(composite_score(0.664, 0.882, 0.508, 0.100, 0.866) ==
          doctest::Approx(0.76175).epsilon(1e-12));

    SUBCASE("monotone in each argument") {
        const double base = composite_score(0.5, 0.5, 0.5, 0.5, 0.5);
        CHECK(composite_score(0.6, 0.5, 0.5, 0.5, 0.5) > base);
        CHECK(composite_score(0.5, 0.6, 0.5, 0.5, 0.5) > base);
        CHECK(composite_score(0.5, 0.5, 0.6, 0.5, 0.5) > base);
        CHECK(composite_score(0.5, 0.5, 0.5, 0.6, 0.5) < base); // lfpr
        CHECK(composite_score(0.5, 0.5, 0.5, 0.5, 0.6) > base);
    }
}

TEST_CASE("cohort evaluation") {
    const Dims3 d{8, 8, 8};

    SUBCASE("identical raters average to the single-rater report") {
        std::vector<BinaryMask3D> preds = {random_mask(d, 0.2, 1), random_mask(d, 0.2, 2),
                                           random_mask(d, 0.25, 3)};
        std::vector<BinaryMask3D> gt = {random_mask(d, 0.2, 4), random_mask(d, 0.2, 5),
                                        random_mask(d, 0.15, 6)};
        MetricsReport rep = evaluate_cohort(preds, gt, gt);
        CHECK(rep.average.dsc == doctest::Approx(rep.rater1.dsc));
        CHECK(rep.average.score == doctest::Approx(rep.rater1.score));
        CHECK_FALSE(rep.partial);
    }

    SUBCASE("single subject marks vc undefined and the score partial") {
        std::vector<BinaryMask3D> preds = {random_mask(d, 0.2, 7)};
        std::vector<BinaryMask3D> gt = {random_mask(d, 0.2, 8)};
        MetricsReport rep = evaluate_cohort(preds, gt, gt);
        CHECK(rep.partial);
        CHECK_FALSE(rep.average.vc_defined);
        CHECK(rep.average.score ==
              doctest::Approx(composite_score_partial(rep.average.dsc, rep.average.ppv,
                                                      rep.average.ltpr, rep.average.lfpr)));
    }

    SUBCASE("two-subject hand-checkable cohort matches a brute-force recomputation") {
        // subject A: pred == rater1 exactly; rater2 shifted by one voxel
        BinaryMask3D a_pred = mask_from(d, {0, 1});
        BinaryMask3D a_r1 = mask_from(d, {0, 1});
        BinaryMask3D a_r2 = mask_from(d, {1, 2});
        // subject B: disjoint blob
        BinaryMask3D b_pred = mask_from(d, {100, 101, 102});
        BinaryMask3D b_r1 = mask_from(d, {100});
        BinaryMask3D b_r2 = mask_from(d, {100, 101, 102, 103});

        MetricsReport rep = evaluate_cohort({a_pred, b_pred}, {a_r1, b_r1}, {a_r2, b_r2});

        auto rater_expect = [&](const BinaryMask3D& ra, const BinaryMask3D& rb) {
            VoxelMetrics va = voxel_metrics(a_pred, ra), vb = voxel_metrics(b_pred, rb);
            LesionMetrics la = brute_lesion_metrics(a_pred, ra),
                          lb = brute_lesion_metrics(b_pred, rb);
            const double dsc = (va.dsc + vb.dsc) / 2, ppv = (va.ppv + vb.ppv) / 2;
            const double ltpr = (la.ltpr + lb.ltpr) / 2, lfpr = (la.lfpr + lb.lfpr) / 2;
            const double vc =
                volume_correlation({a_pred.volume_mm3(), b_pred.volume_mm3()},
                                   {ra.volume_mm3(), rb.volume_mm3()});
            return composite_score(dsc, ppv, ltpr, lfpr, vc);
        };
        const double want = (rater_expect(a_r1, b_r1) + rater_expect(a_r2, b_r2)) / 2;
        CHECK(rep.average.score == doctest::Approx(want).epsilon(1e-12));
    }

    SUBCASE("empty cohort throws") {
        CHECK_THROWS_AS(evaluate_cohort({}, {}, {}), config_error);
    }
}

TEST_CASE("report serialization carries the fixed field names") {
    const Dims3 d{6, 6, 6};
    std::vector<BinaryMask3D> preds = {random_mask(d, 0.2, 11), random_mask(d, 0.3, 12)};
    std::vector<BinaryMask3D> gt = {random_mask(d, 0.2, 13), random_mask(d, 0.25, 14)};
    MetricsReport rep = evaluate_cohort(preds, gt, gt);

    std::ostringstream js, cs;
    write_report_json(rep, js);
    write_report_csv(rep, cs);
    for (const char* field : {"dsc", "ppv", "tpr", "lfpr", "ltpr", "vc", "score"}) {
        CHECK(js.str().find(field) != std::string::npos);
        CHECK(cs.str().find(field) != std::string::npos);
    }
    CHECK(cs.str().rfind("rater,", 0) == 0);
}
