#include "lesionseg/fusion.hpp"

#include <ostream>

#include "lesionseg/components.hpp"

namespace lesionseg {

ConfidenceMap self_ensemble_predict(const MultiContrastVolume& mcv,
                                    const SlicePredictor& predictor,
                                    const std::vector<OrientTransform>& transforms) {
    if (transforms.empty())
        throw config_error("self_ensemble_predict: transform list is empty");
    if (mcv.empty())
        throw config_error("self_ensemble_predict: no contrast available");

    ConfidenceMap cmap(mcv.dims(), mcv.spacing(), int(transforms.size()));
    auto& counts = cmap.counts();

    for (const OrientTransform& t : transforms) {
        MultiContrastVolume moved = apply(t, mcv);
        BinaryMask3D mask = predictor(moved, t.plane);
        if (!(mask.dims() == moved.dims()))
            throw config_error("self_ensemble_predict: predictor returned wrong dims");
        BinaryMask3D back = apply(inverse(t), mask);
        const auto& m = back.data();
        for (std::size_t i = 0; i < m.size(); ++i)
            counts[i] += m[i];
    }
    return cmap;
}

std::pair<BinaryMask3D, BinaryMask3D> detect_masks(const ConfidenceMap& c,
                                                   const FusionParams& p) {
    if (p.n_votes != c.n_votes())
        throw config_error("detect_masks: n_votes mismatch");
    p.validate();

    BinaryMask3D m1(c.dims(), c.spacing());
    BinaryMask3D m2(c.dims(), c.spacing());
    const auto& counts = c.counts();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        m1.data()[i] = counts[i] > p.tau1;
        m2.data()[i] = counts[i] > p.tau2;
    }
    return {std::move(m1), std::move(m2)};
}

BinaryMask3D grow_lesions(const BinaryMask3D& m1, const BinaryMask3D& m2) {
    if (!(m1.dims() == m2.dims()))
        throw config_error("grow_lesions: dims mismatch");
    const auto& a = m1.data();
    const auto& b = m2.data();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i])
            throw config_error("grow_lesions: m1 must be a subset of m2");

    std::vector<std::int32_t> labels;
    int n = label_components_26(m2, labels);

    std::vector<char> seeded(n + 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i])
            seeded[labels[i]] = 1;

    BinaryMask3D out(m1.dims(), m1.spacing());
    for (std::size_t i = 0; i < b.size(); ++i)
        out.data()[i] = labels[i] > 0 && seeded[labels[i]];
    return out;
}

BinaryMask3D fuse(const ConfidenceMap& c, const FusionParams& p) {
    auto [m1, m2] = detect_masks(c, p);
    return grow_lesions(m1, m2);
}

BinaryMask3D majority_vote_3plane(const std::array<BinaryMask3D, 3>& masks) {
    for (int k = 1; k < 3; ++k)
        if (!(masks[k].dims() == masks[0].dims()))
            throw config_error("majority_vote_3plane: dims mismatch");
    BinaryMask3D out(masks[0].dims(), masks[0].spacing());
    const std::size_t n = out.data().size();
    for (std::size_t i = 0; i < n; ++i) {
        int votes = masks[0].data()[i] + masks[1].data()[i] + masks[2].data()[i];
        out.data()[i] = votes >= 2;
    }
    return out;
}

std::vector<SweepRow> tau_sweep(const std::vector<ConfidenceMap>& cmaps,
                                const std::vector<BinaryMask3D>& rater1,
                                const std::vector<BinaryMask3D>& rater2,
                                const std::vector<int>& tau1_grid,
                                const std::vector<int>& tau2_grid) {
    if (cmaps.empty())
        throw config_error("tau_sweep: empty cohort");
    if (cmaps.size() != rater1.size() || cmaps.size() != rater2.size())
        throw config_error("tau_sweep: cohort size mismatch");
    const int n_votes = cmaps[0].n_votes();

    std::vector<SweepRow> rows;
    for (int t1 : tau1_grid)
        for (int t2 : tau2_grid) {
            if (t1 < t2)
                continue; // constraint tau1 >= tau2
            if (t2 < 0 || t1 > n_votes)
                throw config_error("tau_sweep: tau outside [0, n_votes]");
            FusionParams p{t1, t2, n_votes};
            std::vector<BinaryMask3D> fused;
            fused.reserve(cmaps.size());
            for (const auto& c : cmaps)
                fused.push_back(fuse(c, p));
            MetricsReport rep = evaluate_cohort(fused, rater1, rater2);
            rows.push_back(SweepRow{t1, t2, rep.average.score, rep.n_subjects});
        }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "tau1,tau2,mean_score,n_subjects\n";
    os.precision(12);
    for (const auto& r : rows)
        os << r.tau1 << ',' << r.tau2 << ',' << r.mean_score << ',' << r.n_subjects << '\n';
}

SweepRow best_sweep_row(const std::vector<SweepRow>& rows) {
    if (rows.empty())
        throw config_error("best_sweep_row: no rows");
    SweepRow best = rows[0];
    for (const auto& r : rows)
        if (r.mean_score > best.mean_score)
            best = r;
    return best;
}

} // namespace lesionseg
