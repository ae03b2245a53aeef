#ifndef LESIONSEG_FUSION_HPP
#define LESIONSEG_FUSION_HPP

#include <functional>
#include <utility>
#include <vector>

#include "lesionseg/metrics.hpp"
#include "lesionseg/orient.hpp"
#include "lesionseg/volume.hpp"

namespace lesionseg {

struct FusionParams {
    int tau1 = 16; // lesion detection threshold
    int tau2 = 7;  // growth threshold
    int n_votes = 24;
    static constexpr int connectivity = 26;

    void validate() const {
        if (tau2 < 0 || tau1 < tau2 || tau1 > n_votes)
            throw config_error("FusionParams: require 0 <= tau2 <= tau1 <= n_votes");
    }
};

// Slab-wise inference along one plane: returns the stacked 3D binary mask
// (probability > 0.5 per pixel) for the given volume. Implemented by the
// network module; stubbed in tests.
using SlicePredictor = std::function<BinaryMask3D(const MultiContrastVolume&, Plane)>;

// For each transform: transform the input, predict slab-wise along the
// transform's plane, invert the transform on the mask, accumulate counts.
ConfidenceMap self_ensemble_predict(const MultiContrastVolume& mcv,
                                    const SlicePredictor& predictor,
                                    const std::vector<OrientTransform>& transforms);

// M1(r)=1 iff C(r) > tau1; M2(r)=1 iff C(r) > tau2 (strict). M1 is a subset
// of M2 because tau1 >= tau2.
std::pair<BinaryMask3D, BinaryMask3D> detect_masks(const ConfidenceMap& c,
                                                   const FusionParams& p);

// Final mask: union of 26-connected components of m2 containing at least one
// m1 voxel. Throws config_error unless m1 is a subset of m2.
BinaryMask3D grow_lesions(const BinaryMask3D& m1, const BinaryMask3D& m2);

// detect_masks + grow_lesions.
BinaryMask3D fuse(const ConfidenceMap& c, const FusionParams& p);

// Voxel = 1 iff set in at least 2 of the 3 masks.
BinaryMask3D majority_vote_3plane(const std::array<BinaryMask3D, 3>& masks);

struct SweepRow {
    int tau1 = 0, tau2 = 0;
    double mean_score = 0;
    int n_subjects = 0;
};

// Grid evaluation on precomputed confidence maps. Cells with tau1 < tau2 are
// omitted. mean_score is the two-rater-averaged cohort score.
std::vector<SweepRow> tau_sweep(const std::vector<ConfidenceMap>& cmaps,
                                const std::vector<BinaryMask3D>& rater1,
                                const std::vector<BinaryMask3D>& rater2,
                                const std::vector<int>& tau1_grid,
                                const std::vector<int>& tau2_grid);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);

// Highest-mean-score row (ties broken by smaller tau1 then tau2).
SweepRow best_sweep_row(const std::vector<SweepRow>& rows);

} // namespace lesionseg

#endif
