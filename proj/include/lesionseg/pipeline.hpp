#ifndef LESIONSEG_PIPELINE_HPP
#define LESIONSEG_PIPELINE_HPP

#include <cstdint>
#include <string>

#include "lesionseg/fusion.hpp"
#include "lesionseg/train.hpp"

namespace lesionseg {

// Cohort on disk: NIfTI volumes/masks plus a JSON manifest.
void save_cohort(const std::string& dir, const std::vector<Subject>& cohort,
                 std::uint64_t seed);
std::vector<Subject> load_cohort(const std::string& manifest_path);

// Named transform subsets: "all24", "identity", "3plane" (identity dihedral
// in each cardinal plane).
std::vector<OrientTransform> transform_set(const std::string& name);

// Slab-wise predictor backed by a network. The net is copied per call site
// as needed by the caller; the returned closure itself is not thread-safe.
SlicePredictor make_net_predictor(UNet& net, StatsMode stats);

struct InferOptions {
    StatsMode stats = StatsMode::InstanceStats;
    int tau1 = 16, tau2 = 7;
    std::string transforms = "all24";
    std::vector<Contrast> drop; // contrasts removed before inference
    int jobs = 1;
};

struct SubjectPrediction {
    std::string id;
    ConfidenceMap confidence;
    BinaryMask3D mask;
};

// Confidence map + fused mask per subject; subject-level parallelism with
// deterministic outputs.
std::vector<SubjectPrediction> run_inference(const UNet& net,
                                             const std::vector<Subject>& cohort,
                                             const InferOptions& opts);

// Computes each subject's confidence map exactly once, then evaluates the
// grid on the cached maps. inference_passes (optional) counts predictor
// invocations (transforms x subjects).
std::vector<SweepRow> run_sweep(const UNet& net, const std::vector<Subject>& cohort,
                                const InferOptions& opts, const std::vector<int>& tau1_grid,
                                const std::vector<int>& tau2_grid,
                                long* inference_passes = nullptr);

// Write-to-temp-then-rename.
void atomic_write_text(const std::string& path, const std::string& content);

} // namespace lesionseg

#endif
