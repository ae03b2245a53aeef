#ifndef LESIONSEG_PHANTOM_HPP
#define LESIONSEG_PHANTOM_HPP

#include <random>

#include "lesionseg/train.hpp"
#include "lesionseg/volume.hpp"

namespace lesionseg {

// Seeded synthetic multicontrast cohort: ellipsoidal brain with a CSF core,
// smooth per-contrast intensity fields, ellipsoidal lesions hyperintense on
// T2w/FLAIR and hypointense on T1w, two raters differing by per-lesion
// boundary morphology.
struct PhantomConfig {
    Dims3 dims{48, 48, 48};
    int n_subjects = 4;
    int lesions_min = 3, lesions_max = 6;
    double lesion_radius_min = 2.0, lesion_radius_max = 3.5; // voxels
    double noise_sigma = 0.04;
    // Lesion intensity offsets against white matter, per contrast.
    double lesion_delta_t1w = -0.20;
    double lesion_delta_t2w = 0.28;
    double lesion_delta_pdw = 0.18;
    double lesion_delta_flair = 0.36;
    double texture_amplitude = 0.04;    // smooth background variation
    double rater_disagreement = 0.4;    // boundary-voxel toggle probability
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<Subject> generate_phantom_cohort(const PhantomConfig& cfg);

enum class CorruptionKind {
    Gamma,
    GaussianNoise,
    BiasField,
    Blur,
    Anisotropy,
    Ghosting,
    Motion,
    DropContrast,
};
std::string corruption_name(CorruptionKind k);
CorruptionKind parse_corruption(const std::string& name);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::Gamma;
    Contrast target = Contrast::FLAIR;
    double strength = 1.0;
};

// Deterministic given rng state; dims preserved; label masks untouched.
// Requires the target contrast to be present except for DropContrast, which
// is idempotent on absent contrasts.
MultiContrastVolume corrupt(const MultiContrastVolume& mcv, const CorruptionSpec& spec,
                            std::mt19937_64& rng);

} // namespace lesionseg

#endif
