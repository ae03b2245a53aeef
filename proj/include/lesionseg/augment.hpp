#ifndef LESIONSEG_AUGMENT_HPP
#define LESIONSEG_AUGMENT_HPP

#include <random>

#include "lesionseg/volume.hpp"

namespace lesionseg {

// 3D shape augmentation: small random affine (rotation/scale/shear) and a
// smooth random displacement field, each applied with probability `prob`.
// Images are warped with trilinear interpolation, label masks with
// nearest-neighbor so they stay binary.
struct SpatialAugmentConfig {
    double prob = 0.75;          // per volume, for affine and elastic independently
    double max_rotate_deg = 10.0;
    double max_scale_delta = 0.1;  // per-axis scale in [1-d, 1+d]
    double max_shear = 0.08;
    int elastic_grid = 4;          // control points per axis
    double elastic_sigma_vox = 2.5; // displacement std in voxels
};

struct WarpField; // sampled transform, shared across contrasts and masks

// Samples one transform from rng (consuming a fixed number of draws) and
// applies it to every present contrast and both masks identically.
void augment_in_place(MultiContrastVolume& image, BinaryMask3D& rater1, BinaryMask3D& rater2,
                      const SpatialAugmentConfig& cfg, std::mt19937_64& rng);

} // namespace lesionseg

#endif
