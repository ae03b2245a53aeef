#ifndef LESIONSEG_TRAIN_HPP
#define LESIONSEG_TRAIN_HPP

#include <random>

#include "lesionseg/augment.hpp"
#include "lesionseg/checkpoint.hpp"
#include "lesionseg/unet.hpp"
#include "lesionseg/volume.hpp"

namespace lesionseg {

struct Subject {
    std::string id;
    MultiContrastVolume image;
    BinaryMask3D rater1, rater2;
};

struct TrainConfig {
    int iterations = 300;
    int batch_size = 4;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    bool contrast_dropout = true;
    bool rater_sampling = true;
    bool spatial_augment = true;
    SpatialAugmentConfig aug;
    std::uint64_t seed = 0;

    void validate() const;
};

// Adam with bias-corrected first/second moments. Moments are kept flat in
// params() order so they can be checkpointed.
class Adam {
public:
    Adam() = default;
    Adam(double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamView>& params);

    std::vector<double> m, v;
    std::int64_t t = 0;

private:
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

// Uniformly sampled nonempty subset of the set bits of availability_mask.
int sample_kept_subset(int availability_mask, std::mt19937_64& rng);

// Copy with a uniformly sampled nonempty kept-contrast subset; dropped
// contrasts are zeroed and flagged absent. A single available contrast is
// always kept.
MultiContrastVolume contrast_dropout(const MultiContrastVolume& mcv, std::mt19937_64& rng);

// Center-slice indices along `plane` containing at least one mask voxel.
std::vector<int> lesion_slice_indices(const BinaryMask3D& mask, Plane plane);

// Per-batch sampling: one shared plane and dihedral augmentation; per sample
// a random subject, a random spatial augmentation, a random rater, a random
// lesion-containing 2.5D slab, and optional contrast dropout. L2 loss on the
// center-slice probability map, Adam updates. Deterministic given the seed
// (per-purpose RNG streams).
class Trainer {
public:
    Trainer(UNet& net, TrainConfig cfg);

    double train_step(const std::vector<Subject>& dataset);
    // Appends one loss value per iteration.
    std::vector<double> run(const std::vector<Subject>& dataset, int iterations);

    TrainerState state() const;
    void restore(const TrainerState& st);
    std::int64_t iterations_done() const { return iter_; }

private:
    UNet& net_;
    TrainConfig cfg_;
    Adam opt_;
    std::int64_t iter_ = 0;
    std::mt19937_64 rng_subject_, rng_slab_, rng_rater_, rng_dropout_, rng_spatial_,
        rng_orient_;
};

} // namespace lesionseg

#endif
