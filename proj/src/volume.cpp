#include "lesionseg/volume.hpp"

#include <algorithm>
#include <cmath>

namespace lesionseg {

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing) : dims_(dims), spacing_(spacing) {
    if (!dims.positive())
        throw config_error("Volume3D: dims must be positive");
    vox_.assign(dims.total(), 0.0f);
}

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing), vox_(std::move(voxels)) {
    if (!dims.positive())
        throw config_error("Volume3D: dims must be positive");
    if (vox_.size() != dims.total())
        throw config_error("Volume3D: voxel count does not match dims");
}

void Volume3D::check_finite() const {
    for (float v : vox_)
        if (!std::isfinite(v))
            throw format_error("Volume3D: non-finite voxel value");
}

BinaryMask3D::BinaryMask3D(Dims3 dims, Spacing3 spacing) : dims_(dims), spacing_(spacing) {
    if (!dims.positive())
        throw config_error("BinaryMask3D: dims must be positive");
    vox_.assign(dims.total(), 0);
}

BinaryMask3D::BinaryMask3D(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> voxels)
    : dims_(dims), spacing_(spacing), vox_(std::move(voxels)) {
    if (!dims.positive())
        throw config_error("BinaryMask3D: dims must be positive");
    if (vox_.size() != dims.total())
        throw config_error("BinaryMask3D: voxel count does not match dims");
    for (std::uint8_t v : vox_)
        if (v > 1)
            throw format_error("BinaryMask3D: values must be 0 or 1");
}

std::size_t BinaryMask3D::count() const {
    return std::size_t(std::count(vox_.begin(), vox_.end(), std::uint8_t(1)));
}

ConfidenceMap::ConfidenceMap(Dims3 dims, Spacing3 spacing, int n_votes)
    : dims_(dims), spacing_(spacing), n_votes_(n_votes) {
    if (!dims.positive())
        throw config_error("ConfidenceMap: dims must be positive");
    if (n_votes < 1)
        throw config_error("ConfidenceMap: n_votes must be >= 1");
    counts_.assign(dims.total(), 0);
}

void ConfidenceMap::check_bounds() const {
    for (std::int32_t c : counts_)
        if (c < 0 || c > n_votes_)
            throw format_error("ConfidenceMap: count outside [0, n_votes]");
}

std::string contrast_name(Contrast c) {
    switch (c) {
    case Contrast::T1w: return "T1w";
    case Contrast::T2w: return "T2w";
    case Contrast::PDw: return "PDw";
    case Contrast::FLAIR: return "FLAIR";
    }
    return "?";
}

Contrast parse_contrast(const std::string& name) {
    for (Contrast c : kAllContrasts)
        if (name == contrast_name(c))
            return c;
    throw config_error("unknown contrast name: " + name);
}

void MultiContrastVolume::set(Contrast c, Volume3D vol) {
    if (availability_mask() == 0) {
        dims_ = vol.dims();
        spacing_ = vol.spacing();
    } else {
        if (!(vol.dims() == dims_))
            throw config_error("MultiContrastVolume: contrast dims mismatch");
        if (!(vol.spacing() == spacing_))
            throw config_error("MultiContrastVolume: contrast spacing mismatch");
    }
    vols_[int(c)] = std::move(vol);
}

void MultiContrastVolume::drop(Contrast c) {
    vols_[int(c)].reset();
}

int MultiContrastVolume::availability_mask() const {
    int m = 0;
    for (int i = 0; i < kNumContrasts; ++i)
        if (vols_[i].has_value())
            m |= 1 << i;
    return m;
}

const Volume3D& MultiContrastVolume::volume(Contrast c) const {
    if (!vols_[int(c)].has_value())
        throw config_error("MultiContrastVolume: contrast absent: " + contrast_name(c));
    return *vols_[int(c)];
}

Volume3D MultiContrastVolume::materialized(Contrast c) const {
    if (vols_[int(c)].has_value())
        return *vols_[int(c)];
    return Volume3D(dims_, spacing_);
}

} // namespace lesionseg
