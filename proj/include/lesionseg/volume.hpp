#ifndef LESIONSEG_VOLUME_HPP
#define LESIONSEG_VOLUME_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lesionseg/errors.hpp"

namespace lesionseg {

struct Dims3 {
    int nx = 0, ny = 0, nz = 0;

    std::size_t total() const { return std::size_t(nx) * ny * nz; }
    bool positive() const { return nx > 0 && ny > 0 && nz > 0; }
    bool operator==(const Dims3&) const = default;
};

struct Spacing3 {
    float sx = 1.0f, sy = 1.0f, sz = 1.0f;

    double voxel_volume_mm3() const { return double(sx) * sy * sz; }
    bool operator==(const Spacing3&) const = default;
};

// Dense 3D float volume, row-major with x fastest:
// index(x,y,z) = x + nx*(y + ny*z).
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims3 dims, Spacing3 spacing = {});
    Volume3D(Dims3 dims, Spacing3 spacing, std::vector<float> voxels);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims_.nx) * (std::size_t(y) + std::size_t(dims_.ny) * z);
    }
    float at(int x, int y, int z) const { return vox_[index(x, y, z)]; }
    float& at(int x, int y, int z) { return vox_[index(x, y, z)]; }

    const std::vector<float>& data() const { return vox_; }
    std::vector<float>& data() { return vox_; }

    // Throws format_error if any voxel is non-finite.
    void check_finite() const;

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::vector<float> vox_;
};

// {0,1}-valued mask with the same layout as Volume3D.
class BinaryMask3D {
public:
    BinaryMask3D() = default;
    BinaryMask3D(Dims3 dims, Spacing3 spacing = {});
    BinaryMask3D(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> voxels);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims_.nx) * (std::size_t(y) + std::size_t(dims_.ny) * z);
    }
    std::uint8_t at(int x, int y, int z) const { return vox_[index(x, y, z)]; }
    std::uint8_t& at(int x, int y, int z) { return vox_[index(x, y, z)]; }

    const std::vector<std::uint8_t>& data() const { return vox_; }
    std::vector<std::uint8_t>& data() { return vox_; }

    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
    double volume_mm3() const { return double(count()) * spacing_.voxel_volume_mm3(); }

    bool operator==(const BinaryMask3D& o) const {
        return dims_ == o.dims_ && vox_ == o.vox_;
    }

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::vector<std::uint8_t> vox_;
};

// Per-voxel positive-vote count accumulated over n_votes augmented predictions.
class ConfidenceMap {
public:
    ConfidenceMap() = default;
    ConfidenceMap(Dims3 dims, Spacing3 spacing, int n_votes);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    int n_votes() const { return n_votes_; }

    std::int32_t at(std::size_t i) const { return counts_[i]; }
    const std::vector<std::int32_t>& counts() const { return counts_; }
    std::vector<std::int32_t>& counts() { return counts_; }

    // Throws format_error if any count is outside [0, n_votes].
    void check_bounds() const;

private:
    Dims3 dims_;
    Spacing3 spacing_;
    int n_votes_ = 0;
    std::vector<std::int32_t> counts_;
};

enum class Contrast : int { T1w = 0, T2w = 1, PDw = 2, FLAIR = 3 };
inline constexpr int kNumContrasts = 4;
inline constexpr std::array<Contrast, 4> kAllContrasts = {Contrast::T1w, Contrast::T2w,
                                                          Contrast::PDw, Contrast::FLAIR};

std::string contrast_name(Contrast c);
Contrast parse_contrast(const std::string& name);

// Co-registered volumes for up to four contrasts. Absent contrasts keep an
// "absent" flag; they are materialized as all-zero only when the network
// input is assembled.
class MultiContrastVolume {
public:
    MultiContrastVolume() = default;

    // Throws config_error on dims/spacing mismatch or if the result would
    // have no contrast available.
    void set(Contrast c, Volume3D vol);
    void drop(Contrast c); // idempotent; clears bit and discards data

    bool available(Contrast c) const { return vols_[int(c)].has_value(); }
    // Bit i set = contrast i present, bit order T1w,T2w,PDw,FLAIR.
    int availability_mask() const;

    const Volume3D& volume(Contrast c) const;

    // All-zero volume for absent contrasts (contrast-dropout semantics).
    Volume3D materialized(Contrast c) const;

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    bool empty() const { return availability_mask() == 0; }

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::array<std::optional<Volume3D>, kNumContrasts> vols_;
};

} // namespace lesionseg

#endif
