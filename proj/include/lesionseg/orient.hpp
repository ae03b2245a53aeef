#ifndef LESIONSEG_ORIENT_HPP
#define LESIONSEG_ORIENT_HPP

#include <vector>

#include "lesionseg/volume.hpp"

namespace lesionseg {

// Slice plane of a volume with axes (x,y,z). The two remaining axes are the
// in-plane (u,v) axes, listed in volume-axis order.
enum class Plane : int { Axial = 0, Sagittal = 1, Coronal = 2 };
inline constexpr std::array<Plane, 3> kAllPlanes = {Plane::Axial, Plane::Sagittal,
                                                    Plane::Coronal};
std::string plane_name(Plane p);

// One of the 24 exact volume symmetries: a cardinal plane and a dihedral
// element acting uniformly on that plane's slices.
//
// dihedral = flip*4 + rot with rot counter-clockwise quarter turns applied
// after an optional flip of the first in-plane axis. rot90 maps the +u axis
// onto +v: (u,v) -> (V-1-v, u). Voxels are permuted, never interpolated.
struct OrientTransform {
    Plane plane = Plane::Axial;
    int dihedral = 0; // 0..7

    int id() const { return int(plane) * 8 + dihedral; }
    static OrientTransform from_id(int id);
    bool operator==(const OrientTransform&) const = default;
};

// All 24 transforms in id order.
const std::vector<OrientTransform>& transform_catalog();

OrientTransform inverse(const OrientTransform& t);

Volume3D apply(const OrientTransform& t, const Volume3D& v);
BinaryMask3D apply(const OrientTransform& t, const BinaryMask3D& m);
MultiContrastVolume apply(const OrientTransform& t, const MultiContrastVolume& mcv);

// In-plane extents (U,V) of `plane` for a volume of dims `d`, and the slice
// axis extent.
void plane_axes(Plane p, int& u_axis, int& v_axis, int& s_axis);
int plane_extent(const Dims3& d, Plane p); // slice count along the plane axis

// Three adjacent slices per contrast stacked channel-major:
// channel = contrast*3 + (offset+1), offset in {-1,0,+1}. Out-of-range
// neighbors and absent contrasts are zero.
struct Slab25D {
    Plane plane = Plane::Axial;
    int center_index = 0;
    int h = 0, w = 0;                  // (U,V) extents of the plane
    int availability = 0;              // contrast availability bits
    std::vector<float> channels;       // 3*kNumContrasts x h x w

    std::size_t idx(int ch, int u, int v) const {
        return (std::size_t(ch) * h + u) * w + v;
    }
    float at(int ch, int u, int v) const { return channels[idx(ch, u, v)]; }
};

Slab25D extract_slab(const MultiContrastVolume& mcv, Plane plane, int index);

// 2D dihedral transform of a h*w array (u-major). Returns transformed data
// and updates (h,w) in place for odd rotations.
std::vector<float> dihedral_2d(int dihedral, const std::vector<float>& data, int& h, int& w);
std::vector<std::uint8_t> dihedral_2d(int dihedral, const std::vector<std::uint8_t>& data,
                                      int& h, int& w);

// Slice access along a plane (u-major 2D arrays of size U*V).
std::vector<float> get_slice(const Volume3D& v, Plane p, int index);
std::vector<std::uint8_t> get_slice(const BinaryMask3D& m, Plane p, int index);
void set_slice(BinaryMask3D& m, Plane p, int index, const std::vector<std::uint8_t>& slice);

} // namespace lesionseg

#endif
