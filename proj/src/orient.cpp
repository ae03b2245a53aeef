#include "lesionseg/orient.hpp"

namespace lesionseg {

std::string plane_name(Plane p) {
    switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Sagittal: return "sagittal";
    case Plane::Coronal: return "coronal";
    }
    return "?";
}

OrientTransform OrientTransform::from_id(int id) {
    if (id < 0 || id >= 24)
        throw config_error("OrientTransform id out of range: " + std::to_string(id));
    return OrientTransform{Plane(id / 8), id % 8};
}

const std::vector<OrientTransform>& transform_catalog() {
    static const std::vector<OrientTransform> catalog = [] {
        std::vector<OrientTransform> v;
        for (int id = 0; id < 24; ++id)
            v.push_back(OrientTransform::from_id(id));
        return v;
    }();
    return catalog;
}

OrientTransform inverse(const OrientTransform& t) {
    int flip = t.dihedral / 4;
    int rot = t.dihedral % 4;
    // rot^k f is an involution; pure rotations invert to rot^(4-k).
    int inv = flip ? t.dihedral : (4 - rot) % 4;
    return OrientTransform{t.plane, inv};
}

void plane_axes(Plane p, int& u_axis, int& v_axis, int& s_axis) {
    switch (p) {
    case Plane::Axial: u_axis = 0; v_axis = 1; s_axis = 2; break;
    case Plane::Sagittal: u_axis = 1; v_axis = 2; s_axis = 0; break;
    case Plane::Coronal: u_axis = 0; v_axis = 2; s_axis = 1; break;
    }
}

int plane_extent(const Dims3& d, Plane p) {
    int ua, va, sa;
    plane_axes(p, ua, va, sa);
    const int ext[3] = {d.nx, d.ny, d.nz};
    return ext[sa];
}

namespace {

// Map in-plane coords (u,v) with extents (U,V) through dihedral element d.
// Flip of the u axis first, then rot counter-clockwise quarter turns,
// each (u,v) -> (V-1-v, u) with extents swapping.
inline void map_uv(int d, int& u, int& v, int& U, int& V) {
    if (d / 4)
        u = U - 1 - u;
    int rot = d % 4;
    for (int r = 0; r < rot; ++r) {
        int nu = V - 1 - v;
        int nv = u;
        u = nu;
        v = nv;
        std::swap(U, V);
    }
}

struct PlaneGeom {
    int ua, va, sa;
    int src_ext[3];
    int dst_ext[3];
};

PlaneGeom make_geom(const OrientTransform& t, const Dims3& d) {
    PlaneGeom g{};
    plane_axes(t.plane, g.ua, g.va, g.sa);
    g.src_ext[0] = d.nx;
    g.src_ext[1] = d.ny;
    g.src_ext[2] = d.nz;
    int U = g.src_ext[g.ua], V = g.src_ext[g.va];
    int u = 0, v = 0;
    map_uv(t.dihedral, u, v, U, V); // only the extent swap matters here
    g.dst_ext[0] = d.nx;
    g.dst_ext[1] = d.ny;
    g.dst_ext[2] = d.nz;
    g.dst_ext[g.ua] = U;
    g.dst_ext[g.va] = V;
    return g;
}

template <typename T>
std::vector<T> apply_voxels(const OrientTransform& t, const std::vector<T>& src, const Dims3& d,
                            Dims3& out_dims) {
    PlaneGeom g = make_geom(t, d);
    out_dims = Dims3{g.dst_ext[0], g.dst_ext[1], g.dst_ext[2]};

    std::vector<T> dst(src.size());
    const std::size_t snx = d.nx, sny = d.ny;
    const std::size_t dnx = out_dims.nx, dny = out_dims.ny;
    int c[3];
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                c[0] = x;
                c[1] = y;
                c[2] = z;
                int u = c[g.ua], v = c[g.va];
                int U = g.src_ext[g.ua], V = g.src_ext[g.va];
                map_uv(t.dihedral, u, v, U, V);
                int o[3] = {c[0], c[1], c[2]};
                o[g.ua] = u;
                o[g.va] = v;
                dst[o[0] + dnx * (o[1] + dny * o[2])] = src[x + snx * (y + sny * z)];
            }
    return dst;
}

Spacing3 permute_spacing(const OrientTransform& t, const Spacing3& s) {
    if (t.dihedral % 2 == 0)
        return s; // even rotations keep in-plane extents
    int ua, va, sa;
    plane_axes(t.plane, ua, va, sa);
    float sp[3] = {s.sx, s.sy, s.sz};
    std::swap(sp[ua], sp[va]);
    return Spacing3{sp[0], sp[1], sp[2]};
}

} // namespace

Volume3D apply(const OrientTransform& t, const Volume3D& v) {
    Dims3 out_dims;
    auto vox = apply_voxels(t, v.data(), v.dims(), out_dims);
    return Volume3D(out_dims, permute_spacing(t, v.spacing()), std::move(vox));
}

BinaryMask3D apply(const OrientTransform& t, const BinaryMask3D& m) {
    Dims3 out_dims;
    auto vox = apply_voxels(t, m.data(), m.dims(), out_dims);
    return BinaryMask3D(out_dims, permute_spacing(t, m.spacing()), std::move(vox));
}

MultiContrastVolume apply(const OrientTransform& t, const MultiContrastVolume& mcv) {
    MultiContrastVolume out;
    for (Contrast c : kAllContrasts)
        if (mcv.available(c))
            out.set(c, apply(t, mcv.volume(c)));
    return out;
}

Slab25D extract_slab(const MultiContrastVolume& mcv, Plane plane, int index) {
    const Dims3& d = mcv.dims();
    if (!d.positive())
        throw config_error("extract_slab: empty volume");
    const int n_slices = plane_extent(d, plane);
    if (index < 0 || index >= n_slices)
        throw config_error("extract_slab: slice index out of range");

    int ua, va, sa;
    plane_axes(plane, ua, va, sa);
    const int ext[3] = {d.nx, d.ny, d.nz};
    const int U = ext[ua], V = ext[va];

    Slab25D slab;
    slab.plane = plane;
    slab.center_index = index;
    slab.h = U;
    slab.w = V;
    slab.availability = mcv.availability_mask();
    slab.channels.assign(std::size_t(3 * kNumContrasts) * U * V, 0.0f);

    for (int ci = 0; ci < kNumContrasts; ++ci) {
        if (!mcv.available(Contrast(ci)))
            continue; // absent contrast stays all-zero
        const Volume3D& vol = mcv.volume(Contrast(ci));
        for (int off = -1; off <= 1; ++off) {
            int s = index + off;
            if (s < 0 || s >= n_slices)
                continue; // zero padding at the boundaries
            int ch = ci * 3 + (off + 1);
            int c[3];
            c[sa] = s;
            for (int u = 0; u < U; ++u)
                for (int v = 0; v < V; ++v) {
                    c[ua] = u;
                    c[va] = v;
                    slab.channels[slab.idx(ch, u, v)] = vol.at(c[0], c[1], c[2]);
                }
        }
    }
    return slab;
}

template <typename T>
static std::vector<T> dihedral_2d_impl(int dihedral, const std::vector<T>& data, int& h, int& w) {
    int U = h, V = w;
    int u0 = 0, v0 = 0, U2 = U, V2 = V;
    map_uv(dihedral, u0, v0, U2, V2);
    std::vector<T> out(data.size());
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v) {
            int uu = u, vv = v, a = U, b = V;
            map_uv(dihedral, uu, vv, a, b);
            out[std::size_t(uu) * V2 + vv] = data[std::size_t(u) * V + v];
        }
    h = U2;
    w = V2;
    return out;
}

std::vector<float> dihedral_2d(int dihedral, const std::vector<float>& data, int& h, int& w) {
    return dihedral_2d_impl(dihedral, data, h, w);
}

std::vector<std::uint8_t> dihedral_2d(int dihedral, const std::vector<std::uint8_t>& data, int& h,
                                      int& w) {
    return dihedral_2d_impl(dihedral, data, h, w);
}

namespace {

template <typename Grid, typename T>
std::vector<T> get_slice_impl(const Grid& g, Plane p, int index) {
    const Dims3& d = g.dims();
    int ua, va, sa;
    plane_axes(p, ua, va, sa);
    const int ext[3] = {d.nx, d.ny, d.nz};
    if (index < 0 || index >= ext[sa])
        throw config_error("get_slice: index out of range");
    const int U = ext[ua], V = ext[va];
    std::vector<T> out(std::size_t(U) * V);
    int c[3];
    c[sa] = index;
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v) {
            c[ua] = u;
            c[va] = v;
            out[std::size_t(u) * V + v] = g.at(c[0], c[1], c[2]);
        }
    return out;
}

} // namespace

std::vector<float> get_slice(const Volume3D& v, Plane p, int index) {
    return get_slice_impl<Volume3D, float>(v, p, index);
}

std::vector<std::uint8_t> get_slice(const BinaryMask3D& m, Plane p, int index) {
    return get_slice_impl<BinaryMask3D, std::uint8_t>(m, p, index);
}

void set_slice(BinaryMask3D& m, Plane p, int index, const std::vector<std::uint8_t>& slice) {
    const Dims3& d = m.dims();
    int ua, va, sa;
    plane_axes(p, ua, va, sa);
    const int ext[3] = {d.nx, d.ny, d.nz};
    if (index < 0 || index >= ext[sa])
        throw config_error("set_slice: index out of range");
    const int U = ext[ua], V = ext[va];
    if (slice.size() != std::size_t(U) * V)
        throw config_error("set_slice: slice size mismatch");
    int c[3];
    c[sa] = index;
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v) {
            c[ua] = u;
            c[va] = v;
            m.at(c[0], c[1], c[2]) = slice[std::size_t(u) * V + v];
        }
}

} // namespace lesionseg
