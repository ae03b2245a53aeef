#include <doctest.h>

#include <map>
#include <random>

#include "lesionseg/orient.hpp"

using namespace lesionseg;

namespace {

Volume3D random_volume(Dims3 d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-5.0f, 5.0f);
    Volume3D v(d);
    for (float& x : v.data())
        x = dist(rng);
    return v;
}

// Volume whose voxel values encode their own coordinates, for permutation
// table checks.
Volume3D coordinate_volume(Dims3 d) {
    Volume3D v(d);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                v.at(x, y, z) = float(x * 10000 + y * 100 + z);
    return v;
}

double volume_sum(const Volume3D& v) {
    double s = 0.0;
    for (float x : v.data())
        s += x;
    return s;
}

} // namespace

TEST_CASE("identity transform returns the input voxel-exact") {
    Volume3D v = random_volume({5, 6, 7}, 1);
    for (Plane p : kAllPlanes) {
        Volume3D out = apply(OrientTransform{p, 0}, v);
        CHECK(out.dims() == v.dims());
        CHECK(out.data() == v.data());
    }
}

TEST_CASE("rot90 twice equals rot180") {
    Volume3D v = random_volume({5, 6, 7}, 2);
    for (Plane p : kAllPlanes) {
        Volume3D twice = apply(OrientTransform{p, 1}, apply(OrientTransform{p, 1}, v));
        Volume3D once = apply(OrientTransform{p, 2}, v);
        CHECK(twice.dims() == once.dims());
        CHECK(twice.data() == once.data());
    }
}

TEST_CASE("axial rot90 permutation table on a 2x3x1 volume") {
    // Counter-clockwise quarter turn taking +x onto +y:
    // (x, y) -> (ny-1-y, x), output dims (ny, nx).
    Volume3D v = coordinate_volume({2, 3, 1});
    Volume3D out = apply(OrientTransform{Plane::Axial, 1}, v);
    REQUIRE(out.dims() == Dims3{3, 2, 1});
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 3; ++y) {
            const int tx = 3 - 1 - y, ty = x; // hand permutation oracle
            CHECK(out.at(tx, ty, 0) == v.at(x, y, 0));
        }
    // spot value: source voxel (0,0,0) lands at (2,0,0)
    CHECK(out.at(2, 0, 0) == v.at(0, 0, 0));
}

TEST_CASE("inverse identities") {
    CHECK(inverse(OrientTransform{Plane::Axial, 0}) == OrientTransform{Plane::Axial, 0});
    // rot90 inverts to rot270 in the same plane and flip state
    CHECK(inverse(OrientTransform{Plane::Coronal, 1}) == OrientTransform{Plane::Coronal, 3});
    CHECK(inverse(OrientTransform{Plane::Sagittal, 3}) == OrientTransform{Plane::Sagittal, 1});
}

TEST_CASE("all 24 transforms round-trip voxel-exact on random volumes") {
    const Dims3 dims[3] = {{5, 6, 7}, {4, 4, 4}, {3, 8, 2}};
    for (const OrientTransform& t : transform_catalog()) {
        for (int k = 0; k < 3; ++k) {
            Volume3D v = random_volume(dims[k], 100 + t.id() * 3 + k);
            Volume3D back = apply(inverse(t), apply(t, v));
            REQUIRE(back.dims() == v.dims());
            CHECK(back.data() == v.data());
        }
    }
}

TEST_CASE("catalog ids are stable and distinct") {
    const auto& catalog = transform_catalog();
    REQUIRE(catalog.size() == 24);
    for (int i = 0; i < 24; ++i) {
        CHECK(catalog[i].id() == i);
        CHECK(OrientTransform::from_id(i) == catalog[i]);
    }
    CHECK_THROWS_AS(OrientTransform::from_id(24), config_error);
}

TEST_CASE("same-plane composition table is closed") {
    // Compose two dihedral elements on an asymmetric volume and find the
    // catalog element with the same action (brute force, per plane).
    const Dims3 d{4, 5, 6};
    Volume3D probe = coordinate_volume(d);
    for (Plane p : kAllPlanes) {
        for (int d1 = 0; d1 < 8; ++d1)
            for (int d2 = 0; d2 < 8; ++d2) {
                Volume3D composed =
                    apply(OrientTransform{p, d2}, apply(OrientTransform{p, d1}, probe));
                int matches = 0;
                for (int dc = 0; dc < 8; ++dc) {
                    Volume3D cand = apply(OrientTransform{p, dc}, probe);
                    if (cand.dims() == composed.dims() && cand.data() == composed.data())
                        ++matches;
                }
                CHECK(matches == 1);
            }
    }
}

TEST_CASE("apply preserves voxel mass and mask binariness") {
    Volume3D v = random_volume({5, 6, 7}, 9);
    std::mt19937_64 rng(10);
    BinaryMask3D m({5, 6, 7});
    for (auto& b : m.data())
        b = rng() & 1;
    const double sum = volume_sum(v);
    const std::size_t ones = m.count();
    for (const OrientTransform& t : transform_catalog()) {
        CHECK(volume_sum(apply(t, v)) == doctest::Approx(sum));
        BinaryMask3D tm = apply(t, m);
        CHECK(tm.count() == ones);
    }
}

TEST_CASE("spacing follows in-plane axis swaps") {
    Volume3D v({4, 5, 6}, {1.0f, 2.0f, 3.0f});
    Volume3D out = apply(OrientTransform{Plane::Axial, 1}, v); // swaps x and y
    CHECK(out.dims() == Dims3{5, 4, 6});
    CHECK(out.spacing() == Spacing3{2.0f, 1.0f, 3.0f});
    Volume3D back = apply(inverse(OrientTransform{Plane::Axial, 1}), out);
    CHECK(back.spacing() == v.spacing());
}

namespace {

MultiContrastVolume ramp_mcv(Dims3 d) {
    MultiContrastVolume mcv;
    for (Contrast c : {Contrast::T1w, Contrast::T2w, Contrast::PDw}) {
        Volume3D v(d);
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x)
                    v.at(x, y, z) = float(int(c) * 1000 + x + 10 * y + 100 * z);
        mcv.set(c, std::move(v));
    }
    return mcv; // FLAIR left absent
}

} // namespace

TEST_CASE("slab extraction: boundary padding, absent contrasts, channel order") {
    const Dims3 d{4, 5, 6};
    MultiContrastVolume mcv = ramp_mcv(d);

    SUBCASE("index 0 pads the -1 neighbor with zeros") {
        Slab25D slab = extract_slab(mcv, Plane::Axial, 0);
        CHECK(slab.h == 4);
        CHECK(slab.w == 5);
        for (int c = 0; c < kNumContrasts; ++c)
            for (int u = 0; u < slab.h; ++u)
                for (int v = 0; v < slab.w; ++v)
                    CHECK(slab.at(c * 3 + 0, u, v) == 0.0f);
    }

    SUBCASE("absent FLAIR gives three zero channels") {
        Slab25D slab = extract_slab(mcv, Plane::Coronal, 2);
        CHECK((slab.availability & 0b1000) == 0);
        for (int ch = 9; ch < 12; ++ch)
            for (int u = 0; u < slab.h; ++u)
                for (int v = 0; v < slab.w; ++v)
                    CHECK(slab.at(ch, u, v) == 0.0f);
    }

    SUBCASE("middle slab equals the three source slices elementwise") {
        const int idx = 3;
        Slab25D slab = extract_slab(mcv, Plane::Axial, idx);
        for (int ci = 0; ci < 3; ++ci) {
            const Volume3D& vol = mcv.volume(Contrast(ci));
            for (int off = -1; off <= 1; ++off)
                for (int x = 0; x < d.nx; ++x)
                    for (int y = 0; y < d.ny; ++y)
                        CHECK(slab.at(ci * 3 + off + 1, x, y) == vol.at(x, y, idx + off));
        }
    }

    SUBCASE("out-of-range index throws") {
        CHECK_THROWS_AS(extract_slab(mcv, Plane::Axial, 6), config_error);
        CHECK_THROWS_AS(extract_slab(mcv, Plane::Axial, -1), config_error);
        CHECK_THROWS_AS(extract_slab(mcv, Plane::Sagittal, 4), config_error);
    }
}

TEST_CASE("restacking center slices reproduces the volume") {
    const Dims3 d{4, 5, 6};
    MultiContrastVolume mcv = ramp_mcv(d);
    const Volume3D& t2 = mcv.volume(Contrast::T2w);
    for (Plane p : kAllPlanes) {
        Volume3D rebuilt(d);
        const int n = plane_extent(d, p);
        int ua, va, sa;
        plane_axes(p, ua, va, sa);
        for (int s = 0; s < n; ++s) {
            Slab25D slab = extract_slab(mcv, p, s);
            int c[3];
            c[sa] = s;
            for (int u = 0; u < slab.h; ++u)
                for (int v = 0; v < slab.w; ++v) {
                    c[ua] = u;
                    c[va] = v;
                    rebuilt.at(c[0], c[1], c[2]) = slab.at(1 * 3 + 1, u, v); // T2w center
                }
        }
        CHECK(rebuilt.data() == t2.data());
    }
}

TEST_CASE("2d dihedral matches the volume transform on a single slice") {
    const Dims3 d{4, 5, 1};
    Volume3D v = coordinate_volume(d);
    for (int dih = 0; dih < 8; ++dih) {
        Volume3D tv = apply(OrientTransform{Plane::Axial, dih}, v);
        int h = 4, w = 5;
        auto slice = get_slice(v, Plane::Axial, 0);
        auto moved = dihedral_2d(dih, slice, h, w);
        CHECK(h == tv.dims().nx);
        CHECK(w == tv.dims().ny);
        auto expect = get_slice(tv, Plane::Axial, 0);
        CHECK(moved == expect);
    }
}
