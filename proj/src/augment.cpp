#include "lesionseg/augment.hpp"

#include <cmath>

namespace lesionseg {

namespace {

struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
};

Mat3 mul(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k)
                s += a.m[i][k] * b.m[k][j];
            r.m[i][j] = s;
        }
    return r;
}

struct Transform {
    bool affine = false;
    bool elastic = false;
    Mat3 mat;                       // sampling matrix about the volume center
    int grid = 0;                   // elastic control grid (per axis)
    std::vector<double> disp;       // grid^3 * 3 displacements in voxels
};

Transform sample_transform(const Dims3&, const SpatialAugmentConfig& cfg,
                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Transform t;
    t.affine = unit(rng) < cfg.prob;
    {
        const double deg = cfg.max_rotate_deg * sym(rng);
        const double phi = deg * M_PI / 180.0;
        // random rotation axis
        double ax = gauss(rng), ay = gauss(rng), az = gauss(rng);
        double norm = std::sqrt(ax * ax + ay * ay + az * az);
        if (norm < 1e-9) {
            ax = 1;
            ay = az = 0;
            norm = 1;
        }
        ax /= norm;
        ay /= norm;
        az /= norm;
        const double c = std::cos(phi), s = std::sin(phi), o = 1.0 - c;
        Mat3 rot;
        rot.m[0][0] = c + ax * ax * o;
        rot.m[0][1] = ax * ay * o - az * s;
        rot.m[0][2] = ax * az * o + ay * s;
        rot.m[1][0] = ay * ax * o + az * s;
        rot.m[1][1] = c + ay * ay * o;
        rot.m[1][2] = ay * az * o - ax * s;
        rot.m[2][0] = az * ax * o - ay * s;
        rot.m[2][1] = az * ay * o + ax * s;
        rot.m[2][2] = c + az * az * o;

        Mat3 scale;
        for (int i = 0; i < 3; ++i)
            scale.m[i][i] = 1.0 + cfg.max_scale_delta * sym(rng);
        Mat3 shear;
        shear.m[0][1] = cfg.max_shear * sym(rng);
        shear.m[1][2] = cfg.max_shear * sym(rng);

        if (t.affine)
            t.mat = mul(mul(rot, scale), shear);
    }

    t.elastic = unit(rng) < cfg.prob;
    t.grid = cfg.elastic_grid;
    t.disp.resize(std::size_t(t.grid) * t.grid * t.grid * 3);
    for (double& d : t.disp)
        d = cfg.elastic_sigma_vox * gauss(rng);
    if (!t.elastic)
        std::fill(t.disp.begin(), t.disp.end(), 0.0);
    return t;
}

// Trilinear interpolation of the coarse displacement grid at normalized
// coordinates in [0,1].
void grid_disp(const Transform& t, double fx, double fy, double fz, double out[3]) {
    const int g = t.grid;
    const double gx = fx * (g - 1), gy = fy * (g - 1), gz = fz * (g - 1);
    const int x0 = std::min(g - 2, std::max(0, int(gx)));
    const int y0 = std::min(g - 2, std::max(0, int(gy)));
    const int z0 = std::min(g - 2, std::max(0, int(gz)));
    const double tx = gx - x0, ty = gy - y0, tz = gz - z0;
    for (int k = 0; k < 3; ++k)
        out[k] = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                const std::size_t i =
                    ((std::size_t(z0 + dz) * g + (y0 + dy)) * g + (x0 + dx)) * 3;
                for (int k = 0; k < 3; ++k)
                    out[k] += w * t.disp[i + k];
            }
}

void source_coord(const Transform& t, const Dims3& d, int x, int y, int z, double src[3]) {
    const double cx = (d.nx - 1) / 2.0, cy = (d.ny - 1) / 2.0, cz = (d.nz - 1) / 2.0;
    const double p[3] = {x - cx, y - cy, z - cz};
    double q[3];
    if (t.affine)
        for (int i = 0; i < 3; ++i)
            q[i] = t.mat.m[i][0] * p[0] + t.mat.m[i][1] * p[1] + t.mat.m[i][2] * p[2];
    else
        for (int i = 0; i < 3; ++i)
            q[i] = p[i];
    src[0] = q[0] + cx;
    src[1] = q[1] + cy;
    src[2] = q[2] + cz;
    if (t.elastic) {
        double dsp[3];
        grid_disp(t, double(x) / std::max(1, d.nx - 1), double(y) / std::max(1, d.ny - 1),
                  double(z) / std::max(1, d.nz - 1), dsp);
        for (int k = 0; k < 3; ++k)
            src[k] += dsp[k];
    }
}

Volume3D warp_trilinear(const Volume3D& v, const Transform& t) {
    const Dims3& d = v.dims();
    Volume3D out(d, v.spacing());
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                double s[3];
                source_coord(t, d, x, y, z, s);
                const int x0 = int(std::floor(s[0])), y0 = int(std::floor(s[1])),
                          z0 = int(std::floor(s[2]));
                double acc = 0.0;
                const double tx = s[0] - x0, ty = s[1] - y0, tz = s[2] - z0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
                            if (xi < 0 || yi < 0 || zi < 0 || xi >= d.nx || yi >= d.ny ||
                                zi >= d.nz)
                                continue; // outside samples as zero
                            const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) *
                                             (dz ? tz : 1 - tz);
                            acc += w * v.at(xi, yi, zi);
                        }
                out.at(x, y, z) = float(acc);
            }
    return out;
}

BinaryMask3D warp_nearest(const BinaryMask3D& m, const Transform& t) {
    const Dims3& d = m.dims();
    BinaryMask3D out(d, m.spacing());
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                double s[3];
                source_coord(t, d, x, y, z, s);
                const int xi = int(std::lround(s[0])), yi = int(std::lround(s[1])),
                          zi = int(std::lround(s[2]));
                if (xi < 0 || yi < 0 || zi < 0 || xi >= d.nx || yi >= d.ny || zi >= d.nz)
                    continue;
                out.at(x, y, z) = m.at(xi, yi, zi);
            }
    return out;
}

} // namespace

void augment_in_place(MultiContrastVolume& image, BinaryMask3D& rater1, BinaryMask3D& rater2,
                      const SpatialAugmentConfig& cfg, std::mt19937_64& rng) {
    Transform t = sample_transform(image.dims(), cfg, rng);
    if (!t.affine && !t.elastic)
        return;
    MultiContrastVolume warped;
    for (Contrast c : kAllContrasts)
        if (image.available(c))
            warped.set(c, warp_trilinear(image.volume(c), t));
    image = std::move(warped);
    rater1 = warp_nearest(rater1, t);
    rater2 = warp_nearest(rater2, t);
}

} // namespace lesionseg
