#include "lesionseg/phantom.hpp"

#include <cmath>

#include "lesionseg/components.hpp"
#include "lesionseg/metrics.hpp"

namespace lesionseg {

void PhantomConfig::validate() const {
    if (!dims.positive())
        throw config_error("PhantomConfig: dims must be positive");
    if (n_subjects < 1)
        throw config_error("PhantomConfig: n_subjects must be >= 1");
    if (lesions_min < 0 || lesions_max < lesions_min)
        throw config_error("PhantomConfig: bad lesion count range");
    if (lesion_radius_min <= 0.0 || lesion_radius_max < lesion_radius_min)
        throw config_error("PhantomConfig: bad lesion radius range");
    if (noise_sigma < 0.0)
        throw config_error("PhantomConfig: noise_sigma must be >= 0");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Ellipsoid {
    double cx, cy, cz;
    double rx, ry, rz;

    bool contains(double x, double y, double z) const {
        const double a = (x - cx) / rx, b = (y - cy) / ry, c = (z - cz) / rz;
        return a * a + b * b + c * c <= 1.0;
    }
};

// Smooth low-frequency field from a coarse random grid, values in [-1,1]-ish.
std::vector<float> smooth_field(const Dims3& d, int grid, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> coarse(std::size_t(grid) * grid * grid);
    for (double& v : coarse)
        v = gauss(rng);
    std::vector<float> out(d.total());
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const double fx = double(x) / std::max(1, d.nx - 1) * (grid - 1);
                const double fy = double(y) / std::max(1, d.ny - 1) * (grid - 1);
                const double fz = double(z) / std::max(1, d.nz - 1) * (grid - 1);
                const int x0 = std::min(grid - 2, int(fx)), y0 = std::min(grid - 2, int(fy)),
                          z0 = std::min(grid - 2, int(fz));
                const double tx = fx - x0, ty = fy - y0, tz = fz - z0;
                double acc = 0.0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            acc += (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) *
                                   (dz ? tz : 1 - tz) *
                                   coarse[(std::size_t(z0 + dz) * grid + (y0 + dy)) * grid +
                                          (x0 + dx)];
                out[x + std::size_t(d.nx) * (y + std::size_t(d.ny) * z)] = float(acc);
            }
    return out;
}

// Per-tissue base intensities (arbitrary units): air, white matter, CSF core.
struct TissueModel {
    double wm, csf;
};

TissueModel tissue_base(Contrast c) {
    switch (c) {
    case Contrast::T1w: return {0.70, 0.25};
    case Contrast::T2w: return {0.45, 0.85};
    case Contrast::PDw: return {0.55, 0.70};
    case Contrast::FLAIR: return {0.50, 0.15}; // CSF suppressed
    }
    return {0.5, 0.5};
}

double lesion_delta(const PhantomConfig& cfg, Contrast c) {
    switch (c) {
    case Contrast::T1w: return cfg.lesion_delta_t1w;
    case Contrast::T2w: return cfg.lesion_delta_t2w;
    case Contrast::PDw: return cfg.lesion_delta_pdw;
    case Contrast::FLAIR: return cfg.lesion_delta_flair;
    }
    return 0.0;
}

// Per-lesion boundary perturbation: grow or shrink by toggling boundary
// voxels, 26-neighborhood.
BinaryMask3D perturb_rater(const BinaryMask3D& r1, const BinaryMask3D& brain, double toggle_p,
                           std::mt19937_64& rng) {
    const Dims3& d = r1.dims();
    std::vector<std::int32_t> labels;
    const int n = label_components_26(r1, labels);

    BinaryMask3D out = r1;
    std::uniform_int_distribution<int> mode_dist(0, 2); // keep / grow / shrink
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int lesion = 1; lesion <= n; ++lesion) {
        const int mode = mode_dist(rng);
        if (mode == 0)
            continue;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    const std::size_t i = r1.index(x, y, z);
                    if (mode == 1) {
                        // grow: outside voxel 26-adjacent to this lesion
                        if (r1.data()[i] || !brain.data()[i])
                            continue;
                        bool adj = false;
                        for (int dz = -1; dz <= 1 && !adj; ++dz)
                            for (int dy = -1; dy <= 1 && !adj; ++dy)
                                for (int dx = -1; dx <= 1 && !adj; ++dx) {
                                    const int xx = x + dx, yy = y + dy, zz = z + dz;
                                    if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx ||
                                        yy >= d.ny || zz >= d.nz)
                                        continue;
                                    adj = labels[r1.index(xx, yy, zz)] == lesion;
                                }
                        if (adj && unit(rng) < toggle_p)
                            out.data()[i] = 1;
                    } else {
                        // shrink: boundary voxel of this lesion
                        if (labels[i] != lesion)
                            continue;
                        bool boundary = false;
                        for (int dz = -1; dz <= 1 && !boundary; ++dz)
                            for (int dy = -1; dy <= 1 && !boundary; ++dy)
                                for (int dx = -1; dx <= 1 && !boundary; ++dx) {
                                    const int xx = x + dx, yy = y + dy, zz = z + dz;
                                    if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx ||
                                        yy >= d.ny || zz >= d.nz)
                                        continue;
                                    boundary = !r1.data()[r1.index(xx, yy, zz)];
                                }
                        if (boundary && unit(rng) < toggle_p)
                            out.data()[i] = 0;
                    }
                }
    }
    return out;
}

Subject generate_subject(const PhantomConfig& cfg, std::uint64_t subject_seed,
                         const std::string& id) {
    std::mt19937_64 rng(subject_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const Dims3& d = cfg.dims;
    const double cx = (d.nx - 1) / 2.0, cy = (d.ny - 1) / 2.0, cz = (d.nz - 1) / 2.0;
    const Ellipsoid brain{cx, cy, cz, 0.44 * d.nx, 0.44 * d.ny, 0.44 * d.nz};
    const Ellipsoid csf{cx, cy, cz, 0.12 * d.nx, 0.18 * d.ny, 0.12 * d.nz};

    BinaryMask3D brain_mask(d);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                brain_mask.at(x, y, z) = brain.contains(x, y, z);

    // Lesion placement: inside the brain at 0.8 scale, outside the CSF core,
    // pairwise non-overlapping centers.
    std::uniform_int_distribution<int> count_dist(cfg.lesions_min, cfg.lesions_max);
    const int n_lesions = count_dist(rng);
    std::vector<Ellipsoid> lesions;
    std::uniform_real_distribution<double> rad(cfg.lesion_radius_min, cfg.lesion_radius_max);
    int retries = 0;
    const int max_retries = 200 * std::max(1, n_lesions);
    while (int(lesions.size()) < n_lesions) {
        if (++retries > max_retries)
            throw config_error("phantom: lesion placement failed; volume too small for the "
                               "requested lesions");
        Ellipsoid les{0, 0, 0, rad(rng), rad(rng), rad(rng)};
        les.cx = cx + (unit(rng) * 2 - 1) * 0.8 * brain.rx;
        les.cy = cy + (unit(rng) * 2 - 1) * 0.8 * brain.ry;
        les.cz = cz + (unit(rng) * 2 - 1) * 0.8 * brain.rz;
        const double margin = 1.5;
        const double bx = (les.cx - cx) / (brain.rx - les.rx - margin);
        const double by = (les.cy - cy) / (brain.ry - les.ry - margin);
        const double bz = (les.cz - cz) / (brain.rz - les.rz - margin);
        if (bx * bx + by * by + bz * bz > 1.0)
            continue; // not fully inside the brain
        if (csf.contains(les.cx, les.cy, les.cz))
            continue; // center inside the CSF core
        bool clash = false;
        for (const auto& o : lesions) {
            const double dx = les.cx - o.cx, dy = les.cy - o.cy, dz = les.cz - o.cz;
            const double rr = (les.rx + les.ry + les.rz + o.rx + o.ry + o.rz) / 3.0 + 1.0;
            if (dx * dx + dy * dy + dz * dz < rr * rr)
                clash = true;
        }
        if (clash)
            continue;
        lesions.push_back(les);
    }

    BinaryMask3D rater1(d);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                if (!brain_mask.at(x, y, z))
                    continue;
                for (const auto& les : lesions)
                    if (les.contains(x, y, z)) {
                        rater1.at(x, y, z) = 1;
                        break;
                    }
            }

    BinaryMask3D rater2 = rater1;
    if (rater1.count() > 0) {
        double toggle = cfg.rater_disagreement;
        for (int attempt = 0; attempt < 5; ++attempt) {
            rater2 = perturb_rater(rater1, brain_mask, toggle, rng);
            if (rater2.count() == 0) {
                rater2 = rater1;
                break;
            }
            if (voxel_metrics(rater2, rater1).dsc >= 0.7)
                break;
            toggle *= 0.5; // too much disagreement; soften and retry
        }
    }

    MultiContrastVolume image;
    for (Contrast c : kAllContrasts) {
        const TissueModel base = tissue_base(c);
        const double delta = lesion_delta(cfg, c);
        auto texture = smooth_field(d, 4, rng);
        Volume3D vol(d);
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    double v = 0.02; // air
                    if (brain_mask.at(x, y, z)) {
                        v = csf.contains(x, y, z) ? base.csf : base.wm;
                        v += cfg.texture_amplitude * texture[vol.index(x, y, z)];
                        if (rater1.at(x, y, z))
                            v += delta;
                    }
                    v += cfg.noise_sigma * gauss(rng);
                    vol.at(x, y, z) = float(std::max(0.0, v));
                }
        image.set(c, std::move(vol));
    }

    return Subject{id, std::move(image), std::move(rater1), std::move(rater2)};
}

} // namespace

std::vector<Subject> generate_phantom_cohort(const PhantomConfig& cfg) {
    cfg.validate();
    std::vector<Subject> cohort;
    cohort.reserve(std::size_t(cfg.n_subjects));
    for (int s = 0; s < cfg.n_subjects; ++s) {
        char id[32];
        std::snprintf(id, sizeof(id), "subject%03d", s);
        cohort.push_back(generate_subject(cfg, splitmix64(cfg.seed ^ (0x5EED'0000ULL + s)), id));
    }
    return cohort;
}

std::string corruption_name(CorruptionKind k) {
    switch (k) {
    case CorruptionKind::Gamma: return "gamma";
    case CorruptionKind::GaussianNoise: return "gaussian_noise";
    case CorruptionKind::BiasField: return "bias_field";
    case CorruptionKind::Blur: return "blur";
    case CorruptionKind::Anisotropy: return "anisotropy";
    case CorruptionKind::Ghosting: return "ghosting";
    case CorruptionKind::Motion: return "motion";
    case CorruptionKind::DropContrast: return "drop_contrast";
    }
    return "?";
}

CorruptionKind parse_corruption(const std::string& name) {
    for (int k = 0; k <= int(CorruptionKind::DropContrast); ++k)
        if (name == corruption_name(CorruptionKind(k)))
            return CorruptionKind(k);
    throw config_error("unknown corruption kind: " + name);
}

namespace {

Volume3D corrupt_volume(const Volume3D& in, const CorruptionSpec& spec, std::mt19937_64& rng) {
    const Dims3& d = in.dims();
    Volume3D out = in;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    switch (spec.kind) {
    case CorruptionKind::Gamma: {
        // v <- v_max * (v / v_max)^gamma on nonnegative values
        float vmax = 0.0f;
        for (float v : in.data())
            vmax = std::max(vmax, v);
        if (vmax <= 0.0f)
            break;
        for (float& v : out.data()) {
            const double r = std::max(0.0, double(v) / vmax);
            v = float(vmax * std::pow(r, spec.strength));
        }
        break;
    }
    case CorruptionKind::GaussianNoise: {
        for (float& v : out.data())
            v += float(spec.strength * gauss(rng));
        break;
    }
    case CorruptionKind::BiasField: {
        // Multiplicative quadratic polynomial field, mean 1, spatial std
        // strength/2, clamped positive.
        double coef[9];
        for (double& c : coef)
            c = gauss(rng);
        std::vector<double> raw(d.total());
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x, ++i) {
                    const double u = d.nx > 1 ? 2.0 * x / (d.nx - 1) - 1.0 : 0.0;
                    const double v = d.ny > 1 ? 2.0 * y / (d.ny - 1) - 1.0 : 0.0;
                    const double w = d.nz > 1 ? 2.0 * z / (d.nz - 1) - 1.0 : 0.0;
                    raw[i] = coef[0] * u + coef[1] * v + coef[2] * w + coef[3] * u * u +
                             coef[4] * v * v + coef[5] * w * w + coef[6] * u * v +
                             coef[7] * u * w + coef[8] * v * w;
                }
        double mean = 0.0;
        for (double r : raw)
            mean += r;
        mean /= double(raw.size());
        double var = 0.0;
        for (double r : raw)
            var += (r - mean) * (r - mean);
        var /= double(raw.size());
        const double scale = var > 0 ? spec.strength * 0.5 / std::sqrt(var) : 0.0;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            const double field = std::max(0.05, 1.0 + scale * (raw[k] - mean));
            out.data()[k] = float(out.data()[k] * field);
        }
        break;
    }
    case CorruptionKind::Blur: {
        const double sigma = spec.strength;
        if (sigma <= 0.0)
            break;
        const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
        std::vector<double> kernel(2 * radius + 1);
        for (int k = -radius; k <= radius; ++k)
            kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        const int ext[3] = {d.nx, d.ny, d.nz};
        for (int axis = 0; axis < 3; ++axis) {
            Volume3D tmp = out;
            for (int z = 0; z < d.nz; ++z)
                for (int y = 0; y < d.ny; ++y)
                    for (int x = 0; x < d.nx; ++x) {
                        double acc = 0.0, wsum = 0.0;
                        int c[3] = {x, y, z};
                        for (int k = -radius; k <= radius; ++k) {
                            int cc[3] = {x, y, z};
                            cc[axis] = c[axis] + k;
                            if (cc[axis] < 0 || cc[axis] >= ext[axis])
                                continue;
                            acc += kernel[k + radius] * tmp.at(cc[0], cc[1], cc[2]);
                            wsum += kernel[k + radius];
                        }
                        out.at(x, y, z) = float(acc / wsum);
                    }
        }
        break;
    }
    case CorruptionKind::Anisotropy: {
        // Downsample z by factor k (nearest), then nearest upsample back.
        const int k = std::max(2, int(std::lround(spec.strength)));
        const int nz2 = (d.nz + k - 1) / k;
        for (int z = 0; z < d.nz; ++z) {
            const int src_z = std::min(nz2 - 1, z / k) * k;
            if (src_z == z)
                continue;
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x)
                    out.at(x, y, z) = in.at(x, y, std::min(src_z, d.nz - 1));
        }
        break;
    }
    case CorruptionKind::Ghosting: {
        // Attenuated copy shifted by ny/4 along the phase (y) axis, circular.
        const int shift = std::max(1, d.ny / 4);
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x)
                    out.at(x, y, z) =
                        in.at(x, y, z) +
                        float(spec.strength) * in.at(x, (y + shift) % d.ny, z);
        break;
    }
    case CorruptionKind::Motion: {
        // Convex mix with 2-4 randomly translated copies.
        std::uniform_int_distribution<int> ncopies_dist(2, 4);
        std::uniform_int_distribution<int> shift_dist(-3, 3);
        const int ncopies = ncopies_dist(rng);
        std::vector<std::array<int, 3>> shifts(ncopies);
        std::vector<double> weights(ncopies);
        double wsum = 0.0;
        for (int c = 0; c < ncopies; ++c) {
            shifts[c] = {shift_dist(rng), shift_dist(rng), shift_dist(rng)};
            weights[c] = 0.2 + 0.8 * unit(rng);
            wsum += weights[c];
        }
        const double w0 = 1.0; // original keeps the dominant share
        for (double& w : weights)
            w = spec.strength * w / wsum;
        double total = w0;
        for (double w : weights)
            total += w;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    double acc = w0 * in.at(x, y, z);
                    for (int c = 0; c < ncopies; ++c) {
                        const int xx = x + shifts[c][0], yy = y + shifts[c][1],
                                  zz = z + shifts[c][2];
                        if (xx >= 0 && yy >= 0 && zz >= 0 && xx < d.nx && yy < d.ny &&
                            zz < d.nz)
                            acc += weights[c] * in.at(xx, yy, zz);
                    }
                    out.at(x, y, z) = float(acc / total);
                }
        break;
    }
    case CorruptionKind::DropContrast:
        break; // handled by the caller
    }
    return out;
}

} // namespace

MultiContrastVolume corrupt(const MultiContrastVolume& mcv, const CorruptionSpec& spec,
                            std::mt19937_64& rng) {
    if (spec.kind == CorruptionKind::DropContrast) {
        MultiContrastVolume out = mcv;
        out.drop(spec.target);
        return out;
    }
    if (!mcv.available(spec.target))
        throw config_error("corrupt: target contrast absent: " + contrast_name(spec.target));
    MultiContrastVolume out = mcv;
    out.set(spec.target, corrupt_volume(mcv.volume(spec.target), spec, rng));
    return out;
}

} // namespace lesionseg
