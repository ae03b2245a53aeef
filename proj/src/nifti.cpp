#include "lesionseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace lesionseg::nifti {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;    // offset 0, must be 348
    char data_type[10];         // 4
    char db_name[18];           // 14
    std::int32_t extents;       // 32
    std::int16_t session_error; // 36
    char regular;               // 38
    char dim_info;              // 39
    std::int16_t dim[8];        // 40
    float intent_p1;            // 56
    float intent_p2;            // 60
    float intent_p3;            // 64
    std::int16_t intent_code;   // 68
    std::int16_t datatype;      // 70
    std::int16_t bitpix;        // 72
    std::int16_t slice_start;   // 74
    float pixdim[8];            // 76
    float vox_offset;           // 108
    float scl_slope;            // 112
    float scl_inter;            // 116
    std::int16_t slice_end;     // 120
    char slice_code;            // 122
    char xyzt_units;            // 123
    float cal_max;              // 124
    float cal_min;              // 128
    float slice_duration;       // 132
    float toffset;              // 136
    std::int32_t glmax;         // 140
    std::int32_t glmin;         // 144
    char descrip[80];           // 148
    char aux_file[24];          // 228
    std::int16_t qform_code;    // 252
    std::int16_t sform_code;    // 254
    float quatern_b;            // 256
    float quatern_c;            // 260
    float quatern_d;            // 264
    float qoffset_x;            // 268
    float qoffset_y;            // 272
    float qoffset_z;            // 276
    float srow_x[4];            // 280
    float srow_y[4];            // 296
    float srow_z[4];            // 312
    char intent_name[16];       // 328
    char magic[4];              // 344
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");
static_assert(offsetof(Nifti1Header, dim) == 40);
static_assert(offsetof(Nifti1Header, datatype) == 70);
static_assert(offsetof(Nifti1Header, pixdim) == 76);
static_assert(offsetof(Nifti1Header, vox_offset) == 108);
static_assert(offsetof(Nifti1Header, scl_slope) == 112);
static_assert(offsetof(Nifti1Header, scl_inter) == 116);
static_assert(offsetof(Nifti1Header, sform_code) == 254);
static_assert(offsetof(Nifti1Header, magic) == 344);

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr float VOX_OFFSET = 352.0f;

struct GzFile {
    gzFile f = nullptr;
    explicit GzFile(const std::string& path, const char* mode) { f = gzopen(path.c_str(), mode); }
    ~GzFile() {
        if (f)
            gzclose(f);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;
};

bool ends_with_gz(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

void read_exact(gzFile f, void* buf, std::size_t n, const std::string& path) {
    int got = gzread(f, buf, unsigned(n));
    if (got < 0 || std::size_t(got) != n)
        throw format_error("truncated NIfTI file: " + path);
}

struct RawImage {
    Dims3 dims;
    Spacing3 spacing;
    std::vector<float> values; // scl applied
};

RawImage read_raw(const std::string& path) {
    // gzread handles both gzip and plain files transparently.
    GzFile gf(path, "rb");
    if (!gf.f)
        throw data_error("cannot open file: " + path);

    Nifti1Header hdr{};
    read_exact(gf.f, &hdr, sizeof(hdr), path);

    if (hdr.sizeof_hdr != 348) {
        if (hdr.sizeof_hdr == 1543569408) // 348 byte-swapped
            throw unsupported_error("big-endian NIfTI not supported: " + path);
        throw format_error("bad NIfTI header size: " + path);
    }
    if (std::memcmp(hdr.magic, "n+1", 4) != 0)
        throw format_error("bad NIfTI magic (single-file n+1 expected): " + path);

    int ndim = hdr.dim[0];
    if (ndim < 3 || ndim > 7)
        throw unsupported_error("only 3D NIfTI supported: " + path);
    for (int d = 4; d <= ndim; ++d)
        if (hdr.dim[d] > 1)
            throw unsupported_error("only 3D NIfTI supported: " + path);

    Dims3 dims{hdr.dim[1], hdr.dim[2], hdr.dim[3]};
    if (!dims.positive())
        throw format_error("non-positive dims in NIfTI header: " + path);
    Spacing3 spacing{hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3]};

    if (hdr.vox_offset < 348.0f)
        throw format_error("vox_offset below header size: " + path);
    std::size_t skip = std::size_t(hdr.vox_offset) - sizeof(hdr);
    if (skip > 0) {
        std::vector<char> pad(skip);
        read_exact(gf.f, pad.data(), skip, path);
    }

    const std::size_t n = dims.total();
    float slope = hdr.scl_slope;
    float inter = hdr.scl_inter;
    bool scale = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);

    RawImage img;
    img.dims = dims;
    img.spacing = spacing;
    img.values.resize(n);

    switch (hdr.datatype) {
    case DT_UINT8: {
        std::vector<std::uint8_t> buf(n);
        read_exact(gf.f, buf.data(), n, path);
        for (std::size_t i = 0; i < n; ++i)
            img.values[i] = float(buf[i]);
        break;
    }
    case DT_INT16: {
        std::vector<std::int16_t> buf(n);
        read_exact(gf.f, buf.data(), n * 2, path);
        for (std::size_t i = 0; i < n; ++i)
            img.values[i] = float(buf[i]);
        break;
    }
    case DT_FLOAT32: {
        read_exact(gf.f, img.values.data(), n * 4, path);
        break;
    }
    default:
        throw unsupported_error("unsupported NIfTI datatype " + std::to_string(hdr.datatype) +
                                ": " + path);
    }

    if (scale)
        for (float& v : img.values)
            v = v * slope + inter;

    for (float v : img.values)
        if (!std::isfinite(v))
            throw format_error("non-finite voxel value in " + path);

    return img;
}

Nifti1Header make_header(const Dims3& dims, const Spacing3& spacing, std::int16_t datatype,
                         std::int16_t bitpix) {
    Nifti1Header hdr{};
    hdr.sizeof_hdr = 348;
    hdr.regular = 'r';
    hdr.dim[0] = 3;
    hdr.dim[1] = std::int16_t(dims.nx);
    hdr.dim[2] = std::int16_t(dims.ny);
    hdr.dim[3] = std::int16_t(dims.nz);
    for (int d = 4; d < 8; ++d)
        hdr.dim[d] = 1;
    hdr.datatype = datatype;
    hdr.bitpix = bitpix;
    hdr.pixdim[0] = 1.0f;
    hdr.pixdim[1] = spacing.sx;
    hdr.pixdim[2] = spacing.sy;
    hdr.pixdim[3] = spacing.sz;
    hdr.vox_offset = VOX_OFFSET;
    hdr.scl_slope = 1.0f;
    hdr.scl_inter = 0.0f;
    hdr.xyzt_units = 2; // NIFTI_UNITS_MM
    std::strncpy(hdr.descrip, "lesionseg", sizeof(hdr.descrip) - 1);
    hdr.qform_code = 0;
    hdr.sform_code = 1; // identity orientation, spacing on the diagonal
    hdr.srow_x[0] = spacing.sx;
    hdr.srow_y[1] = spacing.sy;
    hdr.srow_z[2] = spacing.sz;
    std::memcpy(hdr.magic, "n+1", 4);
    return hdr;
}

void write_raw(const std::string& path, const Nifti1Header& hdr, const void* data,
               std::size_t nbytes) {
    // .nii.gz compressed, plain .nii via "wbT" (transparent, no gzip framing).
    GzFile gf(path, ends_with_gz(path) ? "wb" : "wbT");
    if (!gf.f)
        throw data_error("cannot open file for writing: " + path);

    if (gzwrite(gf.f, &hdr, sizeof(hdr)) != int(sizeof(hdr)))
        throw data_error("write failed: " + path);
    const char pad[4] = {0, 0, 0, 0}; // header 348 -> vox_offset 352
    if (gzwrite(gf.f, pad, 4) != 4)
        throw data_error("write failed: " + path);
    if (gzwrite(gf.f, data, unsigned(nbytes)) != int(nbytes))
        throw data_error("write failed: " + path);
}

} // namespace

Volume3D read_volume(const std::string& path) {
    RawImage img = read_raw(path);
    return Volume3D(img.dims, img.spacing, std::move(img.values));
}

BinaryMask3D read_mask(const std::string& path) {
    RawImage img = read_raw(path);
    std::vector<std::uint8_t> vox(img.values.size());
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        float v = img.values[i];
        if (v != 0.0f && v != 1.0f)
            throw format_error("mask file contains non-binary value: " + path);
        vox[i] = std::uint8_t(v);
    }
    return BinaryMask3D(img.dims, img.spacing, std::move(vox));
}

void write_volume(const Volume3D& vol, const std::string& path) {
    if (!vol.dims().positive())
        throw config_error("write_volume: dims must be positive");
    Nifti1Header hdr = make_header(vol.dims(), vol.spacing(), DT_FLOAT32, 32);
    write_raw(path, hdr, vol.data().data(), vol.data().size() * 4);
}

void write_mask(const BinaryMask3D& mask, const std::string& path) {
    if (!mask.dims().positive())
        throw config_error("write_mask: dims must be positive");
    Nifti1Header hdr = make_header(mask.dims(), mask.spacing(), DT_UINT8, 8);
    write_raw(path, hdr, mask.data().data(), mask.data().size());
}

void write_confidence(const ConfidenceMap& cmap, const std::string& path) {
    if (cmap.n_votes() > 255)
        throw config_error("write_confidence: n_votes exceeds uint8 range");
    std::vector<std::uint8_t> buf(cmap.counts().size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = std::uint8_t(cmap.counts()[i]);
    Nifti1Header hdr = make_header(cmap.dims(), cmap.spacing(), DT_UINT8, 8);
    write_raw(path, hdr, buf.data(), buf.size());
}

ConfidenceMap read_confidence(const std::string& path, int n_votes) {
    RawImage img = read_raw(path);
    ConfidenceMap cmap(img.dims, img.spacing, n_votes);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        cmap.counts()[i] = std::int32_t(img.values[i]);
    cmap.check_bounds();
    return cmap;
}

} // namespace lesionseg::nifti
