#include "lesionseg/components.hpp"

#include <numeric>

namespace lesionseg {

namespace {

struct UnionFind {
    std::vector<std::int32_t> parent;

    std::int32_t make() {
        parent.push_back(std::int32_t(parent.size()));
        return std::int32_t(parent.size() - 1);
    }
    std::int32_t find(std::int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]]; // path halving
            a = parent[a];
        }
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a < b)
            parent[b] = a;
        else if (b < a)
            parent[a] = b;
    }
};

} // namespace

int label_components_26(const BinaryMask3D& mask, std::vector<std::int32_t>& labels) {
    const Dims3& d = mask.dims();
    const auto& vox = mask.data();
    labels.assign(vox.size(), 0);

    // Half-neighborhood: the 13 neighbors preceding a voxel in scan order.
    int off[13][3];
    int n_off = 0;
    for (int dz = -1; dz <= 0; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)))
                    continue;
                off[n_off][0] = dx;
                off[n_off][1] = dy;
                off[n_off][2] = dz;
                ++n_off;
            }

    UnionFind uf;
    uf.make(); // slot 0 reserved for background

    std::vector<std::int32_t> prov(vox.size(), 0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                std::size_t i = mask.index(x, y, z);
                if (!vox[i])
                    continue;
                std::int32_t lab = 0;
                for (int k = 0; k < n_off; ++k) {
                    int nx = x + off[k][0], ny = y + off[k][1], nz = z + off[k][2];
                    if (nx < 0 || ny < 0 || nz < 0 || nx >= d.nx || ny >= d.ny || nz >= d.nz)
                        continue;
                    std::int32_t nl = prov[mask.index(nx, ny, nz)];
                    if (nl == 0)
                        continue;
                    if (lab == 0)
                        lab = nl;
                    else
                        uf.unite(lab, nl);
                }
                prov[i] = lab ? lab : uf.make();
            }

    // Compact roots to 1..n in scan order.
    std::vector<std::int32_t> remap(uf.parent.size(), 0);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < vox.size(); ++i) {
        if (!prov[i])
            continue;
        std::int32_t root = uf.find(prov[i]);
        if (remap[root] == 0)
            remap[root] = ++next;
        labels[i] = remap[root];
    }
    return next;
}

} // namespace lesionseg
