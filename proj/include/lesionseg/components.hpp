#ifndef LESIONSEG_COMPONENTS_HPP
#define LESIONSEG_COMPONENTS_HPP

#include <cstdint>
#include <vector>

#include "lesionseg/volume.hpp"

namespace lesionseg {

// 26-connected component labeling via two-pass union-find.
// labels: 0 = background, components numbered 1..n_components in scan order.
// Returns the number of components.
int label_components_26(const BinaryMask3D& mask, std::vector<std::int32_t>& labels);

} // namespace lesionseg

#endif
