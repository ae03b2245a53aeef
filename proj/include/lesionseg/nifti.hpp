#ifndef LESIONSEG_NIFTI_HPP
#define LESIONSEG_NIFTI_HPP

#include <string>

#include "lesionseg/volume.hpp"

namespace lesionseg::nifti {

// Minimal NIfTI-1 subset: single-file .nii (plain or gzip), 3D,
// datatype uint8/int16/float32, little-endian, identity sform.

Volume3D read_volume(const std::string& path);

// read_volume + validation that every scaled value is 0 or 1.
BinaryMask3D read_mask(const std::string& path);

// float32 on disk; lossless round-trip.
void write_volume(const Volume3D& vol, const std::string& path);

// uint8 on disk; lossless round-trip.
void write_mask(const BinaryMask3D& mask, const std::string& path);

// Counts written as uint8; requires n_votes <= 255.
void write_confidence(const ConfidenceMap& cmap, const std::string& path);

ConfidenceMap read_confidence(const std::string& path, int n_votes);

} // namespace lesionseg::nifti

#endif
