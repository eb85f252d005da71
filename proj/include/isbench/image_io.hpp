#pragma once

#include <filesystem>

#include "isbench/voxelgrid.hpp"

namespace isbench {

/// Reads a single-file NIfTI-1 image (".nii" or gzip-compressed ".nii.gz";
/// compression is detected from the content, not the name). Only pixdim is
/// interpreted; orientation fields are kept opaquely. Stored values are
/// returned raw (scl_slope / scl_inter are not applied).
Volume read_nifti(const std::filesystem::path& path);

/// Writes a 348-byte NIfTI-1 header, the 4-byte empty extension block and the
/// voxel data (vox_offset 352). Gzip-compressed when the name ends in ".gz".
void write_nifti(const Volume& volume, const std::filesystem::path& path);

/// Native format: `<stem>.rav` holds little-endian raw voxels and
/// `<stem>.json` holds {"dims", "spacing", "dtype"}. `path` may name either
/// file or the shared stem.
Volume read_native(const std::filesystem::path& path);
void write_native(const Volume& volume, const std::filesystem::path& path);

/// Dispatches on the file name: ".nii"/".nii.gz" to NIfTI, ".json"/".rav" to
/// the native format.
Volume read_volume(const std::filesystem::path& path);
void write_volume(const Volume& volume, const std::filesystem::path& path);

}  // namespace isbench
