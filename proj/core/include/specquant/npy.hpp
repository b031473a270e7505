// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "specquant/matrix.hpp"

namespace specquant {

/// Parses an NPY v1.0/2.0/3.0 buffer holding a 2-D float32 or float64
/// array in either byte order and either memory order. Values are widened to
/// real64 and returned row-major.
///
/// Throws FormatError for a bad magic string or header, ShapeError for a
/// non-2-D shape or a non-float dtype, and DataError (naming the row and
/// column) for any NaN or infinity.
Matrix decode_npy(std::span<const std::uint8_t> bytes);

/// NPY v1.0, little-endian float64, C order.
std::vector<std::uint8_t> encode_npy(const Matrix& m);

Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const Matrix& m);

/// Loads a T x C_in activation stack. When max_rows is set only the first
/// max_rows tokens are kept.
Matrix load_calibration(const std::filesystem::path& path, std::size_t c_in,
                        std::optional<std::size_t> max_rows = std::nullopt);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace specquant
