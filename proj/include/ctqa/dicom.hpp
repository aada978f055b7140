#pragma once

// Minimal read-only DICOM reader for uncompressed little-endian CT slices.
//
// Handles Part-10 files (128-byte preamble + "DICM", explicit-VR meta group)
// and headerless streams that begin directly with the dataset. Only the
// top-level tags needed for series QA and volume assembly are decoded; all
// other elements, including nested sequences, are skipped by length.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctqa {

inline constexpr std::string_view kImplicitVrLittleEndian = "1.2.840.10008.1.2";
inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

struct SliceHeader {
  std::string source_path;
  std::string series_uid;
  std::int64_t instance_number = 0;
  std::optional<double> slice_location;
  std::optional<std::array<double, 3>> image_position;
  std::optional<std::array<double, 6>> image_orientation;
  std::array<double, 2> pixel_spacing{1.0, 1.0};  // (row spacing, column spacing)
  std::optional<double> slice_thickness;
  int rows = 0;
  int columns = 0;
  int bits_allocated = 16;
  int pixel_representation = 0;  // 0 unsigned, 1 two's complement
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
  std::string transfer_syntax;

  // Location of the (7FE0,0010) value inside the parsed byte buffer.
  std::size_t pixel_data_offset = 0;
  std::size_t pixel_data_length = 0;
  bool has_pixel_data = false;
};

struct PixelSlab {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major HU, values[row * width + col]

  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Parses the header of one DICOM slice. Throws ctqa::Error with
/// UnparseableDicom, UnsupportedTransferSyntax or MissingRequiredTag.
SliceHeader parse_slice(std::span<const std::uint8_t> bytes);

/// Converts the stored pixel values located by `header` to Hounsfield units.
/// Throws PixelLengthMismatch when the element length disagrees with the
/// declared matrix size.
PixelSlab decode_pixels(const SliceHeader& header, std::span<const std::uint8_t> bytes);

/// Parses a DICOM decimal string (DS). Leading/trailing blanks and a leading
/// '+' are tolerated. Returns nullopt for malformed input.
std::optional<double> parse_decimal_string(std::string_view text);

/// Splits a multi-valued DS ("a\b\c") and parses every component.
std::optional<std::vector<double>> parse_decimal_list(std::string_view text);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace ctqa
