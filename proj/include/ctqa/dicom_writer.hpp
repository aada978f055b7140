#pragma once

// DICOM encoder for the subset read by parse_slice. Used to produce synthetic
// corpora and parser test fixtures.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctqa {

struct DicomElement {
  std::uint16_t group = 0;
  std::uint16_t element = 0;
  std::string vr;
  std::vector<std::uint8_t> value;
  std::vector<std::vector<DicomElement>> items;  // SQ only, encoded with undefined lengths
};

struct EncodeOptions {
  bool explicit_vr = true;
  bool part10 = true;            // preamble + "DICM" + meta group
  bool sort_elements = true;     // false keeps insertion order
  std::string transfer_syntax;   // overrides the meta TransferSyntaxUID when non-empty
};

class DicomDataset {
 public:
  void set_string(std::uint16_t group, std::uint16_t element, std::string_view vr, std::string_view text);
  void set_us(std::uint16_t group, std::uint16_t element, std::uint16_t value);
  void set_bytes(std::uint16_t group, std::uint16_t element, std::string_view vr, std::vector<std::uint8_t> bytes);
  void set_sequence(std::uint16_t group, std::uint16_t element, std::vector<std::vector<DicomElement>> items);
  void erase(std::uint16_t group, std::uint16_t element);
  bool contains(std::uint16_t group, std::uint16_t element) const;

  std::vector<DicomElement>& elements() { return elements_; }
  const std::vector<DicomElement>& elements() const { return elements_; }

  std::vector<std::uint8_t> encode(const EncodeOptions& options = {}) const;

 private:
  DicomElement& slot(std::uint16_t group, std::uint16_t element);
  std::vector<DicomElement> elements_;
};

/// Formats a real as a DICOM DS value of at most 16 characters.
std::string format_decimal_string(double value);

}  // namespace ctqa
