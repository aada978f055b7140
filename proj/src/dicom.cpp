#include "ctqa/dicom.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctqa/error.hpp"

namespace ctqa {
namespace {

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

constexpr std::uint32_t tag(std::uint16_t group, std::uint16_t element) {
  return (static_cast<std::uint32_t>(group) << 16) | element;
}

constexpr std::uint32_t kItem = tag(0xFFFE, 0xE000);
constexpr std::uint32_t kItemDelimiter = tag(0xFFFE, 0xE00D);
constexpr std::uint32_t kSequenceDelimiter = tag(0xFFFE, 0xE0DD);
constexpr std::uint32_t kPixelData = tag(0x7FE0, 0x0010);

bool has_long_length(char a, char b) {
  static constexpr const char* kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                          "SV", "UC", "UN", "UR", "UT", "UV"};
  return std::any_of(std::begin(kLong), std::end(kLong),
                     [&](const char* vr) { return vr[0] == a && vr[1] == b; });
}

bool is_known_vr(char a, char b) {
  static constexpr const char* kAll[] = {"AE", "AS", "AT", "CS", "DA", "DS", "DT", "FD", "FL",
                                         "IS", "LO", "LT", "OB", "OD", "OF", "OL", "OV", "OW",
                                         "PN", "SH", "SL", "SQ", "SS", "ST", "SV", "TM", "UC",
                                         "UI", "UL", "UN", "UR", "US", "UT", "UV"};
  return std::any_of(std::begin(kAll), std::end(kAll),
                     [&](const char* vr) { return vr[0] == a && vr[1] == b; });
}

struct Element {
  std::uint32_t tag = 0;
  char vr[2] = {0, 0};
  std::uint32_t length = 0;
  std::size_t value_offset = 0;
};

[[noreturn]] void unparseable(const std::string& why) { throw Error(ErrorCode::UnparseableDicom, why); }

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t pos() const { return pos_; }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  char ch() {
    need(1);
    return static_cast<char>(bytes_[pos_++]);
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  Element element(bool explicit_vr) {
    Element e;
    const std::uint16_t group = u16();
    const std::uint16_t elem = u16();
    e.tag = tag(group, elem);
    if (group == 0xFFFE) {
      // Item and delimiter tags never carry a VR.
      e.length = u32();
    } else if (explicit_vr) {
      e.vr[0] = ch();
      e.vr[1] = ch();
      if (!is_known_vr(e.vr[0], e.vr[1])) unparseable("invalid VR in explicit-VR stream");
      if (has_long_length(e.vr[0], e.vr[1])) {
        skip(2);
        e.length = u32();
      } else {
        e.length = u16();
      }
    } else {
      e.length = u32();
    }
    e.value_offset = pos_;
    if (e.length != kUndefinedLength && e.length > bytes_.size() - pos_) {
      unparseable("element value runs past end of data");
    }
    return e;
  }

  // Skips the contents of an undefined-length sequence, positioned just after
  // its header.
  void skip_undefined_sequence(bool explicit_vr, int depth) {
    if (depth > 32) unparseable("sequence nesting too deep");
    while (true) {
      Element item = element(explicit_vr);
      if (item.tag == kSequenceDelimiter) return;
      if (item.tag != kItem) unparseable("expected sequence item");
      if (item.length != kUndefinedLength) {
        skip(item.length);
        continue;
      }
      while (true) {
        Element inner = element(explicit_vr);
        if (inner.tag == kItemDelimiter) break;
        if (inner.length == kUndefinedLength) {
          skip_undefined_sequence(explicit_vr, depth + 1);
        } else {
          skip(inner.length);
        }
      }
    }
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - std::min(pos_, bytes_.size())) unparseable("truncated element");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

std::string_view trim(std::string_view s) {
  auto blank = [](char c) { return c == ' ' || c == '\0' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view value_text(std::span<const std::uint8_t> bytes, const Element& e) {
  return {reinterpret_cast<const char*>(bytes.data() + e.value_offset), e.length};
}

std::optional<std::int64_t> parse_integer_string(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::uint16_t read_us(std::span<const std::uint8_t> bytes, const Element& e) {
  if (e.length < 2) unparseable("short US value");
  return static_cast<std::uint16_t>(bytes[e.value_offset] | (bytes[e.value_offset + 1] << 8));
}

}  // namespace

std::optional<double> parse_decimal_string(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::vector<double>> parse_decimal_list(std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto sep = text.find('\\');
    auto v = parse_decimal_string(text.substr(0, sep));
    if (!v) return std::nullopt;
    out.push_back(*v);
    if (sep == std::string_view::npos) break;
    text.remove_prefix(sep + 1);
  }
  return out;
}

SliceHeader parse_slice(std::span<const std::uint8_t> bytes) {
  std::size_t start = 0;
  bool explicit_vr = false;
  bool part10 = bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0;

  if (part10) {
    start = 132;
  } else {
    // Headerless stream: the first element must plausibly belong to the meta
    // group or the identifying group 0008.
    if (bytes.size() < 8) unparseable("missing DICM magic");
    const std::uint16_t group = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
    if (group != 0x0002 && group != 0x0008) unparseable("missing DICM magic");
    explicit_vr = is_known_vr(static_cast<char>(bytes[4]), static_cast<char>(bytes[5]));
  }

  SliceHeader h;
  Cursor cur(bytes, start);

  // File meta information group, always explicit VR little endian.
  if (part10 || (bytes.size() >= 2 && bytes[0] == 0x02 && bytes[1] == 0x00)) {
    h.transfer_syntax.clear();
    while (!cur.at_end()) {
      const std::size_t mark = cur.pos();
      if (bytes.size() - mark < 2) unparseable("truncated element");
      const std::uint16_t group = static_cast<std::uint16_t>(bytes[mark] | (bytes[mark + 1] << 8));
      if (group != 0x0002) break;
      Element e = cur.element(true);
      if (e.length == kUndefinedLength) unparseable("undefined length in meta group");
      if (e.tag == tag(0x0002, 0x0010)) h.transfer_syntax = std::string(trim(value_text(bytes, e)));
      cur.skip(e.length);
    }
    if (h.transfer_syntax.empty()) {
      if (part10) unparseable("meta group lacks transfer syntax");
      h.transfer_syntax = std::string(kImplicitVrLittleEndian);
    }
    if (h.transfer_syntax == kExplicitVrLittleEndian) {
      explicit_vr = true;
    } else if (h.transfer_syntax == kImplicitVrLittleEndian) {
      explicit_vr = false;
    } else {
      throw Error(ErrorCode::UnsupportedTransferSyntax, h.transfer_syntax);
    }
  } else {
    h.transfer_syntax = std::string(explicit_vr ? kExplicitVrLittleEndian : kImplicitVrLittleEndian);
  }

  bool have_in = false, have_rows = false, have_cols = false, have_bits = false, have_spacing = false;
  bool bad_in = false, bad_spacing = false;

  while (!cur.at_end()) {
    Element e = cur.element(explicit_vr);
    if (e.length == kUndefinedLength) {
      if (e.tag == kPixelData) {
        throw Error(ErrorCode::UnsupportedTransferSyntax, "encapsulated pixel data");
      }
      cur.skip_undefined_sequence(explicit_vr, 0);
      continue;
    }
    const auto text = [&] { return value_text(bytes, e); };
    switch (e.tag) {
      case tag(0x0020, 0x000E):
        h.series_uid = std::string(trim(text()));
        break;
      case tag(0x0020, 0x0013): {
        auto v = parse_integer_string(text());
        if (v) {
          h.instance_number = *v;
          have_in = true;
        } else {
          bad_in = true;
        }
        break;
      }
      case tag(0x0020, 0x1041):
        h.slice_location = parse_decimal_string(text());
        break;
      case tag(0x0020, 0x0032): {
        auto v = parse_decimal_list(text());
        if (v && v->size() == 3) h.image_position = std::array<double, 3>{(*v)[0], (*v)[1], (*v)[2]};
        break;
      }
      case tag(0x0020, 0x0037): {
        auto v = parse_decimal_list(text());
        if (v && v->size() == 6) {
          std::array<double, 6> o{};
          std::copy(v->begin(), v->end(), o.begin());
          h.image_orientation = o;
        }
        break;
      }
      case tag(0x0028, 0x0030): {
        auto v = parse_decimal_list(text());
        if (v && v->size() == 2 && (*v)[0] > 0 && (*v)[1] > 0) {
          h.pixel_spacing = {(*v)[0], (*v)[1]};
          have_spacing = true;
        } else {
          bad_spacing = true;
        }
        break;
      }
      case tag(0x0018, 0x0050):
        h.slice_thickness = parse_decimal_string(text());
        break;
      case tag(0x0028, 0x0002):
        if (read_us(bytes, e) != 1) unparseable("only single-sample (grayscale) pixels are supported");
        break;
      case tag(0x0028, 0x0008): {
        auto frames = parse_integer_string(text());
        if (frames && *frames > 1) unparseable("multi-frame files are not supported");
        break;
      }
      case tag(0x0028, 0x0010):
        h.rows = read_us(bytes, e);
        have_rows = true;
        break;
      case tag(0x0028, 0x0011):
        h.columns = read_us(bytes, e);
        have_cols = true;
        break;
      case tag(0x0028, 0x0100):
        h.bits_allocated = read_us(bytes, e);
        have_bits = true;
        break;
      case tag(0x0028, 0x0103):
        h.pixel_representation = read_us(bytes, e);
        break;
      case tag(0x0028, 0x1052):
        if (auto v = parse_decimal_string(text())) h.rescale_intercept = *v;
        break;
      case tag(0x0028, 0x1053):
        if (auto v = parse_decimal_string(text())) h.rescale_slope = *v;
        break;
      case kPixelData:
        h.pixel_data_offset = e.value_offset;
        h.pixel_data_length = e.length;
        h.has_pixel_data = true;
        break;
      default:
        break;
    }
    cur.skip(e.length);
  }

  if (!have_in) {
    throw Error(ErrorCode::MissingRequiredTag, bad_in ? "malformed InstanceNumber" : "InstanceNumber (0020,0013)");
  }
  if (!have_rows || !have_cols || !have_bits) {
    throw Error(ErrorCode::MissingRequiredTag, "pixel description (Rows/Columns/BitsAllocated)");
  }
  if (!have_spacing) {
    throw Error(ErrorCode::MissingRequiredTag, bad_spacing ? "malformed PixelSpacing" : "PixelSpacing (0028,0030)");
  }
  if (!h.slice_location && !h.image_position) {
    throw Error(ErrorCode::MissingRequiredTag, "no SliceLocation or ImagePositionPatient");
  }
  if (h.rows < 1 || h.columns < 1) unparseable("empty image matrix");
  if (h.bits_allocated != 8 && h.bits_allocated != 16) unparseable("BitsAllocated must be 8 or 16");
  return h;
}

PixelSlab decode_pixels(const SliceHeader& header, std::span<const std::uint8_t> bytes) {
  if (!header.has_pixel_data) throw Error(ErrorCode::MissingRequiredTag, "PixelData (7FE0,0010)");
  const std::size_t count = static_cast<std::size_t>(header.rows) * header.columns;
  const std::size_t sample_bytes = header.bits_allocated / 8;
  const std::size_t expected = count * sample_bytes;
  // Odd-sized 8-bit pixel data is padded to even length.
  const bool padded = sample_bytes == 1 && (expected % 2 == 1) && header.pixel_data_length == expected + 1;
  if (header.pixel_data_length != expected && !padded) {
    throw Error(ErrorCode::PixelLengthMismatch, "pixel data holds " + std::to_string(header.pixel_data_length) +
                                                    " bytes, expected " + std::to_string(expected));
  }
  if (header.pixel_data_offset + expected > bytes.size()) {
    throw Error(ErrorCode::PixelLengthMismatch, "pixel data runs past end of buffer");
  }

  PixelSlab slab;
  slab.width = header.columns;
  slab.height = header.rows;
  slab.values.resize(count);
  const std::uint8_t* p = bytes.data() + header.pixel_data_offset;
  const double slope = header.rescale_slope;
  const double intercept = header.rescale_intercept;
  const bool is_signed = header.pixel_representation == 1;
  for (std::size_t i = 0; i < count; ++i) {
    double stored;
    if (sample_bytes == 2) {
      const std::uint16_t raw = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
      stored = is_signed ? static_cast<double>(static_cast<std::int16_t>(raw)) : static_cast<double>(raw);
    } else {
      stored = is_signed ? static_cast<double>(static_cast<std::int8_t>(p[i])) : static_cast<double>(p[i]);
    }
    slab.values[i] = static_cast<float>(stored * slope + intercept);
  }
  return slab;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace ctqa
