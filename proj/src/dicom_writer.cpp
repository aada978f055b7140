#include "ctqa/dicom_writer.hpp"

#include <algorithm>
#include <cstdio>

#include "ctqa/dicom.hpp"

namespace ctqa {
namespace {

constexpr std::string_view kCtImageStorage = "1.2.840.10008.5.1.4.1.1.2";
constexpr std::string_view kImplementationUid = "1.2.826.0.1.3680043.10.1192.1";

bool long_length(std::string_view vr) {
  return vr == "OB" || vr == "OD" || vr == "OF" || vr == "OL" || vr == "OV" || vr == "OW" || vr == "SQ" ||
         vr == "SV" || vr == "UC" || vr == "UN" || vr == "UR" || vr == "UT" || vr == "UV";
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void encode_element(std::vector<std::uint8_t>& out, const DicomElement& e, bool explicit_vr);

void encode_list(std::vector<std::uint8_t>& out, std::vector<DicomElement> list, bool explicit_vr, bool sort) {
  if (sort) {
    std::stable_sort(list.begin(), list.end(), [](const DicomElement& a, const DicomElement& b) {
      return std::pair(a.group, a.element) < std::pair(b.group, b.element);
    });
  }
  for (const auto& e : list) encode_element(out, e, explicit_vr);
}

void encode_element(std::vector<std::uint8_t>& out, const DicomElement& e, bool explicit_vr) {
  put16(out, e.group);
  put16(out, e.element);
  const bool sequence = e.vr == "SQ";
  const std::uint32_t length = sequence ? 0xFFFFFFFFu : static_cast<std::uint32_t>(e.value.size());
  if (explicit_vr) {
    out.push_back(static_cast<std::uint8_t>(e.vr[0]));
    out.push_back(static_cast<std::uint8_t>(e.vr[1]));
    if (long_length(e.vr)) {
      put16(out, 0);
      put32(out, length);
    } else {
      put16(out, static_cast<std::uint16_t>(length));
    }
  } else {
    put32(out, length);
  }
  if (!sequence) {
    out.insert(out.end(), e.value.begin(), e.value.end());
    return;
  }
  for (const auto& item : e.items) {
    put16(out, 0xFFFE);
    put16(out, 0xE000);
    put32(out, 0xFFFFFFFFu);
    encode_list(out, item, explicit_vr, true);
    put16(out, 0xFFFE);
    put16(out, 0xE00D);
    put32(out, 0);
  }
  put16(out, 0xFFFE);
  put16(out, 0xE0DD);
  put32(out, 0);
}

std::vector<std::uint8_t> padded_text(std::string_view vr, std::string_view text) {
  std::vector<std::uint8_t> v(text.begin(), text.end());
  if (v.size() % 2 == 1) v.push_back(vr == "UI" ? 0 : ' ');
  return v;
}

DicomElement text_element(std::uint16_t g, std::uint16_t e, std::string_view vr, std::string_view text) {
  return DicomElement{g, e, std::string(vr), padded_text(vr, text), {}};
}

}  // namespace

DicomElement& DicomDataset::slot(std::uint16_t group, std::uint16_t element) {
  for (auto& e : elements_) {
    if (e.group == group && e.element == element) return e;
  }
  elements_.push_back(DicomElement{group, element, "", {}, {}});
  return elements_.back();
}

void DicomDataset::set_string(std::uint16_t group, std::uint16_t element, std::string_view vr,
                              std::string_view text) {
  auto& e = slot(group, element);
  e.vr = std::string(vr);
  e.value = padded_text(vr, text);
}

void DicomDataset::set_us(std::uint16_t group, std::uint16_t element, std::uint16_t value) {
  auto& e = slot(group, element);
  e.vr = "US";
  e.value.clear();
  put16(e.value, value);
}

void DicomDataset::set_bytes(std::uint16_t group, std::uint16_t element, std::string_view vr,
                             std::vector<std::uint8_t> bytes) {
  auto& e = slot(group, element);
  e.vr = std::string(vr);
  e.value = std::move(bytes);
}

void DicomDataset::set_sequence(std::uint16_t group, std::uint16_t element,
                                std::vector<std::vector<DicomElement>> items) {
  auto& e = slot(group, element);
  e.vr = "SQ";
  e.value.clear();
  e.items = std::move(items);
}

void DicomDataset::erase(std::uint16_t group, std::uint16_t element) {
  std::erase_if(elements_, [&](const DicomElement& e) { return e.group == group && e.element == element; });
}

bool DicomDataset::contains(std::uint16_t group, std::uint16_t element) const {
  return std::any_of(elements_.begin(), elements_.end(),
                     [&](const DicomElement& e) { return e.group == group && e.element == element; });
}

std::vector<std::uint8_t> DicomDataset::encode(const EncodeOptions& options) const {
  std::vector<std::uint8_t> out;
  if (options.part10) {
    out.assign(128, 0);
    out.insert(out.end(), {'D', 'I', 'C', 'M'});

    std::string sop_instance = "1.2.3";
    for (const auto& e : elements_) {
      if (e.group == 0x0008 && e.element == 0x0018) {
        sop_instance.assign(e.value.begin(), e.value.end());
        while (!sop_instance.empty() && sop_instance.back() == '\0') sop_instance.pop_back();
      }
    }
    const std::string syntax = !options.transfer_syntax.empty() ? options.transfer_syntax
                               : options.explicit_vr        ? std::string(kExplicitVrLittleEndian)
                                                            : std::string(kImplicitVrLittleEndian);
    std::vector<std::uint8_t> meta;
    encode_element(meta, DicomElement{0x0002, 0x0001, "OB", {0x00, 0x01}, {}}, true);
    encode_element(meta, text_element(0x0002, 0x0002, "UI", kCtImageStorage), true);
    encode_element(meta, text_element(0x0002, 0x0003, "UI", sop_instance), true);
    encode_element(meta, text_element(0x0002, 0x0010, "UI", syntax), true);
    encode_element(meta, text_element(0x0002, 0x0012, "UI", kImplementationUid), true);

    DicomElement group_length{0x0002, 0x0000, "UL", {}, {}};
    put32(group_length.value, static_cast<std::uint32_t>(meta.size()));
    encode_element(out, group_length, true);
    out.insert(out.end(), meta.begin(), meta.end());
  }
  encode_list(out, elements_, options.explicit_vr, options.sort_elements);
  return out;
}

std::string format_decimal_string(double value) {
  char buf[64];
  for (int precision = 15; precision >= 1; --precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    if (std::string_view(buf).size() <= 16) return buf;
  }
  return "0";
}

}  // namespace ctqa
