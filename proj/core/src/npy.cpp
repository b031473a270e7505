// SPDX-License-Identifier: Apache-2.0
#include "specquant/npy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "specquant/error.hpp"

namespace specquant {

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";

struct Header {
  char byte_order = '<';
  std::size_t item_size = 8;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos;
}

// Position just past "'key':" (whitespace skipped), or npos.
std::size_t value_of(std::string_view header, std::string_view key) {
  for (const char quote : {'\'', '"'}) {
    const std::string needle = std::string(1, quote) + std::string(key) + std::string(1, quote);
    const auto at = header.find(needle);
    if (at == std::string_view::npos) continue;
    auto pos = skip_space(header, at + needle.size());
    if (pos >= header.size() || header[pos] != ':') throw FormatError("NPY header: missing ':' after " + std::string(key));
    return skip_space(header, pos + 1);
  }
  return std::string_view::npos;
}

Header parse_header(std::string_view text) {
  Header h;
  auto pos = value_of(text, "descr");
  if (pos == std::string_view::npos) throw FormatError("NPY header: no 'descr' entry");
  const char quote = text[pos];
  if (quote != '\'' && quote != '"') throw FormatError("NPY header: 'descr' is not a string");
  const auto end = text.find(quote, pos + 1);
  if (end == std::string_view::npos) throw FormatError("NPY header: unterminated 'descr'");
  const std::string descr(text.substr(pos + 1, end - pos - 1));
  if (descr == "<f8" || descr == "<f4" || descr == ">f8" || descr == ">f4" || descr == "=f8" || descr == "=f4") {
    h.byte_order = descr[0] == '=' ? (std::endian::native == std::endian::little ? '<' : '>') : descr[0];
    h.item_size = descr[2] == '8' ? 8 : 4;
  } else {
    throw ShapeError("NPY dtype '" + descr + "' is not float32 or float64");
  }

  pos = value_of(text, "fortran_order");
  if (pos == std::string_view::npos) throw FormatError("NPY header: no 'fortran_order' entry");
  if (text.substr(pos, 4) == "True")
    h.fortran_order = true;
  else if (text.substr(pos, 5) == "False")
    h.fortran_order = false;
  else
    throw FormatError("NPY header: 'fortran_order' is not True or False");

  pos = value_of(text, "shape");
  if (pos == std::string_view::npos || text[pos] != '(') throw FormatError("NPY header: no 'shape' tuple");
  const auto close = text.find(')', pos);
  if (close == std::string_view::npos) throw FormatError("NPY header: unterminated 'shape'");
  const std::string_view tuple = text.substr(pos + 1, close - pos - 1);
  std::size_t i = 0;
  while (true) {
    i = skip_space(tuple, i);
    if (i >= tuple.size()) break;
    if (!std::isdigit(static_cast<unsigned char>(tuple[i]))) throw FormatError("NPY header: bad 'shape' entry");
    std::size_t value = 0;
    while (i < tuple.size() && std::isdigit(static_cast<unsigned char>(tuple[i])))
      value = value * 10 + static_cast<std::size_t>(tuple[i++] - '0');
    h.shape.push_back(value);
    i = skip_space(tuple, i);
    if (i < tuple.size()) {
      if (tuple[i] != ',') throw FormatError("NPY header: bad 'shape' separator");
      ++i;
    }
  }
  return h;
}

template <typename Word>
Word load_word(const std::uint8_t* p, bool swap) {
  std::uint8_t raw[sizeof(Word)];
  std::memcpy(raw, p, sizeof(Word));
  if (swap) std::reverse(raw, raw + sizeof(Word));
  Word w;
  std::memcpy(&w, raw, sizeof(Word));
  return w;
}

std::uint32_t read_le(std::span<const std::uint8_t> b, std::size_t offset, std::size_t width) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(b[offset + i]) << (8 * i);
  return v;
}

}  // namespace

Matrix decode_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError("not an NPY file (bad magic)");
  const unsigned major = bytes[6];
  std::size_t header_len = 0;
  std::size_t header_start = 0;
  if (major == 1) {
    header_len = read_le(bytes, 8, 2);
    header_start = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError("NPY: truncated header length");
    header_len = read_le(bytes, 8, 4);
    header_start = 12;
  } else {
    throw FormatError("NPY: unsupported format version " + std::to_string(major));
  }
  if (header_start + header_len > bytes.size()) throw FormatError("NPY: header runs past end of file");
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + header_start), header_len);
  const Header h = parse_header(text);
  if (h.shape.size() != 2) throw ShapeError("NPY array has " + std::to_string(h.shape.size()) + " dimensions, expected 2");

  const std::size_t rows = h.shape[0];
  const std::size_t cols = h.shape[1];
  const std::size_t count = rows * cols;
  const std::size_t data_start = header_start + header_len;
  if (bytes.size() - data_start < count * h.item_size)
    throw FormatError("NPY: data section holds fewer than " + std::to_string(count) + " elements");

  const bool swap = (h.byte_order == '<') != (std::endian::native == std::endian::little);
  Matrix m(rows, cols);
  const std::uint8_t* data = bytes.data() + data_start;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = data + i * h.item_size;
    const double v = h.item_size == 8 ? std::bit_cast<double>(load_word<std::uint64_t>(p, swap))
                                      : static_cast<double>(std::bit_cast<float>(load_word<std::uint32_t>(p, swap)));
    const std::size_t r = h.fortran_order ? i % rows : i / cols;
    const std::size_t c = h.fortran_order ? i / rows : i % cols;
    if (!std::isfinite(v)) {
      throw DataError("NPY: non-finite value at [" + std::to_string(r) + ", " + std::to_string(c) + "] (flat index " +
                      std::to_string(r * cols + c) + ")");
    }
    m(r, c) = v;
  }
  return m;
}

std::vector<std::uint8_t> encode_npy(const Matrix& m) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
  // magic (6) + version (2) + length (2) + header + '\n' is padded to 64.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::uint8_t> out;
  out.reserve(10 + header.size() + m.size() * 8);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  for (double v : m.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Matrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_npy(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) { write_file(path, encode_npy(m)); }

Matrix load_calibration(const std::filesystem::path& path, std::size_t c_in, std::optional<std::size_t> max_rows) {
  Matrix x = load_matrix(path);
  if (x.cols() != c_in) {
    throw ShapeError(path.string() + ": calibration has " + std::to_string(x.cols()) + " channels, expected " +
                     std::to_string(c_in));
  }
  if (max_rows && *max_rows < x.rows()) {
    std::vector<double> head(x.values().begin(), x.values().begin() + static_cast<std::ptrdiff_t>(*max_rows * c_in));
    return Matrix(*max_rows, c_in, std::move(head));
  }
  return x;
}

}  // namespace specquant
