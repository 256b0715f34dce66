#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mattevit/errors.hpp"
#include "mattevit/image.hpp"

namespace mattevit {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::string header_hex(const std::vector<unsigned char>& bytes) {
  std::ostringstream os;
  const std::size_t n = std::min<std::size_t>(bytes.size(), 8);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ' ';
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  }
  return os.str();
}

Image from_interleaved(const std::vector<unsigned char>& buf, std::size_t channels, std::size_t h,
                       std::size_t w) {
  std::vector<double> v(channels * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        v[(c * h + y) * w + x] = buf[(y * w + x) * channels + c] / 255.0;
  return Image(Tensor({channels, h, w}, std::move(v)),
               channels == 1 ? ColorSpace::kGray : ColorSpace::kSRGB);
}

std::vector<unsigned char> to_interleaved(const Image& image) {
  const std::size_t c = image.channels(), h = image.height(), w = image.width();
  std::vector<unsigned char> buf(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image.at(ch, y, x), 0.0, 1.0);
        buf[(y * w + x) * c + ch] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  return buf;
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  // IHDR: 8-byte signature, 4-byte length, "IHDR", width, height, depth, color type.
  if (bytes.size() < 33 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw FormatError("truncated PNG header in " + path.string() + " (header bytes " +
                      header_hex(bytes) + ")");
  }
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (bit_depth != 8) {
    throw FormatError("unsupported PNG bit depth " + std::to_string(bit_depth) + " in " +
                      path.string() + " (only 8-bit is supported)");
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const bool gray = (color_type & PNG_COLOR_MASK_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const std::size_t channels = gray ? 1 : 3;
  const std::size_t w = img.width, h = img.height;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return from_interleaved(buf, channels, h, w);
}

// Reads the next whitespace-delimited PPM header token, skipping comments.
std::string ppm_token(const std::vector<unsigned char>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
  return tok;
}

Image decode_ppm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(ppm_token(bytes, pos));
    h = std::stoul(ppm_token(bytes, pos));
    maxval = std::stoul(ppm_token(bytes, pos));
  } catch (const std::exception&) {
    throw FormatError("malformed PPM header in " + path.string() + " (header bytes " +
                      header_hex(bytes) + ")");
  }
  if (maxval != 255) {
    throw FormatError("unsupported PPM maxval " + std::to_string(maxval) + " in " + path.string() +
                      " (only 8-bit is supported)");
  }
  if (w == 0 || h == 0) throw FormatError("PPM with zero size in " + path.string());
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + 3 * w * h) {
    throw FormatError("truncated PPM data in " + path.string());
  }
  std::vector<unsigned char> buf(bytes.begin() + static_cast<long>(pos),
                                 bytes.begin() + static_cast<long>(pos + 3 * w * h));
  return from_interleaved(buf, 3, h, w);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, path);
  throw FormatError("unsupported image format in " + path.string() + " (header bytes " +
                    header_hex(bytes) + ")");
}

void save_image(const Image& image, const std::filesystem::path& path) {
  if (image.space == ColorSpace::kLAB) throw FormatError("LAB images must be converted before saving");
  const std::size_t c = image.channels();
  if (c != 1 && c != 3) throw FormatError("only 1- or 3-channel images can be saved");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto buf = to_interleaved(image);
  const auto ext = path.extension().string();
  if (ext == ".ppm") {
    if (c != 3) throw FormatError("PPM output needs a 3-channel image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("cannot write " + path.string());
    return;
  }
  if (ext != ".png") throw FormatError("unsupported output extension '" + ext + "'");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace mattevit
