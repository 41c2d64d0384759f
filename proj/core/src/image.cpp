#include "l2g/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "l2g/error.hpp"
#include "l2g/pnm.hpp"

namespace l2g {

Tensor image_to_tensor(const Image& image) {
  const auto H = static_cast<std::size_t>(image.height);
  const auto W = static_cast<std::size_t>(image.width);
  const auto C = static_cast<std::size_t>(image.channels);
  std::vector<double> v(C * H * W);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        v[(c * H + y) * W + x] = image.pixels[(y * W + x) * C + c] / 255.0;
  return Tensor::from({1, C, H, W}, std::move(v));
}

Tensor plane_to_tensor(const Image& image) {
  const auto H = static_cast<std::size_t>(image.height);
  const auto W = static_cast<std::size_t>(image.width);
  std::vector<double> v(H * W);
  for (std::size_t i = 0; i < H * W; ++i)
    v[i] = image.pixels[i * image.channels] / 255.0;
  return Tensor::from({H, W}, std::move(v));
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ArgumentError("write_pnm: channels must be 1 or 3, got " +
                        std::to_string(image.channels));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << (image.channels == 3 ? "P6" : "P5") << '\n'
     << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError(path.string() + ": truncated PNM header");
  return tok;
}

int header_int(std::istream& is, const std::filesystem::path& path) {
  const auto tok = header_token(is, path);
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad PNM header field '" + tok + "'");
  }
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const auto magic = header_token(is, path);
  int channels = 0;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw IoError(path.string() + ": unsupported PNM magic '" + magic + "'");
  }
  const int w = header_int(is, path);
  const int h = header_int(is, path);
  const int maxval = header_int(is, path);
  if (maxval != 255) {
    throw IoError(path.string() + ": maxval " + std::to_string(maxval) +
                  " unsupported (expected 255)");
  }
  // header_token consumed exactly one whitespace byte after maxval.
  Image image(w, h, channels);
  is.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    throw IoError(path.string() + ": truncated pixel data (" +
                  std::to_string(is.gcount()) + " of " +
                  std::to_string(image.pixels.size()) + " bytes)");
  }
  return image;
}

}  // namespace l2g
