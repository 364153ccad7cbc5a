#include "depthtransfer/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "byteorder.hpp"

namespace dt::io {

namespace fs = std::filesystem;
using detail::get_le;
using detail::put_le;

namespace {

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_image(const fs::path& path, const cv::Mat& m) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write image " + path.string());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(clamp_value(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageRGB read_rgb(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw Error("cannot read image " + path.string());
  ImageRGB img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      img(x, y, 0) = row[x][2] / 255.0;
      img(x, y, 1) = row[x][1] / 255.0;
      img(x, y, 2) = row[x][0] / 255.0;
    }
  }
  return img;
}

void write_rgb(const fs::path& path, const ImageRGB& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      row[x] = cv::Vec3b(to_byte(img(x, y, 2)), to_byte(img(x, y, 1)), to_byte(img(x, y, 0)));
    }
  }
  write_image(path, m);
}

void write_gray(const fs::path& path, const GrayImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) m.at<std::uint8_t>(y, x) = to_byte(img(x, y));
  }
  write_image(path, m);
}

DepthMap read_depth(const fs::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".pfm") {
    auto plane = read_pfm(path);
    if (plane.channels() != 1) throw Error("depth PFM must be single channel: " + path.string());
    return DepthMap::from_plane(std::move(plane));
  }
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw Error("cannot read depth " + path.string());
  if (m.depth() != CV_16U) throw Error("depth PNG must be 16-bit: " + path.string());
  DepthMap d(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const std::uint16_t mm = m.at<std::uint16_t>(y, x);
      d.depth(x, y) = mm / 1000.0;
      d.valid(x, y) = mm > 0 ? 1 : 0;
    }
  }
  return d;
}

void write_depth_png(const fs::path& path, const DepthMap& depth) {
  cv::Mat m(depth.height(), depth.width(), CV_16UC1);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      std::uint16_t v = 0;
      if (depth.is_valid(x, y)) {
        v = static_cast<std::uint16_t>(clamp_value(std::lround(depth.depth(x, y) * 1000.0), 1L, 65535L));
      }
      m.at<std::uint16_t>(y, x) = v;
    }
  }
  write_image(path, m);
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  if (lower_extension(path) == ".pfm") {
    Plane p(depth.width(), depth.height());
    for (std::size_t i = 0; i < p.pixel_count(); ++i) p[i] = depth.valid[i] ? depth.depth[i] : 0.0;
    write_pfm(path, p);
  } else {
    write_depth_png(path, depth);
  }
}

void write_pfm(const fs::path& path, const Raster<double>& img) {
  const int nc = img.channels();
  if (nc < 1 || nc > 3) throw Error("PFM supports 1 to 3 channels");
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  const bool color = nc > 1;
  os << (color ? "PF" : "Pf") << '\n' << img.width() << ' ' << img.height() << '\n' << "-1.0\n";
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      if (color) {
        for (int c = 0; c < 3; ++c) put_le<float>(os, c < nc ? static_cast<float>(img(x, y, c)) : 0.0f);
      } else {
        put_le<float>(os, static_cast<float>(img(x, y)));
      }
    }
  }
}

Raster<double> read_pfm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::string magic;
  int w = 0;
  int h = 0;
  double scale = 0.0;
  is >> magic >> w >> h >> scale;
  is.get();
  if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
    throw Error("malformed PFM header in " + path.string());
  }
  const int nc = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  Raster<double> img(w, h, nc);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        char buf[4];
        if (!is.read(buf, 4)) throw Error("truncated PFM " + path.string());
        if (little != (std::endian::native == std::endian::little)) std::reverse(buf, buf + 4);
        float v;
        std::memcpy(&v, buf, 4);
        img(x, y, c) = v;
      }
    }
  }
  return img;
}

void write_mask_png(const fs::path& path, const Mask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) m.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
  }
  write_image(path, m);
}

void write_flo(const fs::path& path, const Plane& u, const Plane& v) {
  if (!u.same_shape(v)) throw Error("flow components differ in shape");
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write("PIEH", 4);
  put_le<std::int32_t>(os, u.width());
  put_le<std::int32_t>(os, u.height());
  for (std::size_t i = 0; i < u.pixel_count(); ++i) {
    put_le<float>(os, static_cast<float>(u[i]));
    put_le<float>(os, static_cast<float>(v[i]));
  }
}

std::pair<Plane, Plane> read_flo(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PIEH", 4) != 0) throw Error("not a .flo file");
  const auto w = get_le<std::int32_t>(is);
  const auto h = get_le<std::int32_t>(is);
  Plane u(w, h), v(w, h);
  for (std::size_t i = 0; i < u.pixel_count(); ++i) {
    u[i] = get_le<float>(is);
    v[i] = get_le<float>(is);
  }
  return {std::move(u), std::move(v)};
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

bool is_image_file(const fs::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace dt::io
