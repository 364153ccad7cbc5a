#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthtransfer/raster.hpp"

namespace dt::io {

// 8-bit PNG/JPEG color image, channels scaled to [0,1].
ImageRGB read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const ImageRGB& img);
void write_gray(const std::filesystem::path& path, const GrayImage& img);

// .png: 16-bit single channel in millimetres, 0 = invalid. Writing saturates
// at 65.535 m; use .pfm for deeper scenes.
// .pfm: metres, non-positive or non-finite = invalid.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthMap& depth);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

// Little-endian PFM. One channel writes "Pf", two or three write "PF" (a
// missing third channel is zero-filled).
void write_pfm(const std::filesystem::path& path, const Raster<double>& img);
Raster<double> read_pfm(const std::filesystem::path& path);

// 0/255 8-bit PNG.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Middlebury .flo: "PIEH", i32 width, i32 height, f32 (u,v) interleaved.
void write_flo(const std::filesystem::path& path, const Plane& u, const Plane& v);
std::pair<Plane, Plane> read_flo(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
bool is_image_file(const std::filesystem::path& path);

}  // namespace dt::io
