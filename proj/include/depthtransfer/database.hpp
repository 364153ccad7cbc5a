#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "depthtransfer/features.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

struct DatabaseEntry {
  int id = 0;
  std::string source;
  int frame = 0;
  bool video = false;
  // Relative to Database::root; empty for in-memory entries.
  std::filesystem::path image_path;
  std::filesystem::path depth_path;
  std::uint64_t content_hash = 0;
  FeatureSet features;
  // Canonical-resolution data, present when the entry is resident.
  std::optional<ImageRGB> image;
  std::optional<DepthMap> depth;
};

// Pixelwise mean depth over the database; complete and positive.
struct Prior {
  DepthMap depth;
};

struct IngestError {
  std::filesystem::path path;
  std::string message;
};

class Database {
 public:
  std::filesystem::path root;
  std::vector<DatabaseEntry> entries;
  int width = 0;
  int height = 0;
  Prior prior;
  std::vector<IngestError> errors;

  std::size_t size() const noexcept { return entries.size(); }

  // Canonical-resolution image and depth of entry i, read from disk when the
  // entry is not resident.
  ImageRGB image(std::size_t i) const;
  DepthMap depth(std::size_t i) const;
};

// One RGBD frame handed to build_database.
struct RgbdFrame {
  std::string source;
  int frame = 0;
  bool video = false;
  ImageRGB image;
  DepthMap depth;
};

struct DatabaseOptions {
  // 0 selects 345x460 (portrait) or 460x345 (landscape) from the first entry.
  int width = 0;
  int height = 0;
  // Keep canonical images and depths in memory after ingest.
  bool resident = false;
  // Warm cache consulted for features of unchanged entries.
  std::optional<std::filesystem::path> cache;
};

std::pair<int, int> canonical_size(int native_width, int native_height);

// Builds an in-memory database; entries keep their given order and are
// always resident.
Database build_database(std::vector<RgbdFrame> frames, const DatabaseOptions& options = {});

// Directory layout: <root>/<source>/img_%05d.png with depth_%05d.png (16-bit
// mm) or depth_%05d.pfm (metres). An optional manifest.txt lists
// "still|video <dir>" lines; without it a directory holding one frame is a
// still and several frames form a video. Frames of a still directory are
// independent sources.
Database ingest(const std::filesystem::path& root, const DatabaseOptions& options = {});

// Frames found under a root that follows the ingest layout, in ingest order.
// `depth` is empty when no depth file accompanies the image.
struct RgbdFile {
  std::string source;
  int frame = 0;
  bool video = false;
  std::filesystem::path image;  // relative to the root
  std::filesystem::path depth;
};
std::vector<RgbdFile> list_rgbd_files(const std::filesystem::path& root);

Prior compute_prior(const std::vector<DepthMap>& depths);
Prior compute_prior(const Database& db);

struct Candidate {
  std::size_t index = 0;  // into Database::entries
  double distance = 0.0;
};

// Best frame per source, ascending distance, ties by entry id, at most k.
std::vector<Candidate> query_candidates(const Database& db, const FeatureSet& query, int k);

// Binary feature cache ("DTDB", version 1, little-endian).
void save_cache(const Database& db, const std::filesystem::path& path);
Database load_cache(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace dt
