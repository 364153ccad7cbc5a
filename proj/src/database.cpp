#include "depthtransfer/database.hpp"

#include <algorithm>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "byteorder.hpp"
#include "depthtransfer/flow.hpp"
#include "depthtransfer/imagecore.hpp"
#include "depthtransfer/io.hpp"

namespace dt {

namespace fs = std::filesystem;
using detail::get_le;
using detail::put_le;

namespace {

constexpr char kMagic[4] = {'D', 'T', 'D', 'B'};
constexpr std::uint16_t kVersion = 1;

struct SourceDir {
  std::string name;  // relative to root, generic format
  bool video = false;
};

using FrameFiles = RgbdFile;

// Features go through the cache as f32; rounding fresh ones the same way
// keeps cold and warm ingests identical.
void round_to_float(FeatureSet& f) {
  for (auto& v : f.gist.values) v = static_cast<float>(v);
  if (f.flow) {
    for (auto& v : f.flow->bins) v = static_cast<float>(v);
  }
}

Prior prior_as_float(Prior p) {
  for (auto& v : p.depth.depth.values()) v = static_cast<float>(v);
  return p;
}

std::uint64_t combine_hash(std::uint64_t a, std::uint64_t b) {
  std::vector<std::uint8_t> bytes(16);
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<std::uint8_t>(a >> (8 * i));
    bytes[8 + i] = static_cast<std::uint8_t>(b >> (8 * i));
  }
  return fnv1a64(bytes);
}

std::uint64_t hash_raster(const Raster<double>& r) {
  std::vector<std::uint8_t> bytes(r.values().size() * sizeof(double));
  std::memcpy(bytes.data(), r.values().data(), bytes.size());
  return fnv1a64(bytes);
}

int parse_frame_number(const std::string& stem, const std::string& prefix) {
  if (stem.rfind(prefix, 0) != 0) return -1;
  const std::string digits = stem.substr(prefix.size());
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return -1;
  }
  return std::stoi(digits);
}

std::vector<SourceDir> list_sources(const fs::path& root) {
  std::vector<SourceDir> out;
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream ss(line);
      std::string kind, dir;
      if (!(ss >> kind)) continue;
      if (kind[0] == '#') continue;
      if (!(ss >> dir) || (kind != "still" && kind != "video")) {
        throw Error("manifest.txt line " + std::to_string(lineno) + ": expected 'still|video <path>'");
      }
      out.push_back({fs::path(dir).lexically_normal().generic_string(), kind == "video"});
    }
    std::sort(out.begin(), out.end(), [](const SourceDir& a, const SourceDir& b) { return a.name < b.name; });
    return out;
  }
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path().filename().generic_string());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    int frames = 0;
    for (const auto& e : fs::directory_iterator(root / d)) {
      if (e.is_regular_file() && parse_frame_number(e.path().stem().string(), "img_") >= 0) ++frames;
    }
    if (frames > 0) out.push_back({d, frames > 1});
  }
  return out;
}

std::vector<FrameFiles> list_frames(const fs::path& root, const SourceDir& src) {
  std::vector<std::pair<std::string, int>> images;
  const fs::path dir = root / src.name;
  if (!fs::is_directory(dir)) throw Error("source directory missing: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !io::is_image_file(e.path())) continue;
    const int n = parse_frame_number(e.path().stem().string(), "img_");
    if (n >= 0) images.emplace_back(e.path().filename().string(), n);
  }
  std::sort(images.begin(), images.end());
  std::vector<FrameFiles> out;
  for (const auto& [file, n] : images) {
    FrameFiles f;
    f.frame = n;
    f.video = src.video;
    f.source = src.video || images.size() == 1 ? src.name : src.name + "/" + fs::path(file).stem().string();
    f.image = fs::path(src.name) / file;
    char buf[32];
    for (const char* ext : {".png", ".pfm"}) {
      std::snprintf(buf, sizeof buf, "depth_%05d%s", n, ext);
      if (fs::exists(dir / buf)) {
        f.depth = fs::path(src.name) / buf;
        break;
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto n = get_le<std::uint32_t>(is);
  if (n > (1u << 20)) throw Error("cache string length out of range");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw Error("unexpected end of cache file");
  return s;
}

// Flow histogram for frame i of a source given canonical grayscale frames in
// order: forward flow to the next frame, backward from the previous for the
// last frame.
FlowHistogram video_flow_histogram(const std::vector<const GrayImage*>& frames, std::size_t i) {
  if (frames.size() < 2) return FlowHistogram{};
  if (i + 1 < frames.size()) return compute_flow_histogram(estimate_flow(*frames[i], *frames[i + 1]));
  return compute_flow_histogram(estimate_flow(*frames[i], *frames[i - 1]));
}

void compute_video_features(const std::vector<std::size_t>& order, const std::vector<GrayImage>& grays,
                            std::vector<FeatureSet>& features, const std::vector<bool>& need) {
  std::vector<const GrayImage*> frames;
  for (std::size_t k : order) frames.push_back(&grays[k]);
  parallel_for(order.size(), [&](std::size_t i) {
    if (!need[order[i]]) return;
    features[order[i]].flow = video_flow_histogram(frames, i);
  });
}

// Groups entry indices by source (video sources only), frames ascending.
std::map<std::string, std::vector<std::size_t>> video_groups(const std::vector<std::string>& sources,
                                                              const std::vector<int>& frames,
                                                              const std::vector<bool>& video) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (video[i]) groups[sources[i]].push_back(i);
  }
  for (auto& [_, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return frames[a] < frames[b]; });
  }
  return groups;
}

}  // namespace

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::pair<int, int> canonical_size(int native_width, int native_height) {
  return native_width > native_height ? std::pair{460, 345} : std::pair{345, 460};
}

ImageRGB Database::image(std::size_t i) const {
  const auto& e = entries.at(i);
  if (e.image) return *e.image;
  ImageRGB img = io::read_rgb(root / e.image_path);
  return ImageRGB(resize_bilinear(img, width, height));
}

DepthMap Database::depth(std::size_t i) const {
  const auto& e = entries.at(i);
  if (e.depth) return *e.depth;
  return resize_depth(io::read_depth(root / e.depth_path), width, height);
}

Prior compute_prior(const std::vector<DepthMap>& depths) {
  if (depths.empty()) throw Error("compute_prior: no depth maps");
  const int w = depths.front().width();
  const int h = depths.front().height();
  Plane sum(w, h);
  Raster<int> count(w, h);
  double total = 0.0;
  std::size_t total_count = 0;
  for (const auto& d : depths) {
    if (d.width() != w || d.height() != h) throw Error("compute_prior: depth maps differ in size");
    for (std::size_t i = 0; i < sum.pixel_count(); ++i) {
      if (!d.valid[i]) continue;
      sum[i] += d.depth[i];
      count[i] += 1;
      total += d.depth[i];
      ++total_count;
    }
  }
  if (total_count == 0) throw Error("compute_prior: no valid depth samples");
  const double global = total / static_cast<double>(total_count);
  Prior p{DepthMap(w, h, global)};
  for (std::size_t i = 0; i < sum.pixel_count(); ++i) {
    if (count[i] > 0) p.depth.depth[i] = sum[i] / count[i];
  }
  return p;
}

Prior compute_prior(const Database& db) {
  std::vector<DepthMap> depths;
  depths.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) depths.push_back(db.depth(i));
  return compute_prior(depths);
}

Database build_database(std::vector<RgbdFrame> frames, const DatabaseOptions& options) {
  if (frames.empty()) throw Error("build_database: no frames");
  Database db;
  auto [w, h] = canonical_size(frames.front().image.width(), frames.front().image.height());
  if (options.width > 0 && options.height > 0) {
    w = options.width;
    h = options.height;
  }
  db.width = w;
  db.height = h;
  const std::size_t n = frames.size();
  std::vector<GrayImage> grays(n);
  std::vector<FeatureSet> features(n);
  db.entries.resize(n);
  parallel_for(n, [&](std::size_t i) {
    RgbdFrame& f = frames[i];
    if (!f.image.same_shape(f.depth.depth)) throw Error("build_database: image and depth sizes differ");
    if (f.depth.valid_count() == 0) throw Error("build_database: depth has no valid pixel");
    f.depth.check();
    DatabaseEntry& e = db.entries[i];
    e.id = static_cast<int>(i);
    e.source = f.source;
    e.frame = f.frame;
    e.video = f.video;
    e.image = ImageRGB(resize_bilinear(f.image, w, h));
    e.depth = resize_depth(f.depth, w, h);
    e.content_hash = combine_hash(hash_raster(f.image), hash_raster(f.depth.depth));
    grays[i] = to_grayscale(*e.image);
    features[i].gist = compute_gist(grays[i]);
  });
  std::vector<std::string> sources(n);
  std::vector<int> frame_ids(n);
  std::vector<bool> video(n);
  for (std::size_t i = 0; i < n; ++i) {
    sources[i] = db.entries[i].source;
    frame_ids[i] = db.entries[i].frame;
    video[i] = db.entries[i].video;
  }
  const std::vector<bool> need(n, true);
  for (const auto& [_, order] : video_groups(sources, frame_ids, video)) {
    if (order.size() > 1) compute_video_features(order, grays, features, need);
  }
  for (std::size_t i = 0; i < n; ++i) {
    round_to_float(features[i]);
    db.entries[i].features = std::move(features[i]);
  }
  std::vector<DepthMap> depths;
  for (const auto& e : db.entries) depths.push_back(*e.depth);
  db.prior = prior_as_float(compute_prior(depths));
  return db;
}

std::vector<RgbdFile> list_rgbd_files(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
  std::vector<FrameFiles> files;
  for (const auto& src : list_sources(root)) {
    auto f = list_frames(root, src);
    files.insert(files.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
  }
  return files;
}

Database ingest(const fs::path& root_in, const DatabaseOptions& options) {
  if (!fs::is_directory(root_in)) throw Error("database root is not a directory: " + root_in.string());
  const fs::path root = fs::absolute(root_in).lexically_normal();
  const std::vector<FrameFiles> files = list_rgbd_files(root);
  if (files.empty()) throw Error("database root holds no img_*.png frames: " + root.string());

  Database db;
  db.root = root;
  if (options.width > 0 && options.height > 0) {
    db.width = options.width;
    db.height = options.height;
  } else {
    const ImageRGB first = io::read_rgb(root / files.front().image);
    std::tie(db.width, db.height) = canonical_size(first.width(), first.height());
  }

  std::map<std::string, const DatabaseEntry*> cached_by_path;
  std::optional<Database> cache;
  if (options.cache && fs::exists(*options.cache)) {
    try {
      cache = load_cache(*options.cache);
      if (cache->width == db.width && cache->height == db.height) {
        for (const auto& e : cache->entries) cached_by_path[e.image_path.generic_string()] = &e;
      }
    } catch (const Error& err) {
      log_progress("ignoring unreadable cache: " + std::string(err.what()));
    }
  }

  const std::size_t n = files.size();
  std::vector<GrayImage> grays(n);
  std::vector<DepthMap> depths(n);
  std::vector<std::optional<ImageRGB>> images(n);
  std::vector<std::uint64_t> hashes(n, 0);
  std::vector<std::string> failure(n);
  parallel_for(n, [&](std::size_t i) {
    const FrameFiles& f = files[i];
    try {
      if (f.depth.empty()) throw Error("no depth file for " + f.image.generic_string());
      const auto img_bytes = io::read_bytes(root / f.image);
      const auto depth_bytes = io::read_bytes(root / f.depth);
      ImageRGB img = io::read_rgb(root / f.image);
      DepthMap depth = io::read_depth(root / f.depth);
      if (!img.same_shape(depth.depth)) {
        throw Error("image and depth dimensions differ (" + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + " vs " + std::to_string(depth.width()) + "x" +
                    std::to_string(depth.height()) + ")");
      }
      if (depth.valid_count() == 0) throw Error("depth map has no valid pixel");
      ImageRGB canon(resize_bilinear(img, db.width, db.height));
      depths[i] = resize_depth(depth, db.width, db.height);
      if (depths[i].valid_count() == 0) throw Error("depth map has no valid pixel at working resolution");
      grays[i] = to_grayscale(canon);
      if (options.resident) images[i] = std::move(canon);
      hashes[i] = fnv1a64(depth_bytes, fnv1a64(img_bytes));
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });

  // Keep successful frames; record the rest.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (failure[i].empty()) {
      keep.push_back(i);
    } else {
      db.errors.push_back({files[i].image, failure[i]});
    }
  }
  if (keep.empty()) {
    throw Error("database is empty: every entry failed to load (first: " + db.errors.front().path.generic_string() +
                ": " + db.errors.front().message + ")");
  }

  const std::size_t m = keep.size();
  std::vector<std::string> sources(m);
  std::vector<int> frame_ids(m);
  std::vector<bool> video(m);
  std::vector<GrayImage> kept_grays(m);
  for (std::size_t j = 0; j < m; ++j) {
    sources[j] = files[keep[j]].source;
    frame_ids[j] = files[keep[j]].frame;
    video[j] = files[keep[j]].video;
    kept_grays[j] = std::move(grays[keep[j]]);
  }
  // Video entries also depend on the neighbouring frame used for their flow.
  std::vector<std::uint64_t> entry_hash(m);
  for (std::size_t j = 0; j < m; ++j) entry_hash[j] = hashes[keep[j]];
  const auto groups = video_groups(sources, frame_ids, video);
  for (const auto& [_, order] : groups) {
    for (std::size_t k = 0; k < order.size() && order.size() > 1; ++k) {
      const std::size_t nb = k + 1 < order.size() ? order[k + 1] : order[k - 1];
      entry_hash[order[k]] = combine_hash(hashes[keep[order[k]]], hashes[keep[nb]]);
    }
  }

  std::vector<FeatureSet> features(m);
  std::vector<bool> need(m, true);
  for (std::size_t j = 0; j < m; ++j) {
    auto it = cached_by_path.find(files[keep[j]].image.generic_string());
    if (it != cached_by_path.end() && it->second->content_hash == entry_hash[j] &&
        it->second->features.flow.has_value() == (video[j] && groups.at(sources[j]).size() > 1)) {
      features[j] = it->second->features;
      need[j] = false;
    }
  }
  parallel_for(m, [&](std::size_t j) {
    if (need[j]) features[j].gist = compute_gist(kept_grays[j]);
  });
  for (const auto& [_, order] : groups) {
    if (order.size() > 1) compute_video_features(order, kept_grays, features, need);
  }

  db.entries.resize(m);
  std::vector<DepthMap> kept_depths;
  kept_depths.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const FrameFiles& f = files[keep[j]];
    DatabaseEntry& e = db.entries[j];
    e.id = static_cast<int>(j);
    e.source = f.source;
    e.frame = f.frame;
    e.video = f.video;
    e.image_path = f.image;
    e.depth_path = f.depth;
    e.content_hash = entry_hash[j];
    if (need[j]) round_to_float(features[j]);
    e.features = std::move(features[j]);
    kept_depths.push_back(depths[keep[j]]);
    if (options.resident) {
      e.image = std::move(images[keep[j]]);
      e.depth = depths[keep[j]];
    }
  }
  db.prior = prior_as_float(compute_prior(kept_depths));
  for (const auto& err : db.errors) log_progress("ingest error: " + err.path.generic_string() + ": " + err.message);
  return db;
}

std::vector<Candidate> query_candidates(const Database& db, const FeatureSet& query, int k) {
  if (k < 1) throw Error("query_candidates: K must be >= 1");
  if (db.entries.empty()) throw Error("query_candidates: database is empty");
  std::vector<Candidate> all(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) all[i] = {i, match_distance(query, db.entries[i].features)};
  std::sort(all.begin(), all.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return db.entries[a.index].id < db.entries[b.index].id;
  });
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (const auto& c : all) {
    if (!seen.insert(db.entries[c.index].source).second) continue;
    out.push_back(c);
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

void save_cache(const Database& db, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write cache " + path.string());
  os.write(kMagic, 4);
  put_le<std::uint16_t>(os, kVersion);
  put_le<std::int32_t>(os, db.width);
  put_le<std::int32_t>(os, db.height);
  write_string(os, db.root.generic_string());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(db.entries.size()));
  for (const auto& e : db.entries) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.id));
    write_string(os, e.source);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.frame));
    put_le<std::uint8_t>(os, e.video ? 1 : 0);
    write_string(os, e.image_path.generic_string());
    write_string(os, e.depth_path.generic_string());
    put_le<std::uint64_t>(os, e.content_hash);
    for (double v : e.features.gist.values) put_le<float>(os, static_cast<float>(v));
    put_le<std::uint8_t>(os, e.features.flow ? 1 : 0);
    if (e.features.flow) {
      for (double v : e.features.flow->bins) put_le<float>(os, static_cast<float>(v));
    }
  }
  for (std::size_t i = 0; i < db.prior.depth.depth.pixel_count(); ++i) {
    put_le<float>(os, static_cast<float>(db.prior.depth.depth[i]));
  }
  if (!os) throw Error("failed writing cache " + path.string());
}

Database load_cache(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open cache " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw Error("not a DTDB cache: " + path.string());
  const auto version = get_le<std::uint16_t>(is);
  if (version != kVersion) throw Error("unsupported cache version " + std::to_string(version));
  Database db;
  db.width = get_le<std::int32_t>(is);
  db.height = get_le<std::int32_t>(is);
  if (db.width <= 0 || db.height <= 0 || db.width > 16384 || db.height > 16384) {
    throw Error("cache resolution out of range");
  }
  db.root = read_string(is);
  const auto count = get_le<std::uint32_t>(is);
  db.entries.resize(count);
  for (auto& e : db.entries) {
    e.id = static_cast<int>(get_le<std::uint32_t>(is));
    e.source = read_string(is);
    e.frame = static_cast<int>(get_le<std::uint32_t>(is));
    e.video = get_le<std::uint8_t>(is) != 0;
    e.image_path = read_string(is);
    e.depth_path = read_string(is);
    e.content_hash = get_le<std::uint64_t>(is);
    for (auto& v : e.features.gist.values) v = get_le<float>(is);
    if (get_le<std::uint8_t>(is) != 0) {
      FlowHistogram f;
      for (auto& v : f.bins) v = get_le<float>(is);
      e.features.flow = f;
    }
  }
  db.prior.depth = DepthMap(db.width, db.height, 1.0);
  for (std::size_t i = 0; i < db.prior.depth.depth.pixel_count(); ++i) {
    db.prior.depth.depth[i] = get_le<float>(is);
  }
  return db;
}

}  // namespace dt
