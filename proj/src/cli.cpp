#include "depthtransfer/cli.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "depthtransfer/database.hpp"
#include "depthtransfer/eval.hpp"
#include "depthtransfer/imagecore.hpp"
#include "depthtransfer/io.hpp"

namespace dt {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw Error("invalid number for " + key + ": '" + text + "'");
  }
  return v;
}

long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw Error("invalid integer for " + key + ": '" + text + "'");
  return v;
}

std::string show(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

template <typename Field>
ConfigKey real_key(std::string name, std::string help, Field field, double lo, double hi, bool open_lo = false) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [name, field, lo, hi, open_lo](RunConfig& c, const std::string& text) {
    const double v = parse_real(name, text);
    if (v < lo || v > hi || (open_lo && v == lo)) {
      throw Error(name + " out of range: " + show(v) + (open_lo ? " (must be > " : " (must be >= ") + show(lo) +
                  (std::isinf(hi) ? ")" : " and <= " + show(hi) + ")"));
    }
    field(c) = v;
  };
  k.get = [field](const RunConfig& c) { return show(field(const_cast<RunConfig&>(c))); };
  return k;
}

template <typename Field>
ConfigKey int_key(std::string name, std::string help, Field field, long lo, long hi) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [name, field, lo, hi](RunConfig& c, const std::string& text) {
    const long v = parse_integer(name, text);
    if (v < lo || v > hi) {
      throw Error(name + " out of range: " + std::to_string(v) + " (must be in [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "])");
    }
    field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(v);
  };
  k.get = [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); };
  return k;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k;
  k.push_back(real_key("alpha", "smoothness weight", [](RunConfig& c) -> double& { return c.objective.alpha; }, 0, kInf));
  k.push_back(real_key("beta", "prior weight", [](RunConfig& c) -> double& { return c.objective.beta; }, 0, kInf));
  k.push_back(real_key("gamma", "candidate gradient weight", [](RunConfig& c) -> double& { return c.objective.gamma; }, 0, kInf));
  k.push_back(real_key("nu", "temporal coherence weight", [](RunConfig& c) -> double& { return c.objective.nu; }, 0, kInf));
  k.push_back(real_key("eta", "motion term weight", [](RunConfig& c) -> double& { return c.objective.eta; }, 0, kInf));
  k.push_back(real_key("epsilon", "robust norm epsilon", [](RunConfig& c) -> double& { return c.objective.epsilon; }, 0, kInf, true));
  k.push_back(int_key("candidates", "number of retrieved candidates K", [](RunConfig& c) -> int& { return c.objective.candidates; }, 1, 1000));
  k.push_back(int_key("max_iterations", "IRLS outer iteration cap", [](RunConfig& c) -> int& { return c.objective.max_iterations; }, 1, 10000));
  k.push_back(real_key("inner_tolerance", "conjugate gradient relative tolerance", [](RunConfig& c) -> double& { return c.objective.inner_tolerance; }, 0, 1, true));
  k.push_back(real_key("outer_tolerance", "IRLS relative objective stop", [](RunConfig& c) -> double& { return c.objective.outer_tolerance; }, 0, 1));
  k.push_back(int_key("window", "video window length in frames", [](RunConfig& c) -> int& { return c.objective.window; }, 1, 100000));
  k.push_back(int_key("window_overlap", "overlap between video windows", [](RunConfig& c) -> int& { return c.objective.window_overlap; }, 0, 100000));
  k.push_back(real_key("align_data_truncation", "alignment data cost truncation", [](RunConfig& c) -> double& { return c.align.data_truncation; }, 0, kInf, true));
  k.push_back(real_key("align_displacement_weight", "alignment displacement weight", [](RunConfig& c) -> double& { return c.align.displacement_weight; }, 0, kInf));
  k.push_back(real_key("align_smoothness_weight", "alignment smoothness weight", [](RunConfig& c) -> double& { return c.align.smoothness_weight; }, 0, kInf));
  k.push_back(real_key("align_smoothness_truncation", "alignment smoothness truncation", [](RunConfig& c) -> double& { return c.align.smoothness_truncation; }, 0, kInf));
  k.push_back(int_key("align_search_radius", "alignment search radius per level", [](RunConfig& c) -> int& { return c.align.search_radius; }, 1, 64));
  k.push_back(int_key("align_pyramid_levels", "alignment pyramid levels", [](RunConfig& c) -> int& { return c.align.pyramid_levels; }, 1, 12));
  k.push_back(int_key("align_sweeps", "alignment refinement sweeps per level", [](RunConfig& c) -> int& { return c.align.sweeps; }, 1, 1000));
  k.push_back(real_key("tau", "motion threshold", [](RunConfig& c) -> double& { return c.motion.tau; }, 0, kInf));
  k.push_back(int_key("min_component", "smallest kept motion component in pixels", [](RunConfig& c) -> int& { return c.motion.min_component; }, 0, 1 << 30));
  k.push_back(real_key("max_disparity", "largest disparity in pixels", [](RunConfig& c) -> double& { return c.stereo.max_disparity; }, 0, kInf));
  k.push_back(real_key("convergence_percentile", "depth percentile placed at zero disparity", [](RunConfig& c) -> double& { return c.stereo.convergence_percentile; }, 0, 100));
  k.push_back(int_key("workers", "worker threads, 0 = all cores", [](RunConfig& c) -> unsigned& { return c.workers; }, 0, 1024));
  k.push_back(int_key("width", "working width for build-db, 0 = automatic", [](RunConfig& c) -> int& { return c.width; }, 0, 16384));
  k.push_back(int_key("height", "working height for build-db, 0 = automatic", [](RunConfig& c) -> int& { return c.height; }, 0, 16384));
  return k;
}

std::string dashed(std::string s) {
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> all, prefixed;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !io::is_image_file(e.path())) continue;
    all.push_back(e.path());
    if (e.path().filename().string().rfind("img_", 0) == 0) prefixed.push_back(e.path());
  }
  auto& use = prefixed.empty() ? all : prefixed;
  std::sort(use.begin(), use.end());
  if (use.empty()) throw Error("no frames found in " + dir.string());
  return use;
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu%s", stem, i, ext);
  return buf;
}

// Writes the requested depth file plus its PNG/PFM sibling.
void write_depth_pair(const fs::path& path, const DepthMap& depth) {
  io::write_depth(path, depth);
  fs::path other = path;
  other.replace_extension(path.extension() == ".pfm" ? ".png" : ".pfm");
  io::write_depth(other, depth);
}

Mask resize_mask(const Mask& m, int w, int h) {
  if (m.width() == w && m.height() == h) return m;
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(m.width() - 1, static_cast<int>((x + 0.5) * m.width() / w));
      const int sy = std::min(m.height() - 1, static_cast<int>((y + 0.5) * m.height() / h));
      out(x, y) = m(sx, sy);
    }
  }
  return out;
}

Database open_database(const fs::path& cache) {
  if (!fs::exists(cache)) throw Error("database cache not found: " + cache.string());
  return load_cache(cache);
}

bool paths_overlap(const fs::path& a, const fs::path& b) {
  const fs::path ca = fs::weakly_canonical(a);
  const fs::path cb = fs::weakly_canonical(b);
  auto prefix = [](const fs::path& p, const fs::path& q) {
    auto pi = p.begin();
    auto qi = q.begin();
    for (; pi != p.end(); ++pi, ++qi) {
      if (qi == q.end() || *pi != *qi) return false;
    }
    return true;
  };
  return prefix(ca, cb) || prefix(cb, ca);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw Error("unknown configuration key '" + key + "'");
}

void load_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    try {
      apply_setting(config, trim(line.substr(0, eq)), value);
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void print_config(std::ostream& os, const RunConfig& config) {
  for (const auto& k : config_keys()) os << k.name << " = " << k.get(config) << '\n';
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Depth estimation and 2D-to-3D conversion by non-parametric depth transfer", "dtransfer"};
  app.require_subcommand(0, 1);

  std::string config_path;
  bool print = false;
  bool verbose = false;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_flag("--print-config", print, "print the resolved configuration");
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");
  const auto& keys = config_keys();
  std::vector<std::optional<std::string>> overrides(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    app.add_option("--" + dashed(keys[i].name), overrides[i], keys[i].help)->group("Parameters");
  }

  std::string db_dir, cache, image, out, framedir, depth_dir, format = "anaglyph", test_dir, protocol = "make3d",
                                                                 trace, aggregation = "image-mean";
  bool no_motion = false, no_temporal = false, dump_motion = false;
  std::size_t limit = 0;
  std::uint32_t seed = 1;

  auto* build = app.add_subcommand("build-db", "ingest an RGBD directory into a feature cache");
  build->add_option("dir", db_dir, "database root")->required();
  build->add_option("--cache", cache, "cache file to write")->required();

  auto* infer = app.add_subcommand("infer", "infer depth for one image");
  infer->add_option("image", image, "input image")->required();
  infer->add_option("--db", cache, "database cache")->required();
  infer->add_option("-o,--output", out, "depth output (.png in mm or .pfm in m)")->required();
  infer->add_option("--trace", trace, "objective trace CSV");

  auto* video = app.add_subcommand("infer-video", "infer depth for a frame sequence");
  video->add_option("framedir", framedir, "directory of frames")->required();
  video->add_option("--db", cache, "database cache")->required();
  video->add_option("-o,--output", out, "output directory")->required();
  video->add_flag("--no-motion", no_motion, "disable the moving-object term");
  video->add_flag("--no-temporal", no_temporal, "disable temporal coherence");
  video->add_flag("--dump-motion", dump_motion, "write motion masks");

  auto* motion = app.add_subcommand("motion-mask", "segment moving objects in a frame sequence");
  motion->add_option("framedir", framedir, "directory of frames")->required();
  motion->add_option("-o,--output", out, "output directory")->required();

  auto* stereo = app.add_subcommand("stereo", "synthesize stereo views from frames and depth");
  stereo->add_option("framedir", framedir, "directory of frames")->required();
  stereo->add_option("--depth", depth_dir, "directory of depth_%05d.png|pfm")->required();
  stereo->add_option("-o,--output", out, "output directory")->required();
  stereo->add_option("--format", format, "anaglyph or sbs")->check(CLI::IsMember({"anaglyph", "sbs"}));

  auto* evalc = app.add_subcommand("eval", "benchmark against a test set with ground truth");
  evalc->add_option("--db", cache, "database cache")->required();
  evalc->add_option("--test", test_dir, "test set root")->required();
  evalc->add_option("--protocol", protocol, "make3d or rgbd")->check(CLI::IsMember({"make3d", "rgbd"}));
  evalc->add_option("-o,--output", out, "CSV report")->required();
  evalc->add_option("--limit", limit, "evaluate a seeded subset of this many items");
  evalc->add_option("--seed", seed, "subset seed");
  evalc->add_option("--aggregation", aggregation, "image-mean or pixel-pooled")
      ->check(CLI::IsMember({"image-mean", "pixel-pooled"}));

  for (auto* sub : {build, infer, video, motion, stereo, evalc}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (overrides[i]) keys[i].set(cfg, *overrides[i]);
    }
  } catch (const Error& e) {
    std::cerr << "dtransfer: " << e.what() << '\n';
    return 1;
  }
  set_worker_count(cfg.workers);
  set_verbose(verbose);
  if (print) print_config(std::cout, cfg);
  if (app.get_subcommands().empty()) {
    if (print) return 0;
    std::cerr << app.help();
    return 1;
  }

  InferenceOptions inference{cfg.objective, cfg.align};
  try {
    if (*build) {
      DatabaseOptions opts;
      opts.width = cfg.width;
      opts.height = cfg.height;
      opts.cache = fs::path(cache);
      const Database db = ingest(db_dir, opts);
      save_cache(db, cache);
      for (const auto& err : db.errors) std::cerr << "skipped " << err.path.generic_string() << ": " << err.message << '\n';
      std::cerr << "database: " << db.size() << " entries at " << db.width << "x" << db.height << ", "
                << db.errors.size() << " errors\n";
    } else if (*infer) {
      const Database db = open_database(cache);
      const ImageRGB img = io::read_rgb(image);
      const ImageInference r = infer_image(img, db, inference);
      write_depth_pair(out, r.depth);
      if (!trace.empty()) {
        std::ofstream os(trace);
        if (!os) throw Error("cannot write " + trace);
        os << "iteration,objective\n";
        for (std::size_t i = 0; i < r.trace.size(); ++i) os << i << ',' << std::setprecision(12) << r.trace[i] << '\n';
      }
    } else if (*video) {
      const Database db = open_database(cache);
      const auto paths = list_frames(framedir);
      std::vector<ImageRGB> frames;
      for (const auto& p : paths) frames.push_back(io::read_rgb(p));
      VideoOptions vo;
      vo.base = inference;
      vo.motion = !no_motion;
      vo.temporal = !no_temporal;
      const VideoInference r = infer_video(frames, db, vo);
      fs::create_directories(out);
      for (std::size_t t = 0; t < r.depth.size(); ++t) {
        write_depth_pair(fs::path(out) / numbered("depth", t, ".png"), r.depth[t]);
        if (dump_motion) {
          io::write_mask_png(fs::path(out) / numbered("motion", t, ".png"),
                             resize_mask(r.masks[t].mask, frames[t].width(), frames[t].height()));
        }
      }
    } else if (*motion) {
      const auto paths = list_frames(framedir);
      std::vector<GrayImage> frames;
      for (const auto& p : paths) frames.push_back(to_grayscale(io::read_rgb(p)));
      const auto masks = detect_motion(frames, cfg.motion);
      fs::create_directories(out);
      for (std::size_t t = 0; t < masks.size(); ++t) {
        io::write_mask_png(fs::path(out) / numbered("mask", t, ".png"), masks[t].mask);
      }
    } else if (*stereo) {
      const auto paths = list_frames(framedir);
      std::vector<ImageRGB> frames;
      std::vector<GrayImage> grays;
      std::vector<DisparityMap> disp;
      for (std::size_t t = 0; t < paths.size(); ++t) {
        frames.push_back(io::read_rgb(paths[t]));
        grays.push_back(to_grayscale(frames.back()));
        fs::path dp = fs::path(depth_dir) / numbered("depth", t, ".pfm");
        if (!fs::exists(dp)) dp.replace_extension(".png");
        DepthMap d = io::read_depth(dp);
        if (d.width() != frames.back().width() || d.height() != frames.back().height()) {
          d = resize_depth(d, frames.back().width(), frames.back().height());
        }
        disp.push_back(depth_to_disparity(d, cfg.stereo));
      }
      if (frames.size() > 1) {
        std::vector<FlowField> flows(frames.size() - 1);
        std::vector<Plane> conf(flows.size());
        parallel_for(flows.size(), [&](std::size_t t) {
          flows[t] = estimate_flow(grays[t], grays[t + 1]);
          conf[t] = flow_confidence(grays[t], grays[t + 1], flows[t]);
        });
        disp = temporal_filter_disparity(disp, flows, conf);
      }
      fs::create_directories(out);
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const RenderedView right = render_view(frames[t], disp[t]);
        if (format == "sbs") {
          io::write_rgb(fs::path(out) / numbered("sbs", t, ".png"), compose_side_by_side(frames[t], right.image));
        } else {
          io::write_rgb(fs::path(out) / numbered("anaglyph", t, ".png"), compose_anaglyph(frames[t], right.image));
        }
      }
    } else if (*evalc) {
      const Database db = open_database(cache);
      if (paths_overlap(db.root, test_dir)) {
        std::cerr << "dtransfer: training database " << db.root.generic_string() << " and test set " << test_dir
                  << " overlap; they must be disjoint\n";
        return 1;
      }
      BenchmarkConfig bc;
      bc.protocol = parse_protocol(protocol);
      bc.aggregation = aggregation == "pixel-pooled" ? Aggregation::PixelPooled : Aggregation::ImageMean;
      bc.inference = inference;
      bc.limit = limit;
      bc.seed = seed;
      const MetricReport report = run_benchmark(db, test_dir, bc);
      write_report_csv(out, report);
      fs::path summary = out;
      summary.replace_extension(".json");
      write_summary_json(summary, report, bc);
      std::cerr << "rel " << report.rel << "  log10 " << report.log10 << "  rms " << report.rms << "  ("
                << report.evaluated << " evaluated, " << report.failed << " failed)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "dtransfer: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace dt
