#include "depthtransfer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "depthtransfer/imagecore.hpp"
#include "depthtransfer/io.hpp"

namespace dt {

namespace fs = std::filesystem;

DepthMetrics depth_metrics(const DepthMap& d, const DepthMap& gt) {
  if (d.width() != gt.width() || d.height() != gt.height()) throw Error("depth_metrics: size mismatch");
  DepthMetrics m;
  double se = 0.0;
  for (std::size_t i = 0; i < gt.depth.pixel_count(); ++i) {
    if (!gt.valid[i] || !d.valid[i]) continue;
    const double a = d.depth[i];
    const double b = gt.depth[i];
    m.rel += std::abs(a - b) / b;
    m.log10 += std::abs(std::log10(a) - std::log10(b));
    se += (a - b) * (a - b);
    ++m.pixels;
  }
  if (m.pixels == 0) throw Error("depth_metrics: no pixel is valid in both maps");
  const double n = static_cast<double>(m.pixels);
  m.rel /= n;
  m.log10 /= n;
  m.rms = std::sqrt(se / n);
  return m;
}

DepthMap rescale_to_range(const DepthMap& d, double lo, double hi) {
  if (!(hi > lo && lo > 0.0)) throw Error("rescale_to_range: need hi > lo > 0");
  DepthMap out = d;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -mn;
  for (std::size_t i = 0; i < d.depth.pixel_count(); ++i) {
    if (!d.valid[i]) continue;
    mn = std::min(mn, d.depth[i]);
    mx = std::max(mx, d.depth[i]);
  }
  if (!(mx >= mn)) return out;
  for (std::size_t i = 0; i < d.depth.pixel_count(); ++i) {
    if (!d.valid[i]) continue;
    out.depth[i] = mx > mn ? lo + (d.depth[i] - mn) * (hi - lo) / (mx - mn) : 0.5 * (lo + hi);
  }
  return out;
}

double psnr(const ImageRGB& a, const ImageRGB& b, const Mask* mask) {
  if (!a.same_shape(b)) throw Error("psnr: image sizes differ");
  if (mask && !a.same_shape(*mask)) throw Error("psnr: mask size differs");
  double se = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask && !(*mask)(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = a(x, y, c) - b(x, y, c);
        se += d * d;
      }
      n += 3;
    }
  }
  if (n == 0) throw Error("psnr: empty mask");
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(1.0 / mse);
}

const char* protocol_name(Protocol p) { return p == Protocol::Make3D ? "make3d" : "rgbd"; }

Protocol parse_protocol(const std::string& name) {
  if (name == "make3d") return Protocol::Make3D;
  if (name == "rgbd") return Protocol::Rgbd;
  throw Error("unknown protocol '" + name + "' (expected make3d or rgbd)");
}

MetricReport aggregate(std::vector<ItemResult> items, Aggregation mode) {
  MetricReport r;
  double rel = 0.0, lg = 0.0, sq = 0.0, weight = 0.0;
  for (const auto& it : items) {
    if (it.status != "ok") {
      ++r.failed;
      continue;
    }
    ++r.evaluated;
    const double w = mode == Aggregation::PixelPooled ? static_cast<double>(it.metrics.pixels) : 1.0;
    rel += w * it.metrics.rel;
    lg += w * it.metrics.log10;
    sq += mode == Aggregation::PixelPooled ? w * it.metrics.rms * it.metrics.rms : it.metrics.rms;
    weight += w;
  }
  if (weight > 0.0) {
    r.rel = rel / weight;
    r.log10 = lg / weight;
    r.rms = mode == Aggregation::PixelPooled ? std::sqrt(sq / weight) : sq / weight;
  }
  r.items = std::move(items);
  return r;
}

MetricReport run_benchmark(const Database& db, const fs::path& test_root, const BenchmarkConfig& config) {
  const auto files = list_rgbd_files(test_root);
  if (files.empty()) throw Error("benchmark: empty test set");
  // Group frames by source so videos are inferred jointly.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!groups.count(files[i].source)) order.push_back(files[i].source);
    groups[files[i].source].push_back(i);
  }
  if (config.limit > 0 && config.limit < order.size()) {
    std::vector<std::size_t> idx(order.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937 rng(config.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(config.limit);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> picked;
    for (std::size_t k : idx) picked.push_back(order[k]);
    order = std::move(picked);
  }

  // Scored at the ground truth's resolution, which may differ from the image's.
  auto score = [&](DepthMap predicted, const DepthMap& gt) {
    if (predicted.width() != gt.width() || predicted.height() != gt.height()) {
      predicted = resize_depth(predicted, gt.width(), gt.height());
    }
    if (config.protocol == Protocol::Rgbd) {
      return depth_metrics(rescale_to_range(predicted, 1.0, 81.0), rescale_to_range(gt, 1.0, 81.0));
    }
    return depth_metrics(predicted, gt);
  };

  std::vector<ItemResult> items;
  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& members = groups[order[s]];
    log_progress("benchmark: " + order[s] + " (" + std::to_string(s + 1) + "/" + std::to_string(order.size()) + ")");
    std::vector<ItemResult> group_items(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) group_items[k].item = files[members[k]].image.generic_string();
    try {
      std::vector<ImageRGB> images;
      std::vector<DepthMap> gts;
      for (std::size_t idx : members) {
        if (files[idx].depth.empty()) throw Error("missing ground truth for " + files[idx].image.generic_string());
        images.push_back(io::read_rgb(test_root / files[idx].image));
        gts.push_back(io::read_depth(test_root / files[idx].depth));
      }
      std::vector<DepthMap> predicted;
      if (images.size() == 1) {
        predicted.push_back(infer_image(images.front(), db, config.inference).depth);
      } else {
        VideoOptions vo;
        vo.base = config.inference;
        predicted = infer_video(images, db, vo).depth;
      }
      for (std::size_t k = 0; k < members.size(); ++k) {
        try {
          group_items[k].metrics = score(predicted[k], gts[k]);
        } catch (const std::exception& e) {
          group_items[k].status = std::string("error: ") + e.what();
        }
      }
    } catch (const std::exception& e) {
      for (auto& it : group_items) it.status = std::string("error: ") + e.what();
    }
    items.insert(items.end(), group_items.begin(), group_items.end());
  }
  return aggregate(std::move(items), config.aggregation);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_number(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace

void write_report_csv(const fs::path& path, const MetricReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << "item,rel,log10,rms,psnr,status\n";
  for (const auto& it : report.items) {
    const bool ok = it.status == "ok";
    os << csv_field(it.item) << ',' << (ok ? format_number(it.metrics.rel) : "") << ','
       << (ok ? format_number(it.metrics.log10) : "") << ',' << (ok ? format_number(it.metrics.rms) : "") << ','
       << (it.psnr ? format_number(*it.psnr) : "") << ',' << csv_field(it.status) << '\n';
  }
}

void write_summary_json(const fs::path& path, const MetricReport& report, const BenchmarkConfig& config) {
  nlohmann::json j;
  j["rel"] = report.rel;
  j["log10"] = report.log10;
  j["rms"] = report.rms;
  j["evaluated"] = report.evaluated;
  j["failed"] = report.failed;
  const auto& o = config.inference.objective;
  const auto& a = config.inference.align;
  j["config"] = {
      {"protocol", protocol_name(config.protocol)},
      {"aggregation", config.aggregation == Aggregation::ImageMean ? "image-mean" : "pixel-pooled"},
      {"limit", config.limit},
      {"seed", config.seed},
      {"alpha", o.alpha},
      {"beta", o.beta},
      {"gamma", o.gamma},
      {"nu", o.nu},
      {"eta", o.eta},
      {"epsilon", o.epsilon},
      {"candidates", o.candidates},
      {"align_search_radius", a.search_radius},
      {"align_pyramid_levels", a.pyramid_levels},
  };
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace dt
