#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "depthtransfer/database.hpp"
#include "depthtransfer/optimizer.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

struct DepthMetrics {
  double rel = 0.0;
  double log10 = 0.0;
  double rms = 0.0;
  std::size_t pixels = 0;
};

// Over pixels valid in both maps.
DepthMetrics depth_metrics(const DepthMap& depth, const DepthMap& ground_truth);

// Affine map of [min, max] onto [lo, hi]; a constant map becomes (lo+hi)/2.
DepthMap rescale_to_range(const DepthMap& depth, double lo, double hi);

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) over [0,1] channels of unmasked pixels (mask != 0 means
// "use"). Identical inputs give +infinity.
double psnr(const ImageRGB& a, const ImageRGB& b, const Mask* mask = nullptr);

enum class Protocol { Make3D, Rgbd };
enum class Aggregation { ImageMean, PixelPooled };

struct BenchmarkConfig {
  Protocol protocol = Protocol::Make3D;
  Aggregation aggregation = Aggregation::ImageMean;
  InferenceOptions inference;
  // Test items to use; 0 = all. A subset is drawn with `seed`.
  std::size_t limit = 0;
  std::uint32_t seed = 1;
};

struct ItemResult {
  std::string item;
  DepthMetrics metrics;
  std::optional<double> psnr;
  std::string status = "ok";
};

struct MetricReport {
  double rel = 0.0;
  double log10 = 0.0;
  double rms = 0.0;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  std::vector<ItemResult> items;
};

// Aggregates the successful items of `items` per `mode`.
MetricReport aggregate(std::vector<ItemResult> items, Aggregation mode);

MetricReport run_benchmark(const Database& db, const std::filesystem::path& test_root, const BenchmarkConfig& config);

// CSV: item,rel,log10,rms,psnr,status
void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
void write_summary_json(const std::filesystem::path& path, const MetricReport& report, const BenchmarkConfig& config);

const char* protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

}  // namespace dt
