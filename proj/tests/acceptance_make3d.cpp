// Make3D calibration run. Needs DT_MAKE3D_ROOT pointing at a directory with
// train/ and test/ subtrees in the ingest layout (tools/make3d_convert.py
// produces it from the public release). Exits 77 when the data is absent.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "depthtransfer/database.hpp"
#include "depthtransfer/eval.hpp"

int main() {
  namespace fs = std::filesystem;
  const char* root_env = std::getenv("DT_MAKE3D_ROOT");
  if (root_env == nullptr || !fs::is_directory(fs::path(root_env) / "train") ||
      !fs::is_directory(fs::path(root_env) / "test")) {
    std::printf("SKIP criterion 1 (Make3D calibration): DT_MAKE3D_ROOT with train/ and test/ not available\n");
    return 77;
  }
  const fs::path root(root_env);
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  try {
    dt::DatabaseOptions opts;
    opts.width = 345;
    opts.height = 460;
    opts.cache = root / "train.dtdb";
    const dt::Database db = dt::ingest(root / "train", opts);

    dt::BenchmarkConfig cfg;
    cfg.protocol = dt::Protocol::Make3D;
    cfg.limit = 40;
    cfg.seed = 1;
    const dt::MetricReport r = dt::run_benchmark(db, root / "test", cfg);
    dt::write_report_csv(root / "acceptance_make3d.csv", r);
    dt::write_summary_json(root / "acceptance_make3d.json", r, cfg);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = r.failed == 0 && r.rel <= 0.50 && r.log10 <= 0.20 && r.rms <= 18.0 && secs <= 7200.0;
    std::printf("%s criterion 1 (Make3D calibration): %zu train, %zu evaluated, %zu failed, rel=%.4f log10=%.4f "
                "rms=%.3f (thresholds 0.50/0.20/18) (%.1f s, budget 7200 s)\n",
                pass ? "PASS" : "FAIL", db.size(), r.evaluated, r.failed, r.rel, r.log10, r.rms, secs);
  } catch (const std::exception& e) {
    std::printf("FAIL criterion 1 (Make3D calibration): %s\n", e.what());
    pass = false;
  }
  return pass ? 0 : 1;
}
