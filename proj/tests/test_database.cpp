#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "depthtransfer/database.hpp"
#include "depthtransfer/imagecore.hpp"
#include "depthtransfer/io.hpp"
#include "synthetic.hpp"

namespace dt {
namespace {

namespace fs = std::filesystem;

DatabaseOptions small_options() {
  DatabaseOptions o;
  o.width = 64;
  o.height = 48;
  return o;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random depth map with roughly a third of the pixels missing.
DepthMap holey_depth(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<double> val(0.5, 20.0);
  std::bernoulli_distribution hole(0.35);
  DepthMap d(w, h);
  for (std::size_t i = 0; i < d.depth.pixel_count(); ++i) {
    if (hole(rng)) {
      d.valid[i] = 0;
      d.depth[i] = 0.0;
    } else {
      d.depth[i] = val(rng);
      d.valid[i] = 1;
    }
  }
  return d;
}

TEST(Ingest, TwoStillsGiveTwoEntriesAndTheirMeanAsPrior) {
  const auto root = test::temp_dir("db_stills");
  auto a = test::render_scene(test::random_scene(1));
  auto b = test::render_scene(test::random_scene(2));
  a.depth = DepthMap(64, 48, 2.0);
  b.depth = DepthMap(64, 48, 4.0);
  test::write_frame(root / "a", 0, a);
  test::write_frame(root / "b", 0, b);

  const Database db = ingest(root, small_options());
  ASSERT_EQ(db.size(), 2u);
  EXPECT_TRUE(db.errors.empty());
  EXPECT_NE(db.entries[0].source, db.entries[1].source);
  EXPECT_EQ(db.entries[0].image_path.generic_string(), "a/img_00000.png");
  EXPECT_EQ(db.entries[1].image_path.generic_string(), "b/img_00000.png");
  for (std::size_t i = 0; i < db.prior.depth.depth.pixel_count(); ++i) {
    ASSERT_TRUE(db.prior.depth.valid[i]);
    ASSERT_NEAR(db.prior.depth.depth[i], 3.0, 1e-6);
  }
}

TEST(Ingest, VideoFramesShareOneSource) {
  const auto root = test::temp_dir("db_video");
  const auto spec = test::random_scene(3);
  for (int t = 0; t < 10; ++t) test::write_frame(root / "clip", t, test::render_scene(spec, t));

  const Database db = ingest(root, small_options());
  ASSERT_EQ(db.size(), 10u);
  for (const auto& e : db.entries) {
    EXPECT_EQ(e.source, db.entries.front().source);
    EXPECT_TRUE(e.video);
    EXPECT_TRUE(e.features.flow.has_value());
  }
  for (int t = 0; t < 10; ++t) EXPECT_EQ(db.entries[t].frame, t);
}

TEST(Ingest, CorruptDepthIsRecordedAndSkipped) {
  const auto root = test::temp_dir("db_corrupt");
  for (int i = 0; i < 5; ++i) {
    test::write_frame(root / ("s" + std::to_string(i)), 0, test::render_scene(test::random_scene(10 + i)));
  }
  {
    std::ofstream bad(root / "s2" / "depth_00000.png", std::ios::binary | std::ios::trunc);
    bad << "definitely not a png";
  }
  const Database db = ingest(root, small_options());
  EXPECT_EQ(db.size(), 4u);
  ASSERT_EQ(db.errors.size(), 1u);
  EXPECT_EQ(db.errors[0].path.generic_string(), "s2/img_00000.png");
  for (const auto& e : db.entries) EXPECT_NE(e.source, "s2");
}

TEST(Ingest, MismatchedDimensionsAreRecorded) {
  const auto root = test::temp_dir("db_mismatch");
  test::write_frame(root / "good", 0, test::render_scene(test::random_scene(20)));
  test::write_frame(root / "bad", 0, test::render_scene(test::random_scene(21)));
  io::write_depth_png(root / "bad" / "depth_00000.png", DepthMap(32, 32, 2.0));
  const Database db = ingest(root, small_options());
  EXPECT_EQ(db.size(), 1u);
  ASSERT_EQ(db.errors.size(), 1u);
  EXPECT_NE(db.errors[0].message.find("dimensions"), std::string::npos);
}

TEST(Ingest, EmptyDatabaseIsFatal) {
  const auto root = test::temp_dir("db_empty");
  EXPECT_THROW(ingest(root, small_options()), Error);
  test::write_frame(root / "only", 0, test::render_scene(test::random_scene(4)));
  std::ofstream(root / "only" / "depth_00000.png", std::ios::trunc) << "x";
  EXPECT_THROW(ingest(root, small_options()), Error);
}

TEST(Ingest, ManifestOverridesInferredLayout) {
  const auto root = test::temp_dir("db_manifest");
  const auto spec = test::random_scene(5);
  for (int t = 0; t < 3; ++t) test::write_frame(root / "photos", t, test::render_scene(spec, 4.0 * t));
  std::ofstream(root / "manifest.txt") << "# three unrelated stills\nstill photos\n";
  const Database db = ingest(root, small_options());
  ASSERT_EQ(db.size(), 3u);
  std::set<std::string> sources;
  for (const auto& e : db.entries) {
    sources.insert(e.source);
    EXPECT_FALSE(e.video);
    EXPECT_FALSE(e.features.flow.has_value());
  }
  EXPECT_EQ(sources.size(), 3u);
}

TEST(Ingest, CanonicalResolutionFollowsOrientation) {
  EXPECT_EQ(canonical_size(640, 480), (std::pair{460, 345}));
  EXPECT_EQ(canonical_size(480, 640), (std::pair{345, 460}));
}

TEST(Prior, SingleEntryKeepsDepthAndFillsHolesWithItsMean) {
  DepthMap d(4, 3, 2.0);
  d.depth(1, 1) = 5.0;
  d.valid(0, 0) = 0;
  d.depth(0, 0) = 0.0;
  const Prior p = compute_prior(std::vector<DepthMap>{d});
  const double mean = (2.0 * 10 + 5.0) / 11.0;
  EXPECT_NEAR(p.depth.depth(0, 0), mean, 1e-12);
  EXPECT_EQ(p.depth.depth(1, 1), 5.0);
  EXPECT_EQ(p.depth.depth(3, 2), 2.0);
  EXPECT_EQ(p.depth.valid_count(), 12u);
}

TEST(Prior, TwoConstantMapsAverage) {
  const Prior p = compute_prior(std::vector<DepthMap>{DepthMap(5, 5, 2.0), DepthMap(5, 5, 4.0)});
  for (double v : p.depth.depth.values()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(Prior, MatchesMaskedMeanOracleAndIgnoresOrder) {
  std::mt19937 rng(99);
  std::vector<DepthMap> maps;
  for (int i = 0; i < 5; ++i) maps.push_back(holey_depth(rng, 17, 11));
  // Force one pixel to be missing everywhere.
  for (auto& m : maps) {
    m.valid(3, 4) = 0;
    m.depth(3, 4) = 0.0;
  }
  double total = 0.0;
  int total_n = 0;
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < m.depth.pixel_count(); ++i) {
      if (m.valid[i]) {
        total += m.depth[i];
        ++total_n;
      }
    }
  }
  const Prior p = compute_prior(maps);
  for (int y = 0; y < 11; ++y) {
    for (int x = 0; x < 17; ++x) {
      double s = 0.0;
      int n = 0;
      for (const auto& m : maps) {
        if (m.valid(x, y)) {
          s += m.depth(x, y);
          ++n;
        }
      }
      const double expect = n > 0 ? s / n : total / total_n;
      ASSERT_NEAR(p.depth.depth(x, y), expect, 1e-6);
      ASSERT_TRUE(p.depth.valid(x, y));
      ASSERT_GT(p.depth.depth(x, y), 0.0);
    }
  }
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(maps.begin(), maps.end(), rng);
    const Prior q = compute_prior(maps);
    for (std::size_t i = 0; i < q.depth.depth.pixel_count(); ++i) ASSERT_NEAR(q.depth.depth[i], p.depth.depth[i], 1e-12);
  }
}

TEST(Prior, EmptyInputThrows) { EXPECT_THROW(compute_prior(std::vector<DepthMap>{}), Error); }

std::vector<RgbdFrame> video_frames(const std::string& source, std::uint32_t seed, int count) {
  std::vector<RgbdFrame> out;
  const auto spec = test::random_scene(seed);
  for (int t = 0; t < count; ++t) {
    auto s = test::render_scene(spec, 2.0 * t);
    out.push_back({source, t, true, s.image, s.depth});
  }
  return out;
}

TEST(Query, ExactImageRanksFirstWithZeroDistance) {
  std::vector<RgbdFrame> frames;
  for (int i = 0; i < 6; ++i) {
    auto s = test::render_scene(test::random_scene(30 + i));
    frames.push_back({"still" + std::to_string(i), 0, false, s.image, s.depth});
  }
  const Database db = build_database(frames, small_options());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto c = query_candidates(db, db.entries[i].features, 3);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].index, i);
    EXPECT_EQ(c[0].distance, 0.0);
  }
}

TEST(Query, OneFramePerVideo) {
  std::vector<RgbdFrame> frames;
  for (int v = 0; v < 3; ++v) {
    auto f = video_frames("video" + std::to_string(v), 40 + v, 4);
    frames.insert(frames.end(), f.begin(), f.end());
  }
  const Database db = build_database(frames, small_options());
  const auto c = query_candidates(db, db.entries[5].features, 7);
  ASSERT_EQ(c.size(), 3u);
  std::set<std::string> sources;
  for (const auto& x : c) sources.insert(db.entries[x.index].source);
  EXPECT_EQ(sources.size(), 3u);
  EXPECT_EQ(c[0].index, 5u);
}

TEST(Query, MatchesBruteForceOracle) {
  // 20 entries spread over 6 sources, some of them videos.
  std::vector<RgbdFrame> frames;
  const int per_source[6] = {5, 1, 4, 1, 6, 3};
  for (int s = 0; s < 6; ++s) {
    auto f = video_frames("src" + std::to_string(s), 60 + s, per_source[s]);
    if (per_source[s] == 1) f[0].video = false;
    frames.insert(frames.end(), f.begin(), f.end());
  }
  ASSERT_EQ(frames.size(), 20u);
  const Database db = build_database(frames, small_options());
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t qi = rng() % db.size();
    FeatureSet query = db.entries[qi].features;
    for (auto& v : query.gist.values) v += 0.01 * (static_cast<double>(rng() % 1000) / 1000.0 - 0.5);
    for (int k : {1, 3, 6, 7}) {
      std::vector<std::pair<double, int>> all;
      for (std::size_t i = 0; i < db.size(); ++i) {
        all.push_back({match_distance(query, db.entries[i].features), db.entries[i].id});
      }
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expect;
      std::set<std::string> seen;
      for (const auto& [d, id] : all) {
        if (seen.insert(db.entries[id].source).second) expect.push_back(static_cast<std::size_t>(id));
      }
      expect.resize(std::min<std::size_t>(expect.size(), k));

      const auto got = query_candidates(db, query, k);
      ASSERT_EQ(got.size(), expect.size());
      for (std::size_t j = 0; j < got.size(); ++j) {
        EXPECT_EQ(got[j].index, expect[j]);
        if (j > 0) EXPECT_LE(got[j - 1].distance, got[j].distance);
      }
    }
  }
}

TEST(Query, TiesBreakByEntryId) {
  auto s = test::render_scene(test::random_scene(70));
  std::vector<RgbdFrame> frames;
  for (int i = 0; i < 4; ++i) frames.push_back({"dup" + std::to_string(i), 0, false, s.image, s.depth});
  const Database db = build_database(frames, small_options());
  const auto c = query_candidates(db, db.entries[2].features, 4);
  ASSERT_EQ(c.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(c[j].index, j);
}

TEST(Query, InvalidArgumentsThrow) {
  Database empty;
  FeatureSet f;
  EXPECT_THROW(query_candidates(empty, f, 3), Error);
  auto s = test::render_scene(test::random_scene(71));
  const Database db = build_database({{"a", 0, false, s.image, s.depth}}, small_options());
  EXPECT_THROW(query_candidates(db, f, 0), Error);
}

TEST(Cache, RoundTripPreservesEntriesAndPrior) {
  const auto root = test::temp_dir("db_cache");
  const auto spec = test::random_scene(80);
  for (int t = 0; t < 3; ++t) test::write_frame(root / "clip", t, test::render_scene(spec, t));
  test::write_frame(root / "still", 0, test::render_scene(test::random_scene(81)));
  const Database db = ingest(root, small_options());
  const fs::path cache = root / "features.dtdb";
  save_cache(db, cache);

  const auto bytes = file_bytes(cache);
  ASSERT_GE(bytes.size(), 6u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DTDB");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);

  const Database back = load_cache(cache);
  ASSERT_EQ(back.size(), db.size());
  EXPECT_EQ(back.width, 64);
  EXPECT_EQ(back.height, 48);
  EXPECT_EQ(back.root, db.root);
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto& a = db.entries[i];
    const auto& b = back.entries[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.source, b.source);
    EXPECT_EQ(a.frame, b.frame);
    EXPECT_EQ(a.video, b.video);
    EXPECT_EQ(a.content_hash, b.content_hash);
    EXPECT_EQ(a.image_path, b.image_path);
    EXPECT_EQ(a.features.gist.values, b.features.gist.values);
    ASSERT_EQ(a.features.flow.has_value(), b.features.flow.has_value());
    if (a.features.flow) EXPECT_EQ(a.features.flow->bins, b.features.flow->bins);
  }
  const auto pa = db.prior.depth.depth.values();
  const auto pb = back.prior.depth.depth.values();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
  // Lazily loaded entries read back from disk at working resolution.
  const DepthMap d = back.depth(3);
  EXPECT_EQ(d.width(), 64);
  EXPECT_EQ(d.height(), 48);
}

TEST(Cache, WarmReingestIsByteIdentical) {
  const auto root = test::temp_dir("db_warm");
  const auto spec = test::random_scene(82);
  for (int t = 0; t < 4; ++t) test::write_frame(root / "clip", t, test::render_scene(spec, 1.5 * t));
  for (int i = 0; i < 2; ++i) test::write_frame(root / ("still" + std::to_string(i)), 0, test::render_scene(test::random_scene(83 + i)));
  const fs::path cache = test::temp_dir("db_warm_cache") / "db.dtdb";

  DatabaseOptions opts = small_options();
  opts.cache = cache;
  save_cache(ingest(root, opts), cache);
  const auto cold = file_bytes(cache);
  save_cache(ingest(root, opts), cache);
  EXPECT_EQ(file_bytes(cache), cold);

  // Changing one file invalidates only that entry (and its flow neighbour).
  test::write_frame(root / "still1", 0, test::render_scene(test::random_scene(99)));
  const Database changed = ingest(root, opts);
  const Database fresh = ingest(root, small_options());
  ASSERT_EQ(changed.size(), fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    EXPECT_EQ(changed.entries[i].content_hash, fresh.entries[i].content_hash);
    EXPECT_EQ(changed.entries[i].features.gist.values, fresh.entries[i].features.gist.values);
  }
}

TEST(Cache, RejectsForeignFiles) {
  const auto dir = test::temp_dir("db_foreign");
  std::ofstream(dir / "x.dtdb", std::ios::binary) << "NOPE0000";
  EXPECT_THROW(load_cache(dir / "x.dtdb"), Error);
  EXPECT_THROW(load_cache(dir / "missing.dtdb"), Error);
  std::ofstream(dir / "trunc.dtdb", std::ios::binary) << "DTDB";
  EXPECT_THROW(load_cache(dir / "trunc.dtdb"), Error);
}

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64({'a'}), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64({'f', 'o', 'o', 'b', 'a', 'r'}), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace dt
