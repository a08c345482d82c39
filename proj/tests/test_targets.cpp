#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ymap/coco.hpp"
#include "ymap/error.hpp"
#include "ymap/targets.hpp"

using namespace ymap;
namespace fs = std::filesystem;

namespace {

SkeletonAnnotation random_person(std::mt19937_64& rng, int frame, bool integer) {
  std::uniform_real_distribution<double> u(0.0, frame - 1.0);
  std::uniform_int_distribution<int> vis(0, 2);
  SkeletonAnnotation p;
  for (auto& j : p.joints) {
    j.visibility = static_cast<Visibility>(vis(rng));
    if (!j.annotated()) continue;
    j.x = integer ? std::round(u(rng)) : u(rng);
    j.y = integer ? std::round(u(rng)) : u(rng);
  }
  return p;
}

AnnotationRecord square_record(std::vector<std::pair<int, std::vector<Point2>>> instances) {
  AnnotationRecord r;
  r.width = 256;
  r.height = 256;
  for (auto& [cat, poly] : instances) {
    InstanceAnnotation inst;
    inst.category_id = cat;
    inst.shapes.push_back(Polygon{poly});
    r.instances.push_back(inst);
  }
  return r;
}

std::vector<Point2> rect(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

}  // namespace

TEST_CASE("decay schedules") {
  const auto j = DecaySchedule::joints();
  const auto p = DecaySchedule::pafs();
  CHECK(decay_at_epoch(j, 0) == 23);
  CHECK(decay_at_epoch(j, 19) == 23);
  CHECK(decay_at_epoch(j, 20) == 22);
  CHECK(decay_at_epoch(j, 339) == 7);
  CHECK(decay_at_epoch(j, 340) == 6);
  CHECK(decay_at_epoch(j, 100000) == 6);
  CHECK(decay_at_epoch(p, 0) == 6);
  CHECK(decay_at_epoch(p, 80) == 2);
  CHECK(decay_at_epoch(p, 1000) == 2);
  CHECK_THROWS_AS(decay_at_epoch(j, -1), ValueError);
  int prev = decay_at_epoch(j, 0);
  for (int e = 1; e < 500; ++e) {
    const int s = decay_at_epoch(j, e);
    CHECK(s <= prev);
    if (e % 20 != 0) CHECK(s == prev);
    prev = s;
  }
}

TEST_CASE("joint heatmaps match the direct Gaussian oracle") {
  std::mt19937_64 rng(17);
  const int frame = 64;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SkeletonAnnotation> people;
    for (int k = 0; k < 3; ++k) people.push_back(random_person(rng, frame, trial % 2 == 0));
    const int size = 6 + trial * 2;
    const HeatmapReport r = synth_joint_heatmaps(people, size, frame);
    for (int c = 0; c < kNumJoints; ++c) {
      for (int y = 0; y < frame; ++y) {
        for (int x = 0; x < frame; ++x) {
          double ref = 0.0;
          for (const auto& p : people) {
            const Joint& j = p.joints[c];
            if (!j.annotated()) continue;
            ref = std::max(ref, oracle::gaussian(size, x - j.x, y - j.y));
          }
          REQUIRE(r.heatmaps.at(c, y, x) == doctest::Approx(ref).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("integer joints peak at exactly one and values stay in range") {
  SkeletonAnnotation p;
  p.joints[0] = {10.0, 12.0, Visibility::visible};
  p.joints[3] = {0.0, 255.0, Visibility::occluded};
  const std::vector<SkeletonAnnotation> people = {p};
  const HeatmapReport r = synth_joint_heatmaps_at_epoch(people, 0);
  CHECK(r.heatmaps.at(0, 12, 10) == 1.0f);
  CHECK(r.heatmaps.at(3, 255, 0) == 1.0f);
  CHECK(r.heatmaps.at(0, 12, 21) > 0.0f);
  CHECK(r.heatmaps.at(0, 12, 22) == 0.0f);  // |dx| = 12 >= 11.5
  for (float v : r.heatmaps.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(r.skipped_out_of_frame == 0);
}

TEST_CASE("out-of-frame joints are skipped and counted") {
  SkeletonAnnotation p;
  p.joints[0] = {-3.0, 5.0, Visibility::visible};
  p.joints[1] = {5.0, 300.0, Visibility::visible};
  p.joints[2] = {5.0, 5.0, Visibility::absent};
  const std::vector<SkeletonAnnotation> people = {p};
  const HeatmapReport r = synth_joint_heatmaps(people, 11);
  CHECK(r.skipped_out_of_frame == 2);
  for (float v : r.heatmaps.data()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(synth_joint_heatmaps(people, 0), ValueError);
}

TEST_CASE("limb bands match the band oracle") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 47.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Point2 a{u(rng), u(rng)};
    Point2 b{u(rng), u(rng)};
    if (trial == 0) b = a;
    const int width = 1 + trial % 6;
    ImageGrid g(48, 48, 1);
    draw_limb_band(g, 0, a, b, width);
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        REQUIRE((g.at(0, y, x) == 1.0f) == oracle::in_band(x, y, a, b, width));
      }
    }
  }
}

TEST_CASE("PAF channels follow the limb table") {
  SkeletonAnnotation p;
  p.joints[5] = {50.0, 50.0, Visibility::visible};
  p.joints[7] = {80.0, 50.0, Visibility::visible};
  p.joints[9] = {80.0, 90.0, Visibility::absent};
  const std::vector<SkeletonAnnotation> people = {p};
  const ImageGrid pafs = synth_pafs_at_epoch(people, 0);
  CHECK(pafs.channels() == kNumLimbs);
  CHECK(pafs.at(0, 50, 65) == 1.0f);
  CHECK(pafs.at(0, 53, 65) == 0.0f);  // width 6: across in [-3, 3)
  CHECK(pafs.at(0, 47, 65) == 1.0f);
  double other = 0.0;
  for (int c = 1; c < kNumLimbs; ++c) {
    for (float v : pafs.plane(c)) other += v;
  }
  CHECK(other == 0.0);
  const auto& limbs = default_limb_table();
  for (const auto& l : limbs) {
    CHECK(l.from >= 5);
    CHECK(l.to < kNumJoints);
  }
}

TEST_CASE("group masks") {
  const auto& table = ClassGroupTable::default_table();
  const ScaleOffset id;
  SUBCASE("no annotations") {
    const ImageGrid m = synth_group_masks(square_record({}), table, id);
    CHECK(m.channels() == kNumGroups);
    for (float v : m.data()) CHECK(v == 0.0f);
  }
  SUBCASE("one person") {
    const auto rec = square_record({{1, rect(10, 10, 50, 60)}});
    const ImageGrid m = synth_group_masks(rec, table, id);
    const ImageGrid inst = rasterize_instance(rec.instances[0], 256, 256);
    const int persons = group_mask_channel(static_cast<int>(ClassGroup::Persons));
    CHECK(persons == 1);
    for (int c = 0; c < kNumGroups; ++c) {
      const ImageGrid ch = m.channels_slice(c, 1);
      if (c == persons) {
        CHECK(ch == inst);
      } else {
        for (float v : ch.data()) REQUIRE(v == 0.0f);
      }
    }
  }
  SUBCASE("person and car overlap") {
    const auto rec = square_record({{1, rect(10, 10, 50, 60)}, {3, rect(40, 40, 90, 90)}});
    const ImageGrid m = synth_group_masks(rec, table, id);
    CHECK(m.at(1, 45, 45) == 1.0f);
    CHECK(m.at(2, 45, 45) == 1.0f);
    CHECK(m.at(1, 80, 80) == 0.0f);
    CHECK(m.at(2, 80, 80) == 1.0f);
  }
  SUBCASE("text teacher mask feeds channel zero") {
    ImageGrid text(256, 256, 1);
    text.at(0, 3, 4) = 1.0f;
    const ImageGrid m = synth_group_masks(square_record({}), table, id, &text);
    CHECK(m.at(0, 3, 4) == 1.0f);
    ImageGrid wrong(10, 10, 1);
    CHECK_THROWS_AS(synth_group_masks(square_record({}), table, id, &wrong), ShapeError);
  }
  CHECK(group_mask_channel(static_cast<int>(ClassGroup::Text)) == 0);
  CHECK(group_mask_channel(static_cast<int>(ClassGroup::Nature)) == 10);
  CHECK_THROWS_AS(group_mask_channel(11), ValueError);
}

TEST_CASE("group masks equal the per-pixel union oracle") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> cat(1, 183);
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> c(20.0, 236.0);
  const auto& table = ClassGroupTable::default_table();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<int, std::vector<Point2>>> inst;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) inst.push_back({cat(rng), oracle::random_polygon(rng, c(rng), c(rng), 5, 40, 7)});
    const auto rec = square_record(inst);
    const ImageGrid m = synth_group_masks(rec, table, ScaleOffset{});
    for (int g = 0; g < kNumGroups; ++g) {
      const int ch = group_mask_channel(g);
      for (int y = 0; y < 256; y += 3) {
        for (int x = 0; x < 256; x += 3) {
          bool ref = false;
          for (const auto& [cid, poly] : inst) {
            if (assign_class_group(cid, table) == g) ref |= oracle::point_in_polygon(poly, x + 0.5, y + 0.5);
          }
          REQUIRE((m.at(ch, y, x) == 1.0f) == ref);
        }
      }
    }
  }
}

TEST_CASE("assemble places every block and round trips through disk") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  TargetParts parts;
  parts.joints = ImageGrid(256, 256, 17);
  parts.pafs = ImageGrid(256, 256, 12);
  parts.depth = ImageGrid(256, 256, 1);
  parts.normals = ImageGrid(256, 256, 3);
  parts.masks = ImageGrid(256, 256, 11);
  for (ImageGrid* g : {&parts.joints, &parts.pafs, &parts.depth, &parts.normals, &parts.masks}) {
    for (float& v : g->data()) v = u(rng);
  }
  parts.tokens.resize(8 * 300);
  for (float& v : parts.tokens) v = u(rng);
  const TargetStack s = assemble_targets(parts);
  CHECK(s.images.channels() == kStackChannels);
  CHECK(s.images.channels_slice(channels::kDepth, 1) == parts.depth);
  CHECK(s.images.channels_slice(channels::kPafsBegin, 12) == parts.pafs);
  CHECK(s.images.channels_slice(channels::kNormalsBegin, 3) == parts.normals);
  CHECK(s.images.channels_slice(channels::kText, 11) == parts.masks);
  CHECK(s.token_row(7)[299] == parts.tokens.back());

  const fs::path dir = fs::temp_directory_path() / "ymap_test_targets";
  fs::remove_all(dir);
  save_target_stack(s, dir / "s.f32");
  CHECK(load_target_stack(dir / "s.f32") == s);

  TargetParts bad = parts;
  bad.pafs = ImageGrid(256, 256, 11);
  CHECK_THROWS_AS(assemble_targets(bad), ShapeError);
  bad = parts;
  bad.tokens.pop_back();
  CHECK_THROWS_AS(assemble_targets(bad), ShapeError);
}

TEST_CASE("a sample without persons has empty pose channels") {
  TargetParts parts;
  const std::vector<SkeletonAnnotation> none;
  parts.joints = synth_joint_heatmaps_at_epoch(none, 0).heatmaps;
  parts.pafs = synth_pafs_at_epoch(none, 0);
  parts.depth = ImageGrid(256, 256, 1, 0.5f);
  parts.normals = ImageGrid(256, 256, 3);
  parts.masks = ImageGrid(256, 256, 11);
  parts.tokens.assign(2400, 0.0f);
  const TargetStack s = assemble_targets(parts);
  for (int c = 0; c < 29; ++c) {
    for (float v : s.images.plane(c)) REQUIRE(v == 0.0f);
  }
}
