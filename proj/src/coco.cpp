#include "ymap/coco.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "ymap/error.hpp"
#include "ymap/image_io.hpp"

namespace ymap {

namespace fs = std::filesystem;
using nlohmann::json;

int SkeletonAnnotation::annotated_count() const {
  return static_cast<int>(std::count_if(joints.begin(), joints.end(),
                                        [](const Joint& j) { return j.annotated(); }));
}

SkeletonAnnotation SkeletonAnnotation::transformed(const ScaleOffset& t) const {
  SkeletonAnnotation out = *this;
  for (Joint& j : out.joints) {
    const Point2 p = t.apply({j.x, j.y});
    j.x = p.x;
    j.y = p.y;
  }
  return out;
}

std::optional<ClassGroup> group_from_name(std::string_view name) {
  for (int g = 0; g < kNumGroups; ++g) {
    if (kGroupNames[g] == name) return static_cast<ClassGroup>(g);
  }
  return std::nullopt;
}

ClassGroupTable ClassGroupTable::parse(std::string_view text) {
  ClassGroupTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    int id = 0;
    std::string name;
    std::string group;
    if (!(fields >> id)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError("class group table line " + std::to_string(line_no) + ": missing id");
    }
    if (!(fields >> name >> group)) {
      throw FormatError("class group table line " + std::to_string(line_no) +
                        ": expected 'id name group'");
    }
    auto g = group_from_name(group);
    if (!g) {
      throw FormatError("class group table line " + std::to_string(line_no) +
                        ": unknown group '" + group + "'");
    }
    if (!table.entries_.emplace(id, Entry{name, *g}).second) {
      throw FormatError("class group table: duplicate category id " + std::to_string(id));
    }
  }
  if (table.entries_.empty()) throw FormatError("class group table is empty");
  return table;
}

ClassGroupTable ClassGroupTable::load(const fs::path& path) {
  return parse(read_text_file(path));
}

const ClassGroupTable& ClassGroupTable::default_table() {
  static const ClassGroupTable table = parse(default_class_group_text());
  return table;
}

const ClassGroupTable::Entry& ClassGroupTable::entry(int category_id) const {
  auto it = entries_.find(category_id);
  if (it == entries_.end()) {
    throw ValueError("unknown category id " + std::to_string(category_id));
  }
  return it->second;
}

std::optional<int> ClassGroupTable::find_by_name(std::string_view name) const {
  for (const auto& [id, e] : entries_) {
    if (e.name == name) return id;
  }
  return std::nullopt;
}

int assign_class_group(int category_id, const ClassGroupTable& table) {
  return static_cast<int>(table.entry(category_id).group);
}

Rle rle_from_string(std::string_view encoded, int height, int width) {
  // Inverse of the cocoapi LEB128-like string codec: 5 bits per char
  // (offset 48), continuation bit 0x20, sign bit 0x10 on the last char;
  // counts after the second are stored as deltas from counts[m - 2].
  Rle rle;
  rle.height = height;
  rle.width = width;
  std::vector<long long> counts;
  std::size_t p = 0;
  while (p < encoded.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= encoded.size()) throw FormatError("truncated compressed RLE string");
      const long long c = static_cast<long long>(encoded[p]) - 48;
      if (c < 0 || c > 63) throw FormatError("invalid character in compressed RLE string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  for (long long c : counts) {
    if (c < 0) throw FormatError("negative run in compressed RLE string");
    rle.counts.push_back(static_cast<std::uint32_t>(c));
  }
  return rle;
}

std::string AnnotationRecord::stem() const {
  if (!file_name.empty()) return fs::path(file_name).stem().string();
  return std::to_string(image_id);
}

namespace {

double clamp_coord(double v, double hi) { return std::clamp(v, 0.0, hi); }

Shape parse_rle_json(const json& seg) {
  const auto size = seg.at("size").get<std::vector<int>>();
  if (size.size() != 2) throw FormatError("RLE size must be [height, width]");
  const json& counts = seg.at("counts");
  if (counts.is_string()) return rle_from_string(counts.get<std::string>(), size[0], size[1]);
  Rle rle;
  rle.height = size[0];
  rle.width = size[1];
  rle.counts = counts.get<std::vector<std::uint32_t>>();
  return rle;
}

std::vector<Shape> parse_segmentation(const json& seg, int width, int height) {
  std::vector<Shape> shapes;
  if (seg.is_object()) {
    shapes.push_back(parse_rle_json(seg));
    return shapes;
  }
  if (!seg.is_array()) throw FormatError("segmentation must be a polygon list or RLE object");
  for (const json& poly : seg) {
    const auto coords = poly.get<std::vector<double>>();
    if (coords.size() % 2 != 0) throw FormatError("polygon has an odd number of coordinates");
    Polygon p;
    for (std::size_t i = 0; i + 1 < coords.size(); i += 2) {
      p.vertices.push_back({clamp_coord(coords[i], width), clamp_coord(coords[i + 1], height)});
    }
    shapes.push_back(std::move(p));
  }
  return shapes;
}

SkeletonAnnotation parse_keypoints(const json& kp, int width, int height) {
  const auto values = kp.get<std::vector<double>>();
  if (values.size() != 3 * kNumJoints) {
    throw FormatError("keypoint array has " + std::to_string(values.size()) +
                      " values, expected 51");
  }
  SkeletonAnnotation s;
  for (int j = 0; j < kNumJoints; ++j) {
    const int v = static_cast<int>(values[3 * j + 2]);
    if (v < 0 || v > 2) throw FormatError("keypoint visibility flag must be 0, 1 or 2");
    s.joints[j].visibility = static_cast<Visibility>(v);
    if (v != 0) {
      s.joints[j].x = clamp_coord(values[3 * j], width - 1);
      s.joints[j].y = clamp_coord(values[3 * j + 1], height - 1);
    }
  }
  return s;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotation_texts(std::span<const std::string> documents,
                                                     const ClassGroupTable& table) {
  std::map<std::int64_t, AnnotationRecord> records;
  for (const std::string& text : documents) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("malformed annotation JSON: ") + e.what());
    }
    try {
      for (const json& img : doc.value("images", json::array())) {
        const auto id = img.at("id").get<std::int64_t>();
        AnnotationRecord& r = records[id];
        r.image_id = id;
        r.width = img.at("width").get<int>();
        r.height = img.at("height").get<int>();
        r.file_name = img.value("file_name", std::string());
        if (r.width <= 0 || r.height <= 0) {
          throw FormatError("image " + std::to_string(id) + " has non-positive size");
        }
      }
      for (const json& ann : doc.value("annotations", json::array())) {
        const auto id = ann.at("image_id").get<std::int64_t>();
        auto it = records.find(id);
        if (it == records.end()) {
          throw FormatError("annotation refers to unknown image id " + std::to_string(id));
        }
        AnnotationRecord& r = it->second;
        if (ann.contains("caption")) {
          r.captions.push_back(ann.at("caption").get<std::string>());
          continue;
        }
        const int category = ann.at("category_id").get<int>();
        if (!table.contains(category)) {
          throw FormatError("unknown category id " + std::to_string(category) +
                            " in annotation for image " + std::to_string(id));
        }
        if (ann.contains("keypoints")) {
          r.people.push_back(parse_keypoints(ann.at("keypoints"), r.width, r.height));
        }
        if (ann.contains("segmentation")) {
          InstanceAnnotation inst;
          inst.category_id = category;
          inst.shapes = parse_segmentation(ann.at("segmentation"), r.width, r.height);
          if (!inst.shapes.empty()) r.instances.push_back(std::move(inst));
        }
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("annotation JSON does not follow COCO layout: ") + e.what());
    }
  }
  std::vector<AnnotationRecord> out;
  out.reserve(records.size());
  for (auto& [id, r] : records) out.push_back(std::move(r));
  return out;
}

std::vector<AnnotationRecord> parse_annotations(std::span<const fs::path> paths,
                                                const ClassGroupTable& table) {
  std::vector<std::string> docs;
  docs.reserve(paths.size());
  for (const fs::path& p : paths) docs.push_back(read_text_file(p));
  return parse_annotation_texts(docs, table);
}

namespace {

ImageGrid fill_polygon(const Polygon& poly, int height, int width) {
  const auto& v = poly.vertices;
  if (v.size() < 3) {
    throw ValueError("degenerate polygon with " + std::to_string(v.size()) + " vertices");
  }
  ImageGrid mask(height, width, 1);
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point2& a = v[i];
      const Point2& b = v[(i + 1) % v.size()];
      if ((a.y <= yc) != (b.y <= yc)) {
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Pixel centers x + 0.5 in [xs[k], xs[k + 1]).
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int x1 = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int x = x0; x < x1; ++x) mask.at(0, y, x) = 1.0f;
    }
  }
  return mask;
}

ImageGrid decode_rle(const Rle& rle, int height, int width) {
  if (rle.height != height || rle.width != width) {
    throw ShapeError("RLE size " + std::to_string(rle.height) + "x" + std::to_string(rle.width) +
                     " does not match requested " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  std::uint64_t total = 0;
  for (auto c : rle.counts) total += c;
  const std::uint64_t expected = static_cast<std::uint64_t>(height) * width;
  if (total != expected) {
    throw ValueError("RLE counts sum to " + std::to_string(total) + ", expected " +
                     std::to_string(expected));
  }
  ImageGrid mask(height, width, 1);
  std::uint64_t pos = 0;
  bool value = false;
  for (auto run : rle.counts) {
    if (value) {
      for (std::uint64_t i = pos; i < pos + run; ++i) {
        mask.at(0, static_cast<int>(i % height), static_cast<int>(i / height)) = 1.0f;
      }
    }
    pos += run;
    value = !value;
  }
  return mask;
}

}  // namespace

ImageGrid rasterize_mask(const Shape& shape, int height, int width) {
  if (const auto* poly = std::get_if<Polygon>(&shape)) return fill_polygon(*poly, height, width);
  return decode_rle(std::get<Rle>(shape), height, width);
}

ImageGrid rasterize_instance(const InstanceAnnotation& instance, int height, int width) {
  ImageGrid mask(height, width, 1);
  for (const Shape& s : instance.shapes) {
    ImageGrid part = rasterize_mask(s, height, width);
    auto dst = mask.data();
    auto src = part.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  return mask;
}

ScaleOffset letterbox_transform(int height, int width, int target) {
  if (height < 1 || width < 1) throw ShapeError("letterbox input must be at least 1x1");
  const double scale = std::min(static_cast<double>(target) / width,
                                static_cast<double>(target) / height);
  const int content_w = static_cast<int>(std::lround(width * scale));
  const int content_h = static_cast<int>(std::lround(height * scale));
  return {scale, static_cast<double>((target - content_w) / 2),
          static_cast<double>((target - content_h) / 2)};
}

Letterboxed letterbox(const ImageGrid& image, int target) {
  const ScaleOffset t = letterbox_transform(image.height(), image.width(), target);
  if (t.is_identity() && image.height() == target && image.width() == target) {
    return {image, t};
  }
  return {warp(image, t, target, target, Interpolation::bilinear), t};
}

ImageGrid rasterize_instance_in_frame(const InstanceAnnotation& instance,
                                      const AnnotationRecord& record,
                                      const ScaleOffset& transform, int target) {
  ImageGrid mask(target, target, 1);
  for (const Shape& s : instance.shapes) {
    ImageGrid part;
    if (const auto* poly = std::get_if<Polygon>(&s)) {
      // Polygon vertices are pixel-corner coordinates; the transform acts on
      // pixel-sample coordinates, which sit half a pixel inside.
      Polygon mapped;
      mapped.vertices.reserve(poly->vertices.size());
      for (const Point2& v : poly->vertices) {
        const Point2 p = transform.apply({v.x - 0.5, v.y - 0.5});
        mapped.vertices.push_back({p.x + 0.5, p.y + 0.5});
      }
      part = fill_polygon(mapped, target, target);
    } else {
      const ImageGrid full = decode_rle(std::get<Rle>(s), record.height, record.width);
      part = warp(full, transform, target, target, Interpolation::nearest);
    }
    auto dst = mask.data();
    auto src = part.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  return mask;
}

}  // namespace ymap
