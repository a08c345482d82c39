#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ymap/geometry.hpp"
#include "ymap/grid.hpp"

namespace ymap {

inline constexpr int kNumJoints = 17;
inline constexpr int kNumGroups = 11;
inline constexpr int kFrameSize = 256;

// COCO keypoint order.
inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",       "left_eye",       "right_eye",      "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow", "left_wrist",
    "right_wrist", "left_hip",      "right_hip",      "left_knee",   "right_knee",
    "left_ankle",  "right_ankle"};

enum class Visibility : std::uint8_t { absent = 0, occluded = 1, visible = 2 };

struct Joint {
  double x = 0.0;
  double y = 0.0;
  Visibility visibility = Visibility::absent;

  bool annotated() const { return visibility != Visibility::absent; }
  friend bool operator==(const Joint&, const Joint&) = default;
};

struct SkeletonAnnotation {
  std::array<Joint, kNumJoints> joints{};

  int annotated_count() const;
  SkeletonAnnotation transformed(const ScaleOffset& t) const;
  friend bool operator==(const SkeletonAnnotation&, const SkeletonAnnotation&) = default;
};

// Output channel order of the group masks: Text first (channel 33 of the
// target stack), then the ten COCO-fed groups (channels 34..43).
enum class ClassGroup : int {
  Persons = 0,
  Vehicles,
  Animals,
  Objects,
  Furniture,
  Appliances,
  Materials,
  Obstacles,
  Building,
  Nature,
  Text,
};

inline constexpr std::array<std::string_view, kNumGroups> kGroupNames = {
    "Persons",   "Vehicles",   "Animals",   "Objects",  "Furniture", "Appliances",
    "Materials", "Obstacles",  "Building",  "Nature",   "Text"};

std::optional<ClassGroup> group_from_name(std::string_view name);

class ClassGroupTable {
 public:
  struct Entry {
    std::string name;
    ClassGroup group;
  };

  // Lines of "id name group"; '#' starts a comment.
  static ClassGroupTable parse(std::string_view text);
  static ClassGroupTable load(const std::filesystem::path& path);
  static const ClassGroupTable& default_table();

  bool contains(int category_id) const { return entries_.contains(category_id); }
  const Entry& entry(int category_id) const;
  std::optional<int> find_by_name(std::string_view name) const;
  const std::map<int, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<int, Entry> entries_;
};

std::string_view default_class_group_text();

// Group index 0..10 for a category id; throws ValueError for unknown ids.
int assign_class_group(int category_id, const ClassGroupTable& table);

struct Polygon {
  std::vector<Point2> vertices;
};

// COCO run-length encoding: alternating zero/one runs, starting with zeros,
// over the column-major flattened mask.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
};

// Decodes the compressed string form used by COCO crowd annotations.
Rle rle_from_string(std::string_view encoded, int height, int width);

using Shape = std::variant<Polygon, Rle>;

struct InstanceAnnotation {
  int category_id = 0;
  // A polygon instance may consist of several parts; the mask is their union.
  std::vector<Shape> shapes;
};

struct AnnotationRecord {
  std::int64_t image_id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  std::vector<SkeletonAnnotation> people;
  std::vector<InstanceAnnotation> instances;
  std::vector<std::string> captions;

  // File stem used to look up per-image teacher files.
  std::string stem() const;
};

// Parses one or more COCO 2017 annotation files (person keypoints,
// instances, stuff, captions) and merges them by image id. Every image
// listed is kept, including those without annotations. Records come back
// in ascending id order.
std::vector<AnnotationRecord> parse_annotations(std::span<const std::filesystem::path> paths,
                                                const ClassGroupTable& table);
std::vector<AnnotationRecord> parse_annotation_texts(std::span<const std::string> documents,
                                                     const ClassGroupTable& table);

// Binary mask (values 0/1). Polygons are filled with the even-odd rule
// sampling pixel centers (x + 0.5, y + 0.5); RLE is decoded column-major.
ImageGrid rasterize_mask(const Shape& shape, int height, int width);
ImageGrid rasterize_instance(const InstanceAnnotation& instance, int height, int width);

struct Letterboxed {
  ImageGrid image;
  ScaleOffset transform;
};

// Aspect-preserving resize into a target x target frame with centered black
// padding. The returned transform maps input coordinates to the frame.
ScaleOffset letterbox_transform(int height, int width, int target = kFrameSize);
Letterboxed letterbox(const ImageGrid& image, int target = kFrameSize);

// Instance mask in the letterboxed frame. Polygons are transformed and
// rasterized directly; RLE masks are decoded and resampled (nearest).
ImageGrid rasterize_instance_in_frame(const InstanceAnnotation& instance,
                                      const AnnotationRecord& record,
                                      const ScaleOffset& transform, int target = kFrameSize);

}  // namespace ymap
