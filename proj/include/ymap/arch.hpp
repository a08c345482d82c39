#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ymap::arch {

enum class LayerKind {
  input,
  conv3x3,
  conv1x1,
  avgpool,
  upsample,
  dense,
  reshape,
  add,
  concat,
  dropout,
  activation,
};

enum class Activation { none, tanh, leaky_relu, sigmoid, softmax, relu };

enum class Branch { input, encoder, bridge, pictorial, token, tail };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation act);
std::string_view to_string(Branch branch);

// Roles the validator keys on.
namespace role {
inline constexpr std::string_view kEncoderResidual = "encoder_residual";
inline constexpr std::string_view kSkip = "skip";
inline constexpr std::string_view kPixelwise = "pixelwise";
inline constexpr std::string_view kPictorialOut = "pictorial_out";
inline constexpr std::string_view kToken = "token";
inline constexpr std::string_view kTokenDropout = "token_dropout";
inline constexpr std::string_view kTokenResidual = "token_residual";
inline constexpr std::string_view kTokenOut = "token_out";
inline constexpr std::string_view kTailOut = "tail_out";
}  // namespace role

using Shape = std::vector<int>;

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::input;
  std::vector<std::string> inputs;
  int filters = 0;            // conv output channels or dense units
  int factor = 2;             // avgpool / upsample
  double dropout_rate = 0.0;
  Activation activation = Activation::none;
  double residual_scale = 1.0;  // add: multiplier on every input after the first
  Shape target_shape;         // input / reshape
  Branch branch = Branch::input;
  int block = -1;             // encoder/decoder level or token stage
  std::string role;
};

struct GraphConfig {
  int depth = 7;
  std::vector<int> widths;  // per level; empty selects min(32 * 2^i, 512)
  int input_size = 256;
  int output_size = 256;
  int input_channels = 3;
  int output_channels = 44;
  int pixelwise_width = 1500;  // 0 disables the 1x1 layer before the output
  bool residual = true;
  bool captions = true;
  int token_slots = 8;
  int token_dims = 300;
  int bridge_units = 1024;
  bool multihot_tail = false;
  int multihot_hidden = 1024;
  int multihot_classes = 2048;

  std::vector<int> resolved_widths() const;
  void validate() const;
  // "key = value" lines, '#' comments.
  static GraphConfig parse(std::string_view text);
  std::string to_text() const;
};

struct Preset {
  std::string name;
  std::string description;
  GraphConfig config;
};

// Experiment rows exp1..exp15 plus the "ymap-1-8-44" alias of the last one.
const std::vector<Preset>& presets();
GraphConfig preset(std::string_view name);

struct GraphSpec {
  GraphConfig config;
  std::vector<LayerSpec> layers;  // topological order

  const LayerSpec* find(std::string_view name) const;
  LayerSpec* find(std::string_view name);
};

GraphSpec build_ymap_graph(const GraphConfig& config);

struct ShapeRow {
  std::string name;
  LayerKind kind;
  Branch branch;
  std::vector<Shape> inputs;
  Shape output;
  long long params = 0;
};

struct ShapeReport {
  std::vector<ShapeRow> rows;
  long long total_params = 0;
  std::map<Branch, long long> branch_params;
  Shape bridge_input;  // encoder output entering the bridge
  Shape pictorial_output;
  Shape token_output;

  const ShapeRow* find(std::string_view name) const;
  std::string table() const;
  nlohmann::json to_json() const;
};

// Forward shape propagation. Throws ShapeError naming the offending edge
// ("from -> to") on any mismatch.
ShapeReport infer_shapes(const GraphSpec& graph);

long long layer_parameters(const LayerSpec& layer, const std::vector<Shape>& input_shapes);

struct ParameterCount {
  long long total = 0;
  std::vector<std::pair<std::string, long long>> per_layer;
};

ParameterCount count_parameters(const GraphSpec& graph);

struct Violation {
  std::string rule;
  std::string layer;
  std::string message;
};

std::vector<Violation> validate_topology(const GraphSpec& graph);

struct StructureCounts {
  int encoder_blocks = 0;
  int decoder_blocks = 0;
  int bridge_dense = 0;
  int skip_edges = 0;
  int token_stages = 0;
};

StructureCounts count_structure(const GraphSpec& graph);

}  // namespace ymap::arch
