#include "ymap/arch.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ymap/error.hpp"

namespace ymap::arch {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::conv1x1: return "conv1x1";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::dense: return "dense";
    case LayerKind::reshape: return "reshape";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::none: return "none";
    case Activation::tanh: return "tanh";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::relu: return "relu";
  }
  return "?";
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::input: return "input";
    case Branch::encoder: return "encoder";
    case Branch::bridge: return "bridge";
    case Branch::pictorial: return "pictorial";
    case Branch::token: return "token";
    case Branch::tail: return "tail";
  }
  return "?";
}

namespace {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

long long product(const Shape& s) {
  long long p = 1;
  for (int v : s) p *= v;
  return p;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw FormatError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
  if (value == "false" || value == "no" || value == "0" || value == "off") return false;
  throw FormatError("config key '" + key + "' expects a boolean, got '" + value + "'");
}

}  // namespace

std::vector<int> GraphConfig::resolved_widths() const {
  if (!widths.empty()) return widths;
  std::vector<int> w;
  for (int i = 0; i < depth; ++i) w.push_back(std::min(32 << std::min(i, 20), 512));
  return w;
}

void GraphConfig::validate() const {
  if (depth < 1) throw ValueError("depth must be at least 1");
  if (depth > 16) throw ValueError("depth must be at most 16");
  if (!widths.empty() && static_cast<int>(widths.size()) != depth) {
    throw ValueError("expected " + std::to_string(depth) + " widths, got " +
                     std::to_string(widths.size()));
  }
  for (int w : widths) {
    if (w <= 0) throw ValueError("filter widths must be positive");
  }
  if (input_channels <= 0 || output_channels <= 0) throw ValueError("channel counts must be positive");
  if (input_size < (1 << depth)) {
    throw ValueError("input size " + std::to_string(input_size) + " is too small for depth " +
                     std::to_string(depth));
  }
  if (output_size <= 0 || output_size % (1 << depth) != 0) {
    throw ValueError("output size " + std::to_string(output_size) + " is not divisible by 2^" +
                     std::to_string(depth));
  }
  if (pixelwise_width < 0) throw ValueError("pixelwise width must be non-negative");
  if (bridge_units <= 0) throw ValueError("bridge units must be positive");
  if (captions && (token_slots <= 0 || token_dims <= 0)) {
    throw ValueError("token slots and dims must be positive");
  }
  if (multihot_tail && !captions) throw ValueError("multi-hot tail requires the token branch");
  if (multihot_tail && (multihot_hidden <= 0 || multihot_classes <= 0)) {
    throw ValueError("multi-hot sizes must be positive");
  }
}

GraphConfig GraphConfig::parse(std::string_view text) {
  GraphConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "preset") {
      c = preset(value);
    } else if (key == "depth") {
      c.depth = parse_int(key, value);
    } else if (key == "widths") {
      c.widths.clear();
      std::istringstream ws(value);
      std::string item;
      while (std::getline(ws, item, ',')) c.widths.push_back(parse_int(key, trim(item)));
    } else if (key == "input_size") {
      c.input_size = parse_int(key, value);
    } else if (key == "output_size") {
      c.output_size = parse_int(key, value);
    } else if (key == "input_channels") {
      c.input_channels = parse_int(key, value);
    } else if (key == "output_channels") {
      c.output_channels = parse_int(key, value);
    } else if (key == "pixelwise_width") {
      c.pixelwise_width = parse_int(key, value);
    } else if (key == "residual") {
      c.residual = parse_bool(key, value);
    } else if (key == "captions") {
      c.captions = parse_bool(key, value);
    } else if (key == "token_slots") {
      c.token_slots = parse_int(key, value);
    } else if (key == "token_dims") {
      c.token_dims = parse_int(key, value);
    } else if (key == "bridge_units") {
      c.bridge_units = parse_int(key, value);
    } else if (key == "multihot_tail") {
      c.multihot_tail = parse_bool(key, value);
    } else if (key == "multihot_hidden") {
      c.multihot_hidden = parse_int(key, value);
    } else if (key == "multihot_classes") {
      c.multihot_classes = parse_int(key, value);
    } else {
      throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string GraphConfig::to_text() const {
  std::ostringstream o;
  o << "depth = " << depth << "\n";
  o << "widths = ";
  const auto w = resolved_widths();
  for (std::size_t i = 0; i < w.size(); ++i) o << (i ? ", " : "") << w[i];
  o << "\n";
  o << "input_size = " << input_size << "\n";
  o << "output_size = " << output_size << "\n";
  o << "input_channels = " << input_channels << "\n";
  o << "output_channels = " << output_channels << "\n";
  o << "pixelwise_width = " << pixelwise_width << "\n";
  o << "residual = " << (residual ? "true" : "false") << "\n";
  o << "captions = " << (captions ? "true" : "false") << "\n";
  o << "token_slots = " << token_slots << "\n";
  o << "token_dims = " << token_dims << "\n";
  o << "bridge_units = " << bridge_units << "\n";
  o << "multihot_tail = " << (multihot_tail ? "true" : "false") << "\n";
  o << "multihot_hidden = " << multihot_hidden << "\n";
  o << "multihot_classes = " << multihot_classes << "\n";
  return o.str();
}

namespace {

Preset make_preset(int row, int depth, const char* size, int in, int out, int pixelwise,
                   bool residual, bool normals, bool pafs, bool captions, int groups) {
  GraphConfig c;
  c.depth = depth;
  c.input_size = in;
  c.output_size = out;
  c.pixelwise_width = pixelwise;
  c.residual = residual;
  c.captions = captions;
  c.output_channels = 17 + 1 + (normals ? 3 : 0) + (pafs ? 12 : 0) + groups;
  std::ostringstream d;
  d << "row " << row << ": depth " << depth << ", " << in << " -> " << out
    << ", reported size " << size;
  return {"exp" + std::to_string(row), d.str(), c};
}

std::vector<Preset> build_presets() {
  std::vector<Preset> p;
  p.push_back(make_preset(1, 4, "46M", 110, 48, 0, false, false, false, false, 0));
  p.push_back(make_preset(2, 4, "31M", 220, 96, 0, false, false, false, false, 0));
  // 100 is not reachable by four doublings; nearest reachable output is used.
  Preset p3 = make_preset(3, 4, "39M", 200, 96, 0, false, false, false, false, 0);
  p3.description += " (listed output 100)";
  p.push_back(p3);
  p.push_back(make_preset(4, 5, "48M", 256, 256, 0, false, false, false, false, 0));
  p.push_back(make_preset(5, 5, "54M", 300, 288, 0, false, false, false, false, 0));
  p.push_back(make_preset(6, 6, "70M", 256, 256, 0, false, false, false, false, 0));
  p.push_back(make_preset(7, 7, "231M", 128, 128, 0, false, false, false, false, 0));
  p.push_back(make_preset(8, 7, "136M", 420, 384, 0, false, true, false, false, 0));
  p.push_back(make_preset(9, 7, "278M", 420, 384, 0, false, true, false, false, 19));
  p.push_back(make_preset(10, 8, "401M", 420, 256, 0, false, true, false, false, 19));
  p.push_back(make_preset(11, 7, "315M", 256, 256, 0, false, true, true, false, 3));
  p.push_back(make_preset(12, 7, "316M", 256, 256, 1600, false, true, true, false, 3));
  p.push_back(make_preset(13, 7, "172M", 256, 256, 1600, true, true, true, false, 3));
  p.push_back(make_preset(14, 7, "213M", 256, 256, 1700, true, true, true, false, 2));
  p.push_back(make_preset(15, 7, "298M", 256, 256, 1500, true, true, true, true, 11));
  Preset alias = p.back();
  alias.name = "ymap-1-8-44";
  alias.description = "final configuration (same as exp15)";
  p.push_back(alias);
  return p;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = build_presets();
  return table;
}

GraphConfig preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p.config;
  }
  throw ValueError("unknown preset '" + std::string(name) + "'");
}

const LayerSpec* GraphSpec::find(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

LayerSpec* GraphSpec::find(std::string_view name) {
  for (auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

GraphSpec build_ymap_graph(const GraphConfig& config) {
  config.validate();
  GraphSpec g;
  g.config = config;
  const auto widths = config.resolved_widths();
  const int depth = config.depth;

  auto push = [&g](LayerSpec l) -> const std::string& {
    g.layers.push_back(std::move(l));
    return g.layers.back().name;
  };

  LayerSpec in;
  in.name = "input";
  in.kind = LayerKind::input;
  in.target_shape = {config.input_size, config.input_size, config.input_channels};
  in.branch = Branch::input;
  std::string prev = push(in);

  std::vector<std::string> skips(depth);
  int spatial = config.input_size;
  for (int b = 0; b < depth; ++b) {
    const std::string p = "enc" + std::to_string(b) + "_";
    LayerSpec a;
    a.name = p + "conv_a";
    a.kind = LayerKind::conv3x3;
    a.inputs = {prev};
    a.filters = widths[b];
    a.activation = Activation::leaky_relu;
    a.branch = Branch::encoder;
    a.block = b;
    push(a);
    LayerSpec c = a;
    c.name = p + "conv_b";
    c.inputs = {a.name};
    push(c);
    std::string out = c.name;
    if (config.residual) {
      LayerSpec r;
      r.name = p + "add";
      r.kind = LayerKind::add;
      r.inputs = {a.name, c.name};
      r.branch = Branch::encoder;
      r.block = b;
      r.role = std::string(role::kEncoderResidual);
      out = push(r);
    }
    skips[b] = out;
    LayerSpec pool;
    pool.name = p + "pool";
    pool.kind = LayerKind::avgpool;
    pool.inputs = {out};
    pool.branch = Branch::encoder;
    pool.block = b;
    prev = push(pool);
    spatial /= 2;
  }

  const int start = config.output_size >> depth;
  const int deepest = widths[depth - 1];
  std::string bridge_out;
  for (int i = 0; i < 3; ++i) {
    LayerSpec d;
    d.name = "bridge_dense" + std::to_string(i);
    d.kind = LayerKind::dense;
    d.inputs = {prev};
    d.filters = i < 2 ? config.bridge_units : start * start * deepest;
    d.activation = Activation::leaky_relu;
    d.branch = Branch::bridge;
    d.block = i;
    prev = push(d);
  }
  bridge_out = prev;

  LayerSpec reshape;
  reshape.name = "dec_reshape";
  reshape.kind = LayerKind::reshape;
  reshape.inputs = {bridge_out};
  reshape.target_shape = {start, start, deepest};
  reshape.branch = Branch::pictorial;
  prev = push(reshape);
  for (int b = depth - 1; b >= 0; --b) {
    const std::string p = "dec" + std::to_string(b) + "_";
    LayerSpec up;
    up.name = p + "up";
    up.kind = LayerKind::upsample;
    up.inputs = {prev};
    up.branch = Branch::pictorial;
    up.block = b;
    push(up);
    LayerSpec a;
    a.name = p + "conv_a";
    a.kind = LayerKind::conv3x3;
    a.inputs = {up.name};
    a.filters = widths[b];
    a.activation = Activation::leaky_relu;
    a.branch = Branch::pictorial;
    a.block = b;
    push(a);
    LayerSpec c = a;
    c.name = p + "conv_b";
    c.inputs = {a.name};
    prev = push(c);
    if (config.residual) {
      LayerSpec s;
      s.name = p + "skip";
      s.kind = LayerKind::add;
      s.inputs = {c.name, skips[b]};
      s.branch = Branch::pictorial;
      s.block = b;
      s.role = std::string(role::kSkip);
      prev = push(s);
    }
  }
  if (config.pixelwise_width > 0) {
    LayerSpec px;
    px.name = "pixelwise";
    px.kind = LayerKind::conv1x1;
    px.inputs = {prev};
    px.filters = config.pixelwise_width;
    px.activation = Activation::leaky_relu;
    px.branch = Branch::pictorial;
    px.role = std::string(role::kPixelwise);
    prev = push(px);
  }
  LayerSpec pic;
  pic.name = "pictorial_out";
  pic.kind = LayerKind::conv1x1;
  pic.inputs = {prev};
  pic.filters = config.output_channels;
  pic.activation = Activation::tanh;
  pic.branch = Branch::pictorial;
  pic.role = std::string(role::kPictorialOut);
  push(pic);

  if (!config.captions) return g;

  std::vector<std::string> stage_out;
  for (int k = 0; k < config.token_slots; ++k) {
    const std::string p = "tok" + std::to_string(k) + "_";
    LayerSpec d;
    d.name = p + "dense";
    d.kind = LayerKind::dense;
    d.inputs = {bridge_out};
    d.filters = config.token_dims;
    d.activation = Activation::tanh;
    d.branch = Branch::token;
    d.block = k;
    d.role = std::string(role::kToken);
    push(d);
    LayerSpec drop;
    drop.name = p + "dropout";
    drop.kind = LayerKind::dropout;
    drop.inputs = {d.name};
    drop.dropout_rate = 0.2 * static_cast<double>(config.token_slots - k) / config.token_slots;
    drop.branch = Branch::token;
    drop.block = k;
    drop.role = std::string(role::kTokenDropout);
    std::string out = push(drop);
    if (k > 0) {
      LayerSpec r;
      r.name = p + "residual";
      r.kind = LayerKind::add;
      r.inputs = {drop.name, stage_out.back()};
      r.residual_scale = 0.3;
      r.branch = Branch::token;
      r.block = k;
      r.role = std::string(role::kTokenResidual);
      out = push(r);
    }
    stage_out.push_back(out);
  }
  LayerSpec cat;
  cat.name = "token_concat";
  cat.kind = LayerKind::concat;
  cat.inputs = stage_out;
  cat.branch = Branch::token;
  push(cat);
  LayerSpec tok;
  tok.name = "token_out";
  tok.kind = LayerKind::reshape;
  tok.inputs = {cat.name};
  tok.target_shape = {config.token_slots, config.token_dims};
  tok.branch = Branch::token;
  tok.role = std::string(role::kTokenOut);
  push(tok);

  if (config.multihot_tail) {
    LayerSpec h;
    h.name = "tail_dense0";
    h.kind = LayerKind::dense;
    h.inputs = {cat.name};
    h.filters = config.multihot_hidden;
    h.activation = Activation::leaky_relu;
    h.branch = Branch::tail;
    push(h);
    LayerSpec o;
    o.name = "tail_out";
    o.kind = LayerKind::dense;
    o.inputs = {h.name};
    o.filters = config.multihot_classes;
    o.activation = Activation::sigmoid;
    o.branch = Branch::tail;
    o.role = std::string(role::kTailOut);
    push(o);
  }
  return g;
}

long long layer_parameters(const LayerSpec& layer, const std::vector<Shape>& in) {
  switch (layer.kind) {
    case LayerKind::conv3x3:
    case LayerKind::conv1x1: {
      if (in.empty() || in[0].size() != 3) return 0;
      const long long k = layer.kind == LayerKind::conv3x3 ? 3 : 1;
      return (k * k * in[0][2] + 1) * static_cast<long long>(layer.filters);
    }
    case LayerKind::dense: {
      if (in.empty()) return 0;
      return (product(in[0]) + 1) * static_cast<long long>(layer.filters);
    }
    default:
      return 0;
  }
}

namespace {

[[noreturn]] void edge_error(const std::string& from, const std::string& to, const std::string& why) {
  throw ShapeError("shape mismatch on edge '" + from + " -> " + to + "': " + why);
}

Shape infer_layer(const LayerSpec& l, const std::vector<Shape>& in) {
  auto need_single = [&] {
    if (in.size() != 1) {
      throw ShapeError("layer '" + l.name + "' (" + std::string(to_string(l.kind)) +
                       ") expects one input, has " + std::to_string(in.size()));
    }
  };
  auto need_spatial = [&] {
    need_single();
    if (in[0].size() != 3) edge_error(l.inputs[0], l.name, "expected HxWxC, got " + shape_str(in[0]));
  };
  switch (l.kind) {
    case LayerKind::input:
      if (!in.empty()) throw ShapeError("input layer '" + l.name + "' must not have inputs");
      if (l.target_shape.empty()) throw ShapeError("input layer '" + l.name + "' has no shape");
      return l.target_shape;
    case LayerKind::conv3x3:
    case LayerKind::conv1x1:
      need_spatial();
      if (l.filters <= 0) throw ShapeError("layer '" + l.name + "' has no filters");
      return {in[0][0], in[0][1], l.filters};
    case LayerKind::avgpool: {
      need_spatial();
      if (l.factor < 1) throw ShapeError("layer '" + l.name + "' has invalid pool size");
      const int h = in[0][0] / l.factor, w = in[0][1] / l.factor;
      if (h < 1 || w < 1) edge_error(l.inputs[0], l.name, "pooling " + shape_str(in[0]) + " to zero size");
      return {h, w, in[0][2]};
    }
    case LayerKind::upsample:
      need_spatial();
      if (l.factor < 1) throw ShapeError("layer '" + l.name + "' has invalid upsample factor");
      return {in[0][0] * l.factor, in[0][1] * l.factor, in[0][2]};
    case LayerKind::dense:
      need_single();
      if (l.filters <= 0) throw ShapeError("layer '" + l.name + "' has no units");
      return {l.filters};
    case LayerKind::reshape:
      need_single();
      if (product(in[0]) != product(l.target_shape)) {
        edge_error(l.inputs[0], l.name,
                   "cannot reshape " + shape_str(in[0]) + " to " + shape_str(l.target_shape));
      }
      return l.target_shape;
    case LayerKind::add:
      if (in.empty()) throw ShapeError("add layer '" + l.name + "' has no inputs");
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i] != in[0]) {
          edge_error(l.inputs[i], l.name,
                     shape_str(in[i]) + " does not match " + shape_str(in[0]) + " from '" +
                         l.inputs[0] + "'");
        }
      }
      return in[0];
    case LayerKind::concat: {
      if (in.empty()) throw ShapeError("concat layer '" + l.name + "' has no inputs");
      Shape out = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) {
        const bool same_rank = in[i].size() == out.size();
        const bool lead_equal =
            same_rank && std::equal(in[i].begin(), in[i].end() - 1, out.begin());
        if (!lead_equal) {
          edge_error(l.inputs[i], l.name,
                     shape_str(in[i]) + " cannot be concatenated with " + shape_str(in[0]));
        }
        out.back() += in[i].back();
      }
      return out;
    }
    case LayerKind::dropout:
    case LayerKind::activation:
      need_single();
      return in[0];
  }
  return {};
}

}  // namespace

const ShapeRow* ShapeReport::find(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

ShapeReport infer_shapes(const GraphSpec& graph) {
  ShapeReport report;
  std::unordered_map<std::string, Shape> shapes;
  for (const auto& l : graph.layers) {
    if (shapes.count(l.name)) throw ShapeError("duplicate layer name '" + l.name + "'");
    std::vector<Shape> in;
    for (const auto& src : l.inputs) {
      auto it = shapes.find(src);
      if (it == shapes.end()) {
        throw ShapeError("edge '" + src + " -> " + l.name + "' references an unknown or later layer");
      }
      in.push_back(it->second);
    }
    ShapeRow row;
    row.name = l.name;
    row.kind = l.kind;
    row.branch = l.branch;
    row.output = infer_layer(l, in);
    row.params = layer_parameters(l, in);
    row.inputs = std::move(in);
    shapes[l.name] = row.output;
    report.total_params += row.params;
    report.branch_params[l.branch] += row.params;
    if (l.branch == Branch::bridge && report.bridge_input.empty() && !row.inputs.empty()) {
      report.bridge_input = row.inputs[0];
    }
    if (l.role == role::kPictorialOut) report.pictorial_output = row.output;
    if (l.role == role::kTokenOut) report.token_output = row.output;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ShapeReport::table() const {
  std::ostringstream o;
  o << std::left << std::setw(18) << "layer" << std::setw(11) << "kind" << std::setw(11)
    << "branch" << std::setw(16) << "output" << std::right << std::setw(14) << "params"
    << "\n";
  for (const auto& r : rows) {
    o << std::left << std::setw(18) << r.name << std::setw(11) << to_string(r.kind)
      << std::setw(11) << to_string(r.branch) << std::setw(16) << shape_str(r.output)
      << std::right << std::setw(14) << r.params << "\n";
  }
  o << "\n";
  for (const auto& [branch, count] : branch_params) {
    o << std::left << std::setw(12) << to_string(branch) << std::right << std::setw(14) << count
      << "\n";
  }
  o << std::left << std::setw(12) << "total" << std::right << std::setw(14) << total_params
    << "\n";
  if (!bridge_input.empty()) o << "bridge input " << shape_str(bridge_input) << "\n";
  if (!pictorial_output.empty()) o << "pictorial output " << shape_str(pictorial_output) << "\n";
  if (!token_output.empty()) o << "token output " << shape_str(token_output) << "\n";
  return o.str();
}

nlohmann::json ShapeReport::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : rows) {
    layers.push_back({{"name", r.name},
                      {"kind", std::string(to_string(r.kind))},
                      {"branch", std::string(to_string(r.branch))},
                      {"inputs", r.inputs},
                      {"output", r.output},
                      {"params", r.params}});
  }
  nlohmann::json branches = nlohmann::json::object();
  for (const auto& [branch, count] : branch_params) branches[std::string(to_string(branch))] = count;
  return {{"layers", layers},
          {"total_params", total_params},
          {"branch_params", branches},
          {"bridge_input", bridge_input},
          {"pictorial_output", pictorial_output},
          {"token_output", token_output}};
}

ParameterCount count_parameters(const GraphSpec& graph) {
  const ShapeReport report = infer_shapes(graph);
  ParameterCount count;
  for (const auto& r : report.rows) {
    count.total += r.params;
    count.per_layer.emplace_back(r.name, r.params);
  }
  return count;
}

std::vector<Violation> validate_topology(const GraphSpec& graph) {
  std::vector<Violation> out;
  auto report = [&out](std::string rule, std::string layer, std::string message) {
    out.push_back({std::move(rule), std::move(layer), std::move(message)});
  };
  const GraphConfig& cfg = graph.config;

  std::unordered_map<std::string, const LayerSpec*> by_name;
  std::unordered_map<std::string, std::vector<const LayerSpec*>> consumers;
  for (const auto& l : graph.layers) {
    for (const auto& src : l.inputs) {
      if (!by_name.count(src)) {
        report("wiring", l.name, "input '" + src + "' is not an earlier layer");
      } else {
        consumers[src].push_back(&l);
      }
    }
    if (by_name.count(l.name)) report("wiring", l.name, "duplicate layer name");
    by_name[l.name] = &l;

    switch (l.kind) {
      case LayerKind::conv3x3:
      case LayerKind::conv1x1:
      case LayerKind::dense:
        if (l.filters <= 0) report("parameters", l.name, "filter count must be positive");
        break;
      case LayerKind::avgpool:
      case LayerKind::upsample:
        if (l.factor < 1) report("parameters", l.name, "factor must be at least 1");
        break;
      case LayerKind::reshape:
      case LayerKind::input:
        if (l.target_shape.empty()) report("parameters", l.name, "target shape missing");
        break;
      case LayerKind::dropout:
        if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
          report("dropout_range", l.name, "dropout rate must lie in [0,1)");
        }
        break;
      default:
        break;
    }
  }

  int inputs = 0;
  for (const auto& l : graph.layers) inputs += l.kind == LayerKind::input;
  if (inputs != 1) {
    report("single_input", "", "expected exactly one input layer, found " + std::to_string(inputs));
  }

  // Bridge: three chained dense layers.
  std::vector<const LayerSpec*> bridge;
  for (const auto& l : graph.layers) {
    if (l.branch == Branch::bridge && l.kind == LayerKind::dense) bridge.push_back(&l);
  }
  if (bridge.size() != 3) {
    report("bridge", bridge.empty() ? "" : bridge.front()->name,
           "bridge must have 3 dense layers, found " + std::to_string(bridge.size()));
  }
  for (std::size_t i = 1; i < bridge.size(); ++i) {
    if (bridge[i]->inputs != std::vector<std::string>{bridge[i - 1]->name}) {
      report("bridge", bridge[i]->name, "bridge dense layers must form a chain");
    }
  }
  if (!bridge.empty()) {
    const auto& first_in = bridge.front()->inputs;
    if (first_in.size() != 1 || !by_name.count(first_in[0]) ||
        by_name[first_in[0]]->branch != Branch::encoder) {
      report("y_shape", bridge.front()->name, "bridge must be fed by the encoder path");
    }
  }

  // Y shape: both outputs descend from the bridge end, branches do not cross.
  const std::string bridge_end = bridge.empty() ? std::string() : bridge.back()->name;
  auto descends_from_bridge = [&](const std::string& start) {
    std::vector<std::string> stack{start};
    std::set<std::string> seen;
    while (!stack.empty()) {
      const std::string n = stack.back();
      stack.pop_back();
      if (n == bridge_end) return true;
      if (!seen.insert(n).second || !by_name.count(n)) continue;
      for (const auto& s : by_name[n]->inputs) stack.push_back(s);
    }
    return false;
  };
  const LayerSpec* pic_out = nullptr;
  const LayerSpec* tok_out = nullptr;
  for (const auto& l : graph.layers) {
    if (l.role == role::kPictorialOut) pic_out = &l;
    if (l.role == role::kTokenOut) tok_out = &l;
  }
  if (!pic_out) {
    report("y_shape", "", "pictorial output layer missing");
  } else if (!descends_from_bridge(pic_out->name)) {
    report("y_shape", pic_out->name, "pictorial output is not reached from the bridge");
  }
  if (cfg.captions) {
    if (!tok_out) {
      report("y_shape", "", "token output layer missing");
    } else if (!descends_from_bridge(tok_out->name)) {
      report("y_shape", tok_out->name, "token output is not reached from the bridge");
    }
  }
  for (const auto& l : graph.layers) {
    for (const auto& src : l.inputs) {
      auto it = by_name.find(src);
      if (it == by_name.end()) continue;
      const Branch from = it->second->branch;
      const bool crossing = (l.branch == Branch::pictorial && from == Branch::token) ||
                            ((l.branch == Branch::token || l.branch == Branch::tail) &&
                             from == Branch::pictorial);
      if (crossing) report("y_shape", l.name, "edge from '" + src + "' crosses output branches");
    }
  }

  // Skip edges from every encoder block to the decoder.
  if (cfg.residual) {
    std::set<int> blocks;
    for (const auto& l : graph.layers) {
      if (l.branch == Branch::encoder && l.block >= 0) blocks.insert(l.block);
    }
    for (int b : blocks) {
      const LayerSpec* source = nullptr;
      for (const auto& l : graph.layers) {
        if (l.branch == Branch::encoder && l.block == b && l.role == role::kEncoderResidual) {
          source = &l;
        }
      }
      const std::string block_name = "enc" + std::to_string(b);
      if (!source) {
        report("encoder_residual", block_name, "encoder block has no residual add");
        for (const auto& l : graph.layers) {
          if (l.branch == Branch::encoder && l.block == b &&
              (l.kind == LayerKind::conv3x3 || l.kind == LayerKind::conv1x1)) {
            source = &l;
          }
        }
      }
      bool linked = false;
      if (source) {
        for (const LayerSpec* c : consumers[source->name]) {
          linked |= c->kind == LayerKind::add && c->branch == Branch::pictorial;
        }
      }
      if (!linked) report("skip_edge", block_name, "encoder block has no skip edge to the decoder");
    }
  }

  // Activations.
  for (const auto& l : graph.layers) {
    const bool parametric = l.kind == LayerKind::conv3x3 || l.kind == LayerKind::conv1x1 ||
                            l.kind == LayerKind::dense || l.kind == LayerKind::activation;
    if (!parametric) continue;
    if (l.role == role::kTailOut) continue;  // multi-hot labels are not a tanh output
    const bool is_output = l.role == role::kPictorialOut || l.role == role::kToken;
    if (is_output && l.activation != Activation::tanh) {
      report("output_activation", l.name,
             "output layer uses " + std::string(to_string(l.activation)) + ", expected tanh");
    } else if (!is_output && l.activation != Activation::leaky_relu) {
      report("hidden_activation", l.name,
             "hidden layer uses " + std::string(to_string(l.activation)) + ", expected leaky_relu");
    }
  }

  if (cfg.captions) {
    std::vector<const LayerSpec*> drops, residuals;
    int stages = 0;
    for (const auto& l : graph.layers) {
      if (l.role == role::kTokenDropout) drops.push_back(&l);
      if (l.role == role::kTokenResidual) residuals.push_back(&l);
      if (l.role == role::kToken) ++stages;
    }
    if (stages != cfg.token_slots) {
      report("token_stages", "", "expected " + std::to_string(cfg.token_slots) +
                                     " token stages, found " + std::to_string(stages));
    }
    if (static_cast<int>(drops.size()) != stages) {
      report("token_dropout", "", "every token stage needs a dropout layer");
    }
    for (std::size_t i = 0; i < drops.size(); ++i) {
      if (i == 0 && std::abs(drops[0]->dropout_rate - 0.2) > 1e-12) {
        report("token_dropout", drops[0]->name, "first token dropout must be 0.2");
      }
      if (i > 0 && drops[i]->dropout_rate > drops[i - 1]->dropout_rate) {
        report("token_dropout", drops[i]->name, "token dropout increases across stages");
      }
    }
    if (stages > 0 && static_cast<int>(residuals.size()) != stages - 1) {
      report("token_residual", "", "expected " + std::to_string(stages - 1) +
                                       " token residual edges, found " +
                                       std::to_string(residuals.size()));
    }
    for (const LayerSpec* r : residuals) {
      if (std::abs(r->residual_scale - 0.3) > 1e-12 || r->inputs.size() != 2) {
        report("token_residual", r->name, "token residual must add the previous token scaled by 0.3");
      }
    }
  }

  if (cfg.pixelwise_width > 0 && pic_out) {
    const LayerSpec* before =
        pic_out->inputs.size() == 1 && by_name.count(pic_out->inputs[0]) ? by_name[pic_out->inputs[0]]
                                                                          : nullptr;
    if (!before || before->kind != LayerKind::conv1x1 || before->filters != cfg.pixelwise_width) {
      report("pixelwise", pic_out->name,
             "pictorial output must follow a 1x1 convolution of width " +
                 std::to_string(cfg.pixelwise_width));
    }
  }
  return out;
}

StructureCounts count_structure(const GraphSpec& graph) {
  StructureCounts s;
  std::set<int> enc;
  std::unordered_map<std::string, Branch> branch_of;
  for (const auto& l : graph.layers) {
    branch_of[l.name] = l.branch;
    if (l.branch == Branch::encoder && l.block >= 0) enc.insert(l.block);
    if (l.branch == Branch::pictorial && l.kind == LayerKind::upsample) ++s.decoder_blocks;
    if (l.branch == Branch::bridge && l.kind == LayerKind::dense) ++s.bridge_dense;
    if (l.role == role::kToken) ++s.token_stages;
    if (l.branch == Branch::pictorial && l.kind == LayerKind::add) {
      for (const auto& src : l.inputs) {
        auto it = branch_of.find(src);
        if (it != branch_of.end() && it->second == Branch::encoder) ++s.skip_edges;
      }
    }
  }
  s.encoder_blocks = static_cast<int>(enc.size());
  return s;
}

}  // namespace ymap::arch
