#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "ymap/arch.hpp"
#include "ymap/augment.hpp"
#include "ymap/captions.hpp"
#include "ymap/coco.hpp"
#include "ymap/depth_normals.hpp"
#include "ymap/error.hpp"
#include "ymap/image_io.hpp"
#include "ymap/loss.hpp"
#include "ymap/pose.hpp"
#include "ymap/targets.hpp"

namespace ymap::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kCommands = {"ingest",          "synth-targets", "refine",
                                            "decode-pose",     "decode-captions", "eval",
                                            "augment-preview", "arch-check"};

struct Globals {
  std::string root = ".";
  int jobs = 0;
  std::uint64_t seed = 0;
  std::string config;
};

// Options read from the --config JSON file. Command flags override it.
struct PipelineConfig {
  json raw = json::object();
  AugmentConfig augment;
  LossConfig loss;
  RefineParams refine;
  DecodeThresholds decode;
  DecodeCaptionParams captions;
  std::string class_table;
  std::string embeddings;
  std::string vocabulary;
};

class Context {
 public:
  Context(const Globals& g, std::vector<std::string> argv) : globals_(g), argv_(std::move(argv)) {
    jobs_ = g.jobs > 0 ? g.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (!g.config.empty()) load_config(resolve(g.config));
  }

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(globals_.root) / path;
  }

  fs::path require(const std::string& p) const {
    const fs::path path = resolve(p);
    if (!fs::exists(path)) throw MissingFileError("input not found: " + path.string());
    return path;
  }

  Manifest manifest(const std::string& command) const {
    Manifest m(command, argv_, globals_.seed, jobs_);
    if (!globals_.config.empty()) {
      m.add_input(resolve(globals_.config));
      m.set("config", config_.raw);
    }
    return m;
  }

  int jobs() const { return jobs_; }
  std::uint64_t seed() const { return globals_.seed; }
  const PipelineConfig& config() const { return config_; }

 private:
  void load_config(const fs::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
      j = json::parse(text, nullptr, true, true);
    } catch (const json::exception& e) {
      throw FormatError("config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError("config " + path.string() + " must be a JSON object");
    config_.raw = j;
    try {
      if (j.contains("augment")) config_.augment = AugmentConfig::from_json(j["augment"]);
      if (j.contains("loss")) {
        const json& l = j["loss"];
        config_.loss.weight = l.value("weight", config_.loss.weight);
        if (l.contains("gains")) {
          const auto gains = l["gains"].get<std::vector<double>>();
          if (gains.size() != kNumLossTerms) throw FormatError("loss.gains needs 7 values");
          std::copy(gains.begin(), gains.end(), config_.loss.gains.begin());
        }
        validate_loss_config(config_.loss);
      }
      if (j.contains("refine")) {
        const json& r = j["refine"];
        config_.refine.iterations = r.value("iterations", config_.refine.iterations);
        config_.refine.alpha = r.value("alpha", config_.refine.alpha);
        config_.refine.far_mask_threshold =
            r.value("far_mask_threshold", config_.refine.far_mask_threshold);
      }
      if (j.contains("decode_pose")) {
        const json& d = j["decode_pose"];
        config_.decode.peak = d.value("peak", config_.decode.peak);
        config_.decode.limb = d.value("limb", config_.decode.limb);
        config_.decode.samples = d.value("samples", config_.decode.samples);
      }
      if (j.contains("decode_captions")) {
        const json& d = j["decode_captions"];
        config_.captions.norm_threshold = d.value("norm_threshold", config_.captions.norm_threshold);
        config_.captions.similarity_threshold =
            d.value("similarity_threshold", config_.captions.similarity_threshold);
      }
      config_.class_table = j.value("class_table", std::string());
      config_.embeddings = j.value("embeddings", std::string());
      config_.vocabulary = j.value("vocabulary", std::string());
    } catch (const json::exception& e) {
      throw FormatError("config " + path.string() + ": " + e.what());
    }
  }

  Globals globals_;
  std::vector<std::string> argv_;
  int jobs_ = 1;
  PipelineConfig config_;
};

// Runs f(i) for i in [0, n) on up to `jobs` threads. The exception of the
// lowest failing index is rethrown, so failures are reported deterministically.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(jobs), 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<fs::path> collect_files(const Context& ctx, const std::vector<std::string>& inputs,
                                    const std::string& extension) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p = ctx.require(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == extension) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

ClassGroupTable load_class_table(const Context& ctx, const std::string& flag, Manifest& m) {
  const std::string& name = flag.empty() ? ctx.config().class_table : flag;
  if (name.empty()) return ClassGroupTable::default_table();
  const fs::path p = ctx.require(name);
  m.add_input(p);
  return ClassGroupTable::load(p);
}

std::vector<AnnotationRecord> load_records(const Context& ctx, const std::vector<std::string>& files,
                                           const ClassGroupTable& table, Manifest& m) {
  std::vector<fs::path> paths;
  for (const auto& f : files) paths.push_back(ctx.require(f));
  for (const auto& p : paths) m.add_input(p);
  return parse_annotations(paths, table);
}

json transform_json(const ScaleOffset& t) {
  return {{"scale", t.scale}, {"offset_x", t.offset_x}, {"offset_y", t.offset_y}};
}

json people_json(const std::vector<SkeletonAnnotation>& people) {
  json out = json::array();
  for (const auto& p : people) {
    json joints = json::array();
    for (const auto& j : p.joints) {
      joints.push_back({j.x, j.y, static_cast<int>(j.visibility)});
    }
    out.push_back(joints);
  }
  return out;
}

// Teacher raster in original image coordinates, or already in the frame.
ImageGrid to_frame(const ImageGrid& src, const AnnotationRecord& rec, const ScaleOffset& t,
                   Interpolation mode, const fs::path& origin) {
  if (src.height() == kFrameSize && src.width() == kFrameSize) return src;
  if (src.height() != rec.height || src.width() != rec.width) {
    throw ShapeError(origin.string() + " is " + std::to_string(src.width()) + "x" +
                     std::to_string(src.height()) + ", expected " + std::to_string(rec.width) + "x" +
                     std::to_string(rec.height) + " or the 256x256 frame");
  }
  return warp(src, t, kFrameSize, kFrameSize, mode);
}

std::optional<fs::path> teacher_file(const Context& ctx, const std::string& dir,
                                     const AnnotationRecord& rec) {
  if (dir.empty()) return std::nullopt;
  const fs::path p = ctx.resolve(dir) / (rec.stem() + ".png");
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::vector<std::string> annotations;
  std::string class_table;
  std::string images;
  std::string out = "ingest";
};

int cmd_ingest(const Context& ctx, const IngestOptions& o) {
  Manifest m = ctx.manifest("ingest");
  m.begin_phase("parse");
  const ClassGroupTable table = load_class_table(ctx, o.class_table, m);
  const auto records = load_records(ctx, o.annotations, table, m);
  const fs::path out = ctx.resolve(o.out);
  m.begin_phase("write");
  std::vector<json> summaries(records.size());
  parallel_for(records.size(), ctx.jobs(), [&](std::size_t i) {
    const auto& rec = records[i];
    const ScaleOffset t = letterbox_transform(rec.height, rec.width);
    json instances = json::array();
    for (const auto& inst : rec.instances) {
      const int g = assign_class_group(inst.category_id, table);
      instances.push_back({{"category_id", inst.category_id},
                           {"category", table.entry(inst.category_id).name},
                           {"group", std::string(kGroupNames[g])},
                           {"parts", inst.shapes.size()}});
    }
    std::vector<SkeletonAnnotation> framed;
    for (const auto& p : rec.people) framed.push_back(p.transformed(t));
    json doc = {{"image_id", rec.image_id},   {"file_name", rec.file_name},
                {"width", rec.width},         {"height", rec.height},
                {"transform", transform_json(t)}, {"people", people_json(framed)},
                {"instances", instances},     {"captions", rec.captions}};
    write_text_atomic(out / (rec.stem() + ".json"), doc.dump(2) + "\n");
    if (!o.images.empty()) {
      const fs::path img = ctx.resolve(o.images) / rec.file_name;
      if (!fs::exists(img)) throw MissingFileError("image not found: " + img.string());
      const ImageGrid rgb = normalize_rgb(read_png_rgb8(img));
      write_png8(letterbox(rgb).image, out / (rec.stem() + ".png"));
    }
    summaries[i] = {{"image_id", rec.image_id},
                    {"stem", rec.stem()},
                    {"people", rec.people.size()},
                    {"instances", rec.instances.size()},
                    {"captions", rec.captions.size()}};
  });
  for (const auto& rec : records) {
    m.add_output(out / (rec.stem() + ".json"));
    if (!o.images.empty()) m.add_output(out / (rec.stem() + ".png"));
  }
  write_text_atomic(out / "index.json", json(summaries).dump(2) + "\n");
  m.add_output(out / "index.json");
  m.set("records", records.size());
  m.write(out / "manifest.json");
  std::cout << "ingested " << records.size() << " records into " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth-targets

struct SynthOptions {
  std::vector<std::string> annotations;
  std::string class_table;
  std::string depth_dir;
  std::string text_dir;
  std::string embeddings;
  std::string vocab;
  int epoch = 0;
  std::string out = "targets";
};

int cmd_synth(const Context& ctx, const SynthOptions& o) {
  if (o.epoch < 0) throw ValueError("--epoch must be non-negative");
  Manifest m = ctx.manifest("synth-targets");
  m.begin_phase("parse");
  const ClassGroupTable table = load_class_table(ctx, o.class_table, m);
  const auto records = load_records(ctx, o.annotations, table, m);
  const fs::path out = ctx.resolve(o.out);

  const std::string emb_name = o.embeddings.empty() ? ctx.config().embeddings : o.embeddings;
  const std::string vocab_name = o.vocab.empty() ? ctx.config().vocabulary : o.vocab;
  std::optional<EmbeddingTable> embeddings;
  std::optional<Vocabulary> vocab;
  if (!emb_name.empty()) {
    m.begin_phase("vocabulary");
    const fs::path p = ctx.require(emb_name);
    m.add_input(p);
    embeddings = load_embeddings(p);
    if (!vocab_name.empty()) {
      const fs::path vp = ctx.require(vocab_name);
      m.add_input(vp);
      vocab = load_vocabulary(vp);
    } else {
      std::vector<std::string> corpus;
      for (const auto& r : records) corpus.insert(corpus.end(), r.captions.begin(), r.captions.end());
      vocab = build_vocab(corpus, *embeddings);
      save_vocabulary(*vocab, *embeddings, out / "vocab.txt");
      m.add_output(out / "vocab.txt");
    }
  } else if (!vocab_name.empty()) {
    throw ValueError("--vocab needs --embeddings");
  }

  m.begin_phase("synthesize");
  std::vector<json> reports(records.size());
  parallel_for(records.size(), ctx.jobs(), [&](std::size_t i) {
    const auto& rec = records[i];
    const ScaleOffset t = letterbox_transform(rec.height, rec.width);
    std::vector<SkeletonAnnotation> people;
    for (const auto& p : rec.people) people.push_back(p.transformed(t));

    TargetParts parts;
    HeatmapReport hm = synth_joint_heatmaps_at_epoch(people, o.epoch);
    parts.joints = std::move(hm.heatmaps);
    parts.pafs = synth_pafs_at_epoch(people, o.epoch);
    if (auto p = teacher_file(ctx, o.depth_dir, rec)) {
      parts.depth = to_frame(read_depth16(*p), rec, t, Interpolation::bilinear, *p);
    } else {
      parts.depth = ImageGrid(kFrameSize, kFrameSize, 1);
    }
    parts.normals = normals_from_depth(parts.depth);
    std::optional<ImageGrid> text;
    if (auto p = teacher_file(ctx, o.text_dir, rec)) {
      text = to_frame(read_mask_png(*p), rec, t, Interpolation::nearest, *p);
    }
    parts.masks = synth_group_masks(rec, table, t, text ? &*text : nullptr);
    if (vocab && !rec.captions.empty()) {
      parts.tokens = encode_caption(rec.captions.front(), *vocab, *embeddings);
    } else {
      parts.tokens.assign(static_cast<std::size_t>(kTokenSlots) * kTokenDims, 0.0f);
    }
    save_target_stack(assemble_targets(parts), out / (rec.stem() + ".f32"));
    reports[i] = {{"stem", rec.stem()},
                  {"people", people.size()},
                  {"joints_out_of_frame", hm.skipped_out_of_frame},
                  {"teacher_depth", !o.depth_dir.empty() && teacher_file(ctx, o.depth_dir, rec).has_value()},
                  {"teacher_text", text.has_value()}};
  });
  for (const auto& rec : records) {
    m.add_output(out / (rec.stem() + ".f32"));
    m.add_output(sidecar_path(out / (rec.stem() + ".f32")));
  }
  m.set("epoch", o.epoch);
  m.set("joint_size", decay_at_epoch(DecaySchedule::joints(), o.epoch));
  m.set("paf_width", decay_at_epoch(DecaySchedule::pafs(), o.epoch));
  m.set("samples", reports);
  m.write(out / "manifest.json");
  std::cout << "wrote " << records.size() << " target stacks to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- refine

struct RefineOptions {
  std::string depth;
  std::string normals;
  std::optional<int> iterations;
  std::optional<double> alpha;
  std::optional<double> far;
  std::string out;
};

int cmd_refine(const Context& ctx, const RefineOptions& o) {
  Manifest m = ctx.manifest("refine");
  RefineParams params = ctx.config().refine;
  if (o.iterations) params.iterations = *o.iterations;
  if (o.alpha) params.alpha = *o.alpha;
  if (o.far) params.far_mask_threshold = *o.far;

  m.begin_phase("read");
  const fs::path depth_path = ctx.require(o.depth);
  m.add_input(depth_path);
  const ImageGrid depth = read_depth16(depth_path);
  std::vector<std::string> parts;
  {
    std::stringstream ss(o.normals);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
  }
  ImageGrid normals;
  if (parts.size() == 3) {
    normals = ImageGrid(depth.height(), depth.width(), 3);
    for (int c = 0; c < 3; ++c) {
      const fs::path p = ctx.require(parts[c]);
      m.add_input(p);
      const ImageGrid n = read_signed16(p);
      if (n.height() != depth.height() || n.width() != depth.width() || n.channels() != 1) {
        throw ShapeError(p.string() + " does not match the depth map size");
      }
      normals.set_channels(c, n);
    }
  } else {
    throw ValueError("--normals expects three comma-separated files nx,ny,nz");
  }

  m.begin_phase("refine");
  std::vector<json> trace;
  const ImageGrid refined = refine_depth(depth, normals, params, [&](const RefineStep& s) {
    trace.push_back({{"iteration", s.iteration}, {"mean_normal_error", s.mean_normal_error}});
  });
  m.begin_phase("write");
  const fs::path out = ctx.resolve(o.out);
  write_depth16(refined, out);
  m.add_output(out);
  const double before = normal_consistency_error(depth, normals);
  const double after = normal_consistency_error(refined, normals);
  m.set("iterations", params.iterations);
  m.set("alpha", params.alpha);
  m.set("far_mask_threshold", params.far_mask_threshold);
  m.set("normal_error_before", before);
  m.set("normal_error_after", after);
  m.set("trace", trace);
  fs::path mpath = out;
  mpath += ".manifest.json";
  m.write(mpath);
  std::cout << "normal consistency error " << fmt(before, 6) << " -> " << fmt(after, 6) << " after "
            << params.iterations << " iterations\n";
  return kExitOk;
}

// ---------------------------------------------------------------- decode-pose

struct DecodePoseOptions {
  std::vector<std::string> inputs;
  std::optional<float> peak;
  std::optional<float> limb;
  std::optional<int> samples;
  std::string out = "pose";
};

int cmd_decode_pose(const Context& ctx, const DecodePoseOptions& o) {
  Manifest m = ctx.manifest("decode-pose");
  DecodeThresholds th = ctx.config().decode;
  if (o.peak) th.peak = *o.peak;
  if (o.limb) th.limb = *o.limb;
  if (o.samples) th.samples = *o.samples;
  const auto files = collect_files(ctx, o.inputs, ".f32");
  for (const auto& f : files) m.add_input(f);
  const fs::path out = ctx.resolve(o.out);
  std::vector<std::size_t> counts(files.size());
  m.begin_phase("decode");
  parallel_for(files.size(), ctx.jobs(), [&](std::size_t i) {
    const TargetStack stack = load_target_stack(files[i]);
    const auto skeletons = decode_pose(stack.images, th);
    counts[i] = skeletons.size();
    write_text_atomic(out / (files[i].stem().string() + ".json"),
                      skeletons_to_json(skeletons).dump(2) + "\n");
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    m.add_output(out / (files[i].stem().string() + ".json"));
    std::cout << files[i].stem().string() << ": " << counts[i] << " skeleton"
              << (counts[i] == 1 ? "" : "s") << "\n";
  }
  m.set("peak_threshold", th.peak);
  m.set("limb_threshold", th.limb);
  m.set("samples", th.samples);
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------- decode-captions

struct DecodeCaptionsOptions {
  std::vector<std::string> inputs;
  std::string embeddings;
  std::string vocab;
  std::optional<double> norm_threshold;
  std::optional<double> sim_threshold;
  std::string out = "captions";
};

int cmd_decode_captions(const Context& ctx, const DecodeCaptionsOptions& o) {
  Manifest m = ctx.manifest("decode-captions");
  DecodeCaptionParams params = ctx.config().captions;
  if (o.norm_threshold) params.norm_threshold = *o.norm_threshold;
  if (o.sim_threshold) params.similarity_threshold = *o.sim_threshold;
  const std::string emb_name = o.embeddings.empty() ? ctx.config().embeddings : o.embeddings;
  const std::string vocab_name = o.vocab.empty() ? ctx.config().vocabulary : o.vocab;
  if (emb_name.empty() || vocab_name.empty()) {
    throw ValueError("decode-captions needs --embeddings and --vocab");
  }
  m.begin_phase("load");
  const fs::path ep = ctx.require(emb_name), vp = ctx.require(vocab_name);
  m.add_input(ep);
  m.add_input(vp);
  const EmbeddingTable table = load_embeddings(ep);
  const Vocabulary vocab = load_vocabulary(vp);
  const auto files = collect_files(ctx, o.inputs, ".f32");
  for (const auto& f : files) m.add_input(f);
  const fs::path out = ctx.resolve(o.out);
  std::vector<std::string> captions(files.size());
  m.begin_phase("decode");
  parallel_for(files.size(), ctx.jobs(), [&](std::size_t i) {
    const TargetStack stack = load_target_stack(files[i]);
    const auto tokens = decode_tokens(stack.tokens, kTokenSlots, table, vocab, params);
    json list = json::array();
    std::string caption;
    for (const auto& t : tokens) {
      list.push_back({{"slot", t.slot}, {"word", t.word}, {"cosine", t.cosine}});
      caption += (caption.empty() ? "" : " ") + t.word;
    }
    captions[i] = caption;
    write_text_atomic(out / (files[i].stem().string() + ".json"),
                      json{{"tokens", list}, {"caption", caption}}.dump(2) + "\n");
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    m.add_output(out / (files[i].stem().string() + ".json"));
    std::cout << files[i].stem().string() << ": " << captions[i] << "\n";
  }
  m.set("norm_threshold", params.norm_threshold);
  m.set("similarity_threshold", params.similarity_threshold);
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string pred;
  std::string truth;
  std::string metric = "hdm";
  std::vector<double> thresholds;
  std::string out = "eval";
};

struct Modality {
  const char* name;
  int first;
  int count;
  bool is_signed;  // stored in [-1, 1]; compared on the (v + 1) / 2 scale
};

constexpr Modality kModalities[] = {
    {"Joints", channels::kJointsBegin, 17, false},  {"PAFs", channels::kPafsBegin, 12, false},
    {"Depth", channels::kDepth, 1, false},          {"Normals", channels::kNormalsBegin, 3, true},
    {"ClassSeg", channels::kGroupsBegin, 10, false}, {"TextSeg", channels::kText, 1, false},
};

int cmd_eval(const Context& ctx, const EvalOptions& o) {
  if (o.metric != "hdm" && o.metric != "loss" && o.metric != "all") {
    throw ValueError("--metric must be hdm, loss or all");
  }
  std::vector<double> thresholds = o.thresholds.empty() ? std::vector<double>{0.1} : o.thresholds;
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw ValueError("--T must be non-negative");
  }
  Manifest m = ctx.manifest("eval");
  const fs::path pred_dir = ctx.require(o.pred), truth_dir = ctx.require(o.truth);
  const auto preds = collect_files(ctx, {o.pred}, ".f32");
  if (preds.empty()) throw MissingFileError("no .f32 stacks in " + pred_dir.string());
  std::vector<fs::path> truths;
  for (const auto& p : preds) {
    const fs::path t = truth_dir / p.filename();
    if (!fs::exists(t)) throw MissingFileError("no ground truth for " + p.filename().string());
    truths.push_back(t);
    m.add_input(p);
    m.add_input(t);
  }

  constexpr int kCols = std::size(kModalities) + 1;  // + captions
  const std::size_t nt = thresholds.size();
  // hits[sample][threshold][modality], totals[sample][modality]
  std::vector<std::vector<std::array<long long, kCols>>> hits(preds.size(),
                                                              std::vector<std::array<long long, kCols>>(nt));
  std::vector<std::array<long long, kCols>> totals(preds.size());
  std::vector<LossBreakdown> losses(preds.size());
  std::vector<std::pair<double, int>> cosines(preds.size());
  const LossConfig loss_config = ctx.config().loss;

  m.begin_phase("evaluate");
  parallel_for(preds.size(), ctx.jobs(), [&](std::size_t i) {
    const TargetStack p = load_target_stack(preds[i]);
    const TargetStack t = load_target_stack(truths[i]);
    if (!p.images.same_shape(t.images)) {
      throw ShapeError(preds[i].filename().string() + ": prediction and truth shapes differ");
    }
    auto count = [&](int col, std::span<const float> a, std::span<const float> b, bool is_signed) {
      totals[i][col] += static_cast<long long>(a.size());
      for (std::size_t k = 0; k < nt; ++k) {
        const double limit = thresholds[k];
        long long h = 0;
        for (std::size_t e = 0; e < a.size(); ++e) {
          double d = std::abs(static_cast<double>(a[e]) - static_cast<double>(b[e]));
          if (is_signed) d *= 0.5;
          h += d <= limit;
        }
        hits[i][k][col] += h;
      }
    };
    for (int col = 0; col < kCols - 1; ++col) {
      const Modality& md = kModalities[col];
      for (int c = md.first; c < md.first + md.count; ++c) {
        count(col, p.images.plane(c), t.images.plane(c), md.is_signed);
      }
    }
    count(kCols - 1, p.tokens, t.tokens, true);
    if (o.metric != "hdm") losses[i] = multiterm_loss(p, t, loss_config);
    const auto cos = token_cosine(p.tokens, t.tokens);
    for (int s = 0; s < kTokenSlots; ++s) {
      double norm = 0.0;
      for (float v : t.token_row(s)) norm += static_cast<double>(v) * v;
      if (norm > 0.0) {
        cosines[i].first += cos[s];
        ++cosines[i].second;
      }
    }
  });

  std::array<const char*, kCols> names{};
  for (int c = 0; c < kCols - 1; ++c) names[c] = kModalities[c].name;
  names[kCols - 1] = "Captions";

  json report = {{"samples", preds.size()}, {"metric", o.metric}};
  std::ostringstream table;
  if (o.metric != "loss") {
    table << std::left << std::setw(8) << "T";
    for (const char* n : names) table << std::right << std::setw(10) << n;
    table << "\n";
    json hdm_json = json::array();
    for (std::size_t k = 0; k < nt; ++k) {
      table << std::left << std::setw(8) << fmt(thresholds[k], 2);
      json row = {{"T", thresholds[k]}};
      for (int c = 0; c < kCols; ++c) {
        long long h = 0, n = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          h += hits[i][k][c];
          n += totals[i][c];
        }
        const double v = n ? static_cast<double>(h) / static_cast<double>(n) : 1.0;
        table << std::right << std::setw(10) << fmt(v);
        row[names[c]] = v;
      }
      table << "\n";
      hdm_json.push_back(row);
    }
    report["hdm"] = hdm_json;
    double sum = 0.0;
    int n = 0;
    for (const auto& [s, c] : cosines) {
      sum += s;
      n += c;
    }
    if (n > 0) {
      report["token_cosine"] = sum / n;
      table << "mean token cosine over " << n << " non-empty slots: " << fmt(sum / n) << "\n";
    }
  }
  if (o.metric != "hdm") {
    LossBreakdown mean;
    for (const auto& l : losses) {
      mean.total += l.total / static_cast<double>(preds.size());
      for (int t = 0; t < kNumLossTerms; ++t) mean.mse[t] += l.mse[t] / static_cast<double>(preds.size());
    }
    json terms = json::object();
    table << "loss " << fmt(mean.total, 6) << "\n";
    for (int t = 0; t < kNumLossTerms; ++t) {
      terms[std::string(kLossTermNames[t])] = mean.mse[t];
      table << "  mse " << std::left << std::setw(14) << kLossTermNames[t] << fmt(mean.mse[t], 6) << "\n";
    }
    report["loss"] = {{"total", mean.total}, {"mse", terms}};
  }
  std::cout << table.str();
  const fs::path out = ctx.resolve(o.out);
  write_text_atomic(out / "eval.json", report.dump(2) + "\n");
  write_text_atomic(out / "eval.txt", table.str());
  m.add_output(out / "eval.json");
  m.add_output(out / "eval.txt");
  m.set("thresholds", thresholds);
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------- augment-preview

struct AugmentOptions {
  std::vector<std::string> annotations;
  std::string images;
  std::string depth_dir;
  std::string class_table;
  int count = -1;
  std::string out = "augment";
};

int cmd_augment(const Context& ctx, const AugmentOptions& o) {
  Manifest m = ctx.manifest("augment-preview");
  const AugmentConfig base = ctx.config().augment;
  base.validate();
  m.begin_phase("parse");
  const ClassGroupTable table = load_class_table(ctx, o.class_table, m);
  auto records = load_records(ctx, o.annotations, table, m);
  if (o.count >= 0 && static_cast<std::size_t>(o.count) < records.size()) records.resize(o.count);
  const fs::path images = ctx.require(o.images);
  const fs::path out = ctx.resolve(o.out);
  std::vector<json> ops(records.size());
  m.begin_phase("augment");
  parallel_for(records.size(), ctx.jobs(), [&](std::size_t i) {
    const auto& rec = records[i];
    const fs::path img = images / rec.file_name;
    if (!fs::exists(img)) throw MissingFileError("image not found: " + img.string());
    const Letterboxed lb = letterbox(normalize_rgb(read_png_rgb8(img)));
    AugmentSample sample;
    sample.rgb = lb.image;
    for (const auto& p : rec.people) sample.people.push_back(p.transformed(lb.transform));
    if (auto p = teacher_file(ctx, o.depth_dir, rec)) {
      sample.depth = to_frame(read_depth16(*p), rec, lb.transform, Interpolation::bilinear, *p);
    }
    AugmentConfig cfg = base;
    cfg.rng_seed = derive_seed(ctx.seed(), i);
    const AugmentResult r = augment(sample, cfg);
    write_png8(r.sample.rgb, out / (rec.stem() + ".png"));
    if (r.sample.depth) write_depth16(*r.sample.depth, out / (rec.stem() + ".depth.png"));
    json doc = {{"stem", rec.stem()},
                {"index", i},
                {"seed", cfg.rng_seed},
                {"ops", r.ops.to_json()},
                {"people", people_json(r.sample.people)}};
    write_text_atomic(out / (rec.stem() + ".ops.json"), doc.dump(2) + "\n");
    ops[i] = doc["ops"];
  });
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string stem = records[i].stem();
    m.add_output(out / (stem + ".png"));
    m.add_output(out / (stem + ".ops.json"));
    if (fs::exists(out / (stem + ".depth.png"))) m.add_output(out / (stem + ".depth.png"));
  }
  m.set("augment", base.to_json());
  m.write(out / "manifest.json");
  std::cout << "wrote " << records.size() << " augmented previews to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- arch-check

struct ArchOptions {
  std::string preset;
  std::string graph;
  bool list = false;
  std::string out = "arch-check";
};

int cmd_arch(const Context& ctx, const ArchOptions& o) {
  if (o.list) {
    for (const auto& p : arch::presets()) std::cout << std::left << std::setw(14) << p.name << p.description << "\n";
    return kExitOk;
  }
  Manifest m = ctx.manifest("arch-check");
  arch::GraphConfig config;
  std::string source = "default";
  if (!o.preset.empty() && !o.graph.empty()) throw ValueError("use either --preset or --graph");
  if (!o.preset.empty()) {
    config = arch::preset(o.preset);
    source = o.preset;
  } else if (!o.graph.empty()) {
    const fs::path p = ctx.require(o.graph);
    m.add_input(p);
    config = arch::GraphConfig::parse(read_text_file(p));
    source = p.generic_string();
  }
  m.begin_phase("check");
  const arch::GraphSpec graph = arch::build_ymap_graph(config);
  const arch::ShapeReport report = arch::infer_shapes(graph);
  const auto violations = arch::validate_topology(graph);

  std::cout << "graph: " << source << "\n" << report.table();
  const auto& pic = report.pictorial_output;
  if (pic.size() == 3) {
    std::cout << "pictorial output " << pic[0] << "x" << pic[1] << "x" << pic[2] << ": " << pic[2]
              << "-channel output" << (pic[2] == kStackChannels ? " confirmed" : "") << "\n";
  }
  json vjson = json::array();
  for (const auto& v : violations) {
    std::cout << "violation [" << v.rule << "] " << v.layer << ": " << v.message << "\n";
    vjson.push_back({{"rule", v.rule}, {"layer", v.layer}, {"message", v.message}});
  }
  if (violations.empty()) std::cout << "topology: ok\n";

  const fs::path out = ctx.resolve(o.out);
  json doc = report.to_json();
  doc["source"] = source;
  doc["config"] = config.to_text();
  doc["violations"] = vjson;
  write_text_atomic(out / "shapes.json", doc.dump(2) + "\n");
  write_text_atomic(out / "shapes.txt", report.table());
  m.add_output(out / "shapes.json");
  m.add_output(out / "shapes.txt");
  m.set("source", source);
  m.set("violations", violations.size());
  m.write(out / "manifest.json");
  return violations.empty() ? kExitOk : kExitFailure;
}

// Finds the subcommand name while skipping global options and their values.
std::optional<std::string> find_command(int argc, char** argv) {
  static const std::vector<std::string> with_value = {"--root", "--jobs", "-j", "--seed", "--config"};
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.empty()) continue;
    if (a[0] == '-') {
      if (std::find(with_value.begin(), with_value.end(), a) != with_value.end()) ++i;
      continue;
    }
    return a;
  }
  return std::nullopt;
}

int report_error(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int run(int argc, char** argv) {
  if (auto cmd = find_command(argc, argv)) {
    if (std::find(kCommands.begin(), kCommands.end(), *cmd) == kCommands.end()) {
      std::cerr << "error: unknown command '" << *cmd << "'\nknown commands:";
      for (const auto& c : kCommands) std::cerr << " " << c;
      std::cerr << "\n";
      return kExitUnknownCommand;
    }
  }

  CLI::App app{"Multi-task target synthesis, decoding and evaluation tools"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--root", g.root, "Base directory for every relative path")->capture_default_str();
  app.add_option("-j,--jobs", g.jobs, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Master seed; per-sample seeds are derived from it")->capture_default_str();
  app.add_option("--config", g.config, "Pipeline config (JSON, // comments allowed)");

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse COCO annotation files into per-image records in the 256x256 frame");
  c_ingest->add_option("--annotations", ingest.annotations, "COCO JSON files (keypoints, instances, captions)")->required();
  c_ingest->add_option("--class-table", ingest.class_table, "Category-to-group table (default: built in)");
  c_ingest->add_option("--images", ingest.images, "Image directory; letterboxed PNGs are written when given");
  c_ingest->add_option("--out", ingest.out, "Output directory")->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth-targets", "Synthesize 44-channel target stacks plus 8x300 token matrices");
  c_synth->add_option("--annotations", synth.annotations, "COCO JSON files")->required();
  c_synth->add_option("--class-table", synth.class_table, "Category-to-group table");
  c_synth->add_option("--depth-dir", synth.depth_dir, "Teacher depth PNGs (<stem>.png, 16-bit)");
  c_synth->add_option("--text-dir", synth.text_dir, "Teacher text-region masks (<stem>.png)");
  c_synth->add_option("--embeddings", synth.embeddings, "Word embedding text file");
  c_synth->add_option("--vocab", synth.vocab, "Vocabulary file (built from the captions when omitted)");
  c_synth->add_option("--epoch", synth.epoch, "Training epoch for the heatmap size schedules")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output directory")->capture_default_str();

  RefineOptions refine;
  auto* c_refine = app.add_subcommand("refine", "Refine a depth map against fixed surface normals");
  c_refine->add_option("--depth", refine.depth, "16-bit depth PNG")->required();
  c_refine->add_option("--normals", refine.normals, "nx.png,ny.png,nz.png (16-bit signed maps)")->required();
  c_refine->add_option("--iters", refine.iterations, "Iterations (default 35)");
  c_refine->add_option("--alpha", refine.alpha, "Step size (default 0.01)");
  c_refine->add_option("--far-threshold", refine.far, "Depth below which pixels are frozen (default 0.05)");
  c_refine->add_option("--out", refine.out, "Output 16-bit depth PNG")->required();

  DecodePoseOptions dpose;
  auto* c_pose = app.add_subcommand("decode-pose", "Decode skeletons from target or prediction stacks");
  c_pose->add_option("--input", dpose.inputs, "Stack files (.f32) or directories")->required();
  c_pose->add_option("--peak", dpose.peak, "Heatmap peak threshold (default 0.3)");
  c_pose->add_option("--limb", dpose.limb, "Limb score threshold (default 0.25)");
  c_pose->add_option("--samples", dpose.samples, "Samples along each limb (default 10)");
  c_pose->add_option("--out", dpose.out, "Output directory")->capture_default_str();

  DecodeCaptionsOptions dcap;
  auto* c_cap = app.add_subcommand("decode-captions", "Decode the token matrix of stacks back to words");
  c_cap->add_option("--input", dcap.inputs, "Stack files (.f32) or directories")->required();
  c_cap->add_option("--embeddings", dcap.embeddings, "Word embedding text file");
  c_cap->add_option("--vocab", dcap.vocab, "Vocabulary file");
  c_cap->add_option("--norm-threshold", dcap.norm_threshold, "Minimum token norm (default 0.01)");
  c_cap->add_option("--sim-threshold", dcap.sim_threshold, "Minimum cosine similarity (default 0.5)");
  c_cap->add_option("--out", dcap.out, "Output directory")->capture_default_str();

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "Compare prediction stacks with ground-truth stacks");
  c_eval->add_option("--pred", eval.pred, "Prediction directory")->required();
  c_eval->add_option("--truth", eval.truth, "Ground-truth directory")->required();
  c_eval->add_option("--metric", eval.metric, "hdm, loss or all")->capture_default_str();
  c_eval->add_option("--T", eval.thresholds, "HDM thresholds (repeatable, default 0.1)");
  c_eval->add_option("--out", eval.out, "Output directory")->capture_default_str();

  AugmentOptions aug;
  auto* c_aug = app.add_subcommand("augment-preview", "Write seeded augmentation previews");
  c_aug->add_option("--annotations", aug.annotations, "COCO JSON files")->required();
  c_aug->add_option("--images", aug.images, "Image directory (PNG)")->required();
  c_aug->add_option("--depth-dir", aug.depth_dir, "Teacher depth PNGs");
  c_aug->add_option("--class-table", aug.class_table, "Category-to-group table");
  c_aug->add_option("--count", aug.count, "Number of records (default all)");
  c_aug->add_option("--out", aug.out, "Output directory")->capture_default_str();

  ArchOptions arch_opts;
  auto* c_arch = app.add_subcommand("arch-check", "Build the layer graph, infer shapes and validate the topology");
  c_arch->add_option("--preset", arch_opts.preset, "Preset name (exp1..exp15, ymap-1-8-44)");
  c_arch->add_option("--graph", arch_opts.graph, "Graph config text file");
  c_arch->add_flag("--list", arch_opts.list, "List presets");
  c_arch->add_option("--out", arch_opts.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    const Context ctx(g, args);
    if (c_ingest->parsed()) return cmd_ingest(ctx, ingest);
    if (c_synth->parsed()) return cmd_synth(ctx, synth);
    if (c_refine->parsed()) return cmd_refine(ctx, refine);
    if (c_pose->parsed()) return cmd_decode_pose(ctx, dpose);
    if (c_cap->parsed()) return cmd_decode_captions(ctx, dcap);
    if (c_eval->parsed()) return cmd_eval(ctx, eval);
    if (c_aug->parsed()) return cmd_augment(ctx, aug);
    if (c_arch->parsed()) return cmd_arch(ctx, arch_opts);
  } catch (const MissingFileError& e) {
    return report_error(e, kExitMissingInput);
  } catch (const FormatError& e) {
    return report_error(e, kExitBadInput);
  } catch (const ShapeError& e) {
    return report_error(e, kExitBadInput);
  } catch (const ValueError& e) {
    return report_error(e, kExitUsage);
  } catch (const std::exception& e) {
    return report_error(e, kExitFailure);
  }
  return kExitUsage;
}

}  // namespace ymap::cli
