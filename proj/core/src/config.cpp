#include "hedseg/config.hpp"

#include <cstdio>

#include "hedseg/error.hpp"
#include "hedseg/rng.hpp"

namespace hedseg {

// Value formats for the library's small aggregate types; found by argument
// dependent lookup from kv::Writer / kv::Reader.
std::string format(const Interval& v) { return kv::format(std::vector<double>{v.lo, v.hi}); }
void parse(const std::string& s, Interval& v) {
  std::array<double, 2> a{};
  kv::parse(s, a);
  v = {a[0], a[1]};
}
std::string format(const TileGrid& v) { return kv::format(std::vector<int>{v.rows, v.cols}); }
void parse(const std::string& s, TileGrid& v) {
  std::array<int, 2> a{};
  kv::parse(s, a);
  v = {a[0], a[1]};
}
std::string format(Modality m) { return to_string(m); }
void parse(const std::string& s, Modality& m) { m = parse_modality(s); }
std::string format(HedInit i) { return i == HedInit::Random ? "random" : "pretrained_backbone"; }
void parse(const std::string& s, HedInit& i) {
  if (s == "random") {
    i = HedInit::Random;
  } else if (s == "pretrained_backbone") {
    i = HedInit::PretrainedBackbone;
  } else {
    throw Error("invalid_config", "hed.init must be random or pretrained_backbone");
  }
}

namespace {

template <typename V>
void visit_fields(RunConfig& c, V&& v) {
  v("name", c.name);
  v("seed", c.seed);

  v("data.source", c.data_source);
  v("data.masks", c.data_masks);
  v("data.modality", c.data_modality);
  v("split.train", c.split.train);
  v("split.val", c.split.val);
  v("split.test", c.split.test);
  v("window.center", c.window.center);
  v("window.width", c.window.width);
  v("window.low_percentile", c.window.low_percentile);
  v("window.high_percentile", c.window.high_percentile);

  v("phantoms.count", c.phantoms.count);
  v("phantoms.image_size", c.phantoms.image_size);
  v("phantoms.slices_per_patient", c.phantoms.slices_per_patient);
  v("phantoms.liver_semi_major", c.phantoms.liver_semi_major);
  v("phantoms.liver_eccentricity", c.phantoms.liver_eccentricity);
  v("phantoms.distractors_min", c.phantoms.distractors_min);
  v("phantoms.distractors_max", c.phantoms.distractors_max);
  v("phantoms.noise", c.phantoms.noise);
  v("phantoms.modality", c.phantoms.modality);

  v("enhance.modality", c.enhance_modality);
  v("enhance.ct.clip_limit", c.ct.clahe_clip_limit);
  v("enhance.ct.tiles", c.ct.clahe_tiles);
  v("enhance.ct.gain", c.ct.sigmoid_gain);
  v("enhance.mr.sigma", c.mr.blur_sigma);
  v("enhance.mr.amount", c.mr.amount);

  v("augment.enabled", c.augment_enabled);
  v("augment.flip", c.augment.enable_flip);
  v("augment.sharpen", c.augment.enable_sharpen);
  v("augment.elastic", c.augment.enable_elastic);
  v("augment.sharpen_amount", c.augment.sharpen_amount);
  v("augment.sharpen_sigma", c.augment.sharpen_sigma);
  v("augment.elastic_alpha", c.augment.elastic_alpha);
  v("augment.elastic_sigma", c.augment.elastic_sigma);
  v("augment.elastic_alpha_bounds", c.augment.elastic_alpha_bounds);

  v("hed.input_size", c.hed.input_size);
  v("hed.stage_widths", c.hed.stage_widths);
  v("hed.convs_per_stage", c.hed.convs_per_stage);
  v("hed.init", c.hed.init);
  v("hed.backbone_weights", c.hed.backbone_weights);
  v("hed.side_weights", c.hed.side_weights);
  v("hed.edge_thickness", c.hed.edge_thickness);
  v("hed.ct_map", c.hed.ct_map);
  v("hed.mr_map", c.hed.mr_map);
  v("hed.iterations", c.hed_iterations);
  v("hed.batch_size", c.hed_batch);
  v("hed.learning_rate", c.hed_learning_rate);
  v("hed.checkpoint_every", c.hed_checkpoint_every);
  v("hed.checkpoint", c.hed_checkpoint);

  v("fusion", c.fusion);

  v("seg.epochs", c.seg_epochs);
  v("seg.images_per_batch", c.seg_images_per_batch);
  v("seg.learning_rate", c.seg_learning_rate);
  v("seg.grad_clip", c.seg_grad_clip);
  v("seg.checkpoint", c.seg_checkpoint);

  v("post.largest_component", c.post.keep_largest_component);
  v("post.fill_holes", c.post.fill_holes);

  v("eval.method", c.eval_method);
  v("eval.split", c.eval_split);
  v("eval.population_std", c.eval_population_std);
  v("eval.overlays", c.eval_overlays);
}

constexpr const char* kDetectorPrefix = "detector.";

}  // namespace

std::string to_string(Profile p) { return p == Profile::Toy ? "toy" : "full"; }

Profile parse_profile(const std::string& s) {
  if (s == "toy") return Profile::Toy;
  if (s == "full") return Profile::Full;
  throw Error("invalid_config", "profile must be 'full' or 'toy', got '" + s + "'");
}

RunConfig RunConfig::defaults(Profile profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == Profile::Toy) {
    c.data_source = "phantoms";
    c.hed = HedConfig::toy(c.phantoms.image_size);
    c.hed_iterations = 300;
    c.hed_batch = 4;
    c.hed_learning_rate = 2e-3;
    c.detector = DetectorConfig::toy(c.phantoms.image_size);
    c.seg_epochs = 8;
    c.seg_images_per_batch = 2;
    c.seg_learning_rate = 1e-3;
  }
  return c;
}

kv::Document RunConfig::to_document() const {
  kv::Document doc;
  doc.set("profile", to_string(profile));
  RunConfig copy = *this;
  visit_fields(copy, kv::Writer{doc, ""});
  doc.set("enhance.ct.center", ct.sigmoid_center ? kv::format(*ct.sigmoid_center) : "auto");
  const auto det = kv::Document::parse(detector.serialize());
  for (const auto& [k, v] : det.values()) doc.set(kDetectorPrefix + k, v);
  return doc;
}

RunConfig RunConfig::from_document(const kv::Document& doc) {
  RunConfig c = defaults(doc.contains("profile") ? parse_profile(doc.at("profile")) : Profile::Full);
  visit_fields(c, kv::Reader{doc, ""});
  if (doc.contains("enhance.ct.center")) {
    const auto& v = doc.at("enhance.ct.center");
    if (v == "auto") {
      c.ct.sigmoid_center.reset();
    } else {
      double x = 0;
      kv::parse(v, x);
      c.ct.sigmoid_center = x;
    }
  }
  // Detector keys overlay the profile's detector, not the full-scale one.
  kv::Document det = kv::Document::parse(c.detector.serialize());
  const std::string prefix = kDetectorPrefix;
  for (const auto& [k, v] : doc.values()) {
    if (k.rfind(prefix, 0) == 0) det.set(k.substr(prefix.size()), v);
  }
  c.detector = DetectorConfig::deserialize(det.dump());

  for (const auto& [k, v] : doc.values()) {
    (void)v;
    if (k == "profile" || k == "enhance.ct.center" || k.rfind(prefix, 0) == 0) continue;
    bool known = false;
    visit_fields(c, [&](const std::string& key, auto&) { known = known || key == k; });
    if (!known) throw Error("invalid_config", "unknown configuration key '" + k + "'");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_document(kv::Document::read(path)); }

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  to_document().write(path);
}

void RunConfig::validate() const {
  if (name.empty()) throw Error("invalid_config", "run name must not be empty");
  if (data_source.empty()) throw Error("invalid_config", "data.source is required");
  if (data_modality != "auto") (void)parse_modality(data_modality);
  if (enhance_modality != "auto" && enhance_modality != "ct" && enhance_modality != "mr") {
    throw Error("invalid_config", "enhance.modality must be auto, ct or mr");
  }
  if (split.train < 0 || split.val < 0 || split.test < -1) throw Error("invalid_config", "invalid split counts");
  if (data_source == "phantoms") phantoms.validate();
  ct.validate();
  mr.validate();
  augment.validate();
  hed.validate();
  if (hed_iterations < 0 || hed_batch < 1 || !(hed_learning_rate > 0.0)) {
    throw Error("invalid_config", "invalid HED training hyperparameters");
  }
  detector.validate();
  if (seg_epochs < 0 || seg_images_per_batch < 1 || !(seg_learning_rate > 0.0)) {
    throw Error("invalid_config", "invalid detector training hyperparameters");
  }
  if (eval_split != "auto" && eval_split != "all" && eval_split != "train" && eval_split != "val" && eval_split != "test") {
    throw Error("invalid_config", "eval.split must be auto, all, train, val or test");
  }
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_document().dump())));
  return buf;
}

}  // namespace hedseg
