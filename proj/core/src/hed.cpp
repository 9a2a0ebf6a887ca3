#include "hedseg/hed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "hedseg/error.hpp"
#include "hedseg/log.hpp"
#include "hedseg/rng.hpp"

namespace fs = std::filesystem;
namespace nn = torch::nn;

namespace hedseg {
namespace {

constexpr double kProbClip = 1e-7;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

template <std::size_t N, typename T>
std::string join(const std::array<T, N>& a) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < N; ++i) os << (i ? "," : "") << a[i];
  return os.str();
}

template <std::size_t N, typename T>
std::array<T, N> parse_array(const std::string& s) {
  const auto parts = split_csv(s);
  if (parts.size() != N) throw Error("invalid_config", "expected " + std::to_string(N) + " values in '" + s + "'");
  std::array<T, N> a{};
  for (std::size_t i = 0; i < N; ++i) a[i] = static_cast<T>(std::stod(parts[i]));
  return a;
}

}  // namespace

HedConfig HedConfig::toy(int input_size) {
  HedConfig c;
  c.input_size = input_size;
  c.stage_widths = {8, 16, 32, 32, 32};
  c.convs_per_stage = {2, 2, 2, 2, 2};
  c.init = HedInit::Random;
  return c;
}

void HedConfig::validate() const {
  for (int i = 0; i < kHedStages; ++i) {
    if (stage_widths[i] <= 0 || convs_per_stage[i] <= 0) {
      throw Error("invalid_config", "HED stage widths and conv counts must be positive");
    }
  }
  if (input_size < 16) throw Error("invalid_config", "HED input must be at least 16 pixels (coarsest stride)");
  for (double w : side_weights) {
    if (!(w >= 0.0)) throw Error("invalid_config", "HED side weights must be non-negative");
  }
  if (edge_thickness < 1) throw Error("invalid_config", "edge thickness must be >= 1");
  if (ct_map < 0 || ct_map >= kHedMaps || mr_map < 0 || mr_map >= kHedMaps) {
    throw Error("invalid_config", "edge map index must be in [0, 5]");
  }
  if (init == HedInit::PretrainedBackbone && backbone_weights.empty()) {
    throw Error("invalid_config", "pretrained HED initialization needs a backbone weights file");
  }
}

std::string HedConfig::serialize() const {
  std::ostringstream os;
  os << "input_size=" << input_size << "\nstage_widths=" << join(stage_widths)
     << "\nconvs_per_stage=" << join(convs_per_stage)
     << "\ninit=" << (init == HedInit::Random ? "random" : "pretrained_backbone")
     << "\nbackbone_weights=" << backbone_weights << "\nside_weights=" << join(side_weights)
     << "\nedge_thickness=" << edge_thickness << "\nct_map=" << ct_map << "\nmr_map=" << mr_map << "\n";
  return os.str();
}

HedConfig HedConfig::deserialize(const std::string& text) {
  HedConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "input_size") c.input_size = std::stoi(v);
    else if (k == "stage_widths") c.stage_widths = parse_array<kHedStages, int>(v);
    else if (k == "convs_per_stage") c.convs_per_stage = parse_array<kHedStages, int>(v);
    else if (k == "init") c.init = v == "random" ? HedInit::Random : HedInit::PretrainedBackbone;
    else if (k == "backbone_weights") c.backbone_weights = v;
    else if (k == "side_weights") c.side_weights = parse_array<kHedMaps, double>(v);
    else if (k == "edge_thickness") c.edge_thickness = std::stoi(v);
    else if (k == "ct_map") c.ct_map = std::stoi(v);
    else if (k == "mr_map") c.mr_map = std::stoi(v);
  }
  return c;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      bool any = false;
      for (int dr = -radius; dr <= radius && !any; ++dr) {
        for (int dc = -radius; dc <= radius && !any; ++dc) {
          any = mask.in_bounds(r + dr, c + dc) && mask(r + dr, c + dc);
        }
      }
      out(r, c) = any ? 1 : 0;
    }
  }
  return out;
}

Mask erode(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      bool all = mask(r, c) != 0;
      for (int dr = -radius; dr <= radius && all; ++dr) {
        for (int dc = -radius; dc <= radius && all; ++dc) {
          all = mask.in_bounds(r + dr, c + dc) && mask(r + dr, c + dc);
        }
      }
      out(r, c) = all ? 1 : 0;
    }
  }
  return out;
}

EdgeTarget edge_target_from_mask(const Mask& mask, int thickness) {
  if (thickness < 1) throw Error("invalid_argument", "edge thickness must be >= 1");
  const Mask outer = dilate(mask, thickness / 2);
  const Mask inner = erode(mask, (thickness + 1) / 2);
  EdgeTarget t{Mask(mask.rows(), mask.cols(), 0), thickness};
  for (std::size_t i = 0; i < mask.size(); ++i) t.boundary[i] = (outer[i] && !inner[i]) ? 1 : 0;
  return t;
}

HedNetImpl::HedNetImpl(const HedConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int in_ch = 1;
  for (int s = 0; s < kHedStages; ++s) {
    nn::Sequential stage;
    if (s > 0) stage->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2).ceil_mode(true)));
    for (int k = 0; k < cfg_.convs_per_stage[s]; ++k) {
      stage->push_back(nn::Conv2d(nn::Conv2dOptions(in_ch, cfg_.stage_widths[s], 3).padding(1)));
      stage->push_back(nn::ReLU(nn::ReLUOptions(true)));
      in_ch = cfg_.stage_widths[s];
    }
    stages_.push_back(register_module("stage" + std::to_string(s), stage));
    side_heads_.push_back(register_module("side" + std::to_string(s), nn::Conv2d(nn::Conv2dOptions(in_ch, 1, 1))));
  }
  fuse_ = register_module("fuse", nn::Conv2d(nn::Conv2dOptions(kHedStages, 1, 1)));
  {
    torch::NoGradGuard guard;
    fuse_->weight.fill_(1.0 / kHedStages);
    fuse_->bias.zero_();
  }

  if (cfg_.init == HedInit::PretrainedBackbone) {
    torch::serialize::InputArchive archive;
    archive.load_from(cfg_.backbone_weights);
    torch::NoGradGuard guard;
    for (auto& item : named_parameters()) {
      if (item.key().rfind("stage", 0) != 0) continue;
      torch::Tensor t;
      if (!archive.try_read(item.key(), t)) {
        throw Error("invalid_weights", "backbone weights lack '" + item.key() + "'");
      }
      if (t.sizes() != item.value().sizes()) throw Error("invalid_weights", "shape mismatch for '" + item.key() + "'");
      item.value().copy_(t);
    }
  }
}

torch::Tensor HedNetImpl::forward(const torch::Tensor& x) {
  const auto h = x.size(2), w = x.size(3);
  std::vector<torch::Tensor> sides;
  torch::Tensor feat = x - 0.5;  // inputs are in [0, 1]
  for (int s = 0; s < kHedStages; ++s) {
    feat = stages_[s]->forward(feat);
    auto side = side_heads_[s]->forward(feat);
    if (side.size(2) != h || side.size(3) != w) {
      side = torch::nn::functional::interpolate(
          side, torch::nn::functional::InterpolateFuncOptions()
                    .size(std::vector<int64_t>{h, w})
                    .mode(torch::kBilinear)
                    .align_corners(false));
    }
    sides.push_back(side);
  }
  auto stacked = torch::cat(sides, 1);
  return torch::cat({stacked, fuse_->forward(stacked)}, 1);
}

SideOutputs HedNetImpl::predict(const Image& image) {
  torch::NoGradGuard guard;
  const auto probs = torch::sigmoid(forward(to_tensor(image))).contiguous();
  SideOutputs out;
  for (int i = 0; i < kHedMaps; ++i) out.maps[i] = to_image(probs[0][i]);
  return out;
}

HedNet build_hed(const HedConfig& cfg) { return HedNet(cfg); }

torch::Tensor balanced_bce(const torch::Tensor& pred, const torch::Tensor& target) {
  if (pred.sizes() != target.sizes()) throw Error("shape_mismatch", "balanced_bce: shape mismatch");
  const double n = static_cast<double>(pred.numel());
  const auto t = target.to(pred.dtype());
  const double positives = t.sum().item<double>();
  const double beta = (n - positives) / n;
  const auto p = pred.clamp(kProbClip, 1.0 - kProbClip);
  const auto pos_term = (t * torch::log(p)).sum();
  const auto neg_term = ((1.0 - t) * torch::log(1.0 - p)).sum();
  return -(beta * pos_term + (1.0 - beta) * neg_term) / n;
}

double balanced_bce(const Image& pred, const EdgeTarget& target) {
  require_same_shape(pred, target.boundary, "balanced_bce");
  return balanced_bce(to_tensor(pred).to(torch::kDouble), to_tensor(target.boundary).to(torch::kDouble)).item<double>();
}

HedLoss hed_loss(const torch::Tensor& probs, const torch::Tensor& target, std::span<const double> side_weights) {
  if (side_weights.size() != static_cast<std::size_t>(kHedMaps)) {
    throw Error("invalid_argument", "hed_loss needs exactly 6 side weights");
  }
  if (probs.dim() != 4 || probs.size(1) != kHedMaps) throw Error("shape_mismatch", "hed_loss: expected [N, 6, H, W]");
  const auto tgt = target.dim() == 3 ? target : target.squeeze(1);
  const auto batch = probs.size(0);
  HedLoss out;
  out.total = torch::zeros({}, probs.options());
  for (int m = 0; m < kHedMaps; ++m) {
    auto map_loss = torch::zeros({}, probs.options());
    for (int64_t b = 0; b < batch; ++b) map_loss = map_loss + balanced_bce(probs[b][m], tgt[b]);
    map_loss = map_loss / static_cast<double>(batch);
    out.per_map[m] = map_loss.item<double>();
    if (side_weights[m] != 0.0) out.total = out.total + side_weights[m] * map_loss;
  }
  return out;
}

void save_hed_checkpoint(HedNet& model, torch::optim::Adam& optimizer, int iteration, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  model->save(archive);
  torch::serialize::OutputArchive opt_archive;
  optimizer.save(opt_archive);
  archive.write("optimizer", opt_archive);
  archive.write("iteration", torch::tensor(static_cast<int64_t>(iteration)));
  archive.write("hed_config", c10::IValue(model->config().serialize()));
  archive.save_to(path.string());
}

HedTrainResult train_hed(HedNet& model, std::span<const HedSample> data, const HedTrainOptions& options) {
  if (data.empty()) throw Error("empty_dataset", "train_hed: empty training set");
  if (options.batch_size < 1) throw Error("invalid_argument", "train_hed: batch size must be >= 1");
  model->train();
  torch::optim::Adam optimizer(model->parameters(), torch::optim::AdamOptions(options.learning_rate));
  int start = 0;
  if (options.resume && !options.checkpoint_path.empty() && fs::exists(options.checkpoint_path)) {
    torch::serialize::InputArchive archive;
    archive.load_from(options.checkpoint_path.string());
    model->load(archive);
    torch::serialize::InputArchive opt_archive;
    if (archive.try_read("optimizer", opt_archive)) optimizer.load(opt_archive);
    torch::Tensor it;
    archive.read("iteration", it);
    start = static_cast<int>(it.item<int64_t>());
    // Optimizer state restores its own lr; keep the caller's.
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(options.learning_rate);
    }
  }

  std::ofstream csv;
  if (!options.loss_csv.empty()) {
    if (options.loss_csv.has_parent_path()) fs::create_directories(options.loss_csv.parent_path());
    const bool append = options.resume && start > 0 && fs::exists(options.loss_csv);
    csv.open(options.loss_csv, append ? std::ios::app : std::ios::trunc);
    if (!append) csv << "iteration,side0,side1,side2,side3,side4,fused,total\n";
    csv << std::setprecision(10);
  }

  const std::size_t n = data.size();
  const auto& cfg = model->config();
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm;
  HedTrainResult result;

  for (int it = start; it < options.iterations; ++it) {
    std::vector<const HedSample*> batch;
    for (int j = 0; j < options.batch_size; ++j) {
      const std::size_t k = static_cast<std::size_t>(it) * options.batch_size + j;
      const std::size_t epoch = k / n;
      if (epoch != cached_epoch) {
        perm = permutation(n, derive_seed(options.seed, epoch, 0x4ed));
        cached_epoch = epoch;
      }
      batch.push_back(&data[perm[k % n]]);
    }

    optimizer.zero_grad();
    std::array<double, kHedMaps> per_map{};
    double total_value = 0.0;
    const bool same_size = std::all_of(batch.begin(), batch.end(), [&](const HedSample* s) {
      return s->image.same_shape(batch.front()->image);
    });
    const auto run_group = [&](const std::vector<const HedSample*>& group) {
      std::vector<torch::Tensor> xs, ts;
      for (const auto* s : group) {
        xs.push_back(to_tensor(s->image));
        ts.push_back(to_tensor(s->target.boundary));
      }
      const auto probs = torch::sigmoid(model->forward(torch::cat(xs, 0)));
      auto loss = hed_loss(probs, torch::cat(ts, 0), cfg.side_weights);
      const double share = static_cast<double>(group.size()) / static_cast<double>(batch.size());
      (loss.total * share).backward();
      for (int m = 0; m < kHedMaps; ++m) per_map[m] += loss.per_map[m] * share;
      total_value += loss.total.item<double>() * share;
    };
    if (same_size) {
      run_group(batch);
    } else {
      for (const auto* s : batch) run_group({s});
    }
    optimizer.step();

    HedLossRow row{it, per_map, total_value};
    if (csv.is_open()) {
      csv << it;
      for (double v : per_map) csv << ',' << v;
      csv << ',' << total_value << '\n';
    }
    result.curve.push_back(row);
    if (options.checkpoint_every > 0 && !options.checkpoint_path.empty() && (it + 1) % options.checkpoint_every == 0) {
      save_hed_checkpoint(model, optimizer, it + 1, options.checkpoint_path);
    }
    if ((it + 1) % 50 == 0) log::debug("hed iteration " + std::to_string(it + 1) + " loss " + std::to_string(total_value));
  }
  if (!options.checkpoint_path.empty()) save_hed_checkpoint(model, optimizer, options.iterations, options.checkpoint_path);
  model->eval();
  return result;
}

void save_hed(HedNet& model, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.write("hed_config", c10::IValue(model->config().serialize()));
  archive.save_to(path.string());
}

HedNet load_hed(const fs::path& path) {
  if (!fs::exists(path)) throw Error("io", "HED checkpoint not found: '" + path.string() + "'");
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  c10::IValue cfg_value;
  if (!archive.try_read("hed_config", cfg_value)) throw Error("io", "checkpoint lacks HED configuration");
  HedConfig cfg = HedConfig::deserialize(cfg_value.toStringRef());
  cfg.init = HedInit::Random;  // weights come from the checkpoint
  HedNet model(cfg);
  model->load(archive);
  model->eval();
  return model;
}

int edge_map_index(Modality modality, const HedConfig& cfg) {
  return modality == Modality::CT ? cfg.ct_map : cfg.mr_map;
}

int edge_map_index(const std::string& modality_tag, const HedConfig& cfg) {
  return edge_map_index(parse_modality(modality_tag), cfg);
}

const Image& select_edge_map(const SideOutputs& outputs, Modality modality, const HedConfig& cfg) {
  return outputs.maps[edge_map_index(modality, cfg)];
}

torch::Tensor to_tensor(const Image& img) {
  return torch::from_blob(const_cast<float*>(img.data()), {1, 1, img.rows(), img.cols()}, torch::kFloat).clone();
}

torch::Tensor to_tensor(const Mask& mask) {
  auto t = torch::empty({1, 1, mask.rows(), mask.cols()}, torch::kFloat);
  auto* p = t.data_ptr<float>();
  for (std::size_t i = 0; i < mask.size(); ++i) p[i] = mask[i] ? 1.0f : 0.0f;
  return t;
}

Image to_image(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat).contiguous();
  const auto h = c.size(-2), w = c.size(-1);
  if (c.numel() != h * w) throw Error("shape_mismatch", "to_image: tensor is not a single plane");
  Image img(static_cast<int>(h), static_cast<int>(w));
  std::copy(c.data_ptr<float>(), c.data_ptr<float>() + img.size(), img.data());
  return img;
}

}  // namespace hedseg
