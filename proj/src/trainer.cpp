#include "gahcda/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "gahcda/checkpoint.hpp"
#include "gahcda/gaze.hpp"
#include "gahcda/hashing.hpp"
#include "gahcda/losses.hpp"

namespace gahcda {

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json losses = nlohmann::json::array();
  for (const auto& e : m.losses) {
    losses.push_back({{"epoch", e.epoch},
                      {"l_gaa", e.gaa},
                      {"l_gb", e.gb},
                      {"l_dice", e.dice},
                      {"l_ce", e.ce},
                      {"total", e.total}});
  }
  return {{"kind", m.kind},
          {"config", m.config},
          {"config_hash", m.config.empty() ? "" : config_hash(config_from_json(m.config))},
          {"data_hashes", m.data_hashes},
          {"losses", std::move(losses)},
          {"wall_clock_s", m.wall_clock_s},
          {"checkpoint", {{"path", m.checkpoint_path}, {"hash", m.checkpoint_hash}}},
          {"warnings", m.warnings},
          {"extra", m.extra}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.kind = j.value("kind", "");
  m.config = j.value("config", nlohmann::json::object());
  m.data_hashes = j.value("data_hashes", std::map<std::string, std::string>{});
  for (const auto& e : j.value("losses", nlohmann::json::array())) {
    m.losses.push_back({e.at("epoch").get<int>(), e.at("l_gaa").get<double>(), e.at("l_gb").get<double>(),
                        e.at("l_dice").get<double>(), e.at("l_ce").get<double>(), e.at("total").get<double>()});
  }
  m.wall_clock_s = j.value("wall_clock_s", 0.0);
  if (j.contains("checkpoint")) {
    m.checkpoint_path = j["checkpoint"].value("path", "");
    m.checkpoint_hash = j["checkpoint"].value("hash", "");
  }
  m.warnings = j.value("warnings", std::vector<std::string>{});
  m.extra = j.value("extra", nlohmann::json::object());
  return m;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + path.string() + ": " + e.what());
  }
}

void write_loss_csv(const std::vector<EpochLoss>& losses, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,l_gaa,l_gb,l_dice,l_ce,total\n" << std::setprecision(10);
  for (const auto& e : losses) {
    out << e.epoch << ',' << e.gaa << ',' << e.gb << ',' << e.dice << ',' << e.ce << ',' << e.total << '\n';
  }
}

std::optional<std::string> smoothed_loss_warning(const std::vector<EpochLoss>& losses) {
  constexpr std::size_t kWindow = 5;
  if (losses.size() <= kWindow) return std::nullopt;
  double prev = 0.0;
  for (std::size_t end = kWindow; end <= losses.size(); ++end) {
    double avg = 0.0;
    for (std::size_t i = end - kWindow; i < end; ++i) avg += losses[i].total;
    avg /= kWindow;
    if (end > kWindow && avg > prev) {
      std::ostringstream msg;
      msg << "smoothed training loss rose at epoch " << losses[end - 1].epoch << " (" << prev << " -> " << avg << ")";
      return msg.str();
    }
    prev = avg;
  }
  return std::nullopt;
}

void RmsProp::step(ParamSet& params, const nn::GradSet<float>& grads) {
  if (grads.size() != params.size()) throw ValidationError("gradient count mismatch");
  if (square_avg_.empty()) {
    for (const auto& t : params) {
      square_avg_.emplace_back(t.numel(), 0.0f);
      momentum_buf_.emplace_back(t.numel(), 0.0f);
    }
  }
  const float alpha = static_cast<float>(cfg_.alpha);
  const float eps = static_cast<float>(cfg_.eps);
  const float mom = static_cast<float>(cfg_.momentum);
  const float lr = static_cast<float>(lr_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& theta = params[k].values;
    const auto& g = grads[k];
    auto& v = square_avg_[k];
    auto& buf = momentum_buf_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = alpha * v[i] + (1.0f - alpha) * g[i] * g[i];
      const float update = g[i] / (std::sqrt(v[i]) + eps);
      if (mom > 0.0f) {
        buf[i] = mom * buf[i] + update;
        theta[i] -= lr * buf[i];
      } else {
        theta[i] -= lr * update;
      }
    }
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::string non_finite_message(int epoch, std::size_t batch, const std::vector<std::string>& ids) {
  std::ostringstream msg;
  msg << "non-finite loss at epoch " << epoch << ", batch " << batch << " (items";
  for (const auto& id : ids) msg << ' ' << id;
  msg << ')';
  return msg.str();
}

/// Forward pass results kept for one batch item.
struct ItemPass {
  nn::UNet<float>::Cache cache;
  nn::Tensor3<float> logits;
  nn::Tensor3<float> bottleneck;
};

struct BatchLoss {
  LossComponents parts;
  std::vector<double> d_probs;  ///< flat over the batch
};

/// Dice, CE and (optionally) gaze-balance terms over a flattened batch.
BatchLoss pixel_losses(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels,
                       const std::vector<float>* weights, const LossWeights& lw) {
  BatchLoss out;
  out.d_probs.assign(probs.size(), 0.0);
  auto accumulate = [&](const LossResult& r, double lambda) {
    if (lambda == 0.0) return;
    for (std::size_t i = 0; i < r.grad.size(); ++i) out.d_probs[i] += lambda * r.grad[i];
  };
  const auto dice = dice_loss(probs, labels, lw.dice != 0.0);
  const auto ce = cross_entropy_loss(probs, labels, lw.ce != 0.0);
  out.parts.dice = dice.value;
  out.parts.ce = ce.value;
  accumulate(dice, lw.dice);
  accumulate(ce, lw.ce);
  if (weights) {
    const auto gb = gaze_balance_loss(probs, labels, *weights, lw.gb != 0.0);
    out.parts.gb = gb.value;
    accumulate(gb, lw.gb);
  }
  return out;
}

void finish_epoch(std::vector<EpochLoss>& log, int epoch, LossComponents sum, std::size_t batches,
                  const LossWeights& lw) {
  const double n = static_cast<double>(batches);
  EpochLoss e;
  e.epoch = epoch;
  e.gaa = sum.gaa / n;
  e.gb = sum.gb / n;
  e.dice = sum.dice / n;
  e.ce = sum.ce / n;
  e.total = total_loss(LossComponents{e.gaa, e.gb, e.dice, e.ce}, lw);
  log.push_back(e);
}

std::string losses_brief(const EpochLoss& e) {
  std::ostringstream s;
  s << std::setprecision(5) << "epoch " << e.epoch << " total " << e.total << " (gaa " << e.gaa << ", gb " << e.gb
    << ", dice " << e.dice << ", ce " << e.ce << ")";
  return s.str();
}

double heatmap_sigma(const RunConfig& cfg, int width) {
  return cfg.gaze_sigma > 0.0 ? cfg.gaze_sigma : default_gaze_sigma(width);
}

}  // namespace

TeacherRun train_teacher(const DomainDataset& source, const RunConfig& cfg, const Progress& progress) {
  validate(cfg);
  if (source.role() != DomainRole::source) throw ValidationError("teacher training needs a source dataset");
  if (source.size() == 0) throw ValidationError("empty source dataset");
  const auto start = Clock::now();
  const LossWeights lw{0.0, 0.0, 1.0, 1.0};

  TeacherRun run;
  run.params = init_params(cfg.backbone.depth, cfg.backbone.base_channels, cfg.seed);
  nn::UNet<float> net(run.params.arch);
  RmsProp opt(cfg.rmsprop, cfg.teacher.learning_rate);
  std::mt19937_64 rng(cfg.seed ^ 0x7eac4e5ULL);

  const std::size_t batch = static_cast<std::size_t>(cfg.teacher.batch_size);
  for (int epoch = 1; epoch <= cfg.teacher.epochs; ++epoch) {
    const auto order = shuffled(source.size(), rng);
    LossComponents sum;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      const auto view = run.params.weights.view();
      std::vector<ItemPass> passes(b1 - b0);
      std::vector<double> probs;
      std::vector<std::uint8_t> labels;
      std::vector<std::string> ids;
      for (std::size_t k = b0; k < b1; ++k) {
        const auto item = source.source_item(order[k]);
        ids.push_back(item.id);
        auto& pass = passes[k - b0];
        auto out = net.forward(view, image_tensor(item.image), &pass.cache);
        std::vector<double> p;
        nn::probs_from_logits(out.logits, p);
        probs.insert(probs.end(), p.begin(), p.end());
        labels.insert(labels.end(), item.mask.values().begin(), item.mask.values().end());
        pass.logits = std::move(out.logits);
      }
      const auto loss = pixel_losses(probs, labels, nullptr, lw);
      try {
        total_loss(loss.parts, lw);
      } catch (const NumericError&) {
        throw NumericError(non_finite_message(epoch, batches, ids));
      }
      auto grads = nn::zero_grads_like(view);
      std::size_t offset = 0;
      for (auto& pass : passes) {
        const std::size_t px = pass.logits.size();
        const auto d_logits = nn::logit_grad_from_prob_grad(
            pass.logits, std::span<const double>(loss.d_probs).subspan(offset, px));
        net.backward(view, pass.cache, d_logits, nullptr, grads);
        offset += px;
      }
      opt.step(run.params.weights, grads);
      if (!run.params.weights.all_finite()) throw NumericError(non_finite_message(epoch, batches, ids));
      sum.dice += loss.parts.dice;
      sum.ce += loss.parts.ce;
      ++batches;
    }
    finish_epoch(run.manifest.losses, epoch, sum, batches, lw);
    if (progress) progress("teacher " + losses_brief(run.manifest.losses.back()));
  }
  run.params.epoch = cfg.teacher.epochs;

  auto& m = run.manifest;
  m.kind = "teacher";
  m.config = config_to_json(cfg);
  m.data_hashes["source"] = source.content_hash();
  m.checkpoint_hash = checkpoint_hash(run.params);
  if (auto w = smoothed_loss_warning(m.losses)) m.warnings.push_back(*w);
  m.extra["items"] = source.size();
  m.wall_clock_s = seconds_since(start);
  return run;
}

std::vector<SegMask> generate_pseudo_labels(const ModelParams& teacher, const DomainDataset& target,
                                            double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("pseudo-label threshold must be in (0,1)");
  std::vector<SegMask> out;
  out.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    out.push_back(forward(teacher, target.image(i)).prediction.threshold(threshold));
  }
  return out;
}

std::string pseudo_label_hash(const std::vector<SegMask>& masks) {
  Sha1 sha;
  for (const auto& m : masks) {
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.height()), static_cast<std::uint32_t>(m.width())};
    sha.update(dims, sizeof dims);
    sha.update_values(m.values());
  }
  return sha.hex_digest();
}

AdaptRun adapt_student(const ModelParams& teacher, const DomainDataset& target, const std::vector<SegMask>& pseudo,
                       const RunConfig& cfg, const Progress& progress) {
  validate(cfg);
  if (target.role() != DomainRole::target) throw ValidationError("adaptation needs a target dataset");
  if (pseudo.size() != target.size()) throw ValidationError("one pseudo-label per target item required");
  if (target.size() == 0) throw ValidationError("empty target dataset");
  const auto start = Clock::now();
  const LossWeights& lw = cfg.lambdas;
  const std::string teacher_hash = checkpoint_hash(teacher);
  const std::string pseudo_hash = pseudo_label_hash(pseudo);

  AdaptRun run;
  auto& m = run.manifest;
  run.student = clone_for_student(teacher);
  run.gaa = init_gaa_params(gaa_arch_for(teacher.arch), cfg.seed + 1);
  const int d = run.gaa.arch.token_dim();
  const int stages = run.gaa.arch.depth();

  // Per-item inputs that do not change during adaptation.
  struct Fixed {
    nn::Tensor3<float> image;
    nn::Tensor3<float> heatmap;
    std::vector<float> weights;
    Tokens<float> teacher_tokens;
  };
  std::vector<Fixed> fixed(target.size());
  {
    nn::UNet<float> teacher_net(teacher.arch);
    const auto tview = teacher.weights.view();
    for (std::size_t i = 0; i < target.size(); ++i) {
      const auto item = target.target_item(i);
      if (!item.gaze) throw DataError("gaze required for adaptation: " + item.id);
      if (!same_shape(pseudo[i], item.image)) throw ValidationError("pseudo-label shape mismatch: " + item.id);
      if (pseudo[i].foreground_count() == 0) m.warnings.push_back("empty pseudo-label: " + item.id);
      const int h = item.image.height(), w = item.image.width();
      const auto heat = rasterize_heatmap(*item.gaze, h, w, heatmap_sigma(cfg, w));
      const auto wm = regularize_to_weights(heat, cfg.w_floor);
      auto& f = fixed[i];
      f.image = image_tensor(item.image);
      f.heatmap = nn::Tensor3<float>(1, h, w);
      std::copy(heat.values().begin(), heat.values().end(), f.heatmap.data.begin());
      f.weights.assign(wm.values().begin(), wm.values().end());
      f.teacher_tokens = tokens_from_map(teacher_net.forward(tview, f.image, nullptr).bottleneck);
    }
  }

  nn::UNet<float> net(run.student.arch);
  nn::GazeExtractor<float> extractor(run.gaa.arch);
  RmsProp student_opt(cfg.rmsprop, cfg.adapt.learning_rate);
  RmsProp gaa_opt(cfg.rmsprop, cfg.adapt.learning_rate);
  std::mt19937_64 rng(cfg.seed ^ 0xada97ULL);
  const bool use_gaa = lw.gaa != 0.0;

  const std::size_t batch = static_cast<std::size_t>(cfg.adapt.batch_size);
  for (int epoch = 1; epoch <= cfg.adapt.epochs; ++epoch) {
    const auto order = shuffled(target.size(), rng);
    LossComponents sum;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      const std::size_t bsize = b1 - b0;
      const auto view = run.student.weights.view();
      const auto gview = run.gaa.weights.view();
      const nn::ParamView<float> ext_view(gview.begin(), gview.begin() + 2 * stages);
      std::vector<ItemPass> passes(bsize);
      std::vector<double> probs;
      std::vector<std::uint8_t> labels;
      std::vector<float> weights;
      std::vector<std::string> ids;
      for (std::size_t k = 0; k < bsize; ++k) {
        const std::size_t idx = order[b0 + k];
        ids.push_back(target.id(idx));
        auto& pass = passes[k];
        auto out = net.forward(view, fixed[idx].image, &pass.cache);
        std::vector<double> p;
        nn::probs_from_logits(out.logits, p);
        probs.insert(probs.end(), p.begin(), p.end());
        labels.insert(labels.end(), pseudo[idx].values().begin(), pseudo[idx].values().end());
        weights.insert(weights.end(), fixed[idx].weights.begin(), fixed[idx].weights.end());
        pass.logits = std::move(out.logits);
        pass.bottleneck = std::move(out.bottleneck);
      }
      auto loss = pixel_losses(probs, labels, &weights, lw);

      auto grads = nn::zero_grads_like(view);
      auto gaa_grads = nn::zero_grads_like(gview);
      std::vector<nn::Tensor3<float>> d_bottleneck(bsize);
      for (std::size_t k = 0; k < bsize; ++k) {
        const std::size_t idx = order[b0 + k];
        typename nn::GazeExtractor<float>::Cache ext_cache;
        const auto gaze_map = extractor.forward(ext_view, fixed[idx].heatmap, use_gaa ? &ext_cache : nullptr);
        const auto gaze = tokens_from_map(gaze_map);
        const auto& teacher_tokens = fixed[idx].teacher_tokens;
        const auto student = tokens_from_map(passes[k].bottleneck);
        const auto att = nn::attention_fuse(gaze, teacher_tokens);
        const double scale = 1.0 / (static_cast<double>(bsize) * student.count * d);
        nn::AlignmentGrads<float> ag;
        loss.parts.gaa += nn::alignment_loss<float>(att, gaze, teacher_tokens, student, gview[2 * stages],
                                                    gview[2 * stages + 1], scale, use_gaa ? &ag : nullptr);
        if (!use_gaa) continue;
        const float lam = static_cast<float>(lw.gaa);
        for (auto& v : ag.d_student.values) v *= lam;
        for (auto& v : ag.d_gaze.values) v *= lam;
        d_bottleneck[k] = map_from_tokens(ag.d_student, passes[k].bottleneck.height, passes[k].bottleneck.width);
        extractor.backward(ext_view, ext_cache, map_from_tokens(ag.d_gaze, gaze_map.height, gaze_map.width),
                           gaa_grads);
        auto& gw = gaa_grads[2 * stages];
        auto& gb = gaa_grads[2 * stages + 1];
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += lam * ag.d_proj_weight[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += lam * ag.d_proj_bias[i];
      }
      try {
        total_loss(loss.parts, lw);
      } catch (const NumericError&) {
        throw NumericError(non_finite_message(epoch, batches, ids));
      }

      std::size_t offset = 0;
      for (std::size_t k = 0; k < bsize; ++k) {
        auto& pass = passes[k];
        const std::size_t px = pass.logits.size();
        const auto d_logits = nn::logit_grad_from_prob_grad(
            pass.logits, std::span<const double>(loss.d_probs).subspan(offset, px));
        net.backward(view, pass.cache, d_logits, use_gaa ? &d_bottleneck[k] : nullptr, grads);
        offset += px;
      }
      student_opt.step(run.student.weights, grads);
      if (use_gaa) gaa_opt.step(run.gaa.weights, gaa_grads);
      if (!run.student.weights.all_finite() || !run.gaa.weights.all_finite()) {
        throw NumericError(non_finite_message(epoch, batches, ids));
      }
      sum.gaa += loss.parts.gaa;
      sum.gb += loss.parts.gb;
      sum.dice += loss.parts.dice;
      sum.ce += loss.parts.ce;
      ++batches;
    }
    finish_epoch(m.losses, epoch, sum, batches, lw);
    if (progress) progress("adapt " + losses_brief(m.losses.back()));
  }
  run.student.epoch = cfg.adapt.epochs;

  if (checkpoint_hash(teacher) != teacher_hash) throw Error("teacher changed during adaptation");
  if (pseudo_label_hash(pseudo) != pseudo_hash) throw Error("pseudo-labels changed during adaptation");

  m.kind = "adapt";
  m.config = config_to_json(cfg);
  m.data_hashes["target"] = target.content_hash();
  m.checkpoint_hash = checkpoint_hash(Checkpoint{run.student, run.gaa, {}});
  if (auto w = smoothed_loss_warning(m.losses)) m.warnings.push_back(*w);
  m.extra["teacher_checkpoint_hash"] = teacher_hash;
  m.extra["pseudo_label_hash"] = pseudo_hash;
  m.extra["pseudo_label_hash_verified"] = true;
  m.extra["items"] = target.size();
  m.wall_clock_s = seconds_since(start);
  return run;
}

MetricReport evaluate(const ModelParams& params, const DomainDataset& data, const std::string& label) {
  std::vector<ItemMetrics> items;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SegMask* truth = data.evaluation_mask(i);
    if (!truth) continue;
    const auto pred = forward(params, data.image(i)).prediction.threshold(0.5);
    items.push_back(evaluate_item(data.id(i), pred, *truth));
  }
  if (items.empty()) throw DataError("no evaluation masks available");
  return make_report(label, std::move(items),
                     {{"domain", to_string(data.role())}, {"checkpoint_hash", checkpoint_hash(params)}});
}

TeacherStage prepare_teacher_stage(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                                   const Progress& progress) {
  const auto [src_train, src_hold] = split_train_holdout(source.size());
  const auto [tgt_adapt, tgt_hold] = split_train_holdout(target.size());
  auto teacher = train_teacher(source.subset(src_train), cfg, progress);
  TeacherStage stage{std::move(teacher), source.subset(src_hold), target.subset(tgt_adapt),
                     target.subset(tgt_hold), {}, {}};
  stage.pseudo = generate_pseudo_labels(stage.teacher.params, stage.target_adapt, cfg.pseudo_threshold);
  stage.source_report = evaluate(stage.teacher.params, stage.source_holdout, "teacher-source");
  stage.teacher.manifest.extra["source_holdout_dsc"] = stage.source_report.dsc.mean;
  stage.teacher.manifest.extra["pseudo_label_hash"] = pseudo_label_hash(stage.pseudo);
  return stage;
}

std::vector<std::string> parse_modes(const std::string& text) {
  std::vector<std::string> modes;
  if (text == "all") {
    for (const char* l : kAblationLabels) modes.emplace_back(l);
    return modes;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    bool known = false;
    for (const char* l : kAblationLabels) known = known || item == l;
    if (!known) throw ValidationError("unknown ablation mode '" + item + "'");
    modes.push_back(item);
  }
  if (modes.empty()) throw ValidationError("no ablation modes given");
  return modes;
}

LossWeights mode_weights(const std::string& mode, const LossWeights& base) {
  LossWeights w = base;
  if (mode == "GAA-only") {
    w.gb = 0.0;
  } else if (mode == "GBL-only") {
    w.gaa = 0.0;
  } else if (mode != "full" && mode != "no-DA") {
    throw ValidationError("unknown ablation mode '" + mode + "'");
  }
  return w;
}

namespace {

void save_run(const std::filesystem::path& dir, RunManifest manifest, const Checkpoint& ckpt,
              const MetricReport* report) {
  std::filesystem::create_directories(dir);
  const auto ckpt_path = dir / "checkpoint.gzck";
  save_checkpoint(ckpt, ckpt_path);
  manifest.checkpoint_path = ckpt_path.string();
  manifest.checkpoint_hash = checkpoint_hash(ckpt);
  if (report) {
    manifest.extra["report"] = {{"dsc", report->dsc.mean}, {"assd", report->assd.mean}};
    write_report_csv(*report, dir / "metrics.csv");
    std::ofstream(dir / "report.json") << report_to_json(*report).dump(2) << '\n';
  }
  write_loss_csv(manifest.losses, dir / "loss.csv");
  write_manifest(manifest, dir / "manifest.json");
}

RunConfig with_seed(const RunConfig& cfg, std::uint64_t seed) {
  RunConfig c = cfg;
  c.seed = seed;
  return c;
}

}  // namespace

std::vector<MetricReport> ablate(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                                 const std::vector<std::string>& modes, int seeds, const std::filesystem::path& out_dir,
                                 const Progress& progress) {
  if (seeds < 1) throw ValidationError("seeds must be >= 1");
  if (modes.empty()) throw ValidationError("no ablation modes given");
  for (const auto& mode : modes) mode_weights(mode, cfg.lambdas);
  std::vector<MetricReport> reports;
  for (int s = 0; s < seeds; ++s) {
    const RunConfig seed_cfg = with_seed(cfg, cfg.seed + static_cast<std::uint64_t>(s));
    const auto seed_dir = out_dir.empty() ? out_dir : out_dir / ("seed" + std::to_string(seed_cfg.seed));
    if (progress) progress("seed " + std::to_string(seed_cfg.seed) + ": training teacher");
    auto stage = prepare_teacher_stage(source, target, seed_cfg, progress);
    if (!seed_dir.empty()) {
      save_run(seed_dir / "teacher", stage.teacher.manifest, Checkpoint{stage.teacher.params, std::nullopt, {}},
               &stage.source_report);
    }
    for (const auto& mode : modes) {
      MetricReport report;
      nlohmann::json meta{{"seed", seed_cfg.seed},
                          {"mode", mode},
                          {"teacher_source_dsc", stage.source_report.dsc.mean},
                          {"teacher_checkpoint_hash", stage.teacher.manifest.checkpoint_hash}};
      if (mode == "no-DA") {
        report = evaluate(stage.teacher.params, stage.target_holdout, mode);
      } else {
        RunConfig mode_cfg = seed_cfg;
        mode_cfg.lambdas = mode_weights(mode, cfg.lambdas);
        if (progress) progress("seed " + std::to_string(seed_cfg.seed) + ": adapting (" + mode + ")");
        auto run = adapt_student(stage.teacher.params, stage.target_adapt, stage.pseudo, mode_cfg, progress);
        report = evaluate(run.student, stage.target_holdout, mode);
        meta["adapt_checkpoint_hash"] = run.manifest.checkpoint_hash;
        if (!seed_dir.empty()) {
          run.manifest.extra["mode"] = mode;
          save_run(seed_dir / mode, run.manifest, Checkpoint{run.student, run.gaa, {{"mode", mode}}}, &report);
        }
      }
      report.metadata.update(meta);
      if (progress) {
        std::ostringstream msg;
        msg << "seed " << seed_cfg.seed << " " << mode << ": target DSC " << report.dsc.mean;
        progress(msg.str());
      }
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

std::vector<SweepPoint> sweep(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                              const std::string& param, const std::vector<double>& values, int seeds,
                              const std::filesystem::path& out_dir, const Progress& progress) {
  double LossWeights::*field = nullptr;
  if (param == "lambda.gaa" || param == "lambda_gaa") field = &LossWeights::gaa;
  if (param == "lambda.gb" || param == "lambda_gb") field = &LossWeights::gb;
  if (!field) throw ValidationError("sweep parameter must be lambda_gaa or lambda_gb");
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (seeds < 1) throw ValidationError("seeds must be >= 1");
  for (double v : values) {
    LossWeights w = cfg.lambdas;
    w.*field = v;
    validate(w, true);
  }
  std::vector<SweepPoint> points(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) points[i].value = values[i];
  for (int s = 0; s < seeds; ++s) {
    const RunConfig seed_cfg = with_seed(cfg, cfg.seed + static_cast<std::uint64_t>(s));
    const auto seed_dir = out_dir.empty() ? out_dir : out_dir / ("seed" + std::to_string(seed_cfg.seed));
    auto stage = prepare_teacher_stage(source, target, seed_cfg, progress);
    for (auto& point : points) {
      RunConfig run_cfg = seed_cfg;
      run_cfg.lambdas.*field = point.value;
      std::ostringstream label;
      label << param << '=' << point.value;
      if (progress) progress("seed " + std::to_string(seed_cfg.seed) + ": " + label.str());
      auto run = adapt_student(stage.teacher.params, stage.target_adapt, stage.pseudo, run_cfg, progress);
      auto report = evaluate(run.student, stage.target_holdout, label.str());
      report.metadata["seed"] = seed_cfg.seed;
      report.metadata["value"] = point.value;
      if (!seed_dir.empty()) {
        save_run(seed_dir / label.str(), run.manifest, Checkpoint{run.student, run.gaa, {}}, &report);
      }
      point.runs.push_back(std::move(report));
    }
  }
  for (auto& point : points) {
    std::vector<double> d;
    for (const auto& r : point.runs) d.push_back(r.dsc.mean);
    point.dsc = summarize(d);
  }
  return points;
}

void dump_features(const ModelParams& params, const Image& image, const std::filesystem::path& dir) {
  const auto out = forward(params, image);
  std::filesystem::create_directories(dir);
  save_feature_map(dir / "bottleneck.gzf", out.bottleneck);
  save_feature_map(dir / "decoder.gzf", out.decoder);
}

}  // namespace gahcda
