#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gahcda/backbone.hpp"
#include "gahcda/config.hpp"
#include "gahcda/gaa.hpp"
#include "gahcda/metrics.hpp"

namespace gahcda {

/// Per-epoch means of each loss term; `total` is their weighted sum.
struct EpochLoss {
  int epoch = 0;
  double gaa = 0.0;
  double gb = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

struct RunManifest {
  std::string kind;  ///< teacher | adapt | evaluate | ...
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> data_hashes;
  std::vector<EpochLoss> losses;
  double wall_clock_s = 0.0;
  std::string checkpoint_path;
  std::string checkpoint_hash;
  std::vector<std::string> warnings;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// `epoch,l_gaa,l_gb,l_dice,l_ce,total`
void write_loss_csv(const std::vector<EpochLoss>& losses, const std::filesystem::path& path);

/// Warning text if the window-5 moving average of `total` ever rises.
std::optional<std::string> smoothed_loss_warning(const std::vector<EpochLoss>& losses);

/// v = alpha v + (1 - alpha) g^2; buf = momentum buf + g / (sqrt(v) + eps);
/// theta -= lr buf.
class RmsProp {
 public:
  RmsProp(RmsPropConfig cfg, double learning_rate) : cfg_(cfg), lr_(learning_rate) {}

  void step(ParamSet& params, const nn::GradSet<float>& grads);

 private:
  RmsPropConfig cfg_;
  double lr_;
  std::vector<std::vector<float>> square_avg_;
  std::vector<std::vector<float>> momentum_buf_;
};

/// Optional progress sink, one line per call.
using Progress = std::function<void(const std::string&)>;

struct TeacherRun {
  ModelParams params;
  RunManifest manifest;
};

/// Supervised Dice + CE on every labeled item of `source`.
TeacherRun train_teacher(const DomainDataset& source, const RunConfig& cfg, const Progress& progress = {});

/// Teacher probability >= threshold, one mask per target item.
std::vector<SegMask> generate_pseudo_labels(const ModelParams& teacher, const DomainDataset& target,
                                            double threshold);
std::string pseudo_label_hash(const std::vector<SegMask>& masks);

struct AdaptRun {
  ModelParams student;
  GaaParams gaa;
  RunManifest manifest;
};

/// Gaze-guided student adaptation on `target` against frozen `pseudo` labels.
/// Updates student, gaze extractor and projection; the teacher is read-only.
AdaptRun adapt_student(const ModelParams& teacher, const DomainDataset& target, const std::vector<SegMask>& pseudo,
                       const RunConfig& cfg, const Progress& progress = {});

/// Thresholds at 0.5 and scores against evaluation masks. Items without a
/// mask are skipped; a dataset with none raises DataError.
MetricReport evaluate(const ModelParams& params, const DomainDataset& data, const std::string& label);

/// Everything derived from one teacher: splits, teacher weights, pseudo-labels.
struct TeacherStage {
  TeacherRun teacher;
  DomainDataset source_holdout;
  DomainDataset target_adapt;
  DomainDataset target_holdout;
  std::vector<SegMask> pseudo;
  MetricReport source_report;  ///< teacher on held-out source
};

TeacherStage prepare_teacher_stage(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                                   const Progress& progress = {});

/// "all" expands to every ablation label; otherwise comma-separated labels.
std::vector<std::string> parse_modes(const std::string& text);

/// Loss weights for one ablation mode.
LossWeights mode_weights(const std::string& mode, const LossWeights& base);

/// One report per (seed, mode), evaluated on the held-out target split.
/// Seeds are cfg.seed, cfg.seed + 1, ... When `out_dir` is nonempty each run
/// writes its manifest, loss CSV and checkpoint under `out_dir/seed<k>/<mode>`.
std::vector<MetricReport> ablate(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                                 const std::vector<std::string>& modes, int seeds,
                                 const std::filesystem::path& out_dir = {}, const Progress& progress = {});

struct SweepPoint {
  double value = 0.0;
  Summary dsc;  ///< across seeds
  std::vector<MetricReport> runs;
};

/// `param` is lambda.gaa / lambda_gaa or lambda.gb / lambda_gb.
std::vector<SweepPoint> sweep(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
                              const std::string& param, const std::vector<double>& values, int seeds,
                              const std::filesystem::path& out_dir = {}, const Progress& progress = {});

/// Writes `bottleneck.gzf` and `decoder.gzf` into `dir`.
void dump_features(const ModelParams& params, const Image& image, const std::filesystem::path& dir);

}  // namespace gahcda
