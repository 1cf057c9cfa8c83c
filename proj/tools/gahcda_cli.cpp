#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gahcda/checkpoint.hpp"
#include "gahcda/config.hpp"
#include "gahcda/core.hpp"
#include "gahcda/metrics.hpp"
#include "gahcda/svg.hpp"
#include "gahcda/synth.hpp"
#include "gahcda/trainer.hpp"

namespace fs = std::filesystem;
using namespace gahcda;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML or JSON run config");
  cmd->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
  cmd->add_option("--out", c.out, "run directory (defaults to output_dir from the config)");
  cmd->add_flag("-q,--quiet", c.quiet, "suppress progress lines");
  cmd->footer(describe_config_keys(RunConfig{}));
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (!c.out.empty()) cfg.output_dir = c.out;
  validate(cfg);
  return cfg;
}

Progress progress_for(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

struct Data {
  DomainDataset source;
  DomainDataset target;
};

/// Either a directory written by gen-synth or, when empty, data generated in
/// memory from the config.
Data load_data(const std::string& dir, const RunConfig& cfg) {
  if (dir.empty()) {
    return Data{generate_domain(cfg.synth, DomainRole::source), generate_domain(cfg.synth, DomainRole::target)};
  }
  return Data{load_dataset(fs::path(dir) / "source", DomainRole::source),
              load_dataset(fs::path(dir) / "target", DomainRole::target)};
}

RunManifest base_manifest(const std::string& kind, const RunConfig& cfg) {
  RunManifest m;
  m.kind = kind;
  m.config = config_to_json(cfg);
  return m;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_report(const MetricReport& r, const fs::path& dir) {
  write_report_csv(r, dir / "metrics.csv");
  std::ofstream(dir / "report.json") << report_to_json(r).dump(2) << '\n';
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw ValidationError("bad value list entry '" + item + "'");
    values.push_back(v);
  }
  return values;
}

void print_summary(const MetricReport& r) {
  std::cout << std::fixed << std::setprecision(3) << r.label << ": DSC " << r.dsc.mean << " +/- " << r.dsc.std
            << ", ASSD " << r.assd.mean << " +/- " << r.assd.std << " (" << r.items.size() << " items)\n";
}

// --- subcommands ---------------------------------------------------------

void run_gen_synth(const Common& c) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto source = generate_domain(cfg.synth, DomainRole::source);
  const auto target = generate_domain(cfg.synth, DomainRole::target);
  write_dataset(source, out / "source");
  write_dataset(target, out / "target");
  auto m = base_manifest("gen-synth", cfg);
  m.data_hashes["source"] = source.content_hash();
  m.data_hashes["target"] = target.content_hash();
  m.extra["n_source"] = source.size();
  m.extra["n_target"] = target.size();
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << source.size() << " source and " << target.size() << " target items to " << out << '\n';
}

void run_train_teacher(const Common& c, const std::string& data_dir) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto data = load_data(data_dir, cfg);
  const auto [train_idx, hold_idx] = split_train_holdout(data.source.size());
  auto run = train_teacher(data.source.subset(train_idx), cfg, progress_for(c));
  const auto holdout = evaluate(run.params, data.source.subset(hold_idx), "teacher-source");
  fs::create_directories(out);
  const fs::path ckpt = out / "teacher.gzck";
  save_checkpoint(run.params, ckpt);
  run.manifest.checkpoint_path = ckpt.string();
  run.manifest.data_hashes["target"] = data.target.content_hash();
  run.manifest.extra["source_holdout_dsc"] = holdout.dsc.mean;
  run.manifest.extra["source_holdout_assd"] = holdout.assd.mean;
  write_report(holdout, out);
  write_loss_csv(run.manifest.losses, out / "loss.csv");
  write_manifest(run.manifest, out / "manifest.json");
  print_summary(holdout);
}

void run_pseudo_label(const Common& c, const std::string& data_dir, const std::string& teacher_path) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto data = load_data(data_dir, cfg);
  const auto teacher = load_checkpoint(teacher_path);
  const auto pseudo = generate_pseudo_labels(teacher, data.target, cfg.pseudo_threshold);
  fs::create_directories(out / "pseudo");
  auto m = base_manifest("pseudo-label", cfg);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    save_mask(pseudo[i], out / "pseudo" / (data.target.id(i) + ".png"));
    if (pseudo[i].foreground_count() == 0) m.warnings.push_back("empty pseudo-label: " + data.target.id(i));
  }
  m.data_hashes["target"] = data.target.content_hash();
  m.checkpoint_path = teacher_path;
  m.checkpoint_hash = checkpoint_hash(teacher);
  m.extra["pseudo_label_hash"] = pseudo_label_hash(pseudo);
  m.extra["threshold"] = cfg.pseudo_threshold;
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << pseudo.size() << " pseudo-labels (" << m.warnings.size() << " empty)\n";
}

void run_adapt(const Common& c, const std::string& data_dir, const std::string& teacher_path,
               const std::string& pseudo_dir) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto data = load_data(data_dir, cfg);
  const auto teacher = load_checkpoint(teacher_path);
  const auto [adapt_idx, hold_idx] = split_train_holdout(data.target.size());
  const auto adapt_set = data.target.subset(adapt_idx);
  std::vector<SegMask> pseudo;
  if (pseudo_dir.empty()) {
    pseudo = generate_pseudo_labels(teacher, adapt_set, cfg.pseudo_threshold);
  } else {
    // Accept either the pseudo-label run directory or its pseudo/ folder.
    fs::path dir = pseudo_dir;
    if (fs::is_directory(dir / "pseudo")) dir /= "pseudo";
    for (std::size_t i = 0; i < adapt_set.size(); ++i) {
      const fs::path p = dir / (adapt_set.id(i) + ".png");
      if (!fs::exists(p)) throw DataError("missing pseudo-label: " + p.string());
      pseudo.push_back(load_mask(p));
    }
  }
  auto run = adapt_student(teacher, adapt_set, pseudo, cfg, progress_for(c));
  const auto holdout = data.target.subset(hold_idx);
  const auto report = evaluate(run.student, holdout, "adapted");
  const auto baseline = evaluate(teacher, holdout, "teacher");
  fs::create_directories(out);
  const fs::path ckpt = out / "student.gzck";
  save_checkpoint(Checkpoint{run.student, run.gaa, {}}, ckpt);
  run.manifest.checkpoint_path = ckpt.string();
  run.manifest.extra["target_holdout_dsc"] = report.dsc.mean;
  run.manifest.extra["teacher_target_holdout_dsc"] = baseline.dsc.mean;
  write_report(report, out);
  write_loss_csv(run.manifest.losses, out / "loss.csv");
  write_manifest(run.manifest, out / "manifest.json");
  print_summary(baseline);
  print_summary(report);
}

void run_evaluate(const Common& c, const std::string& data_dir, const std::string& ckpt_path,
                  const std::string& domain, const std::string& split) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto data = load_data(data_dir, cfg);
  const DomainDataset& all = parse_role(domain) == DomainRole::source ? data.source : data.target;
  const auto [train_idx, hold_idx] = split_train_holdout(all.size());
  const auto params = load_checkpoint(ckpt_path);
  const auto report = evaluate(params, split == "all" ? all : all.subset(hold_idx), domain + "-" + split);
  fs::create_directories(out);
  write_report(report, out);
  auto m = base_manifest("evaluate", cfg);
  m.data_hashes[domain] = all.content_hash();
  m.checkpoint_path = ckpt_path;
  m.checkpoint_hash = checkpoint_hash(params);
  m.extra["dsc"] = report.dsc.mean;
  m.extra["assd"] = report.assd.mean;
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
  print_summary(report);
}

void run_ablate(const Common& c, const std::string& data_dir, const std::string& modes_text, int seeds) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto modes = parse_modes(modes_text);
  const auto data = load_data(data_dir, cfg);
  const auto reports = ablate(data.source, data.target, cfg, modes, seeds, out / "runs", progress_for(c));
  fs::create_directories(out);
  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) all.push_back(report_to_json(r));
  std::ofstream(out / "reports.json") << all.dump(2) << '\n';

  auto m = base_manifest("ablate", cfg);
  m.data_hashes["source"] = data.source.content_hash();
  m.data_hashes["target"] = data.target.content_hash();
  m.extra["modes"] = modes;
  m.extra["seeds"] = seeds;
  if (modes.size() == std::size(kAblationLabels)) {
    const auto table = tabulate_ablation(reports);
    write_ablation_csv(table, out / "ablation.csv");
    write_ablation_chart(table, out / "ablation.svg");
    const auto check = check_ablation_ordering(table);
    for (const auto& w : check.warnings) m.warnings.push_back(w);
    for (const auto& f : check.failures) m.warnings.push_back("ordering: " + f);
    for (const auto& row : table.rows) {
      std::cout << std::fixed << std::setprecision(3) << std::setw(9) << row.label << "  DSC " << row.dsc.mean
                << " +/- " << row.dsc.std << "  ASSD " << row.assd.mean << "  delta " << row.delta_vs_baseline
                << '\n';
    }
  } else {
    for (const auto& r : reports) print_summary(r);
  }
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
}

void run_sweep(const Common& c, const std::string& data_dir, const std::string& param, const std::string& values_text,
               int seeds) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto values = values_text.empty() ? cfg.sweep_values : parse_values(values_text);
  const auto data = load_data(data_dir, cfg);
  const auto points = sweep(data.source, data.target, cfg, param, values, seeds, out / "runs", progress_for(c));
  fs::create_directories(out);
  std::ofstream csv(out / "sweep.csv", std::ios::binary);
  csv << "value,runs,dsc_mean,dsc_std\n" << std::setprecision(10);
  svg::Series series{param, {}, {}};
  for (const auto& p : points) {
    csv << p.value << ',' << p.dsc.count << ',' << p.dsc.mean << ',' << p.dsc.std << '\n';
    series.x.push_back(p.value);
    series.y.push_back(p.dsc.mean);
    std::cout << param << '=' << p.value << "  DSC " << p.dsc.mean << " +/- " << p.dsc.std << '\n';
  }
  svg::write_file(out / "sweep.svg", svg::line_chart("Target DSC vs " + param, param, "DSC (%)", {series}));
  auto m = base_manifest("sweep", cfg);
  m.data_hashes["source"] = data.source.content_hash();
  m.data_hashes["target"] = data.target.content_hash();
  m.extra["param"] = param;
  m.extra["values"] = values;
  m.extra["seeds"] = seeds;
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
}

void run_plot(const Common& c, const std::vector<std::string>& manifests, const std::string& reports_path) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  if (manifests.empty() && reports_path.empty()) throw ValidationError("plot needs --manifest or --reports");
  std::vector<std::string> written;
  if (!manifests.empty()) {
    std::vector<svg::Series> series;
    for (const auto& path : manifests) {
      const auto m = read_manifest(path);
      svg::Series s{fs::path(path).parent_path().filename().string() + " (" + m.kind + ")", {}, {}};
      for (const auto& e : m.losses) {
        s.x.push_back(e.epoch);
        s.y.push_back(e.total);
      }
      if (s.x.empty()) throw DataError("manifest has no loss curve: " + path);
      series.push_back(std::move(s));
    }
    svg::write_file(out / "loss_curves.svg", svg::line_chart("Training loss", "epoch", "total loss", series));
    written.push_back((out / "loss_curves.svg").string());
  }
  if (!reports_path.empty()) {
    std::ifstream in(reports_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + reports_path);
    std::vector<MetricReport> reports;
    try {
      for (const auto& j : nlohmann::json::parse(in)) reports.push_back(report_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad reports file " + reports_path + ": " + e.what());
    }
    const auto table = tabulate_ablation(reports);
    write_ablation_chart(table, out / "ablation.svg");
    write_ablation_csv(table, out / "ablation.csv");
    written.push_back((out / "ablation.svg").string());
  }
  auto m = base_manifest("plot", cfg);
  m.extra["inputs"] = manifests;
  m.extra["outputs"] = written;
  write_manifest(m, out / "manifest.json");
  for (const auto& w : written) std::cout << "wrote " << w << '\n';
}

void run_dump_features(const Common& c, const std::string& ckpt_path, const std::string& image_path,
                       const std::string& data_dir, const std::string& item) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const auto params = load_checkpoint(ckpt_path);
  Image image;
  std::string source_name;
  if (!image_path.empty()) {
    image = load_image(image_path);
    source_name = image_path;
  } else {
    if (item.empty()) throw ValidationError("dump-features needs --image or --item");
    const auto data = load_data(data_dir, cfg);
    bool found = false;
    for (const DomainDataset* d : {&data.target, &data.source}) {
      for (std::size_t i = 0; i < d->size() && !found; ++i) {
        if (d->id(i) == item) {
          image = d->image(i);
          found = true;
        }
      }
    }
    if (!found) throw ValidationError("unknown item '" + item + "'");
    source_name = item;
  }
  dump_features(params, image, out);
  auto m = base_manifest("dump-features", cfg);
  m.checkpoint_path = ckpt_path;
  m.checkpoint_hash = checkpoint_hash(params);
  m.extra["image"] = source_name;
  m.extra["bottleneck_channels"] = params.arch.bottleneck_channels();
  m.wall_clock_s = elapsed(start);
  write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << (out / "bottleneck.gzf") << " and " << (out / "decoder.gzf") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-assisted teacher-student domain adaptation for segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Common common;
  std::string data_dir, teacher, pseudo_dir, checkpoint, domain = "target", split = "holdout";
  std::string modes = "all", param = "lambda_gb", values, reports, image, item;
  std::vector<std::string> manifests;
  int seeds = 5;

  auto* gen = app.add_subcommand("gen-synth", "write synthetic source/target datasets");
  add_common(gen, common);

  auto* train = app.add_subcommand("train-teacher", "supervised teacher training on source");
  add_common(train, common);
  train->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");

  auto* pseudo = app.add_subcommand("pseudo-label", "threshold teacher predictions on target");
  add_common(pseudo, common);
  pseudo->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");
  pseudo->add_option("--teacher", teacher, "teacher checkpoint")->required();

  auto* adapt = app.add_subcommand("adapt", "gaze-guided student adaptation on target");
  add_common(adapt, common);
  adapt->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");
  adapt->add_option("--teacher", teacher, "teacher checkpoint")->required();
  adapt->add_option("--pseudo", pseudo_dir, "pseudo-label directory (default: recompute from the teacher)");

  auto* eval = app.add_subcommand("evaluate", "DSC/ASSD of a checkpoint");
  add_common(eval, common);
  eval->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");
  eval->add_option("--checkpoint", checkpoint, "checkpoint to score")->required();
  eval->add_option("--domain", domain, "source | target")->check(CLI::IsMember({"source", "target"}));
  eval->add_option("--split", split, "holdout | all")->check(CLI::IsMember({"holdout", "all"}));

  auto* abl = app.add_subcommand("ablate", "no-DA / GAA-only / GBL-only / full over several seeds");
  add_common(abl, common);
  abl->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");
  abl->add_option("--modes", modes, "all, or a comma-separated subset");
  abl->add_option("--seeds", seeds, "number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "target DSC as a loss weight varies");
  add_common(sw, common);
  sw->add_option("--data", data_dir, "dataset root from gen-synth (default: generate in memory)");
  sw->add_option("--param", param, "lambda_gaa | lambda_gb")
      ->check(CLI::IsMember({"lambda_gaa", "lambda_gb", "lambda.gaa", "lambda.gb"}));
  sw->add_option("--values", values, "comma-separated grid (default: sweep.values)");
  sw->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "loss curves and ablation bars as SVG");
  add_common(plot, common);
  plot->add_option("--manifest", manifests, "run manifests with loss curves");
  plot->add_option("--reports", reports, "reports.json written by ablate");

  auto* dump = app.add_subcommand("dump-features", "write bottleneck and decoder feature maps");
  add_common(dump, common);
  dump->add_option("--checkpoint", checkpoint, "checkpoint")->required();
  dump->add_option("--image", image, "PNG image");
  dump->add_option("--data", data_dir, "dataset root (with --item)");
  dump->add_option("--item", item, "item id from the dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) run_gen_synth(common);
    if (*train) run_train_teacher(common, data_dir);
    if (*pseudo) run_pseudo_label(common, data_dir, teacher);
    if (*adapt) run_adapt(common, data_dir, teacher, pseudo_dir);
    if (*eval) run_evaluate(common, data_dir, checkpoint, domain, split);
    if (*abl) run_ablate(common, data_dir, modes, seeds);
    if (*sw) run_sweep(common, data_dir, param, values, seeds);
    if (*plot) run_plot(common, manifests, reports);
    if (*dump) run_dump_features(common, checkpoint, image, data_dir, item);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
