#include "gahcda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>

#include "gahcda/svg.hpp"

namespace gahcda {

double dsc(const SegMask& pred, const SegMask& truth) {
  if (!same_shape(pred, truth)) throw ValidationError("shape mismatch");
  std::size_t inter = 0, a = 0, b = 0;
  const auto p = pred.values();
  const auto t = truth.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    a += p[i];
    b += t[i];
    inter += p[i] & t[i];
  }
  if (a + b == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

std::vector<std::size_t> surface_pixels(const SegMask& mask) {
  const int h = mask.height(), w = mask.width();
  std::vector<std::size_t> out;
  auto bg = [&](int r, int c) { return r < 0 || r >= h || c < 0 || c >= w || mask(r, c) == 0; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) && (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1))) {
        out.push_back(static_cast<std::size_t>(r) * w + c);
      }
    }
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), in place on `f`.
void distance_transform_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                           std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int r) {
    return ((f[q] + static_cast<double>(q) * q) - (f[r] + static_cast<double>(r) * r)) / (2.0 * q - 2.0 * r);
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
  f = d;
}

/// Exact squared Euclidean distance from every pixel to the nearest seed.
std::vector<double> squared_edt(int h, int w, const std::vector<std::size_t>& seeds) {
  std::vector<double> grid(static_cast<std::size_t>(h) * w, kFar);
  for (auto s : seeds) grid[s] = 0.0;
  const int n = std::max(h, w);
  std::vector<double> f, d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  f.reserve(n);
  for (int c = 0; c < w; ++c) {
    f.assign(h, 0.0);
    d.assign(h, 0.0);
    for (int r = 0; r < h; ++r) f[r] = grid[static_cast<std::size_t>(r) * w + c];
    distance_transform_1d(f, d, v, z);
    for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = f[r];
  }
  for (int r = 0; r < h; ++r) {
    f.assign(grid.begin() + static_cast<std::ptrdiff_t>(r) * w, grid.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
    d.assign(w, 0.0);
    distance_transform_1d(f, d, v, z);
    std::copy(f.begin(), f.end(), grid.begin() + static_cast<std::ptrdiff_t>(r) * w);
  }
  return grid;
}

}  // namespace

double assd(const SegMask& pred, const SegMask& truth) {
  if (!same_shape(pred, truth)) throw ValidationError("shape mismatch");
  const auto sa = surface_pixels(pred);
  const auto sb = surface_pixels(truth);
  if (sa.empty() || sb.empty()) throw DataError("undefined surface distance");
  const auto to_b = squared_edt(pred.height(), pred.width(), sb);
  const auto to_a = squared_edt(pred.height(), pred.width(), sa);
  double total = 0.0;
  for (auto i : sa) total += std::sqrt(to_b[i]);
  for (auto i : sb) total += std::sqrt(to_a[i]);
  return total / static_cast<double>(sa.size() + sb.size());
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / values.size());
  return s;
}

ItemMetrics evaluate_item(const std::string& id, const SegMask& pred, const SegMask& truth) {
  ItemMetrics m;
  m.id = id;
  m.dsc = dsc(pred, truth);
  if (pred.foreground_count() == 0) m.flags.push_back("empty-prediction");
  if (truth.foreground_count() == 0) m.flags.push_back("empty-truth");
  if (m.flags.empty()) {
    m.assd = assd(pred, truth);
  } else {
    m.flags.push_back("undefined-surface-distance");
  }
  return m;
}

MetricReport make_report(std::string label, std::vector<ItemMetrics> items, nlohmann::json metadata) {
  MetricReport r;
  r.label = std::move(label);
  r.items = std::move(items);
  std::vector<double> d, a;
  for (const auto& it : r.items) {
    d.push_back(it.dsc);
    if (it.assd) a.push_back(*it.assd);
  }
  r.dsc = summarize(d);
  r.assd = summarize(a);
  r.metadata = metadata.is_object() ? std::move(metadata) : nlohmann::json::object();
  r.metadata["std_denominator"] = "population";
  return r;
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "item,dsc,assd,flags\n" << std::setprecision(10);
  for (const auto& it : report.items) {
    out << it.id << ',' << it.dsc << ',';
    if (it.assd) out << *it.assd;
    out << ',';
    for (std::size_t i = 0; i < it.flags.size(); ++i) out << (i ? ";" : "") << it.flags[i];
    out << '\n';
  }
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

Summary summary_from(const nlohmann::json& j) {
  return Summary{j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<std::size_t>()};
}

}  // namespace

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json j{{"id", it.id}, {"dsc", it.dsc}, {"flags", it.flags}};
    j["assd"] = it.assd ? nlohmann::json(*it.assd) : nlohmann::json(nullptr);
    items.push_back(std::move(j));
  }
  return {{"label", r.label},
          {"dsc", summary_json(r.dsc)},
          {"assd", summary_json(r.assd)},
          {"metadata", r.metadata},
          {"items", std::move(items)}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.label = j.at("label").get<std::string>();
  r.dsc = summary_from(j.at("dsc"));
  r.assd = summary_from(j.at("assd"));
  r.metadata = j.value("metadata", nlohmann::json::object());
  for (const auto& it : j.value("items", nlohmann::json::array())) {
    ItemMetrics m;
    m.id = it.at("id").get<std::string>();
    m.dsc = it.at("dsc").get<double>();
    if (!it.at("assd").is_null()) m.assd = it.at("assd").get<double>();
    m.flags = it.value("flags", std::vector<std::string>{});
    r.items.push_back(std::move(m));
  }
  return r;
}

AblationTable tabulate_ablation(const std::vector<MetricReport>& runs) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_label;
  for (const auto& run : runs) {
    auto& [d, a] = by_label[run.label];
    d.push_back(run.dsc.mean);
    if (run.assd.count > 0) a.push_back(run.assd.mean);
  }
  AblationTable table;
  for (const char* label : kAblationLabels) {
    auto it = by_label.find(label);
    if (it == by_label.end()) throw ValidationError(std::string("incomplete ablation set: missing ") + label);
    AblationRow row;
    row.label = label;
    row.dsc = summarize(it->second.first);
    row.assd = summarize(it->second.second);
    table.rows.push_back(row);
  }
  for (auto& row : table.rows) row.delta_vs_baseline = row.dsc.mean - table.rows.front().dsc.mean;
  return table;
}

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "config,runs,dsc_mean,dsc_std,assd_mean,assd_std,delta_dsc_vs_no_da\n" << std::setprecision(10);
  for (const auto& r : table.rows) {
    out << r.label << ',' << r.dsc.count << ',' << r.dsc.mean << ',' << r.dsc.std << ',' << r.assd.mean << ','
        << r.assd.std << ',' << r.delta_vs_baseline << '\n';
  }
}

void write_ablation_chart(const AblationTable& table, const std::filesystem::path& svg_path) {
  std::vector<svg::Bar> bars;
  for (const auto& r : table.rows) bars.push_back({r.label, r.dsc.mean, r.dsc.std});
  svg::write_file(svg_path, svg::bar_chart("Ablation: target DSC by configuration", "DSC (%)", bars));
}

OrderingCheck check_ablation_ordering(const AblationTable& table, double tie_tolerance) {
  auto mean_of = [&](const std::string& label) {
    for (const auto& r : table.rows) {
      if (r.label == label) return r.dsc.mean;
    }
    throw ValidationError("incomplete ablation set: missing " + label);
  };
  const double none = mean_of("no-DA"), gaa = mean_of("GAA-only"), gbl = mean_of("GBL-only"),
               full = mean_of("full");
  const double hi = std::max(gaa, gbl), lo = std::min(gaa, gbl);
  OrderingCheck check;
  auto require = [&](double left, double right, const std::string& what) {
    if (left >= right) return;
    std::ostringstream msg;
    msg << what << " (" << std::fixed << std::setprecision(3) << left << " < " << right << ")";
    if (right - left <= tie_tolerance) {
      check.warnings.push_back("tie: " + msg.str());
    } else {
      check.failures.push_back(msg.str());
      check.passed = false;
    }
  };
  require(full, hi, "full >= max(GAA-only, GBL-only)");
  require(lo, none, "min(GAA-only, GBL-only) >= no-DA");
  return check;
}

}  // namespace gahcda
