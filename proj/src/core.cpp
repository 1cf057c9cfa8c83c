#include "gahcda/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gahcda/hashing.hpp"
#include "gahcda/png_io.hpp"

namespace gahcda {

namespace fs = std::filesystem;

Image::Image(int height, int width, std::vector<float> pixels)
    : Grid<float>(height, width, std::move(pixels)) {
  if (height < kMinSide || width < kMinSide) {
    throw ValidationError("image must be at least 16x16, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("bad image range");
  }
}

SegMask::SegMask(int height, int width, std::vector<std::uint8_t> pixels)
    : Grid<std::uint8_t>(height, width, std::move(pixels)) {
  for (auto v : values_) {
    if (v > 1) throw DataError("mask values must be 0 or 1");
  }
}

std::size_t SegMask::foreground_count() const noexcept {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

GazeTrajectory::GazeTrajectory(std::string frame_id, std::vector<GazeSample> samples)
    : frame_id_(std::move(frame_id)), samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!(s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 && s.y <= 1.0)) {
      throw DataError("gaze sample " + std::to_string(i) + " outside [0,1]");
    }
    if (i > 0 && !(s.t_ms > samples_[i - 1].t_ms)) {
      throw DataError("gaze timestamps must strictly increase (sample " + std::to_string(i) + ")");
    }
  }
}

const char* to_string(DomainRole role) noexcept {
  return role == DomainRole::source ? "source" : "target";
}

DomainRole parse_role(const std::string& text) {
  if (text == "source") return DomainRole::source;
  if (text == "target") return DomainRole::target;
  throw ValidationError("unknown domain role '" + text + "'");
}

DomainDataset::DomainDataset(DomainRole role, std::vector<Record> records)
    : role_(role), records_(std::move(records)) {
  for (const auto& r : records_) {
    if (role_ == DomainRole::source && !r.mask) {
      throw DataError("incomplete source record: " + r.id);
    }
    if (r.mask && !same_shape(*r.mask, r.image)) {
      throw DataError("mask shape differs from image: " + r.id);
    }
  }
}

SourceView DomainDataset::source_item(std::size_t i) const {
  if (role_ != DomainRole::source) throw ValidationError("source_item on a target dataset");
  const auto& r = records_.at(i);
  return SourceView{r.id, r.image, *r.mask};
}

TargetView DomainDataset::target_item(std::size_t i) const {
  if (role_ != DomainRole::target) throw ValidationError("target_item on a source dataset");
  const auto& r = records_.at(i);
  return TargetView{r.id, r.image, r.gaze ? &*r.gaze : nullptr};
}

const SegMask* DomainDataset::evaluation_mask(std::size_t i) const {
  const auto& r = records_.at(i);
  return r.mask ? &*r.mask : nullptr;
}

DomainDataset DomainDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Record> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(records_.at(i));
  return DomainDataset(role_, std::move(picked));
}

std::string DomainDataset::content_hash() const {
  Sha1 sha;
  sha.update(to_string(role_), std::char_traits<char>::length(to_string(role_)));
  for (const auto& r : records_) {
    sha.update(r.id.data(), r.id.size());
    const std::int32_t dims[2] = {r.image.height(), r.image.width()};
    sha.update(dims, sizeof dims);
    sha.update_values(r.image.values());
    const std::uint8_t has_mask = r.mask ? 1 : 0;
    sha.update(&has_mask, 1);
    if (r.mask) sha.update_values(r.mask->values());
    const std::uint8_t has_gaze = r.gaze ? 1 : 0;
    sha.update(&has_gaze, 1);
    if (r.gaze) sha.update_values(r.gaze->samples());
  }
  return sha.hex_digest();
}

Image normalize_image(int height, int width, std::span<const double> raw) {
  if (raw.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("raw value count does not match dimensions");
  }
  double peak = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("bad image range");
    peak = std::max(peak, v);
  }
  std::vector<float> px(raw.size(), 0.0f);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      px[i] = static_cast<float>(raw[i] / peak);
    }
  }
  return Image(height, width, std::move(px));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

GazeTrajectory parse_gaze_csv(std::istream& in, const std::string& frame_id) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("gaze parse error at line 1: missing header");
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (trim(line) != "t_ms,x,y") {
    throw DataError("gaze parse error at line 1: expected header 't_ms,x,y'");
  }
  std::vector<GazeSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string_view view(line);
    const auto c1 = view.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : view.find(',', c1 + 1);
    GazeSample s;
    if (c2 == std::string_view::npos || view.find(',', c2 + 1) != std::string_view::npos ||
        !parse_double(view.substr(0, c1), s.t_ms) || !parse_double(view.substr(c1 + 1, c2 - c1 - 1), s.x) ||
        !parse_double(view.substr(c2 + 1), s.y)) {
      throw DataError("gaze parse error at line " + std::to_string(line_no) + ": '" + line + "'");
    }
    if (s.x < 0.0 || s.x > 1.0 || s.y < 0.0 || s.y > 1.0 ||
        (!samples.empty() && !(s.t_ms > samples.back().t_ms))) {
      throw DataError("gaze parse error at line " + std::to_string(line_no) +
                      ": coordinates outside [0,1] or non-increasing timestamp");
    }
    samples.push_back(s);
  }
  return GazeTrajectory(frame_id, std::move(samples));
}

GazeTrajectory read_gaze_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_gaze_csv(in, path.stem().string());
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " in " + path.string());
  }
}

void write_gaze_csv(const GazeTrajectory& trajectory, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "t_ms,x,y\n";
  out << std::setprecision(17);
  for (const auto& s : trajectory.samples()) out << s.t_ms << ',' << s.x << ',' << s.y << '\n';
}

Image load_image(const fs::path& path) {
  const RawGray raw = read_png_gray(path);
  std::vector<double> values(raw.values.begin(), raw.values.end());
  if (raw.height < Image::kMinSide || raw.width < Image::kMinSide) {
    throw DataError("bad image range: " + path.string() + " is smaller than 16x16");
  }
  try {
    return normalize_image(raw.height, raw.width, values);
  } catch (const DataError&) {
    throw DataError("bad image range: " + path.string());
  }
}

SegMask load_mask(const fs::path& path) {
  const RawGray raw = read_png_gray(path);
  std::vector<std::uint8_t> px(raw.values.size());
  std::transform(raw.values.begin(), raw.values.end(), px.begin(),
                 [](std::uint16_t v) { return static_cast<std::uint8_t>(v != 0); });
  return SegMask(raw.height, raw.width, std::move(px));
}

void save_mask(const SegMask& mask, const fs::path& path) {
  std::vector<std::uint8_t> px(mask.values().begin(), mask.values().end());
  for (auto& v : px) v = v ? 255 : 0;
  write_png_gray8(path, mask.height(), mask.width(), px);
}

namespace {

std::vector<std::string> sorted_stems(const fs::path& dir, const std::string& extension) {
  std::vector<std::string> stems;
  if (!fs::is_directory(dir)) return stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

}  // namespace

DomainDataset load_dataset(const fs::path& root, DomainRole role) {
  const fs::path images_dir = root / "images";
  if (!fs::is_directory(images_dir)) {
    throw DataError("dataset root lacks an images/ directory: " + root.string());
  }
  const auto stems = sorted_stems(images_dir, ".png");
  if (stems.empty()) throw DataError("no images found under " + images_dir.string());

  std::vector<DomainDataset::Record> records;
  records.reserve(stems.size());
  for (const auto& stem : stems) {
    DomainDataset::Record rec;
    rec.id = stem;
    rec.image = load_image(images_dir / (stem + ".png"));
    const fs::path mask_path = root / "masks" / (stem + ".png");
    if (fs::exists(mask_path)) {
      rec.mask = load_mask(mask_path);
      if (!same_shape(*rec.mask, rec.image)) throw DataError("mask shape differs from image: " + stem);
    } else if (role == DomainRole::source) {
      throw DataError("incomplete source record: " + stem);
    }
    if (role == DomainRole::target) {
      const fs::path gaze_path = root / "gaze" / (stem + ".csv");
      if (fs::exists(gaze_path)) rec.gaze = read_gaze_csv(gaze_path);
    }
    records.push_back(std::move(rec));
  }
  return DomainDataset(role, std::move(records));
}

void write_dataset(const DomainDataset& dataset, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  if (dataset.role() == DomainRole::target) fs::create_directories(root / "gaze");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& id = dataset.id(i);
    const Image& img = dataset.image(i);
    std::vector<std::uint16_t> q(img.size());
    std::transform(img.values().begin(), img.values().end(), q.begin(), [](float v) {
      return static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * 65535.0));
    });
    write_png_gray16(root / "images" / (id + ".png"), img.height(), img.width(), q);
    if (const SegMask* m = dataset.evaluation_mask(i)) save_mask(*m, root / "masks" / (id + ".png"));
    if (dataset.role() == DomainRole::target) {
      if (const GazeTrajectory* g = dataset.target_item(i).gaze) {
        write_gaze_csv(*g, root / "gaze" / (id + ".csv"));
      }
    }
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_holdout(std::size_t n) {
  std::size_t n_train = (8 * n + 9) / 10;
  if (n >= 2 && n_train == n) n_train = n - 1;
  std::vector<std::size_t> train, holdout;
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? train : holdout).push_back(i);
  return {train, holdout};
}

}  // namespace gahcda
