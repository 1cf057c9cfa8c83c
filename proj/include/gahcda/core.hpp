#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gahcda {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-side precondition or configuration problem (CLI exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A loss or activation became NaN/Inf during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dense row-major 2-D array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw ValidationError("negative grid dimensions");
  }
  Grid(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (height < 0 || width < 0 ||
        values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
      throw ValidationError("grid value count does not match dimensions");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  const T& operator()(int row, int col) const { return values_[index(row, col)]; }
  std::span<const T> values() const noexcept { return values_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  friend bool operator==(const Grid&, const Grid&) = default;

 protected:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

template <class A, class B>
bool same_shape(const Grid<A>& a, const Grid<B>& b) noexcept {
  return a.height() == b.height() && a.width() == b.width();
}

/// Grayscale frame with every intensity in [0,1].
class Image : public Grid<float> {
 public:
  static constexpr int kMinSide = 16;

  Image() = default;
  Image(int height, int width, std::vector<float> pixels);
};

/// Binary segmentation mask; every value is exactly 0 or 1.
class SegMask : public Grid<std::uint8_t> {
 public:
  SegMask() = default;
  SegMask(int height, int width, std::vector<std::uint8_t> pixels);

  std::size_t foreground_count() const noexcept;
};

struct GazeSample {
  double t_ms = 0.0;
  double x = 0.0;  ///< normalized column coordinate
  double y = 0.0;  ///< normalized row coordinate

  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

/// Timestamped gaze samples over a single frame. Timestamps strictly increase.
class GazeTrajectory {
 public:
  GazeTrajectory() = default;
  GazeTrajectory(std::string frame_id, std::vector<GazeSample> samples);

  const std::string& frame_id() const noexcept { return frame_id_; }
  std::span<const GazeSample> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  friend bool operator==(const GazeTrajectory&, const GazeTrajectory&) = default;

 private:
  std::string frame_id_;
  std::vector<GazeSample> samples_;
};

enum class DomainRole { source, target };

const char* to_string(DomainRole role) noexcept;
DomainRole parse_role(const std::string& text);

/// Labeled source record as seen by training.
struct SourceView {
  const std::string& id;
  const Image& image;
  const SegMask& mask;
};

/// Target record as seen by training. Carries no mask: evaluation labels are
/// only reachable through DomainDataset::evaluation_mask.
struct TargetView {
  const std::string& id;
  const Image& image;
  const GazeTrajectory* gaze;
};

class DomainDataset {
 public:
  struct Record {
    std::string id;
    Image image;
    std::optional<SegMask> mask;
    std::optional<GazeTrajectory> gaze;
  };

  DomainDataset(DomainRole role, std::vector<Record> records);

  DomainRole role() const noexcept { return role_; }
  std::size_t size() const noexcept { return records_.size(); }

  const std::string& id(std::size_t i) const { return records_.at(i).id; }
  const Image& image(std::size_t i) const { return records_.at(i).image; }

  /// Source datasets only.
  SourceView source_item(std::size_t i) const;
  /// Target datasets only.
  TargetView target_item(std::size_t i) const;

  /// Evaluation-only access to ground truth. For source data this is the
  /// training label; for target data it may be absent.
  const SegMask* evaluation_mask(std::size_t i) const;

  /// Subset by index, keeping order of `indices`.
  DomainDataset subset(std::span<const std::size_t> indices) const;

  /// SHA-1 over the ordered image/mask/gaze content.
  std::string content_hash() const;

 private:
  DomainRole role_;
  std::vector<Record> records_;
};

/// Divide by the per-image maximum. Throws DataError("bad image range") on
/// negative input.
Image normalize_image(int height, int width, std::span<const double> raw);

/// Parse a `t_ms,x,y` gaze CSV.
GazeTrajectory parse_gaze_csv(std::istream& in, const std::string& frame_id);
GazeTrajectory read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(const GazeTrajectory& trajectory, const std::filesystem::path& path);

/// Single-file PNG helpers. Masks treat any nonzero pixel as foreground and
/// are written as 0/255.
Image load_image(const std::filesystem::path& path);
SegMask load_mask(const std::filesystem::path& path);
void save_mask(const SegMask& mask, const std::filesystem::path& path);

/// Reads `root/images`, `root/masks` and (target) `root/gaze`.
DomainDataset load_dataset(const std::filesystem::path& root, DomainRole role);

/// Writes the same layout load_dataset reads. Images go out as 16-bit PNG.
void write_dataset(const DomainDataset& dataset, const std::filesystem::path& root);

/// 80/20 split by index: first `ceil(0.8 n)` items train, rest held out.
/// Both sides are nonempty whenever n >= 2.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_holdout(std::size_t n);

}  // namespace gahcda
