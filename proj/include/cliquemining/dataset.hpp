#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cliquemining {

using Position = Eigen::Vector2d;

/// Row-major float matrix; one row per frame.
using EmbeddingRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Frame {
  std::uint64_t frame_id = 0;
  std::string seq_id;
  std::string city;
  Position position = Position::Zero();  // UTM easting/northing, meters
  std::uint32_t seq_index = 0;
};

struct Sequence {
  std::string seq_id;
  std::string city;
  std::vector<std::size_t> frame_ids;  // ordered by seq_index
};

struct EmbeddingMatrix {
  EmbeddingRows values;
  bool normalized = false;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
  [[nodiscard]] Eigen::VectorXd row(std::size_t i) const {
    return values.row(static_cast<Eigen::Index>(i)).transpose().cast<double>();
  }
};

struct City {
  std::string name;
  std::vector<std::size_t> sequences;  // indices into Dataset::sequences()
};

struct DatasetMetadata {
  std::string name;
  std::optional<std::uint64_t> seed;
};

/// Immutable store of geotagged frames grouped into sequences, with one
/// embedding row per frame. frame_id doubles as the embedding row index.
///
/// Construction does not enforce invariants; use validate() or load_dataset()
/// for checked datasets.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Frame> frames, EmbeddingMatrix embeddings, DatasetMetadata metadata = {});

  [[nodiscard]] const std::vector<Frame>& frames() const { return frames_; }
  [[nodiscard]] const std::vector<Sequence>& sequences() const { return sequences_; }
  [[nodiscard]] const std::vector<City>& cities() const { return cities_; }
  [[nodiscard]] const EmbeddingMatrix& embeddings() const { return embeddings_; }
  [[nodiscard]] const DatasetMetadata& metadata() const { return metadata_; }

  [[nodiscard]] std::size_t size() const { return frames_.size(); }
  [[nodiscard]] const Frame& frame(std::size_t id) const { return frames_.at(id); }
  [[nodiscard]] std::optional<std::size_t> find_sequence(const std::string& seq_id) const;

  /// Index into sequences() of the sequence containing each frame.
  [[nodiscard]] std::size_t sequence_of(std::size_t frame_id) const { return frame_sequence_.at(frame_id); }

 private:
  std::vector<Frame> frames_;
  std::vector<Sequence> sequences_;
  std::vector<City> cities_;
  std::vector<std::size_t> frame_sequence_;
  EmbeddingMatrix embeddings_;
  DatasetMetadata metadata_;
};

/// Euclidean distance on the UTM plane, in meters.
inline double geo_distance(const Position& a, const Position& b) { return (a - b).norm(); }

template <typename DerivedA, typename DerivedB>
double desc_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("desc_distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.derived().coeff(i)) - static_cast<double>(b.derived().coeff(i));
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// Frame at seq_index floor(L/2).
std::size_t central_frame(const Sequence& seq);

std::vector<std::string> validate(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& embeddings_path);
void save_dataset(const Dataset& ds, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& embeddings_path);

EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path);

/// Normalizes rows to unit L2 norm in double precision and sets the flag.
EmbeddingMatrix normalize_rows(const Eigen::MatrixXd& values);

/// 64-bit FNV-1a over manifest fields and embedding payload, hex encoded.
std::string fingerprint(const Dataset& ds);

/// Route key of a sequence id: everything before the last '/'. Traversals of
/// the same route share it; frames mode retrieval aligns on it.
std::string route_of(const std::string& seq_id);

}  // namespace cliquemining
