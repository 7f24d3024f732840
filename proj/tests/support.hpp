#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "cliquemining/dataset.hpp"

namespace support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cliquemining-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Two sequences in one city plus one in another; 3-d random embeddings.
inline cliquemining::Dataset tiny_dataset(std::uint64_t seed = 1) {
  using namespace cliquemining;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Frame> frames;
  auto add = [&](const std::string& seq, const std::string& city, double x0, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      Frame f;
      f.frame_id = frames.size();
      f.seq_id = seq;
      f.city = city;
      f.position = Position(x0 + 5.0 * static_cast<double>(i), 100.0);
      f.seq_index = static_cast<std::uint32_t>(i);
      frames.push_back(f);
    }
  };
  add("a/r0/t0", "alpha", 0.0, 4);
  add("a/r0/t1", "alpha", 1.0, 5);
  add("b/r0/t0", "beta", 50000.0, 3);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(frames.size()), 3);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = g(rng);
  return Dataset(std::move(frames), normalize_rows(raw), DatasetMetadata{"tiny", seed});
}

}  // namespace support
