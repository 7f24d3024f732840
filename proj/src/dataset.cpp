#include "cliquemining/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/core.h>
#include <json.hpp>

namespace cliquemining {

namespace {

constexpr std::array<char, 4> kEmbeddingMagic = {'G', 'E', 'M', 'B'};
constexpr std::uint32_t kEmbeddingVersion = 1;

static_assert(std::endian::native == std::endian::little, "embedding I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

struct Fnv1a {
  std::uint64_t state = 0xcbf29ce484222325ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  void text(const std::string& s) {
    value(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

}  // namespace

Dataset::Dataset(std::vector<Frame> frames, EmbeddingMatrix embeddings, DatasetMetadata metadata)
    : frames_(std::move(frames)), embeddings_(std::move(embeddings)), metadata_(std::move(metadata)) {
  std::unordered_map<std::string, std::size_t> seq_index;
  std::unordered_map<std::string, std::size_t> city_index;
  frame_sequence_.resize(frames_.size());
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const Frame& f = frames_[i];
    auto [it, inserted] = seq_index.try_emplace(f.seq_id, sequences_.size());
    if (inserted) {
      sequences_.push_back(Sequence{f.seq_id, f.city, {}});
      auto [cit, new_city] = city_index.try_emplace(f.city, cities_.size());
      if (new_city) cities_.push_back(City{f.city, {}});
      cities_[cit->second].sequences.push_back(it->second);
    }
    sequences_[it->second].frame_ids.push_back(i);
    frame_sequence_[i] = it->second;
  }
  for (Sequence& s : sequences_) {
    std::stable_sort(s.frame_ids.begin(), s.frame_ids.end(), [this](std::size_t a, std::size_t b) {
      return frames_[a].seq_index < frames_[b].seq_index;
    });
  }
}

std::optional<std::size_t> Dataset::find_sequence(const std::string& seq_id) const {
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    if (sequences_[i].seq_id == seq_id) return i;
  }
  return std::nullopt;
}

std::size_t central_frame(const Sequence& seq) {
  if (seq.frame_ids.empty()) throw DatasetError("central_frame: empty sequence '" + seq.seq_id + "'");
  return seq.frame_ids[seq.frame_ids.size() / 2];
}

std::vector<std::string> validate(const Dataset& ds) {
  std::vector<std::string> issues;
  const auto& frames = ds.frames();
  const auto& emb = ds.embeddings();

  if (emb.rows() != frames.size()) {
    issues.push_back(fmt::format("embedding rows ({}) differ from frame count ({})", emb.rows(), frames.size()));
  }
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.frame_id != i) issues.push_back(fmt::format("frame at row {} has frame_id {}", i, f.frame_id));
    if (!seen.insert(f.frame_id).second) issues.push_back(fmt::format("duplicate frame_id {}", f.frame_id));
    if (!f.position.allFinite()) issues.push_back(fmt::format("frame {} has a non-finite position", f.frame_id));
  }
  for (const Sequence& s : ds.sequences()) {
    for (std::size_t k = 0; k < s.frame_ids.size(); ++k) {
      const Frame& f = frames[s.frame_ids[k]];
      if (f.seq_index != k) {
        issues.push_back(fmt::format("sequence '{}' seq_index not contiguous: expected {}, found {} (frame {})",
                                     s.seq_id, k, f.seq_index, f.frame_id));
        break;
      }
      if (f.city != s.city) {
        issues.push_back(fmt::format("sequence '{}' spans cities '{}' and '{}'", s.seq_id, s.city, f.city));
        break;
      }
    }
  }
  const auto rows = std::min<std::size_t>(emb.rows(), frames.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = emb.values.row(static_cast<Eigen::Index>(i));
    if (!r.allFinite()) {
      issues.push_back(fmt::format("embedding row {} has non-finite values", i));
      continue;
    }
    if (emb.normalized) {
      const double n = r.cast<double>().norm();
      if (std::abs(n - 1.0) > 1e-6) issues.push_back(fmt::format("embedding row {} has norm {} but is flagged normalized", i, n));
    }
  }
  return issues;
}

EmbeddingMatrix normalize_rows(const Eigen::MatrixXd& values) {
  EmbeddingMatrix out;
  out.values.resize(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const double n = values.row(i).norm();
    out.values.row(i) = (n > 0.0 ? Eigen::RowVectorXd(values.row(i) / n) : Eigen::RowVectorXd(values.row(i))).cast<float>();
  }
  out.normalized = true;
  return out;
}

void write_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open embedding file for writing: " + path.string());
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  put<std::uint32_t>(out, kEmbeddingVersion);
  put<std::uint64_t>(out, emb.rows());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(emb.dim()));
  put<std::uint8_t>(out, emb.normalized ? 1 : 0);
  const std::array<char, 3> reserved{};
  out.write(reserved.data(), reserved.size());
  out.write(reinterpret_cast<const char*>(emb.values.data()),
            static_cast<std::streamsize>(emb.values.size() * sizeof(float)));
  if (!out) throw DatasetError("failed writing embedding file: " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open embedding file: " + path.string());
  std::array<char, 4> magic{};
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::uint32_t dim = 0;
  std::uint8_t flag = 0;
  std::array<char, 3> reserved{};
  if (!in.read(magic.data(), magic.size()) || magic != kEmbeddingMagic) {
    throw DatasetError(path.string() + ": bad magic, expected GEMB");
  }
  if (!get(in, version) || version != kEmbeddingVersion) {
    throw DatasetError(fmt::format("{}: unsupported embedding version {}", path.string(), version));
  }
  if (!get(in, n) || !get(in, dim) || !get(in, flag) || !in.read(reserved.data(), reserved.size())) {
    throw DatasetError(path.string() + ": truncated header");
  }
  if (flag > 1) throw DatasetError(fmt::format("{}: invalid normalized flag {}", path.string(), flag));
  EmbeddingMatrix emb;
  emb.normalized = flag == 1;
  emb.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const auto bytes = static_cast<std::streamsize>(n * dim * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(emb.values.data()), bytes)) {
    throw DatasetError(fmt::format("{}: payload shorter than {} x {} floats", path.string(), n, dim));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DatasetError(fmt::format("{}: trailing bytes after {} x {} payload", path.string(), n, dim));
  }
  return emb;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& embeddings_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DatasetError("cannot open manifest: " + manifest_path.string());

  std::vector<Frame> frames;
  std::unordered_set<std::uint64_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = fmt::format("{}:{}", manifest_path.string(), line_no);
    Frame f;
    try {
      const auto j = nlohmann::json::parse(line);
      f.frame_id = j.at("frame_id").get<std::uint64_t>();
      f.seq_id = j.at("seq_id").get<std::string>();
      f.city = j.at("city").get<std::string>();
      f.position = Position(j.at("utm_east").get<double>(), j.at("utm_north").get<double>());
      f.seq_index = j.at("seq_index").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(fmt::format("{}: malformed record: {}", where, e.what()));
    }
    if (!ids.insert(f.frame_id).second) {
      throw DatasetError(fmt::format("{}: duplicate frame_id {}", where, f.frame_id));
    }
    if (f.frame_id != frames.size()) {
      throw DatasetError(fmt::format("{}: frame_id {} does not match record index {}", where, f.frame_id, frames.size()));
    }
    if (!f.position.allFinite()) throw DatasetError(fmt::format("{}: non-finite position", where));
    frames.push_back(std::move(f));
  }

  EmbeddingMatrix emb = read_embeddings(embeddings_path);
  if (emb.rows() != frames.size()) {
    throw DatasetError(fmt::format("{}: embedding count {} does not match manifest record count {}",
                                   embeddings_path.string(), emb.rows(), frames.size()));
  }
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    if (!emb.values.row(static_cast<Eigen::Index>(i)).allFinite()) {
      throw DatasetError(fmt::format("{}: non-finite embedding value in record {}", embeddings_path.string(), i));
    }
  }

  Dataset ds(std::move(frames), std::move(emb), DatasetMetadata{manifest_path.stem().string(), std::nullopt});
  if (auto issues = validate(ds); !issues.empty()) {
    throw DatasetError(manifest_path.string() + ": " + issues.front());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& embeddings_path) {
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DatasetError("cannot open manifest for writing: " + manifest_path.string());
  for (const Frame& f : ds.frames()) {
    nlohmann::ordered_json j;
    j["frame_id"] = f.frame_id;
    j["seq_id"] = f.seq_id;
    j["city"] = f.city;
    j["utm_east"] = f.position.x();
    j["utm_north"] = f.position.y();
    j["seq_index"] = f.seq_index;
    out << j.dump() << '\n';
  }
  if (!out) throw DatasetError("failed writing manifest: " + manifest_path.string());
  write_embeddings(ds.embeddings(), embeddings_path);
}

std::string fingerprint(const Dataset& ds) {
  Fnv1a h;
  for (const Frame& f : ds.frames()) {
    h.value(f.frame_id);
    h.text(f.seq_id);
    h.text(f.city);
    h.value(f.position.x());
    h.value(f.position.y());
    h.value(f.seq_index);
  }
  const auto& emb = ds.embeddings();
  h.value(static_cast<std::uint64_t>(emb.rows()));
  h.value(static_cast<std::uint64_t>(emb.dim()));
  h.value(static_cast<std::uint8_t>(emb.normalized));
  h.bytes(emb.values.data(), static_cast<std::size_t>(emb.values.size()) * sizeof(float));
  return fmt::format("{:016x}", h.state);
}

std::string route_of(const std::string& seq_id) {
  const auto pos = seq_id.rfind('/');
  return pos == std::string::npos ? seq_id : seq_id.substr(0, pos);
}

}  // namespace cliquemining
