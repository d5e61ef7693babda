#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "persim/errors.hpp"
#include "persim/featuregen.hpp"
#include "persim/regression.hpp"
#include "persim/reliability.hpp"
#include "persim/scores.hpp"
#include "persim/search.hpp"

namespace persim::io {

// ---------------------------------------------------------------------------
// checksums

inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string() + " for checksum");
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(buf.data(), static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// dataset binary format
//
//   bytes 0..7   magic "PSIMDS01"
//   u32          format version (1)
//   u32          reserved (0)
//   u64          n_subjects
//   u64          n_features
//   f64          target ICC
//   u64          band seed
//   body         n_subjects * n_features * 2 doubles, subject-major:
//                value(subject, feature, session) at
//                index (subject * n_features + feature) * 2 + session
//
// All fields little-endian.

namespace detail {

constexpr char kMagic[8] = {'P', 'S', 'I', 'M', 'D', 'S', '0', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  out.append(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw io_error("dataset file truncated while reading " + what);
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace detail

inline void write_dataset(const FeatureDataset& ds,
                          const std::filesystem::path& path) {
  std::string header;
  header.append(detail::kMagic, sizeof(detail::kMagic));
  detail::put_le<std::uint32_t>(header, 1);
  detail::put_le<std::uint32_t>(header, 0);
  detail::put_le<std::uint64_t>(header, static_cast<std::uint64_t>(ds.config.n_subjects));
  detail::put_le<std::uint64_t>(header, static_cast<std::uint64_t>(ds.config.n_features));
  detail::put_le<double>(header, ds.config.target_icc.value);
  detail::put_le<std::uint64_t>(header, ds.config.seed);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  const int n = ds.config.n_subjects, f = ds.config.n_features;
  std::string row;
  for (int i = 0; i < n; ++i) {
    row.clear();
    for (int j = 0; j < f; ++j) {
      detail::put_le<double>(row, ds.session1(i, j));
      detail::put_le<double>(row, ds.session2(i, j));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw io_error("write failed for " + path.string());
}

inline FeatureDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open dataset " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kMagic, 8) != 0)
    throw io_error(path.string() + " is not a dataset file (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != 1)
    throw io_error(path.string() + ": unsupported dataset version " +
                   std::to_string(version));
  detail::get_le<std::uint32_t>(in, "reserved");
  const auto n = detail::get_le<std::uint64_t>(in, "n_subjects");
  const auto f = detail::get_le<std::uint64_t>(in, "n_features");
  const auto icc = detail::get_le<double>(in, "target icc");
  const auto seed = detail::get_le<std::uint64_t>(in, "seed");
  if (n < 2 || f < 1 || n > (1ull << 32) || f > (1ull << 32))
    throw io_error(path.string() + ": implausible dimensions");

  FeatureDataset ds{
      BandConfig(IccTarget(icc), static_cast<int>(n), static_cast<int>(f), seed),
      Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f)),
      Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f))};
  std::vector<double> row(2 * f);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(double))))
      throw io_error("dataset file truncated while reading body of " +
                     path.string());
    if constexpr (std::endian::native == std::endian::big)
      for (double& v : row) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(double));
      }
    for (std::uint64_t j = 0; j < f; ++j) {
      ds.session1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row[2 * j];
      ds.session2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row[2 * j + 1];
    }
  }
  if (!ds.session1.allFinite() || !ds.session2.allFinite())
    throw io_error(path.string() + ": non-finite values in body");
  return ds;
}

// ---------------------------------------------------------------------------
// CSV artifacts (rates stored as fractions; the CLI formats percentages)

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out) throw io_error("write failed for " + path.string());
}

inline std::string target_kind(const TargetSpec& t) {
  return t.kind == TargetSpec::Kind::eer ? "eer" : "frr_at_far";
}

}  // namespace detail

inline void write_band_icc_csv(const std::filesystem::path& path,
                               const std::vector<BandIccSummary>& bands) {
  std::string out = "band_target,feature_index,icc\n";
  for (const auto& b : bands)
    for (std::size_t i = 0; i < b.per_feature.size(); ++i)
      out += detail::fmt(b.target.value) + "," + std::to_string(i) + "," +
             detail::fmt(b.per_feature[i]) + "\n";
  detail::write_text(path, out);
}

inline void write_band_summary_csv(const std::filesystem::path& path,
                                   const std::vector<BandIccSummary>& bands) {
  std::string out = "band_target,mean_icc,sd_icc\n";
  for (const auto& b : bands)
    out += detail::fmt(b.target.value) + "," + detail::fmt(b.mean) + "," +
           detail::fmt(b.sd) + "\n";
  detail::write_text(path, out);
}

inline void write_roc_csv(const std::filesystem::path& path,
                          const std::vector<ErrorRatePoint>& points) {
  std::string out = "threshold,far,frr\n";
  for (const auto& p : points)
    out += detail::fmt(p.threshold) + "," + detail::fmt(p.far) + "," +
           detail::fmt(p.frr) + "\n";
  detail::write_text(path, out);
}

inline void write_scores_csv(const std::filesystem::path& path,
                             const ScoreSet& scores, bool include_impostors) {
  std::string out = "kind,subject_a,subject_b,score\n";
  for (std::size_t i = 0; i < scores.genuine.size(); ++i)
    out += "genuine," + std::to_string(i) + "," + std::to_string(i) + "," +
           detail::fmt(scores.genuine[i]) + "\n";
  if (include_impostors)
    for (std::size_t k = 0; k < scores.impostor.size(); ++k)
      out += "impostor," + std::to_string(scores.impostor_pairs[k].first) +
             "," + std::to_string(scores.impostor_pairs[k].second) + "," +
             detail::fmt(scores.impostor[k]) + "\n";
  detail::write_text(path, out);
}

inline std::string required_features_csv_text(const RequiredFeaturesTable& table) {
  std::string out =
      "band_target,target_kind,target_value,far_level,n_required,"
      "mean_metric_at_n\n";
  for (const auto& cell : table.cells) {
    if (!cell.result) continue;  // failures live in the trace and manifest
    const auto& t = cell.target;
    out += detail::fmt(cell.band_target.value) + "," + detail::target_kind(t) +
           "," + detail::fmt(t.threshold_value()) + ",";
    if (t.kind == TargetSpec::Kind::frr_at_far) out += detail::fmt(t.far_level);
    out += "," + std::to_string(cell.result->n_required) + "," +
           detail::fmt(cell.result->mean_metric_at_n) + "\n";
  }
  return out;
}

inline void write_required_features_csv(const std::filesystem::path& path,
                                        const RequiredFeaturesTable& table) {
  detail::write_text(path, required_features_csv_text(table));
}

inline std::string search_trace_csv_text(const RequiredFeaturesTable& table) {
  std::string out =
      "band_target,target_kind,target_value,far_level,stage,replications,n,"
      "mean_metric\n";
  for (const auto& cell : table.cells) {
    if (!cell.result) continue;
    const auto& t = cell.target;
    const std::string prefix =
        detail::fmt(cell.band_target.value) + "," + detail::target_kind(t) +
        "," + detail::fmt(t.threshold_value()) + "," +
        (t.kind == TargetSpec::Kind::frr_at_far ? detail::fmt(t.far_level)
                                                : std::string());
    for (const auto& stage : cell.result->trace)
      for (std::size_t i = 0; i < stage.means.size(); ++i)
        out += prefix + "," + std::to_string(stage.stage) + "," +
               std::to_string(stage.replications) + "," +
               std::to_string(stage.range_lo + static_cast<int>(i)) + "," +
               detail::fmt(stage.means[i]) + "\n";
  }
  return out;
}

inline void write_search_trace_csv(const std::filesystem::path& path,
                                   const RequiredFeaturesTable& table) {
  detail::write_text(path, search_trace_csv_text(table));
}

inline std::string fits_csv_text(const std::vector<TargetFit>& fits) {
  std::string out =
      "target_kind,target_value,far_level,slope,intercept,r_squared,f_value,"
      "df_model,df_residual,p_value\n";
  for (const auto& f : fits) {
    if (!f.fit) continue;
    const auto& t = f.target;
    out += detail::target_kind(t) + "," + detail::fmt(t.threshold_value()) +
           "," +
           (t.kind == TargetSpec::Kind::frr_at_far ? detail::fmt(t.far_level)
                                                   : std::string()) +
           "," + detail::fmt(f.fit->slope) + "," + detail::fmt(f.fit->intercept) +
           "," + detail::fmt(f.fit->r_squared) + "," +
           detail::fmt(f.fit->f_value) + "," + std::to_string(f.fit->df_model) +
           "," + std::to_string(f.fit->df_residual) + "," +
           detail::fmt(f.fit->p_value) + "\n";
  }
  return out;
}

inline void write_fits_csv(const std::filesystem::path& path,
                           const std::vector<TargetFit>& fits) {
  detail::write_text(path, fits_csv_text(fits));
}

// ---------------------------------------------------------------------------
// CSV parsing (required_features.csv and band_summary.csv round-trips)

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw io_error("cannot parse " + what + " from '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<RequiredFeaturesRow> read_required_features_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw io_error(path.string() + " is empty");
  std::vector<RequiredFeaturesRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6)
      throw io_error(path.string() + ": expected 6 fields, got " +
                     std::to_string(f.size()) + " in: " + line);
    RequiredFeaturesRow row{};
    row.band_target = detail::parse_double(f[0], "band_target");
    const double value = detail::parse_double(f[2], "target_value");
    if (f[1] == "eer") {
      row.target = TargetSpec::eer(value);
    } else if (f[1] == "frr_at_far") {
      row.target = TargetSpec::frr_at_far(
          value, detail::parse_double(f[3], "far_level"));
    } else {
      throw io_error(path.string() + ": unknown target kind '" + f[1] + "'");
    }
    row.n_required =
        static_cast<int>(detail::parse_double(f[4], "n_required"));
    row.mean_metric_at_n = detail::parse_double(f[5], "mean_metric_at_n");
    rows.push_back(row);
  }
  return rows;
}

inline std::map<double, double> read_band_means_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw io_error(path.string() + " is empty");
  std::map<double, double> means;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < 2)
      throw io_error(path.string() + ": malformed line: " + line);
    means[detail::parse_double(f[0], "band_target")] =
        detail::parse_double(f[1], "mean_icc");
  }
  return means;
}

}  // namespace persim::io
