#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dendrite/patterns.hpp"

namespace dendrite {

/// Missing, unreadable or malformed dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string name;
  std::size_t n_features = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  /// File name under the data directory.
  std::string file;
  /// Class mapped to label 1.
  std::string positive_class;
  /// How the vendored file was derived from the UCI original.
  std::string provenance;
  /// Branches and synapses per branch of the benchmark neuron.
  std::size_t m = 0;
  std::size_t k = 0;
};

/// BC, HEART and ION.
std::span<const DatasetSpec> dataset_catalog();
/// Case-insensitive lookup by name.
std::optional<DatasetSpec> find_dataset(std::string_view name);

/// Directory holding the vendored CSVs: $DENDRITE_DATA_DIR if set, else the
/// source tree's data/uci.
std::filesystem::path default_data_dir();

struct RawDataset {
  std::vector<std::string> feature_names;
  /// rows[i][f]
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> labels;
  /// Git blob SHA-1 of the file.
  std::string sha1;
};

/// Reads "<features...>,label" CSV with a header row. Throws DataError on a
/// missing file, a malformed row, a wrong feature count or too few rows for
/// the split.
RawDataset load_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; the first n_train rows train, the next n_test test.
/// Throws DataError when rows < n_train + n_test.
Split split_rows(std::size_t rows, const DatasetSpec& spec, std::uint64_t seed);

/// Per-feature receptive-field boundaries.
struct RfEncoder {
  std::vector<std::vector<double>> boundaries;

  std::size_t features() const noexcept { return boundaries.size(); }
  /// Total bits: sum of boundaries + 1 over features.
  std::size_t width() const noexcept;
  /// One bit per feature. Throws std::invalid_argument on a wrong row length.
  BinaryPattern encode(std::span<const double> row, std::uint8_t label) const;
};

/// Boundaries at the inclusive empirical quantiles i/n_rf (i = 1..n_rf-1) of
/// each feature, midpoint interpolation; repeated boundaries are merged, so a
/// constant feature gets one always-on bin. Throws std::invalid_argument on
/// empty input, ragged rows or n_rf < 1.
RfEncoder build_encoder(std::span<const std::vector<double>> train_rows, std::size_t n_rf = 10);

/// Inclusive empirical quantile with midpoint interpolation of sorted data.
double midpoint_quantile(std::span<const double> sorted, double q);

struct EncodedDataset {
  DatasetSpec spec;
  RawDataset raw;
  Split split;
  RfEncoder encoder;
  std::vector<BinaryPattern> train;
  std::vector<BinaryPattern> test;
  std::uint64_t seed = 0;
};

/// Load, split and encode with a train-derived encoder.
EncodedDataset prepare_dataset(const DatasetSpec& spec, const std::filesystem::path& dir,
                               std::uint64_t seed, std::size_t n_rf = 10);

/// Git-style blob hash: SHA-1 of "blob <size>\0" + bytes, lower-case hex.
std::string git_blob_sha1(std::string_view bytes);

/// key=value lines: name, file, sha1, rows, split seed, sizes, positive
/// class, provenance, encoded width.
void write_dataset_manifest(std::ostream& out, const EncodedDataset& ds);

}  // namespace dendrite
