#include "dendrite/datasets.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"

#ifndef DENDRITE_DATA_DIR
#define DENDRITE_DATA_DIR "data/uci"
#endif

namespace dendrite {

namespace {

const DatasetSpec kCatalog[] = {
    {"BC", 9, 222, 383, "bc.csv", "malignant",
     "Wisconsin breast cancer (original), 683 rows without missing values", 20, 10},
    {"HEART", 13, 70, 200, "heart.csv", "disease present (num > 0)",
     "Cleveland heart disease, 297 of 303 rows (6 with missing values dropped)", 10, 10},
    {"ION", 34, 100, 251, "ion.csv", "good radar return",
     "Ionosphere, all 351 rows", 50, 8},
};

constexpr std::uint64_t kSplitStream = 0x5350;  // "SP"

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::span<const DatasetSpec> dataset_catalog() { return kCatalog; }

std::optional<DatasetSpec> find_dataset(std::string_view name) {
  const std::string key = upper(name);
  for (const auto& s : kCatalog)
    if (s.name == key) return s;
  return std::nullopt;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("DENDRITE_DATA_DIR"); env && *env) return env;
  return DENDRITE_DATA_DIR;
}

std::string git_blob_sha1(std::string_view bytes) {
  const std::string head = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("git_blob_sha1: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = md[i];
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

RawDataset load_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) {
  const auto path = dir / spec.file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  RawDataset ds;
  ds.sha1 = git_blob_sha1(text);
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line)) throw DataError(path.string() + ": empty file");
  auto header = csv::split(line);
  if (header.size() != spec.n_features + 1 || header.back() != "label") {
    throw DataError(path.string() + ": expected " + std::to_string(spec.n_features) +
                    " feature columns and a final 'label' column");
  }
  header.pop_back();
  ds.feature_names = std::move(header);
  std::size_t row = 1;
  while (std::getline(lines, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = csv::split(line);
    if (cells.size() != spec.n_features + 1) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " columns");
    }
    std::vector<double> values;
    values.reserve(spec.n_features);
    try {
      for (std::size_t f = 0; f < spec.n_features; ++f) values.push_back(csv::to_double(cells[f], row));
      ds.labels.push_back(static_cast<std::uint8_t>(csv::to_bit(cells.back(), row)));
    } catch (const std::runtime_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    ds.rows.push_back(std::move(values));
  }
  if (ds.rows.size() < spec.n_train + spec.n_test) {
    throw DataError(path.string() + ": " + std::to_string(ds.rows.size()) + " rows, split needs " +
                    std::to_string(spec.n_train + spec.n_test));
  }
  return ds;
}

Split split_rows(std::size_t rows, const DatasetSpec& spec, std::uint64_t seed) {
  if (rows < spec.n_train + spec.n_test) {
    throw DataError(spec.name + ": " + std::to_string(rows) + " rows, split needs " +
                    std::to_string(spec.n_train + spec.n_test));
  }
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  Rng rng(derive_seed(seed, kSplitStream));
  for (std::size_t i = rows; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.n_train),
                order.begin() + static_cast<std::ptrdiff_t>(spec.n_train + spec.n_test));
  return s;
}

double midpoint_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("midpoint_quantile: no data");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return 0.5 * (sorted[lo] + sorted[hi]);
}

std::size_t RfEncoder::width() const noexcept {
  std::size_t w = 0;
  for (const auto& b : boundaries) w += b.size() + 1;
  return w;
}

BinaryPattern RfEncoder::encode(std::span<const double> row, std::uint8_t label) const {
  if (row.size() != boundaries.size()) throw std::invalid_argument("RfEncoder: row length mismatch");
  BinaryPattern p;
  p.label = label;
  p.bits.assign(width(), 0);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < row.size(); ++f) {
    p.bits[offset + rf_index(row[f], boundaries[f])] = 1;
    offset += boundaries[f].size() + 1;
  }
  return p;
}

RfEncoder build_encoder(std::span<const std::vector<double>> train_rows, std::size_t n_rf) {
  if (train_rows.empty()) throw std::invalid_argument("build_encoder: no rows");
  if (n_rf < 1) throw std::invalid_argument("build_encoder: n_rf must be >= 1");
  const std::size_t f_count = train_rows.front().size();
  RfEncoder enc;
  enc.boundaries.resize(f_count);
  std::vector<double> col(train_rows.size());
  for (std::size_t f = 0; f < f_count; ++f) {
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      if (train_rows[i].size() != f_count) throw std::invalid_argument("build_encoder: ragged rows");
      col[i] = train_rows[i][f];
    }
    std::sort(col.begin(), col.end());
    auto& b = enc.boundaries[f];
    for (std::size_t i = 1; i < n_rf; ++i) {
      const double q = midpoint_quantile(col, static_cast<double>(i) / static_cast<double>(n_rf));
      if (b.empty() || q > b.back()) b.push_back(q);
    }
    // A boundary at the maximum leaves an empty top bin.
    if (!b.empty() && b.back() >= col.back()) b.pop_back();
  }
  return enc;
}

EncodedDataset prepare_dataset(const DatasetSpec& spec, const std::filesystem::path& dir,
                               std::uint64_t seed, std::size_t n_rf) {
  EncodedDataset ds;
  ds.spec = spec;
  ds.seed = seed;
  ds.raw = load_dataset(spec, dir);
  ds.split = split_rows(ds.raw.rows.size(), spec, seed);
  std::vector<std::vector<double>> train_rows;
  for (std::size_t i : ds.split.train) train_rows.push_back(ds.raw.rows[i]);
  ds.encoder = build_encoder(train_rows, n_rf);
  for (std::size_t i : ds.split.train) ds.train.push_back(ds.encoder.encode(ds.raw.rows[i], ds.raw.labels[i]));
  for (std::size_t i : ds.split.test) ds.test.push_back(ds.encoder.encode(ds.raw.rows[i], ds.raw.labels[i]));
  return ds;
}

void write_dataset_manifest(std::ostream& out, const EncodedDataset& ds) {
  out << "name=" << ds.spec.name << '\n'
      << "file=" << ds.spec.file << '\n'
      << "sha1=" << ds.raw.sha1 << '\n'
      << "rows=" << ds.raw.rows.size() << '\n'
      << "split_seed=" << ds.seed << '\n'
      << "n_train=" << ds.spec.n_train << '\n'
      << "n_test=" << ds.spec.n_test << '\n'
      << "positive_class=" << ds.spec.positive_class << '\n'
      << "provenance=" << ds.spec.provenance << '\n'
      << "encoded_width=" << ds.encoder.width() << '\n';
}

}  // namespace dendrite
