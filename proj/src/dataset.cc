// Copyright 2026 The vflchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vflchain/dataset.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "vflchain/rng.h"

namespace vflchain {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string_view> SplitCsvLine(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

int ParseLabel(std::string_view cell, std::size_t line, std::size_t col) {
  if (cell == "1" || cell == "M" || cell == "m") return 1;
  if (cell == "0" || cell == "B" || cell == "b") return 0;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec == std::errc() && ptr == cell.data() + cell.size() && (v == 0.0 || v == 1.0)) {
    return static_cast<int>(v);
  }
  throw CsvParseError("line " + std::to_string(line) + ": label '" +
                          std::string(cell) + "' is not binary (0/1 or M/B)",
                      line, col);
}

}  // namespace

RawDataset LoadCsv(const std::filesystem::path& path, std::string_view label_column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    for (auto cell : SplitCsvLine(line)) header.emplace_back(cell);
  }
  if (header.empty()) throw ValidationError("dataset " + path.string() + " is empty");

  std::size_t label_idx = header.size();
  std::vector<std::size_t> feature_idx;
  RawDataset raw;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_idx = c;
    } else if (Lower(header[c]) != "id") {
      feature_idx.push_back(c);
      raw.feature_names.push_back(header[c]);
    }
  }
  if (label_idx == header.size()) {
    throw ValidationError("label column '" + std::string(label_column) +
                          "' not found in " + path.string());
  }
  if (feature_idx.empty()) throw ValidationError("dataset has no feature columns");

  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw CsvParseError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()),
                          line_no, cells.size());
    }
    raw.labels.push_back(ParseLabel(cells[label_idx], line_no, label_idx));
    for (std::size_t c : feature_idx) {
      const std::string_view cell = cells[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw CsvParseError("line " + std::to_string(line_no) + ", column '" +
                                header[c] + "': '" + std::string(cell) +
                                "' is not a number",
                            line_no, c);
      }
      values.push_back(v);
    }
  }
  if (raw.labels.empty()) throw ValidationError("dataset " + path.string() + " has no rows");
  raw.features = Tensor({raw.labels.size(), feature_idx.size()}, std::move(values));
  return raw;
}

void StandardizeColumns(Tensor& features, std::span<const std::size_t> fit_rows) {
  if (fit_rows.empty()) throw ValidationError("StandardizeColumns: no rows to fit");
  const std::size_t cols = features.cols();
  const double n = static_cast<double>(fit_rows.size());
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r : fit_rows) mean += features(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r : fit_rows) var += (features(r, c) - mean) * (features(r, c) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t r = 0; r < features.rows(); ++r) {
      features(r, c) = sd > 0.0 ? (features(r, c) - mean) / sd : 0.0;
    }
  }
}

SplitIds TrainTestSplit(std::span<const int> labels, double train_fraction,
                        std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  RandomStream rng = RandomStream::Derive(seed, StreamPurpose::kSplit);
  SplitIds split;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) ids.push_back(i);
    }
    for (std::size_t i = ids.size(); i > 1; --i) {
      std::swap(ids[i - 1], ids[rng.Below(i)]);
    }
    const auto n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(ids.size())));
    if (n_train == 0 || n_train == ids.size()) {
      throw ValidationError("split leaves class " + std::to_string(cls) +
                            " absent from one side");
    }
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + n_train);
    split.test.insert(split.test.end(), ids.begin() + n_train, ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string_view ToString(PartitionScheme scheme) {
  return scheme == PartitionScheme::kContiguous ? "contiguous" : "round_robin";
}

PartitionScheme ParsePartitionScheme(std::string_view name) {
  if (name == "contiguous") return PartitionScheme::kContiguous;
  if (name == "round_robin") return PartitionScheme::kRoundRobin;
  throw ValidationError("unknown partition scheme '" + std::string(name) + "'");
}

std::vector<std::vector<std::size_t>> PartitionColumns(std::size_t num_features,
                                                       int clients,
                                                       PartitionScheme scheme) {
  if (clients < 1) throw ValidationError("need at least one client");
  const auto m = static_cast<std::size_t>(clients);
  if (m > num_features) {
    throw ValidationError(std::to_string(clients) + " clients but only " +
                          std::to_string(num_features) + " features");
  }
  std::vector<std::vector<std::size_t>> cols(m);
  if (scheme == PartitionScheme::kRoundRobin) {
    for (std::size_t c = 0; c < num_features; ++c) cols[c % m].push_back(c);
    return cols;
  }
  const std::size_t base = num_features / m;
  const std::size_t extra = num_features % m;
  std::size_t next = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t width = base + (k < extra ? 1 : 0);
    for (std::size_t i = 0; i < width; ++i) cols[k].push_back(next++);
  }
  return cols;
}

std::vector<int> PartitionLabels(std::size_t num_samples, int clients,
                                 std::uint64_t seed) {
  if (clients < 1) throw ValidationError("need at least one client");
  RandomStream rng = RandomStream::Derive(seed, StreamPurpose::kLabelPartition);
  std::vector<std::size_t> ids(num_samples);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.Below(i)]);
  std::vector<int> owner(num_samples, 0);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    owner[ids[k]] = static_cast<int>(k % static_cast<std::size_t>(clients));
  }
  return owner;
}

Tensor VerticalDataset::Reassemble() const {
  std::size_t width = 0;
  for (const auto& cols : client_columns) width += cols.size();
  Tensor out = Tensor::Matrix(num_samples, width);
  for (std::size_t m = 0; m < client_columns.size(); ++m) {
    for (std::size_t j = 0; j < client_columns[m].size(); ++j) {
      for (std::size_t r = 0; r < num_samples; ++r) {
        out(r, client_columns[m][j]) = client_features[m](r, j);
      }
    }
  }
  return out;
}

VerticalDataset VerticalPartition(const RawDataset& raw, int clients,
                                  PartitionScheme scheme, std::uint64_t seed,
                                  SplitIds split) {
  VerticalDataset ds;
  ds.num_samples = raw.num_samples();
  ds.client_columns = PartitionColumns(raw.features.cols(), clients, scheme);
  for (const auto& cols : ds.client_columns) {
    Tensor x = Tensor::Matrix(ds.num_samples, cols.size());
    for (std::size_t r = 0; r < ds.num_samples; ++r) {
      for (std::size_t j = 0; j < cols.size(); ++j) x(r, j) = raw.features(r, cols[j]);
    }
    ds.client_features.push_back(std::move(x));
  }
  ds.label_owner = PartitionLabels(ds.num_samples, clients, seed);
  ds.client_labels.resize(static_cast<std::size_t>(clients));
  for (std::size_t i = 0; i < ds.num_samples; ++i) {
    ds.client_labels[static_cast<std::size_t>(ds.label_owner[i])][i] = raw.labels[i];
  }
  ds.labels = raw.labels;
  ds.split = std::move(split);
  return ds;
}

VerticalDataset PrepareVerticalDataset(RawDataset raw, const PrepareOptions& options) {
  SplitIds split = TrainTestSplit(raw.labels, options.train_fraction, options.seed);
  if (options.standardize) StandardizeColumns(raw.features, split.train);
  return VerticalPartition(raw, options.clients, options.scheme, options.seed,
                           std::move(split));
}

}  // namespace vflchain
