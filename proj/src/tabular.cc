// Copyright 2026 The Quail Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "quail/tabular.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "quail/errors.h"

namespace quail {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(Trim(line.substr(start)));
      return out;
    }
    out.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<int> ParseInt(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::optional<int> Feature::LevelOfCode(int code) const {
  for (size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == code) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> Feature::LevelOfToken(std::string_view token) const {
  if (auto code = ParseInt(token)) {
    if (auto level = LevelOfCode(*code)) return level;
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == token) return static_cast<int>(i);
  }
  return std::nullopt;
}

// ------------------------------------------------------------------ Schema

Schema::Schema(std::vector<Feature> features, std::string target,
               std::optional<std::string> sensitive,
               std::optional<int> protected_value,
               std::optional<int> positive_value)
    : features_(std::move(features)) {
  if (features_.empty()) throw ConfigError("schema has no features");
  std::set<std::string> names;
  for (const Feature& f : features_) {
    if (f.name.empty()) throw ConfigError("schema feature with empty name");
    if (!names.insert(f.name).second) {
      throw ConfigError("duplicate feature name '" + f.name + "'");
    }
    if (f.codes.empty()) {
      throw ConfigError("feature '" + f.name + "' has an empty domain");
    }
    std::set<int> codes(f.codes.begin(), f.codes.end());
    if (codes.size() != f.codes.size()) {
      throw ConfigError("feature '" + f.name + "' repeats a domain code");
    }
    if (!f.labels.empty()) {
      if (f.labels.size() != f.codes.size()) {
        throw ConfigError("feature '" + f.name + "' labels do not match domain");
      }
      std::set<std::string> labels(f.labels.begin(), f.labels.end());
      if (labels.size() != f.labels.size()) {
        throw ConfigError("feature '" + f.name + "' repeats a label");
      }
    }
  }
  target_ = RequireIndex(target);
  const Feature& t = features_[target_];
  if (positive_value) {
    auto level = t.LevelOfCode(*positive_value);
    if (!level) {
      throw ConfigError("positive_value " + std::to_string(*positive_value) +
                        " not in domain of target '" + t.name + "'");
    }
    positive_level_ = *level;
  } else if (t.num_levels() == 2) {
    positive_level_ = 1;
  }
  if (sensitive) {
    sensitive_ = RequireIndex(*sensitive);
    if (*sensitive_ == target_) {
      throw ConfigError("sensitive feature cannot be the target");
    }
  }
  if (protected_value) {
    if (!sensitive_) {
      throw ConfigError("protected_value set without a sensitive feature");
    }
    const Feature& s = features_[*sensitive_];
    auto level = s.LevelOfCode(*protected_value);
    if (!level) {
      throw ConfigError("protected_value " + std::to_string(*protected_value) +
                        " not in domain of '" + s.name + "'");
    }
    protected_level_ = *level;
  }
}

Schema Schema::FromJson(const nlohmann::json& j) {
  try {
    std::vector<Feature> features;
    for (const auto& fj : j.at("features")) {
      Feature f;
      f.name = fj.at("name").get<std::string>();
      bool any_label = false;
      for (const auto& dj : fj.at("domain")) {
        if (dj.is_object()) {
          f.codes.push_back(dj.at("code").get<int>());
          f.labels.push_back(dj.value("label", std::to_string(f.codes.back())));
          any_label = true;
        } else {
          f.codes.push_back(dj.get<int>());
          f.labels.push_back(std::to_string(f.codes.back()));
        }
      }
      if (!any_label) f.labels.clear();
      features.push_back(std::move(f));
    }
    std::optional<std::string> sensitive;
    if (j.contains("sensitive") && !j["sensitive"].is_null()) {
      sensitive = j["sensitive"].get<std::string>();
    }
    std::optional<int> protected_value;
    if (j.contains("protected_value") && !j["protected_value"].is_null()) {
      protected_value = j["protected_value"].get<int>();
    }
    std::optional<int> positive_value;
    if (j.contains("positive_value") && !j["positive_value"].is_null()) {
      positive_value = j["positive_value"].get<int>();
    }
    return Schema(std::move(features), j.at("target").get<std::string>(),
                  sensitive, protected_value, positive_value);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
}

Schema Schema::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema file " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

nlohmann::json Schema::ToJson() const {
  nlohmann::json features = nlohmann::json::array();
  for (const Feature& f : features_) {
    nlohmann::json domain = nlohmann::json::array();
    for (size_t i = 0; i < f.codes.size(); ++i) {
      if (f.labels.empty()) {
        domain.push_back(f.codes[i]);
      } else {
        domain.push_back({{"code", f.codes[i]}, {"label", f.labels[i]}});
      }
    }
    features.push_back({{"name", f.name}, {"domain", std::move(domain)}});
  }
  nlohmann::json j;
  j["features"] = std::move(features);
  j["target"] = target_name();
  if (sensitive_) {
    j["sensitive"] = features_[*sensitive_].name;
    if (protected_level_) {
      j["protected_value"] = features_[*sensitive_].codes[*protected_level_];
    }
  }
  if (positive_level_) {
    j["positive_value"] = features_[target_].codes[*positive_level_];
  }
  return j;
}

std::optional<size_t> Schema::IndexOf(std::string_view name) const {
  for (size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

size_t Schema::RequireIndex(std::string_view name) const {
  auto i = IndexOf(name);
  if (!i) throw ConfigError("unknown feature '" + std::string(name) + "'");
  return *i;
}

Schema Schema::WithSensitive(std::string_view sensitive,
                             std::optional<int> protected_value) const {
  std::optional<int> positive;
  if (positive_level_) positive = features_[target_].codes[*positive_level_];
  return Schema(features_, target_name(), std::string(sensitive),
                protected_value, positive);
}

// ----------------------------------------------------------------- Dataset

Dataset::Dataset(std::shared_ptr<const Schema> schema, std::vector<int> levels)
    : schema_(std::move(schema)), levels_(std::move(levels)) {
  const size_t d = schema_->num_features();
  if (levels_.empty() || levels_.size() % d != 0) {
    throw DataError("dataset must have at least one complete row");
  }
  num_rows_ = levels_.size() / d;
  for (size_t r = 0; r < num_rows_; ++r) {
    for (size_t f = 0; f < d; ++f) {
      int v = levels_[r * d + f];
      if (v < 0 || static_cast<size_t>(v) >= schema_->feature(f).num_levels()) {
        throw DataError("row " + std::to_string(r) + ", column '" +
                        schema_->feature(f).name + "': level " +
                        std::to_string(v) + " outside domain");
      }
    }
  }
}

Dataset Dataset::Subset(std::span<const size_t> rows) const {
  const size_t d = num_features();
  std::vector<int> out;
  out.reserve(rows.size() * d);
  for (size_t r : rows) {
    if (r >= num_rows_) throw std::out_of_range("Subset row index");
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Dataset(schema_, std::move(out));
}

Dataset Dataset::Concat(const Dataset& other) const {
  if (!(*schema_ == other.schema())) {
    throw DataError("cannot concatenate datasets with different schemas");
  }
  std::vector<int> out = levels_;
  out.insert(out.end(), other.levels_.begin(), other.levels_.end());
  return Dataset(schema_, std::move(out));
}

// --------------------------------------------------------------------- CSV

Dataset ParseCsv(std::istream& in, std::shared_ptr<const Schema> schema) {
  std::string line;
  if (!std::getline(in, line) || Trim(line).empty()) {
    throw DataError("empty CSV: no header row");
  }
  const size_t d = schema->num_features();
  std::vector<size_t> column_to_feature;
  std::vector<bool> seen(d, false);
  for (std::string_view name : SplitFields(line)) {
    auto idx = schema->IndexOf(name);
    if (!idx) throw DataError("unknown column '" + std::string(name) + "'");
    if (seen[*idx]) throw DataError("duplicate column '" + std::string(name) + "'");
    seen[*idx] = true;
    column_to_feature.push_back(*idx);
  }
  for (size_t f = 0; f < d; ++f) {
    if (!seen[f]) {
      throw DataError("missing column '" + schema->feature(f).name + "'");
    }
  }
  std::vector<int> levels;
  std::vector<int> row(d);
  size_t row_number = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++row_number;
    auto fields = SplitFields(line);
    if (fields.size() != column_to_feature.size()) {
      throw DataError("row " + std::to_string(row_number) + ": expected " +
                      std::to_string(column_to_feature.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    for (size_t c = 0; c < fields.size(); ++c) {
      const Feature& f = schema->feature(column_to_feature[c]);
      if (fields[c].empty()) {
        throw DataError("row " + std::to_string(row_number) + ", column '" +
                        f.name + "': missing value");
      }
      auto level = f.LevelOfToken(fields[c]);
      if (!level) {
        throw DataError("row " + std::to_string(row_number) + ", column '" +
                        f.name + "': value '" + std::string(fields[c]) +
                        "' outside declared domain");
      }
      row[column_to_feature[c]] = *level;
    }
    levels.insert(levels.end(), row.begin(), row.end());
  }
  if (levels.empty()) throw DataError("CSV has a header but no data rows");
  return Dataset(std::move(schema), std::move(levels));
}

Dataset LoadCsv(const std::filesystem::path& path,
                std::shared_ptr<const Schema> schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return ParseCsv(in, std::move(schema));
}

void WriteCsv(const Dataset& d, std::ostream& out) {
  const Schema& s = d.schema();
  for (size_t f = 0; f < s.num_features(); ++f) {
    out << (f ? "," : "") << s.feature(f).name;
  }
  out << '\n';
  for (size_t r = 0; r < d.num_rows(); ++r) {
    for (size_t f = 0; f < s.num_features(); ++f) {
      out << (f ? "," : "") << d.code_at(r, f);
    }
    out << '\n';
  }
}

void WriteCsv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  WriteCsv(d, out);
  out.flush();
  if (!out) throw DataError("I/O failure writing " + path.string());
}

std::vector<GroupSlice> SplitByGroup(const Dataset& d, std::string_view sensitive) {
  auto idx = d.schema().IndexOf(sensitive);
  if (!idx) {
    throw ConfigError("sensitive feature '" + std::string(sensitive) +
                      "' not in schema");
  }
  const Feature& f = d.schema().feature(*idx);
  std::vector<std::vector<size_t>> buckets(f.num_levels());
  for (size_t r = 0; r < d.num_rows(); ++r) buckets[d.at(r, *idx)].push_back(r);
  std::vector<GroupSlice> out;
  for (size_t level = 0; level < buckets.size(); ++level) {
    if (buckets[level].empty()) continue;
    out.push_back(GroupSlice{static_cast<int>(level), f.codes[level],
                             std::move(buckets[level])});
  }
  return out;
}

}  // namespace quail
