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

#ifndef QUAIL_TABULAR_H_
#define QUAIL_TABULAR_H_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace quail {

// A categorical feature. Values are stored internally as levels: positions
// in `codes`. Codes are the user-facing integers; labels are optional
// aliases accepted on CSV input.
struct Feature {
  std::string name;
  std::vector<int> codes;
  std::vector<std::string> labels;  // empty, or one per code

  size_t num_levels() const { return codes.size(); }
  std::optional<int> LevelOfCode(int code) const;
  // Integer code first, then label.
  std::optional<int> LevelOfToken(std::string_view token) const;
};

class Schema {
 public:
  // Throws ConfigError when any invariant fails: duplicate names, empty or
  // repeated domains, unknown target/sensitive, protected or positive value
  // outside its domain.
  Schema(std::vector<Feature> features, std::string target,
         std::optional<std::string> sensitive = std::nullopt,
         std::optional<int> protected_value = std::nullopt,
         std::optional<int> positive_value = std::nullopt);

  // Keys: features [{name, domain}], target, optional sensitive,
  // protected_value, positive_value. Domain entries are integer codes or
  // {"code": int, "label": string} objects.
  static Schema FromJson(const nlohmann::json& j);
  static Schema LoadFile(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  const std::vector<Feature>& features() const { return features_; }
  const Feature& feature(size_t i) const { return features_[i]; }
  size_t num_features() const { return features_.size(); }

  std::optional<size_t> IndexOf(std::string_view name) const;
  // Throws ConfigError for unknown names.
  size_t RequireIndex(std::string_view name) const;

  size_t target_index() const { return target_; }
  const std::string& target_name() const { return features_[target_].name; }
  std::optional<size_t> sensitive_index() const { return sensitive_; }
  // Level of the protected group within the sensitive feature.
  std::optional<int> protected_level() const { return protected_level_; }
  // Level treated as the positive class of the target. Defaults to the
  // second level of a binary target; unset for a multinary target unless
  // declared.
  std::optional<int> positive_level() const { return positive_level_; }

  // Same features and roles, different sensitive/protected declaration.
  Schema WithSensitive(std::string_view sensitive,
                       std::optional<int> protected_value) const;

  friend bool operator==(const Schema& a, const Schema& b) {
    return a.ToJson() == b.ToJson();
  }

 private:
  std::vector<Feature> features_;
  size_t target_ = 0;
  std::optional<size_t> sensitive_;
  std::optional<int> protected_level_;
  std::optional<int> positive_level_;
};

// Immutable table of levels, row-major, aligned to schema order.
class Dataset {
 public:
  // Throws DataError when the table is empty or any level is out of range.
  Dataset(std::shared_ptr<const Schema> schema, std::vector<int> levels);

  const Schema& schema() const { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const { return schema_; }
  size_t num_rows() const { return num_rows_; }
  size_t num_features() const { return schema_->num_features(); }

  int at(size_t row, size_t feature) const {
    return levels_[row * schema_->num_features() + feature];
  }
  int code_at(size_t row, size_t feature) const {
    return schema_->feature(feature).codes[at(row, feature)];
  }
  std::span<const int> row(size_t r) const {
    return {levels_.data() + r * schema_->num_features(),
            schema_->num_features()};
  }
  const std::vector<int>& levels() const { return levels_; }

  Dataset Subset(std::span<const size_t> rows) const;
  // Rows of `this` followed by rows of `other`; schemas must match.
  Dataset Concat(const Dataset& other) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.levels_ == b.levels_ && *a.schema_ == *b.schema_;
  }

 private:
  std::shared_ptr<const Schema> schema_;
  std::vector<int> levels_;
  size_t num_rows_ = 0;
};

struct GroupSlice {
  int level = 0;
  int code = 0;
  std::vector<size_t> rows;
};

// Header must name every schema feature exactly once (any order). Values are
// integer codes or declared labels. Errors name the offending row and column.
Dataset LoadCsv(const std::filesystem::path& path,
                std::shared_ptr<const Schema> schema);
Dataset ParseCsv(std::istream& in, std::shared_ptr<const Schema> schema);

// Header plus one line per row, codes in schema order.
void WriteCsv(const Dataset& d, const std::filesystem::path& path);
void WriteCsv(const Dataset& d, std::ostream& out);

// One slice per level that occurs, in domain order. Slices partition the
// row indices.
std::vector<GroupSlice> SplitByGroup(const Dataset& d, std::string_view sensitive);

}  // namespace quail

#endif  // QUAIL_TABULAR_H_
