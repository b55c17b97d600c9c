/*
 * Copyright 2026 The mnpfs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MNPFS_CSV_HPP_
#define MNPFS_CSV_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mnpfs::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws kParse when absent.
  std::size_t Column(std::string_view name) const;
};

std::vector<std::string> SplitLine(std::string_view line, char delimiter = ',');

// Reads a comma-separated file with a header row. Blank lines are skipped;
// every row must have as many fields as the header.
Table Read(const std::filesystem::path& path);

double ParseDouble(std::string_view text, std::string_view context);
long long ParseInt(std::string_view text, std::string_view context);

// Shortest text that parses back to the identical double.
std::string FormatDouble(double value);

std::string Join(const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace mnpfs::csv

#endif  // MNPFS_CSV_HPP_
