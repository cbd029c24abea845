/*
   Copyright 2024 The fishnet authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fishnet::detail {

std::vector<std::string_view> split_csv(std::string_view line);

/// Throw parse_error naming `line_no` on malformed input.
std::int64_t parse_int(std::string_view field, std::size_t line_no);
double parse_double(std::string_view field, std::size_t line_no);

/// Shortest decimal form that reads back to the identical double.
std::string format_double(double v);

/// Reads a whole text file; throws io_error.
std::vector<std::string> read_lines(const std::filesystem::path& path);
/// Truncates and writes `path`; throws io_error.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace fishnet::detail
