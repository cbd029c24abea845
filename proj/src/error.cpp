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

#include "fishnet/error.hpp"

namespace fishnet {

format_error::format_error(const std::string& what, std::uint64_t offset)
    : error(what + " (at byte offset " + std::to_string(offset) + ")"), _offset(offset) {}

parse_error::parse_error(const std::string& what, std::size_t line)
    : error(what + " (line " + std::to_string(line) + ")"), _line(line) {}

}  // namespace fishnet
