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
#include <stdexcept>
#include <string>

namespace fishnet {

/// Base class of every error raised by the library.
class error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class invalid_argument : public error {
   public:
    using error::error;
};

/// Required input data (a raster, a table row, a year) does not exist.
class data_unavailable : public error {
   public:
    using error::error;
};

class io_error : public error {
   public:
    using error::error;
};

/// Malformed binary payload; carries the byte offset where decoding failed.
class format_error : public error {
   public:
    format_error(const std::string& what, std::uint64_t offset);
    std::uint64_t offset() const { return _offset; }

   private:
    std::uint64_t _offset;
};

/// Malformed text input; carries the 1-based line number.
class parse_error : public error {
   public:
    parse_error(const std::string& what, std::size_t line);
    std::size_t line() const { return _line; }

   private:
    std::size_t _line;
};

/// Metric is mathematically undefined for the given input (e.g. R^2 of constant targets).
class undefined_metric : public error {
   public:
    using error::error;
};

}  // namespace fishnet
