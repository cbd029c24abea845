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

#include "fishnet/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "fishnet/error.hpp"

namespace fishnet {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    int value = 0;
    auto first = text.data() + pos;
    auto last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw invalid_argument("malformed date '" + std::string(whole) + "'");
    return value;
}

}  // namespace

date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw invalid_argument("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    int y = parse_field(text, 0, 4, text);
    int m = parse_field(text, 5, 2, text);
    int d = parse_field(text, 8, 2, text);
    date result{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                std::chrono::day{static_cast<unsigned>(d)}};
    if (!result.ok()) throw invalid_argument("invalid calendar date '" + std::string(text) + "'");
    return result;
}

std::string format_date(const date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::month_day parse_month_day(std::string_view text) {
    if (text.size() != 5 || text[2] != '-')
        throw invalid_argument("malformed month-day '" + std::string(text) + "', expected MM-DD");
    int m = parse_field(text, 0, 2, text);
    int d = parse_field(text, 3, 2, text);
    std::chrono::month_day md{std::chrono::month{static_cast<unsigned>(m)},
                              std::chrono::day{static_cast<unsigned>(d)}};
    if (!md.ok()) throw invalid_argument("invalid month-day '" + std::string(text) + "'");
    return md;
}

std::string format_month_day(const std::chrono::month_day& md) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02u-%02u", static_cast<unsigned>(md.month()),
                  static_cast<unsigned>(md.day()));
    return buf;
}

void seasonal_window::validate() const {
    if (!start.ok() || !end.ok()) throw invalid_argument("seasonal window has an invalid date");
    if (!(start < end)) throw invalid_argument("seasonal window start must precede its end");
}

bool seasonal_window::contains(const date& d) const {
    std::chrono::month_day md{d.month(), d.day()};
    return md >= start && md < end;
}

date seasonal_window::start_in(int year) const {
    return std::chrono::year{year} / start;
}

date seasonal_window::end_in(int year) const {
    return std::chrono::year{year} / end;
}

}  // namespace fishnet
