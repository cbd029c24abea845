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

#include <chrono>
#include <string>
#include <string_view>

namespace fishnet {

using date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD"; throws invalid_argument on malformed or impossible dates.
date parse_date(std::string_view text);
std::string format_date(const date& d);

/// Parses "MM-DD".
std::chrono::month_day parse_month_day(std::string_view text);
std::string format_month_day(const std::chrono::month_day& md);

/// Recurring calendar window [start, end) within one year, compared by month and day.
struct seasonal_window {
    std::chrono::month_day start{std::chrono::June, std::chrono::day{1}};
    std::chrono::month_day end{std::chrono::October, std::chrono::day{1}};

    /// Throws invalid_argument unless start < end.
    void validate() const;
    bool contains(const date& d) const;
    /// Concrete [start, end) dates of the window in the given year.
    date start_in(int year) const;
    date end_in(int year) const;

    static seasonal_window summer() { return {}; }

    friend bool operator==(const seasonal_window&, const seasonal_window&) = default;
};

}  // namespace fishnet
