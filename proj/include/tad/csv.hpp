/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tad::csv {

using Row = std::vector<std::string>;

/// Quotes a field when it holds a comma, quote, CR or LF (RFC 4180).
std::string escape(std::string_view field);
/// Appends one CRLF-terminated record.
void append_row(std::string& out, const Row& row);

/// Parses RFC 4180 text. Accepts LF or CRLF record ends and a missing final
/// terminator. Throws ParseError on an unterminated quoted field or stray
/// characters after a closing quote.
std::vector<Row> parse(std::string_view text);

/// Header-addressed view over parsed rows; the first row is the header.
class Table {
public:
    explicit Table(std::vector<Row> rows);

    std::size_t size() const { return rows_.empty() ? 0 : rows_.size() - 1; }
    /// Throws SchemaError when the column is missing.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    /// Data row r (0-based). Throws ParseError if the row is short.
    const std::string& at(std::size_t r, std::size_t col) const;

private:
    std::vector<Row> rows_;
};

}  // namespace tad::csv
