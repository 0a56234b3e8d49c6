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

#include "tad/csv.hpp"

#include "tad/common.hpp"

namespace tad::csv {

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_row(std::string& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += escape(row[i]);
    }
    out += "\r\n";
}

std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    std::size_t line = 1;
    std::size_t i = 0;
    bool any = false;  // current record has content
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        if (!any && row.empty() && field.empty()) return;  // blank line
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        any = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (c == '"' && field.empty() && (row.empty() || text[i - 1] == ',')) {
            const std::size_t start_line = line;
            ++i;
            for (;;) {
                if (i >= text.size()) throw ParseError(start_line, "unterminated quoted field");
                if (text[i] == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                if (text[i] == '\n') ++line;
                field += text[i++];
            }
            any = true;
            if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                throw ParseError(line, "unexpected character after closing quote");
            }
            continue;
        }
        if (c == ',') {
            end_field();
            any = true;
            ++i;
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_row();
            ++line;
            i += 2;
        } else if (c == '\n') {
            end_row();
            ++line;
            ++i;
        } else {
            field += c;
            any = true;
            ++i;
        }
    }
    if (any || !field.empty() || !row.empty()) end_row();
    return rows;
}

Table::Table(std::vector<Row> rows) : rows_(std::move(rows)) {}

bool Table::has_column(std::string_view name) const {
    if (rows_.empty()) return false;
    for (const auto& h : rows_[0]) {
        if (h == name) return true;
    }
    return false;
}

std::size_t Table::column(std::string_view name) const {
    if (!rows_.empty()) {
        for (std::size_t i = 0; i < rows_[0].size(); ++i) {
            if (rows_[0][i] == name) return i;
        }
    }
    throw SchemaError(std::string(name), "missing CSV column");
}

const std::string& Table::at(std::size_t r, std::size_t col) const {
    const Row& row = rows_.at(r + 1);
    if (col >= row.size()) throw ParseError(r + 2, "row has " + std::to_string(row.size()) + " fields");
    return row[col];
}

}  // namespace tad::csv
