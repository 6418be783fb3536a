#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace pomc::io {

enum class ColumnType { Integer, Real, Text, Boolean };

struct Column {
    std::string name;
    ColumnType type = ColumnType::Real;
};

using Schema = std::vector<Column>;
using Cell = std::variant<std::int64_t, double, std::string, bool>;
using Row = std::vector<Cell>;

/// Shortest-exact decimal form with 17 significant digits, so that parsing the
/// text gives back the same double. Non-finite values print as nan, inf, -inf.
std::string format_real(double value);

/// Writes `content` to a temporary file beside `path` and renames it into place.
/// Missing parent directories are created. Throws io-failure.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Renders rows as CSV (header first, LF line endings).
std::string render_csv(const std::vector<Row>& rows, const Schema& schema);
/// Renders rows as JSON lines, one object per row; non-finite reals become null.
std::string render_jsonl(const std::vector<Row>& rows, const Schema& schema);

/// Checks rows against the schema, then writes `path` (CSV) and the JSON-lines
/// mirror with the extension replaced by .jsonl. Returns both paths.
std::vector<std::filesystem::path> emit_table(const std::vector<Row>& rows, const Schema& schema,
                                              const std::filesystem::path& path);

/// Throws invalid-parameter when a row has the wrong width or a cell of the wrong type.
void check_rows(const std::vector<Row>& rows, const Schema& schema);

/// Reads one numeric column, by header name, from a CSV file written by emit_table.
std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column);

}  // namespace pomc::io
