#include "pomc/table.hpp"

#include "pomc/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace pomc::io {

namespace {

std::string quote_csv(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string render_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_real(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else return quote_csv(v);
        },
        cell);
}

bool matches(const Cell& cell, ColumnType type) {
    switch (type) {
        case ColumnType::Integer: return std::holds_alternative<std::int64_t>(cell);
        case ColumnType::Real: return std::holds_alternative<double>(cell);
        case ColumnType::Text: return std::holds_alternative<std::string>(cell);
        case ColumnType::Boolean: return std::holds_alternative<bool>(cell);
    }
    return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace

std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        require(!ec, ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        fail(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void check_rows(const std::vector<Row>& rows, const Schema& schema) {
    require(!schema.empty(), ErrorKind::InvalidParameter, "table schema has no columns");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == schema.size(), ErrorKind::InvalidParameter,
                "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " cells, schema has " +
                    std::to_string(schema.size()));
        for (std::size_t c = 0; c < schema.size(); ++c) {
            require(matches(rows[r][c], schema[c].type), ErrorKind::InvalidParameter,
                    "row " + std::to_string(r) + " column '" + schema[c].name + "' has the wrong type");
        }
    }
}

std::string render_csv(const std::vector<Row>& rows, const Schema& schema) {
    std::string out;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c) out += ',';
        out += quote_csv(schema[c].name);
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += render_cell(row[c]);
        }
        out += '\n';
    }
    return out;
}

std::string render_jsonl(const std::vector<Row>& rows, const Schema& schema) {
    std::string out;
    for (const auto& row : rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        if (std::isfinite(v)) obj[schema[c].name] = v;
                        else obj[schema[c].name] = nullptr;
                    } else {
                        obj[schema[c].name] = v;
                    }
                },
                row[c]);
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::vector<std::filesystem::path> emit_table(const std::vector<Row>& rows, const Schema& schema,
                                              const std::filesystem::path& path) {
    check_rows(rows, schema);
    auto mirror = path;
    mirror.replace_extension(".jsonl");
    write_atomic(path, render_csv(rows, schema));
    write_atomic(mirror, render_jsonl(rows, schema));
    return {path, mirror};
}

std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, path.string() + " is empty");
    const auto header = split_csv_line(line);
    const auto it = std::find(header.begin(), header.end(), column);
    require(it != header.end(), ErrorKind::ConfigParse, path.string() + " has no column '" + column + "'");
    const auto index = static_cast<std::size_t>(it - header.begin());
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        require(index < fields.size(), ErrorKind::ConfigParse,
                path.string() + ":" + std::to_string(line_no) + " is missing column '" + column + "'");
        const std::string& text = fields[index];
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorKind::ConfigParse,
                path.string() + ":" + std::to_string(line_no) + " has a non-numeric value '" + text + "'");
        values.push_back(v);
    }
    return values;
}

}  // namespace pomc::io
