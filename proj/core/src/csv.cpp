#include "t2dm/csv.hpp"

#include <fstream>
#include <sstream>

#include "t2dm/errors.hpp"

namespace t2dm::csv {

Reader::Reader(const std::filesystem::path& file) : path_(file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    content_ = ss.str();
    long line = 0;
    if (!parse_record(header_, line) && content_.empty())
        throw DataError("empty csv file (no header): " + file.string());
    for (size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = static_cast<int>(i);
}

int Reader::column(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

void Reader::require_columns(const std::vector<std::string>& names) const {
    for (const auto& n : names)
        if (column(n) < 0)
            throw DataError(path_.string() + ": missing required column '" + n + "'");
}

bool Reader::next(Row& row) {
    row.fields.clear();
    return parse_record(row.fields, row.line);
}

bool Reader::parse_record(std::vector<std::string>& out, long& line_out) {
    if (pos_ >= content_.size()) return false;
    line_out = line_;
    out.clear();
    std::string field;
    bool quoted = false;
    while (pos_ < content_.size()) {
        char c = content_[pos_];
        if (quoted) {
            if (c == '"') {
                if (pos_ + 1 < content_.size() && content_[pos_ + 1] == '"') {
                    field += '"';
                    pos_ += 2;
                } else {
                    quoted = false;
                    ++pos_;
                }
            } else {
                if (c == '\n') ++line_;
                field += c;
                ++pos_;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                ++pos_;
                break;
            case ',':
                out.push_back(std::move(field));
                field.clear();
                ++pos_;
                break;
            case '\r':
                ++pos_;
                break;
            case '\n':
                ++pos_;
                ++line_;
                out.push_back(std::move(field));
                return true;
            default:
                field += c;
                ++pos_;
        }
    }
    out.push_back(std::move(field));
    return true;
}

std::vector<Row> read_all(const std::filesystem::path& file, std::vector<std::string>* header) {
    Reader r(file);
    if (header) *header = r.header();
    std::vector<Row> rows;
    Row row;
    while (r.next(row)) rows.push_back(row);
    return rows;
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    return out;
}

}  // namespace t2dm::csv
