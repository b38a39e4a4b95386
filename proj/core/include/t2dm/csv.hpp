#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace t2dm::csv {

// One parsed record plus its 1-based line number (line of the record's first
// physical line; quoted fields may span several).
struct Row {
    std::vector<std::string> fields;
    long line = 0;
};

// RFC-4180 reader: comma separated, double-quote quoting, "" escapes a quote,
// CRLF or LF record ends. The first record is the header.
class Reader {
public:
    explicit Reader(const std::filesystem::path& file);

    const std::vector<std::string>& header() const { return header_; }
    // Column index by header name, or -1.
    int column(const std::string& name) const;
    // Throws DataError naming the file if any column is absent.
    void require_columns(const std::vector<std::string>& names) const;

    // Reads the next record. Returns false at EOF.
    bool next(Row& row);

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::string content_;
    size_t pos_ = 0;
    long line_ = 1;
    std::vector<std::string> header_;
    std::unordered_map<std::string, int> index_;

    bool parse_record(std::vector<std::string>& out, long& line_out);
};

// Reads every record eagerly. Convenience for small tables.
std::vector<Row> read_all(const std::filesystem::path& file,
                          std::vector<std::string>* header = nullptr);

// Quotes a field if it contains a comma, quote or newline.
std::string escape(const std::string& field);
std::string join(const std::vector<std::string>& fields);

}  // namespace t2dm::csv
