#include "hopfdde/io_util.hpp"

#include <cstdio>
#include <sstream>

namespace hopfdde {

std::string fmt12(double v) {
    if (v == 0.0)
        return "0";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), ncols_(header.size()) {
    if (!out_)
        throw ConfigError("cannot open output file: " + path);
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_)
        throw ConfigError("CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

void CsvWriter::row_values(const std::vector<double>& vals) {
    std::vector<std::string> cells;
    cells.reserve(vals.size());
    for (double v : vals)
        cells.push_back(fmt12(v));
    row(cells);
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open output file: " + path);
    out << content;
}

} // namespace hopfdde
