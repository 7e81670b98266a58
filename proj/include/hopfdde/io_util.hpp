#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "hopfdde/errors.hpp"

namespace hopfdde {

/// Shortest 12-significant-digit representation; "-0" is normalized to "0".
std::string fmt12(double v);

/// Line-buffered CSV emitter with a fixed column count.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& vals);

private:
    std::ofstream out_;
    std::size_t ncols_;
};

std::string slurp_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace hopfdde
