#include "pinnctl/csv.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace pinnctl {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    }
    return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp"), out_(tmp_path_) {
    if (!out_) {
        throw std::runtime_error("cannot open " + tmp_path_ + " for writing");
    }
}

CsvWriter::~CsvWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_path_, ec);
    }
}

void CsvWriter::header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out_ << ',';
        out_ << names[i];
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ << ',';
        out_ << format_double(values[i]);
    }
    out_ << '\n';
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << '\n'; }

void CsvWriter::commit() {
    out_.flush();
    out_.close();
    if (!out_) {
        throw std::runtime_error("write failed for " + tmp_path_);
    }
    std::filesystem::rename(tmp_path_, path_);
    committed_ = true;
}

} // namespace pinnctl
