#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace pinnctl {

/// CSV writer with atomic replace: rows accumulate in <path>.tmp and the
/// file only appears under its final name on commit(). Doubles are written
/// with round-trip precision.
class CsvWriter {
public:
    explicit CsvWriter(std::string path);
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void header(const std::vector<std::string>& names);
    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);

    /// Flushes and renames the temp file onto the target path.
    void commit();

private:
    std::string path_;
    std::string tmp_path_;
    std::ofstream out_;
    bool committed_ = false;
};

/// Round-trip formatting for doubles (shortest form preferred, %.17g fallback).
std::string format_double(double v);

} // namespace pinnctl
