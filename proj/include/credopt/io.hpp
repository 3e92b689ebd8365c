#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace credopt {

/// Shortest round-trip decimal representation; identical bytes for identical doubles.
std::string format_double(double value);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& columns);

    CsvWriter& operator<<(double v);
    CsvWriter& operator<<(long v);
    CsvWriter& operator<<(int v) { return *this << static_cast<long>(v); }
    CsvWriter& operator<<(std::size_t v) { return *this << static_cast<long>(v); }
    CsvWriter& operator<<(std::string_view v);
    void end_row();

private:
    void sep();
    std::ostream& out_;
    bool row_started_ = false;
};

/// FNV-1a 64-bit hash, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace credopt
