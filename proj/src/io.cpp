#include "credopt/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace credopt {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

void CsvWriter::header(const std::vector<std::string>& columns) {
    for (const auto& c : columns) *this << std::string_view(c);
    end_row();
}

void CsvWriter::sep() {
    if (row_started_) out_ << ',';
    row_started_ = true;
}

CsvWriter& CsvWriter::operator<<(double v) {
    sep();
    out_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::operator<<(long v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::operator<<(std::string_view v) {
    sep();
    out_ << v;
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    row_started_ = false;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace credopt
