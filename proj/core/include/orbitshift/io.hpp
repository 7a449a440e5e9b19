#ifndef ORBITSHIFT_IO_HPP
#define ORBITSHIFT_IO_HPP

#include <string>
#include <string_view>
#include <vector>

namespace orbitshift::io {

/// Shortest exact decimal form at double precision (17 significant digits).
std::string format_double(double v);

/// FNV-1a 64-bit hash, hex encoded; used as the run-manifest fingerprint.
std::string fnv1a64_hex(std::string_view s);

/// Plain numeric CSV table. Serialization: one comment line carrying the
/// manifest hash, a header row, then rows with 17-significant-digit values.
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

std::string csv_string(const Csv& table, const std::string& manifest_hash);
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace orbitshift::io

#endif
