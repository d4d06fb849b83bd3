#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

enum class Plane { Image, Fourier };

const char* to_string(Plane p);
Plane parse_plane(const std::string& s);

/// One detector-2 sweep with detector 1 held fixed. Positions in meters.
struct ScanRecord {
    Plane plane = Plane::Image;
    double fixed_position = 0.0;
    std::vector<double> positions;
    std::vector<std::int64_t> counts;
    double step = 0.0;
    double slit_width = 0.0;
    std::string integration_label;
    std::optional<std::uint64_t> seed;
};

/// Throws DataError on length mismatch, negative counts or non-monotone positions.
void validate(const ScanRecord& scan);

/// Text format: `# key: value` header lines (plane, fixed_position_mm,
/// slit_um, step_mm, seed, integration) then `position_mm<TAB>coincidences`.
void write_scan(std::ostream& os, const ScanRecord& scan);
ScanRecord read_scan(std::istream& is, const std::string& source_name = "<stream>");

void save_scan(const std::filesystem::path& path, const ScanRecord& scan);
ScanRecord load_scan(const std::filesystem::path& path);

/// Every readable scan file (`*.tsv` with a plane header) in a directory, sorted by name.
std::vector<ScanRecord> load_scan_directory(const std::filesystem::path& dir);

}  // namespace bpl
