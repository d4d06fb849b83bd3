#include "bpl/scan_record.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bpl/errors.hpp"
#include "text_util.hpp"

namespace bpl {

const char* to_string(Plane p) { return p == Plane::Image ? "image" : "fourier"; }

Plane parse_plane(const std::string& s) {
    if (s == "image") return Plane::Image;
    if (s == "fourier") return Plane::Fourier;
    throw DataError("unknown plane '" + s + "' (expected image or fourier)");
}

void validate(const ScanRecord& scan) {
    if (scan.positions.size() != scan.counts.size()) {
        throw DataError("scan positions and counts differ in length");
    }
    if (scan.positions.empty()) throw DataError("scan is empty");
    for (auto c : scan.counts) {
        if (c < 0) throw DataError("scan has negative coincidence counts");
    }
    const bool up = scan.positions.size() < 2 || scan.positions[1] > scan.positions[0];
    for (std::size_t i = 1; i < scan.positions.size(); ++i) {
        const bool ok = up ? scan.positions[i] > scan.positions[i - 1] : scan.positions[i] < scan.positions[i - 1];
        if (!ok) throw DataError("scan positions are not strictly monotone");
    }
}

void write_scan(std::ostream& os, const ScanRecord& scan) {
    os << "# plane: " << to_string(scan.plane) << '\n';
    os << "# fixed_position_mm: " << text::fixed(scan.fixed_position * 1e3, 6) << '\n';
    os << "# slit_um: " << text::fixed(scan.slit_width * 1e6, 3) << '\n';
    os << "# step_mm: " << text::fixed(scan.step * 1e3, 6) << '\n';
    if (scan.seed) os << "# seed: " << *scan.seed << '\n';
    if (!scan.integration_label.empty()) os << "# integration: " << scan.integration_label << '\n';
    os << "# position_mm\tcoincidences\n";
    for (std::size_t i = 0; i < scan.positions.size(); ++i) {
        os << text::fixed(scan.positions[i] * 1e3, 6) << '\t' << scan.counts[i] << '\n';
    }
}

ScanRecord read_scan(std::istream& is, const std::string& source_name) {
    ScanRecord scan;
    bool have_plane = false, have_fixed = false;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(source_name + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        auto t = text::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            t = text::trim(t.substr(1));
            const auto colon = t.find(':');
            if (colon == std::string_view::npos) continue;
            const auto key = text::trim(t.substr(0, colon));
            const std::string val(text::trim(t.substr(colon + 1)));
            if (key == "plane") {
                try {
                    scan.plane = parse_plane(val);
                } catch (const DataError& e) {
                    fail(e.what());
                }
                have_plane = true;
            } else if (key == "fixed_position_mm") {
                const auto v = text::parse_double(val);
                if (!v) fail("bad fixed_position_mm");
                scan.fixed_position = *v * 1e-3;
                have_fixed = true;
            } else if (key == "slit_um") {
                const auto v = text::parse_double(val);
                if (!v || *v < 0) fail("bad slit_um");
                scan.slit_width = *v * 1e-6;
            } else if (key == "step_mm") {
                const auto v = text::parse_double(val);
                if (!v) fail("bad step_mm");
                scan.step = *v * 1e-3;
            } else if (key == "seed") {
                const auto v = text::parse_int<std::uint64_t>(val);
                if (!v) fail("bad seed");
                scan.seed = *v;
            } else if (key == "integration") {
                scan.integration_label = val;
            }
            continue;
        }
        const auto cols = text::split_ws(t);
        if (cols.size() != 2) fail("expected `position_mm<TAB>coincidences`");
        const auto x = text::parse_double(cols[0]);
        const auto c = text::parse_int<std::int64_t>(cols[1]);
        if (!x || !c) fail("malformed data row");
        scan.positions.push_back(*x * 1e-3);
        scan.counts.push_back(*c);
    }
    if (!have_plane) throw DataError(source_name + ": missing `# plane:` header");
    if (!have_fixed) throw DataError(source_name + ": missing `# fixed_position_mm:` header");
    try {
        validate(scan);
    } catch (const DataError& e) {
        throw DataError(source_name + ": " + e.what());
    }
    if (scan.step == 0.0 && scan.positions.size() > 1) {
        scan.step = std::abs(scan.positions[1] - scan.positions[0]);
    }
    return scan;
}

void save_scan(const std::filesystem::path& path, const ScanRecord& scan) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    write_scan(os, scan);
}

ScanRecord load_scan(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read " + path.string());
    return read_scan(is, path.string());
}

std::vector<ScanRecord> load_scan_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("no scans found: " + dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".tsv") continue;
        std::ifstream is(entry.path());
        std::string first;
        std::getline(is, first);
        if (text::trim(first).starts_with("# plane:")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ScanRecord> scans;
    for (const auto& f : files) scans.push_back(load_scan(f));
    if (scans.empty()) throw DataError("no scans found in " + dir.string());
    return scans;
}

}  // namespace bpl
