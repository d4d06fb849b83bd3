#include "bpl/jones_optics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

JonesMatrix rotation(double theta) {
    JonesMatrix r;
    r << std::cos(theta), -std::sin(theta),
         std::sin(theta),  std::cos(theta);
    return r;
}

bool acts_on(const std::optional<std::vector<int>>& paths, int p) {
    if (!paths) return true;
    return std::find(paths->begin(), paths->end(), p) != paths->end();
}

bool is_empty(const PolPathField::Slot& s) {
    return s.h == cplx{} && s.v == cplx{};
}

// Shift so the lowest occupied path is 0, drop empty trailing paths.
std::vector<PolPathField::Slot> compact(const std::map<int, PolPathField::Slot>& by_path) {
    int lo = 0, hi = -1;
    bool any = false;
    for (const auto& [p, s] : by_path) {
        if (is_empty(s)) continue;
        if (!any) lo = p;
        hi = p;
        any = true;
    }
    if (!any) return {PolPathField::Slot{}};
    std::vector<PolPathField::Slot> out(static_cast<std::size_t>(hi - lo + 1));
    for (const auto& [p, s] : by_path) {
        if (p < lo || p > hi) continue;
        auto& slot = out[static_cast<std::size_t>(p - lo)];
        slot.h += s.h;
        slot.v += s.v;
    }
    return out;
}

struct MatrixOf {
    JonesMatrix operator()(const HalfWavePlate& w) const {
        JonesMatrix m;
        const double c = std::cos(2.0 * w.angle), s = std::sin(2.0 * w.angle);
        m << c, s,
             s, -c;
        return m;
    }
    JonesMatrix operator()(const QuarterWavePlate& w) const {
        JonesMatrix retarder = JonesMatrix::Zero();
        retarder(0, 0) = 1.0;
        retarder(1, 1) = cplx{0.0, 1.0};
        return rotation(w.angle) * retarder * rotation(-w.angle);
    }
    JonesMatrix operator()(const BeamDisplacer&) const {
        throw ConfigError("beam displacer acts on path, it has no 2x2 Jones matrix");
    }
};

template <typename Plate>
PolPathField apply_plate(const PolPathField& field, const Plate& plate) {
    const JonesMatrix m = MatrixOf{}(plate);
    std::vector<PolPathField::Slot> out = field.slots();
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (!acts_on(plate.paths, static_cast<int>(p))) continue;
        const cplx h = out[p].h, v = out[p].v;
        out[p].h = m(0, 0) * h + m(0, 1) * v;
        out[p].v = m(1, 0) * h + m(1, 1) * v;
    }
    return PolPathField(std::move(out));
}

PolPathField apply_displacer(const PolPathField& field, const BeamDisplacer& bd) {
    if (bd.displacement_sign != 1 && bd.displacement_sign != -1) {
        throw ConfigError("beam displacer sign must be +1 or -1");
    }
    std::map<int, PolPathField::Slot> moved;
    std::map<int, int> v_source;
    const auto& slots = field.slots();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const int p = static_cast<int>(i);
        moved[p].h += slots[i].h;
        const int target = acts_on(bd.paths, p) ? p + bd.displacement_sign : p;
        if (slots[i].v != cplx{}) {
            if (const auto it = v_source.find(target); it != v_source.end()) {
                throw ConfigError("beam displacer merges the V beams of paths " + std::to_string(it->second) +
                                  " and " + std::to_string(p) + " into path " + std::to_string(target));
            }
            v_source[target] = p;
        }
        moved[target].v += slots[i].v;
    }
    return PolPathField(compact(moved));
}

}  // namespace

PolPathField::PolPathField(std::vector<Slot> slots) : slots_(std::move(slots)) {
    if (slots_.empty()) slots_.push_back(Slot{});
}

PolPathField PolPathField::single(Pol pol) {
    Slot s;
    (pol == Pol::H ? s.h : s.v) = 1.0;
    return PolPathField({s});
}

cplx PolPathField::amp(std::size_t path, Pol pol) const {
    if (path >= slots_.size()) return {};
    return pol == Pol::H ? slots_[path].h : slots_[path].v;
}

double PolPathField::total_intensity() const noexcept {
    double sum = 0.0;
    for (const auto& s : slots_) sum += std::norm(s.h) + std::norm(s.v);
    return sum;
}

JonesMatrix jones_matrix(const OpticalElement& elem) {
    return std::visit(MatrixOf{}, elem);
}

PolPathField apply_element(const PolPathField& field, const OpticalElement& elem) {
    return std::visit(
        [&](const auto& e) -> PolPathField {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, BeamDisplacer>) {
                return apply_displacer(field, e);
            } else {
                return apply_plate(field, e);
            }
        },
        elem);
}

PolPathField apply_chain(PolPathField field, std::span<const OpticalElement> chain) {
    for (const auto& e : chain) field = apply_element(field, e);
    return field;
}

PumpAmplitudes pump_amplitudes(const PolPathField& field) {
    PumpAmplitudes out;
    const std::size_t n = field.num_paths();
    out.amplitudes.resize(static_cast<Eigen::Index>(n));
    out.h_intensity.resize(n);
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const cplx a = field.amp(p, Pol::H);
        out.amplitudes(static_cast<Eigen::Index>(p)) = a;
        out.h_intensity[p] = std::norm(a);
        total += std::norm(a);
    }
    if (total <= 0.0) throw ConfigError("no SPDC-capable pump: every path has zero H amplitude");
    const double field_total = field.total_intensity();
    out.h_fraction = total / field_total;
    out.amplitudes /= std::sqrt(total);
    return out;
}

double hwp_angle_for_split(double h_fraction) {
    if (!(h_fraction >= 0.0 && h_fraction <= 1.0)) {
        throw ConfigError("HWP split fraction must lie in [0, 1]");
    }
    return 0.5 * std::acos(std::sqrt(h_fraction));
}

std::vector<OpticalElement> qubit_recipe(double first_hwp, double second_hwp) {
    return {HalfWavePlate{first_hwp, {}}, BeamDisplacer{+1, {}}, HalfWavePlate{second_hwp, {}}};
}

std::vector<OpticalElement> qutrit_recipe() {
    using std::numbers::pi;
    return {
        HalfWavePlate{hwp_angle_for_split(2.0 / 3.0), {}},
        BeamDisplacer{+1, {}},
        HalfWavePlate{pi / 8.0, {}},
        // Only the brighter beam (path 0) crosses the second displacer.
        BeamDisplacer{-1, std::vector<int>{0}},
        QuarterWavePlate{pi / 4.0, {}},
    };
}

}  // namespace bpl
