#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gapnet {

struct GradcheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t checked = 0;
    std::size_t reprobed = 0;  // entries re-checked with a 100x smaller step
    std::string worst;

    bool passed() const { return max_rel_error < tolerance; }
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double tau = 0.0;         // threshold used by the end-to-end check
    double tau_margin = 0.0;  // distance from tau to the nearest |mean attribute|
    double seconds = 0.0;

    bool passed() const;
    std::string text() const;
};

struct GradcheckOptions {
    std::uint64_t seed = 7;
    double step = 1e-5;
    double op_tolerance = 1e-6;
    double model_tolerance = 1e-4;
};

/// Central finite differences against tape gradients: every primitive op,
/// each module on its own, and the full SPL -> TPL -> realization -> GCN ->
/// ranking loss chain on a 6-stock panel (L=8, K={3,5}, Z=2, one head).
/// Relative error is |a - n| / max(|a|, |n|, 1e-3). An entry that misses the
/// tolerance is probed again with a 100x smaller step, since a kink of a
/// ReLU-family activation within one step of the point spoils the central
/// difference; such entries are counted in `reprobed`.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace gapnet
