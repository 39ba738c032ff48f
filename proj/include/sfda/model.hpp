#pragma once

#include "sfda/estimators.hpp"
#include "sfda/penalty_solver.hpp"

#include <cmath>
#include <string>

namespace sfda {

enum class Variant { Thresholded, Unthresholded };

/// How FitParams::kappa is read. RelativeL1 (the default, used by the tuning
/// grid) sets the threshold for constraint j to kappa * ||B alpha_j||_1.
enum class KappaScale { RelativeL1, Absolute };

inline std::string to_string(Variant v) { return v == Variant::Thresholded ? "thresholded" : "unthresholded"; }

inline Variant parse_variant(const std::string& s) {
    if (s == "thresholded" || s == "threshold") return Variant::Thresholded;
    if (s == "unthresholded" || s == "unthreshold") return Variant::Unthresholded;
    throw ValidationError("variant", "unknown variant '" + s + "'");
}

inline std::string to_string(KappaScale k) { return k == KappaScale::RelativeL1 ? "relative_l1" : "absolute"; }

inline KappaScale parse_kappa_scale(const std::string& s) {
    if (s == "relative_l1") return KappaScale::RelativeL1;
    if (s == "absolute") return KappaScale::Absolute;
    throw ValidationError("kappa_scale", "unknown kappa scale '" + s + "'");
}

struct FitParams {
    PenaltySpec penalty;
    double kappa = 0.0;  // ignored by the unthresholded variant
    KappaScale kappa_scale = KappaScale::RelativeL1;
    Variant variant = Variant::Thresholded;
    SolverConfig solver;

    void validate() const {
        penalty.validate();
        solver.validate();
        if (!(kappa >= 0.0) || !std::isfinite(kappa))
            throw ValidationError("kappa", "kappa must be finite and nonnegative");
    }
};

/// Fitted sparse discriminant. Immutable once built by fit() or load; safe to
/// share across threads for prediction.
struct DiscriminantModel {
    Matrix components;   // (K-1) x p, rows alpha_1..alpha_{K-1}
    Matrix constraints;  // (K-2) x p, rows xi_1..xi_{K-2}
    ClassSummaries summaries;  // covariances are empty for a model read from disk
    Matrix gram;               // K-hat
    Matrix discriminant;       // D-hat = A' K^-1 A
    FitParams params;

    Matrix gram_inverse;  // cached for prediction

    int num_classes() const noexcept { return summaries.num_classes(); }
    Eigen::Index dim() const noexcept { return components.cols(); }
};

}  // namespace sfda
