// Eigenvalue machinery for the 3x3 Jacobians of the model: closed-form cubic
// roots, the Routh-Hurwitz test for cubics, and per-equilibrium stability
// classification. Only the 3x3 / cubic case the model needs is covered.

#pragma once

#include <algorithm>
#include <complex>
#include <numbers>

#include "timdyn/model.hpp"

namespace timdyn {

using Complex = std::complex<double>;

/// Roots of a real cubic, sorted by descending real part, ties broken by
/// descending imaginary part. Non-real roots come in exact conjugate pairs.
using EigenTriple = std::array<Complex, 3>;

/// Band on eigenvalue real parts inside which a root counts as marginal.
inline constexpr double kTolMarginal = 1e-9;
/// Relative band on a1*a2 - a3 inside which the Routh-Hurwitz test is marginal.
inline constexpr double kTolRouthHurwitz = 1e-12;

enum class RhVerdict { AllNegative, Unstable, Marginal };

enum class StabilityLabel {
    HyperbolicSink,     // all roots real and negative
    Saddle,             // real roots of mixed sign
    StableFocusNode,    // conjugate pair present, all real parts negative
    UnstableFocusNode,  // some real part positive, rotation present (or pure source)
    Marginal            // some real part within kTolMarginal of zero
};

inline const char* rh_verdict_name(RhVerdict v) {
    switch (v) {
        case RhVerdict::AllNegative: return "AllNegative";
        case RhVerdict::Unstable: return "Unstable";
        case RhVerdict::Marginal: return "Marginal";
    }
    return "?";
}

inline const char* stability_label_name(StabilityLabel l) {
    switch (l) {
        case StabilityLabel::HyperbolicSink: return "HyperbolicSink";
        case StabilityLabel::Saddle: return "Saddle";
        case StabilityLabel::StableFocusNode: return "StableFocusNode";
        case StabilityLabel::UnstableFocusNode: return "UnstableFocusNode";
        case StabilityLabel::Marginal: return "Marginal";
    }
    return "?";
}

struct StabilityReport {
    Branch branch;
    EigenTriple eigenvalues;
    RhVerdict rh_verdict;
    StabilityLabel label;
};

namespace detail {

inline Complex eval_cubic(const CubicCoeffs& c, Complex x) {
    return ((x + c.a1) * x + c.a2) * x + c.a3;
}

inline Complex eval_cubic_deriv(const CubicCoeffs& c, Complex x) {
    return (3.0 * x + 2.0 * c.a1) * x + c.a2;
}

// One Newton step; skipped when the derivative is too small to trust
// (multiple roots) or the correction is not finite.
inline Complex polish_root(const CubicCoeffs& c, Complex x) {
    const Complex d = eval_cubic_deriv(c, x);
    const double scale = 1.0 + std::norm(x);
    if (std::abs(d) < 1e-12 * scale) return x;
    const Complex step = eval_cubic(c, x) / d;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) return x;
    return x - step;
}

inline void sort_eigen(EigenTriple& r) {
    std::sort(r.begin(), r.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

}  // namespace detail

/// Closed-form roots of x^3 + a1 x^2 + a2 x + a3 (trigonometric branch for
/// three real roots, Cardano otherwise), each refined by one Newton step.
inline EigenTriple cubic_roots(const CubicCoeffs& c) {
    using std::cbrt, std::sqrt, std::cos, std::acos;

    // depressed form y^3 + p y + q with x = y - a1/3
    const double shift = c.a1 / 3.0;
    const double p = c.a2 - c.a1 * shift;
    const double q = (2.0 * shift * shift - c.a2) * shift + c.a3;
    const double disc = 0.25 * q * q + p * p * p / 27.0;

    EigenTriple roots;
    if (disc < 0.0) {
        // three distinct real roots
        const double rho = sqrt(-p / 3.0);
        const double arg = std::clamp(-0.5 * q / (rho * rho * rho), -1.0, 1.0);
        const double theta = acos(arg);
        constexpr double two_pi = 2.0 * std::numbers::pi;
        for (int k = 0; k < 3; ++k)
            roots[static_cast<std::size_t>(k)] =
                Complex(2.0 * rho * cos((theta - two_pi * k) / 3.0) - shift, 0.0);
        for (auto& r : roots) r = Complex(detail::polish_root(c, r).real(), 0.0);
    } else {
        const double s = sqrt(disc);
        const double u = cbrt(-0.5 * q + s);
        const double v = cbrt(-0.5 * q - s);
        const double real_root = u + v - shift;
        const double pair_re = -0.5 * (u + v) - shift;
        const double pair_im = 0.5 * sqrt(3.0) * (u - v);

        Complex r0 = detail::polish_root(c, Complex(real_root, 0.0));
        roots[0] = Complex(r0.real(), 0.0);
        if (pair_im == 0.0) {
            // repeated real root
            Complex r1 = detail::polish_root(c, Complex(pair_re, 0.0));
            roots[1] = Complex(r1.real(), 0.0);
            roots[2] = roots[1];
        } else {
            Complex z = detail::polish_root(c, Complex(pair_re, pair_im));
            roots[1] = z;
            roots[2] = std::conj(z);
        }
    }
    detail::sort_eigen(roots);
    return roots;
}

/// Eigenvalues of the Jacobian at P0, from its block-diagonal structure:
/// -beta together with the roots of x^2 + (sigma+1) x + sigma (1 - r0).
/// The quadratic discriminant (sigma-1)^2 + 4 sigma r0 is positive for every
/// valid parameter triple, so all three values are real.
inline EigenTriple eigenvalues_p0(const ParamSet& p) {
    const double s = p.sigma();
    const double disc = (s - 1.0) * (s - 1.0) + 4.0 * s * p.r0();
    const double root = std::sqrt(disc);
    // -(B + sqrt(disc))/2 is free of cancellation; the other root via the product
    const double lam_low = -0.5 * (s + 1.0 + root);
    const double lam_high = s * (1.0 - p.r0()) / lam_low;
    EigenTriple r{Complex(lam_high, 0.0), Complex(lam_low, 0.0), Complex(-p.beta(), 0.0)};
    detail::sort_eigen(r);
    return r;
}

/// Routh-Hurwitz test for a monic cubic: all roots lie strictly in the left
/// half-plane iff a1, a2, a3 > 0 and a1 a2 > a3. Results within the
/// kTolRouthHurwitz band of the boundary are reported Marginal.
inline RhVerdict routh_hurwitz_cubic(const CubicCoeffs& c) {
    const double prod = c.a1 * c.a2;
    const double band = kTolRouthHurwitz * (1.0 + std::abs(prod));
    if (std::abs(prod - c.a3) <= band || std::abs(c.a3) <= band) return RhVerdict::Marginal;
    if (c.a1 > 0.0 && c.a2 > 0.0 && c.a3 > 0.0 && prod > c.a3) return RhVerdict::AllNegative;
    return RhVerdict::Unstable;
}

namespace detail {

inline RhVerdict eigen_sign_verdict(const EigenTriple& ev) {
    bool any_marginal = false, any_pos = false, all_neg = true;
    for (const auto& l : ev) {
        if (std::abs(l.real()) <= kTolMarginal) any_marginal = true;
        if (l.real() > kTolMarginal) any_pos = true;
        if (!(l.real() < -kTolMarginal)) all_neg = false;
    }
    if (any_marginal) return RhVerdict::Marginal;
    return all_neg ? RhVerdict::AllNegative : (any_pos ? RhVerdict::Unstable : RhVerdict::Marginal);
}

inline StabilityLabel label_from_eigenvalues(const EigenTriple& ev) {
    bool any_marginal = false, rotating = false, all_neg = true, all_pos = true;
    for (const auto& l : ev) {
        if (std::abs(l.real()) <= kTolMarginal) any_marginal = true;
        if (std::abs(l.imag()) > kTolMarginal) rotating = true;
        if (!(l.real() < -kTolMarginal)) all_neg = false;
        if (!(l.real() > kTolMarginal)) all_pos = false;
    }
    if (any_marginal) return StabilityLabel::Marginal;
    if (all_neg) return rotating ? StabilityLabel::StableFocusNode : StabilityLabel::HyperbolicSink;
    if (!rotating && !all_pos) return StabilityLabel::Saddle;
    return StabilityLabel::UnstableFocusNode;
}

}  // namespace detail

inline bool is_stable_label(StabilityLabel l) {
    return l == StabilityLabel::HyperbolicSink || l == StabilityLabel::StableFocusNode;
}

/// Classify an equilibrium produced by `equilibria`. Eigenvalues come from the
/// branch-specific closed form and are cross-checked against the Routh-Hurwitz
/// verdict of the same characteristic polynomial; a hard disagreement between
/// the two routes throws (it would mean a numerics bug, not a model property).
inline StabilityReport classify_equilibrium(const ParamSet& p, const Equilibrium& e) {
    CubicCoeffs coeffs{0.0, 0.0, 0.0};
    EigenTriple ev;
    if (e.branch == Branch::P0) {
        coeffs = char_coeffs_p0(p);
        ev = eigenvalues_p0(p);
    } else {
        coeffs = char_coeffs_nontrivial(p);
        ev = cubic_roots(coeffs);
    }
    const RhVerdict rh = routh_hurwitz_cubic(coeffs);
    const RhVerdict from_eigen = detail::eigen_sign_verdict(ev);
    const bool contradiction =
        (rh == RhVerdict::AllNegative && from_eigen == RhVerdict::Unstable) ||
        (rh == RhVerdict::Unstable && from_eigen == RhVerdict::AllNegative);
    if (contradiction)
        throw std::logic_error("classify_equilibrium: eigenvalue signs contradict Routh-Hurwitz");
    return {e.branch, ev, rh, detail::label_from_eigenvalues(ev)};
}

}  // namespace timdyn
