#pragma once

// Multichannel curve featurization: per channel, magnitudes of the leading
// DFT coefficients followed by a full-depth orthonormal wavelet transform.
// The FFT and wavelet kernels come from GSL.

#include "sfda/error.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_fft_complex.h>
#include <gsl/gsl_wavelet.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace sfda {

enum class WaveletFamily { Haar, D4 };

inline std::string to_string(WaveletFamily f) { return f == WaveletFamily::Haar ? "haar" : "d4"; }

inline WaveletFamily parse_wavelet(const std::string& s) {
    if (s == "haar") return WaveletFamily::Haar;
    if (s == "d4" || s == "daubechies4") return WaveletFamily::D4;
    throw ValidationError("wavelet", "unknown wavelet family '" + s + "'");
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

/// |X_0|, ..., |X_{n_freq-1}| of the unnormalized DFT of the curve, zero-padded
/// to the next power of two.
inline Eigen::VectorXd spectrum(const Eigen::VectorXd& curve, int n_freq) {
    if (curve.size() < 1) throw ValidationError("shape", "curve is empty");
    if (!curve.allFinite()) throw ValidationError("non_finite", "curve has non-finite entries");
    const std::size_t n = next_power_of_two(static_cast<std::size_t>(curve.size()));
    if (n_freq < 1 || static_cast<std::size_t>(n_freq) > n)
        throw ValidationError("n_freq", "requested " + std::to_string(n_freq) + " frequencies from a length-" +
                                            std::to_string(n) + " transform");
    std::vector<double> packed(2 * n, 0.0);
    for (Eigen::Index t = 0; t < curve.size(); ++t) packed[2 * static_cast<std::size_t>(t)] = curve[t];
    if (n > 1 && gsl_fft_complex_radix2_forward(packed.data(), 1, n) != 0)
        throw ValidationError("fft", "FFT failed");
    Eigen::VectorXd out(n_freq);
    for (int k = 0; k < n_freq; ++k) out[k] = std::hypot(packed[2 * k], packed[2 * k + 1]);
    return out;
}

namespace detail {

struct WaveletDeleter {
    void operator()(gsl_wavelet* w) const { gsl_wavelet_free(w); }
    void operator()(gsl_wavelet_workspace* w) const { gsl_wavelet_workspace_free(w); }
};

inline Eigen::VectorXd wavelet_apply(const Eigen::VectorXd& signal, WaveletFamily family, bool forward) {
    const auto n = static_cast<std::size_t>(signal.size());
    const std::size_t min_len = family == WaveletFamily::D4 ? 4 : 2;
    if (!is_power_of_two(n) || n < min_len)
        throw ValidationError("shape", "wavelet transform needs a power-of-two length >= " + std::to_string(min_len) +
                                           ", got " + std::to_string(n));
    if (!signal.allFinite()) throw ValidationError("non_finite", "signal has non-finite entries");
    std::unique_ptr<gsl_wavelet, WaveletDeleter> w(
        family == WaveletFamily::Haar ? gsl_wavelet_alloc(gsl_wavelet_haar, 2) : gsl_wavelet_alloc(gsl_wavelet_daubechies, 4));
    std::unique_ptr<gsl_wavelet_workspace, WaveletDeleter> work(gsl_wavelet_workspace_alloc(n));
    if (!w || !work) throw ValidationError("wavelet", "could not allocate the wavelet transform");
    Eigen::VectorXd out = signal;
    const int status = forward ? gsl_wavelet_transform_forward(w.get(), out.data(), 1, n, work.get())
                               : gsl_wavelet_transform_inverse(w.get(), out.data(), 1, n, work.get());
    if (status != 0) throw ValidationError("wavelet", "wavelet transform failed");
    return out;
}

}  // namespace detail

/// Full-depth periodic orthonormal DWT. Coefficients use GSL's packed layout:
/// the coarsest scaling coefficient first, then detail levels coarse to fine.
inline Eigen::VectorXd dwt(const Eigen::VectorXd& signal, WaveletFamily family) {
    return detail::wavelet_apply(signal, family, true);
}

inline Eigen::VectorXd idwt(const Eigen::VectorXd& coeffs, WaveletFamily family) {
    return detail::wavelet_apply(coeffs, family, false);
}

inline Eigen::VectorXd dwt64(const Eigen::VectorXd& signal, WaveletFamily family) {
    if (signal.size() != 64) throw ValidationError("shape", "dwt64 needs exactly 64 samples");
    return dwt(signal, family);
}

struct FeatureConfig {
    int coefficients = 64;  // frequencies kept and wavelet coefficients per channel
    WaveletFamily family = WaveletFamily::Haar;
};

/// channels: c x T, one curve per row. Output has c * coefficients entries in
/// channel order.
inline Eigen::VectorXd featurize(const Eigen::MatrixXd& channels, const FeatureConfig& cfg = {}) {
    if (channels.rows() < 1) throw ValidationError("shape", "record has no channels");
    if (channels.cols() < 2) throw ValidationError("shape", "curves need at least two time points");
    if (!is_power_of_two(static_cast<std::size_t>(cfg.coefficients)))
        throw ValidationError("coefficients", "coefficient count must be a power of two");
    const auto m = cfg.coefficients;
    Eigen::VectorXd out(channels.rows() * m);
    for (Eigen::Index c = 0; c < channels.rows(); ++c)
        out.segment(c * m, m) = dwt(spectrum(channels.row(c).transpose(), m), cfg.family);
    return out;
}

}  // namespace sfda
