#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <vector>

#include "samos/common.hpp"
#include "samos/feature_matrix.hpp"

namespace samos {

struct ExtractorConfig {
    int semantic_dim = 64;
    int acoustic_dim = 768;
    int listener_dim = 128;
    int frame_shift_samples = 320;  // 20 ms at 16 kHz
    int context_layers = 1;
    // Context-layer internals: only the layer count is externally pinned,
    // the rest are fixed defaults.
    int context_heads = 4;
    int context_ff_expansion = 4;
    int context_conv_kernel = 31;
    // Band count of the fixed low-frequency filterbank behind the semantic path.
    int semantic_bands = 24;
    std::uint64_t seed = 0;

    void validate() const {
        if (semantic_dim < 1 || acoustic_dim < 1 || listener_dim < 1)
            throw ConfigError("extractor dims must be positive");
        if (frame_shift_samples < 2) throw ConfigError("frame_shift_samples must be >= 2");
        if (context_layers < 0) throw ConfigError("context_layers must be >= 0");
        if (acoustic_dim % 2 != 0)
            throw ConfigError("acoustic_dim must be even (amplitude/phase channel split)");
        if (context_layers > 0 && acoustic_dim % context_heads != 0)
            throw ConfigError("acoustic_dim must be divisible by context_heads");
    }
};

// Frame-wise short-time spectra: rectangular non-overlapping frames of
// length frame_shift_samples, analyzed with an exact real DFT.
struct ShortTimeSpectra {
    Eigen::MatrixXd amplitude;  // T x bins
    Eigen::MatrixXd phase_cos;  // T x bins
    Eigen::MatrixXd phase_sin;  // T x bins
    int bins = 0;
};

inline int frame_count(size_t waveform_len, int frame_shift) {
    return int(waveform_len / size_t(frame_shift));
}

// DFT basis for one frame; cached by the caller when extracting many files.
struct DftBasis {
    Eigen::MatrixXd cos_basis;  // N x bins
    Eigen::MatrixXd sin_basis;  // N x bins

    explicit DftBasis(int n) {
        int bins = n / 2 + 1;
        cos_basis.resize(n, bins);
        sin_basis.resize(n, bins);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < bins; ++k) {
                double w = 2.0 * M_PI * double(i) * double(k) / double(n);
                cos_basis(i, k) = std::cos(w);
                sin_basis(i, k) = -std::sin(w);
            }
    }
};

inline ShortTimeSpectra short_time_spectra(const std::vector<double>& waveform, int frame_shift,
                                           const DftBasis& basis) {
    int t = frame_count(waveform.size(), frame_shift);
    if (t < 1)
        throw InputError("waveform shorter than one frame (" + std::to_string(waveform.size()) +
                         " samples, frame shift " + std::to_string(frame_shift) + ")");
    int bins = frame_shift / 2 + 1;
    Eigen::MatrixXd frames(t, frame_shift);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < frame_shift; ++j)
            frames(i, j) = waveform[size_t(i) * size_t(frame_shift) + size_t(j)];

    Eigen::MatrixXd re = frames * basis.cos_basis;
    Eigen::MatrixXd im = frames * basis.sin_basis;

    ShortTimeSpectra s;
    s.bins = bins;
    s.amplitude = (re.array().square() + im.array().square()).sqrt().matrix();
    s.phase_cos.resize(t, bins);
    s.phase_sin.resize(t, bins);
    for (int i = 0; i < t; ++i)
        for (int k = 0; k < bins; ++k) {
            double a = s.amplitude(i, k);
            if (a < 1e-12) {
                s.phase_cos(i, k) = 1.0;  // undefined phase pinned to 0 rad
                s.phase_sin(i, k) = 0.0;
            } else {
                s.phase_cos(i, k) = re(i, k) / a;
                s.phase_sin(i, k) = im(i, k) / a;
            }
        }
    return s;
}

// Triangular filterbank over the low-frequency bins only (bottom 40% of
// the spectrum). The semantic path sees nothing above this band.
inline Eigen::MatrixXd low_band_filterbank(int bins, int bands) {
    int top = std::max(bands + 2, int(std::floor(bins * 0.4)));
    if (top > bins) top = bins;
    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(bins, bands);
    double step = double(top - 1) / double(bands + 1);
    for (int b = 0; b < bands; ++b) {
        double lo = step * b, mid = step * (b + 1), hi = step * (b + 2);
        for (int k = int(std::ceil(lo)); k < std::min(bins, int(std::floor(hi)) + 1); ++k) {
            double w = k <= mid ? (k - lo) / (mid - lo) : (hi - k) / (hi - mid);
            if (w > 0) fb(k, b) = w;
        }
    }
    return fb;
}

// Concatenate semantic features, acoustic features, and the listener
// vector repeated along the time axis. Frame counts off by one are
// truncated to the minimum (with a warning); larger mismatch is an error.
inline FeatureMatrix assemble_input(const FeatureMatrix& semantic, const FeatureMatrix& acoustic,
                                    const Eigen::VectorXd& listener_vec) {
    if (semantic.frame_shift_samples != acoustic.frame_shift_samples)
        throw ConfigError("semantic/acoustic frame shift mismatch: " +
                          std::to_string(semantic.frame_shift_samples) + " vs " +
                          std::to_string(acoustic.frame_shift_samples));
    int ts = semantic.frames(), ta = acoustic.frames();
    if (std::abs(ts - ta) > 1)
        throw AlignmentError("frame counts differ by more than 1: " + std::to_string(ts) + " vs " +
                             std::to_string(ta));
    int t = std::min(ts, ta);
    if (ts != ta)
        std::cerr << "warning: truncating features from " << std::max(ts, ta) << " to " << t
                  << " frames\n";
    FeatureMatrix out;
    out.frame_shift_samples = semantic.frame_shift_samples;
    out.source = FeatureSource::assembled;
    int ds = semantic.dim(), da = acoustic.dim(), dl = int(listener_vec.size());
    out.data.resize(t, ds + da + dl);
    out.data.leftCols(ds) = semantic.data.topRows(t);
    out.data.middleCols(ds, da) = acoustic.data.topRows(t);
    out.data.rightCols(dl) = listener_vec.transpose().replicate(t, 1);
    return out;
}

}  // namespace samos
