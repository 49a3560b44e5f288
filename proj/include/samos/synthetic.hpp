#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "samos/common.hpp"
#include "samos/wav.hpp"

namespace samos {

// Desk-scale acceptance corpus. Each system has a quality level q; the
// waveform carries low-frequency content tones plus high-frequency noise
// whose amplitude is a monotone function of q. The true MOS is a smooth
// monotone function of that planted acoustic statistic, and the statistic
// lives strictly above the semantic extractor's low band, so an acoustic
// ablation removes all quality information.
struct SyntheticConfig {
    int systems = 20;
    int utts_per_system = 30;
    int listeners = 8;
    int wav_samples = 1600;
    std::uint64_t seed = 0;

    void validate() const {
        if (systems < 2 || utts_per_system < 3 || listeners < 1)
            throw ConfigError("synthetic corpus needs >= 2 systems, >= 3 utts/system, >= 1 listener");
        if (wav_samples < 320) throw ConfigError("synthetic wav_samples must be >= 320");
    }
};

namespace detail {

inline std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace detail

// Writes out_dir/wav/<utt>.wav files and out_dir/ratings.csv; returns the
// ratings file path.
inline std::string make_synthetic(const SyntheticConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "wav");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Fixed per-listener rating bias.
    std::vector<double> bias(size_t(cfg.listeners));
    for (auto& b : bias) b = 0.3 * gauss(rng);

    std::ofstream csv(fs::path(out_dir) / "ratings.csv");
    if (!csv) throw IoError("cannot write ratings.csv under " + out_dir);
    csv << "utterance_id,system_id,listener_id,score,split,wav_path\n";

    // Content tones sit on 50 Hz bins inside the semantic band; the noise
    // components sit on bins well above it.
    const double bin_hz = double(kSampleRate) / 320.0;
    const int content_lo = 4, content_hi = 60;   // 200..3000 Hz
    const int noise_lo = 96, noise_hi = 156;     // 4800..7800 Hz
    const double sigma_max = 0.3;

    int n_train = std::max(1, int(std::lround(cfg.utts_per_system * 0.7)));
    int n_dev = std::max(1, int(std::lround(cfg.utts_per_system * 0.15)));
    if (n_train + n_dev >= cfg.utts_per_system) n_train = cfg.utts_per_system - n_dev - 1;

    for (int sys = 0; sys < cfg.systems; ++sys) {
        double q = cfg.systems == 1
                       ? 0.5
                       : 0.05 + 0.9 * double(sys) / double(cfg.systems - 1);
        double sigma = sigma_max * (1.0 - q);
        double true_mos = 1.0 + 4.0 * q;
        std::string system_id = "s" + detail::zero_pad(sys, 2);

        for (int ui = 0; ui < cfg.utts_per_system; ++ui) {
            std::string utt_id = system_id + "_u" + detail::zero_pad(ui, 3);
            const char* split = ui < n_train ? "train" : (ui < n_train + n_dev ? "dev" : "test");

            // 3 content tones with random bins, amplitudes and phases.
            std::vector<double> wav(size_t(cfg.wav_samples), 0.0);
            for (int tone = 0; tone < 3; ++tone) {
                int bin = content_lo + int(unif(rng) * (content_hi - content_lo));
                double amp = 0.08 + 0.07 * unif(rng);
                double phase = 2.0 * M_PI * unif(rng);
                double w = 2.0 * M_PI * bin * bin_hz / kSampleRate;
                for (int n = 0; n < cfg.wav_samples; ++n)
                    wav[size_t(n)] += amp * std::cos(w * n + phase);
            }
            // Stationary high-band noise, amplitude sigma.
            for (int bin = noise_lo; bin <= noise_hi; bin += 2) {
                double amp = sigma * 0.05 * std::abs(gauss(rng));
                double phase = 2.0 * M_PI * unif(rng);
                double w = 2.0 * M_PI * bin * bin_hz / kSampleRate;
                for (int n = 0; n < cfg.wav_samples; ++n)
                    wav[size_t(n)] += amp * std::cos(w * n + phase);
            }

            std::string wav_rel = "wav/" + utt_id + ".wav";
            write_wav((fs::path(out_dir) / wav_rel).string(), wav);

            for (int l = 0; l < cfg.listeners; ++l) {
                double noisy = true_mos + bias[size_t(l)] + 0.35 * gauss(rng);
                int score = int(std::lround(noisy));
                score = std::clamp(score, 1, 5);
                csv << utt_id << ',' << system_id << ",L" << detail::zero_pad(l, 2) << ','
                    << score << ',' << split << ',' << wav_rel << '\n';
            }
        }
    }
    if (!csv) throw IoError("short write: ratings.csv");
    return (fs::path(out_dir) / "ratings.csv").string();
}

}  // namespace samos
