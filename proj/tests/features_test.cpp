#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "samos/feature_matrix.hpp"
#include "samos/features.hpp"
#include "samos/model.hpp"
#include "samos/wav.hpp"

using namespace samos;

namespace {

std::vector<double> sine_wave(size_t n, double freq, double amp = 0.3) {
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i)
        w[i] = amp * std::sin(2.0 * M_PI * freq * double(i) / kSampleRate);
    return w;
}

std::vector<double> noise_wave(size_t n, std::uint64_t seed, double amp = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> w(n);
    for (auto& s : w) s = amp * g(rng);
    return w;
}

ModelConfig small_config(std::uint64_t seed = 0) {
    ModelConfig cfg;
    cfg.extractor.semantic_dim = 8;
    cfg.extractor.acoustic_dim = 16;
    cfg.extractor.listener_dim = 4;
    cfg.extractor.semantic_bands = 12;
    cfg.extractor.context_heads = 4;
    cfg.extractor.seed = seed;
    cfg.predictor.backbone_hidden = 8;
    cfg.predictor.head_hidden = 8;
    return cfg;
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("frame count is floor(len / shift)") {
    CHECK(frame_count(16000, 320) == 50);
    CHECK(frame_count(16319, 320) == 50);
    CHECK(frame_count(16320, 320) == 51);
    CHECK(frame_count(319, 320) == 0);
}

TEST_CASE("short_time_spectra recovers a bin-aligned tone") {
    int shift = 320;
    DftBasis basis(shift);
    // 50 Hz * k bin alignment: bin 8 = 400 Hz for 320-sample frames at 16 kHz.
    auto w = sine_wave(1600, 400.0, 0.5);
    ShortTimeSpectra s = short_time_spectra(w, shift, basis);
    REQUIRE(s.amplitude.rows() == 5);
    REQUIRE(s.bins == 161);
    for (int t = 0; t < 5; ++t) {
        // Energy concentrated in bin 8; a real sinusoid of amplitude a
        // contributes a*N/2 to the corresponding DFT bin magnitude.
        CHECK(s.amplitude(t, 8) == Catch::Approx(0.5 * shift / 2.0).margin(1e-6));
        CHECK(s.amplitude(t, 7) == Catch::Approx(0.0).margin(1e-6));
        CHECK(s.amplitude(t, 9) == Catch::Approx(0.0).margin(1e-6));
    }
}

TEST_CASE("phase channels are unit-normalized") {
    DftBasis basis(320);
    auto w = noise_wave(3200, 5);
    ShortTimeSpectra s = short_time_spectra(w, 320, basis);
    for (int t = 0; t < int(s.amplitude.rows()); ++t)
        for (int k = 0; k < s.bins; ++k) {
            double c = s.phase_cos(t, k), si = s.phase_sin(t, k);
            CHECK(c * c + si * si == Catch::Approx(1.0).margin(1e-9));
        }
}

TEST_CASE("short waveform raises input error") {
    DftBasis basis(320);
    std::vector<double> tiny(100, 0.0);
    CHECK_THROWS_AS(short_time_spectra(tiny, 320, basis), InputError);
}

TEST_CASE("low band filterbank never touches high bins") {
    int bins = 161, bands = 24;
    Eigen::MatrixXd fb = low_band_filterbank(bins, bands);
    REQUIRE(fb.rows() == bins);
    REQUIRE(fb.cols() == bands);
    int top = int(std::floor(bins * 0.4));
    for (int k = top + 1; k < bins; ++k)
        for (int b = 0; b < bands; ++b) CHECK(fb(k, b) == 0.0);
    // Every band has some support.
    for (int b = 0; b < bands; ++b) CHECK(fb.col(b).sum() > 0.0);
}

TEST_CASE("extractor config validation") {
    ExtractorConfig c;
    CHECK_NOTHROW(c.validate());
    c.acoustic_dim = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ExtractorConfig{};
    c.semantic_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ExtractorConfig{};
    c.acoustic_dim = 10;  // even but not divisible by 4 heads
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("semantic and acoustic extractors are deterministic and seed-sensitive") {
    auto w = noise_wave(3200, 9);
    SamosModel m1(small_config(0));
    SamosModel m2(small_config(0));
    SamosModel m3(small_config(1));

    FeatureMatrix a = m1.extract_semantic(w);
    FeatureMatrix b = m2.extract_semantic(w);
    FeatureMatrix c = m3.extract_semantic(w);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    CHECK(a.frames() == 10);
    CHECK(a.dim() == 8);
    CHECK(a.frame_shift_samples == 320);

    FeatureMatrix ac1 = m1.extract_acoustic(w);
    FeatureMatrix ac2 = m2.extract_acoustic(w);
    CHECK(ac1.data == ac2.data);
    CHECK(ac1.frames() == 10);
    CHECK(ac1.dim() == 16);
}

TEST_CASE("semantic and acoustic frame counts always agree") {
    SamosModel m(small_config());
    for (size_t n : {320u, 321u, 1000u, 3200u, 4799u}) {
        auto w = noise_wave(n, n);
        CHECK(m.extract_semantic(w).frames() == m.extract_acoustic(w).frames());
    }
}

TEST_CASE("features distinguish a tone from noise") {
    SamosModel m(small_config());
    auto tone = sine_wave(3200, 400.0);
    auto noise = noise_wave(3200, 13);
    FeatureMatrix st = m.extract_semantic(tone);
    FeatureMatrix sn = m.extract_semantic(noise);
    CHECK((st.data - sn.data).norm() > 1e-3);
    FeatureMatrix at = m.extract_acoustic(tone);
    FeatureMatrix an = m.extract_acoustic(noise);
    CHECK((at.data - an.data).norm() > 1e-3);
}

TEST_CASE("acoustic spectral stage splits amplitude and phase channels") {
    SamosModel m(small_config());
    // Same spectral magnitudes, different phase: tone vs time-shifted tone.
    auto w1 = sine_wave(1600, 400.0);
    std::vector<double> w2(w1.size());
    for (size_t i = 0; i < w1.size(); ++i)
        w2[i] = 0.3 * std::sin(2.0 * M_PI * 400.0 * double(i) / kSampleRate + 1.0);
    FeatureMatrix f1 = m.acoustic_spectral(w1);
    FeatureMatrix f2 = m.acoustic_spectral(w2);
    int half = f1.dim() / 2;
    // Amplitude half nearly unchanged, phase half clearly different.
    CHECK((f1.data.leftCols(half) - f2.data.leftCols(half)).norm() < 1e-6);
    CHECK((f1.data.rightCols(half) - f2.data.rightCols(half)).norm() > 1e-3);
}

TEST_CASE("listener embedding is range checked") {
    SamosModel m(small_config());
    CHECK(m.embed_listener(0).size() == 4);
    CHECK_THROWS_AS(m.embed_listener(-1), VocabularyError);
    CHECK_THROWS_AS(m.embed_listener(1), VocabularyError);
}

TEST_CASE("assemble_input concatenates blocks in order") {
    FeatureMatrix sem, ac;
    sem.frame_shift_samples = ac.frame_shift_samples = 320;
    sem.data = Eigen::MatrixXd::Constant(5, 3, 1.0);
    ac.data = Eigen::MatrixXd::Constant(5, 4, 2.0);
    Eigen::VectorXd lis = Eigen::VectorXd::Constant(2, 3.0);
    FeatureMatrix out = assemble_input(sem, ac, lis);
    REQUIRE(out.frames() == 5);
    REQUIRE(out.dim() == 9);
    CHECK(out.data.leftCols(3) == sem.data);
    CHECK(out.data.middleCols(3, 4) == ac.data);
    CHECK(out.data.rightCols(2) == lis.transpose().replicate(5, 1));
    CHECK(out.frame_shift_samples == 320);
}

TEST_CASE("assemble_input truncates off-by-one and rejects larger mismatch") {
    FeatureMatrix sem, ac;
    sem.frame_shift_samples = ac.frame_shift_samples = 320;
    sem.data = Eigen::MatrixXd::Random(6, 3);
    ac.data = Eigen::MatrixXd::Random(5, 4);
    Eigen::VectorXd lis = Eigen::VectorXd::Zero(2);
    FeatureMatrix out = assemble_input(sem, ac, lis);
    CHECK(out.frames() == 5);
    CHECK(out.data.leftCols(3) == sem.data.topRows(5));

    sem.data = Eigen::MatrixXd::Random(7, 3);
    CHECK_THROWS_AS(assemble_input(sem, ac, lis), AlignmentError);

    sem.data = Eigen::MatrixXd::Random(5, 3);
    sem.frame_shift_samples = 160;
    CHECK_THROWS_AS(assemble_input(sem, ac, lis), ConfigError);
}

TEST_CASE("feature file roundtrip preserves contents") {
    FeatureMatrix m;
    m.frame_shift_samples = 320;
    m.data = Eigen::MatrixXd::Random(7, 5).cast<float>().cast<double>();
    auto p = temp_path("samos_feat_rt.smft");
    write_feature_file(p.string(), m);
    FeatureMatrix r = read_feature_file(p.string());
    CHECK(r.frame_shift_samples == 320);
    CHECK(r.data == m.data);
    std::filesystem::remove(p);
}

TEST_CASE("feature file rejects bad magic and truncation") {
    auto p = temp_path("samos_feat_bad.smft");
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPE garbage";
    }
    CHECK_THROWS_AS(read_feature_file(p.string()), FormatError);

    FeatureMatrix m;
    m.frame_shift_samples = 320;
    m.data = Eigen::MatrixXd::Random(7, 5);
    write_feature_file(p.string(), m);
    auto size = std::filesystem::file_size(p);
    std::filesystem::resize_file(p, size - 8);
    CHECK_THROWS_AS(read_feature_file(p.string()), IoError);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(read_feature_file(p.string()), IoError);
}

TEST_CASE("wav roundtrip preserves 16-bit samples") {
    auto w = sine_wave(1000, 440.0, 0.8);
    auto p = temp_path("samos_wav_rt.wav");
    write_wav(p.string(), w);
    auto r = read_wav(p.string());
    REQUIRE(r.size() == w.size());
    for (size_t i = 0; i < w.size(); ++i)
        CHECK(r[i] == Catch::Approx(w[i]).margin(1.0 / 32768.0));
    // Second write/read is bit-identical.
    write_wav(p.string(), r);
    CHECK(read_wav(p.string()) == r);
    std::filesystem::remove(p);
}

TEST_CASE("wav reader rejects non-wav input") {
    auto p = temp_path("samos_not_a_wav.wav");
    {
        std::ofstream out(p, std::ios::binary);
        out << "plainly not audio";
    }
    CHECK_THROWS_AS(read_wav(p.string()), FormatError);
    std::filesystem::remove(p);
}
