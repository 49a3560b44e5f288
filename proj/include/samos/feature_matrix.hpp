#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos {

enum class FeatureSource { semantic, acoustic, assembled };

// frames x dim real matrix plus frame-shift metadata; the carrier for
// semantic, acoustic and assembled features.
struct FeatureMatrix {
    Eigen::MatrixXd data;  // frames x dim
    int frame_shift_samples = 0;
    FeatureSource source = FeatureSource::semantic;

    int frames() const { return int(data.rows()); }
    int dim() const { return int(data.cols()); }
};

inline void validate_feature_matrix(const FeatureMatrix& m) {
    if (m.frames() < 1 || m.dim() < 1)
        throw ValidationError("feature matrix must be at least 1x1");
    if (!m.data.allFinite())
        throw ValidationError("feature matrix contains non-finite entries");
}

// On-disk format: magic "SMFT", u32 version=1, u32 frames, u32 dim,
// u32 frame_shift, then row-major float32 little-endian payload.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

inline void write_feature_file(const std::string& path, const FeatureMatrix& m) {
    validate_feature_matrix(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature file: " + path);
    auto w32 = [&](std::uint32_t v) {
        char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
        out.write(b, 4);
    };
    out.write("SMFT", 4);
    w32(kFeatureFileVersion);
    w32(std::uint32_t(m.frames()));
    w32(std::uint32_t(m.dim()));
    w32(std::uint32_t(m.frame_shift_samples));
    std::vector<float> row(size_t(m.dim()));
    for (int t = 0; t < m.frames(); ++t) {
        for (int d = 0; d < m.dim(); ++d) row[size_t(d)] = float(m.data(t, d));
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * 4));
    }
    if (!out) throw IoError("short write: " + path);
}

inline FeatureMatrix read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SMFT", 4) != 0)
        throw FormatError(path + ": bad magic, not a feature file");
    auto r32 = [&]() -> std::uint32_t {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw IoError(path + ": truncated header");
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    };
    std::uint32_t version = r32();
    if (version != kFeatureFileVersion)
        throw FormatError(path + ": unsupported feature file version " + std::to_string(version));
    std::uint32_t frames = r32(), dim = r32(), shift = r32();
    if (frames == 0 || dim == 0)
        throw ValidationError(path + ": zero frames or dim in header");

    FeatureMatrix m;
    m.frame_shift_samples = int(shift);
    m.data.resize(int(frames), int(dim));
    std::vector<float> row(dim);
    for (std::uint32_t t = 0; t < frames; ++t) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(dim * 4));
        if (!in)
            throw IoError(path + ": truncated payload (header claims " + std::to_string(frames) +
                          " frames)");
        for (std::uint32_t d = 0; d < dim; ++d) m.data(int(t), int(d)) = row[d];
    }
    return m;
}

}  // namespace samos
