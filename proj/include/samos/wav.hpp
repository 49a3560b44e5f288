#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos {

// Mono 16-bit PCM WAV at 16 kHz, the only audio format the toolkit accepts.
constexpr int kSampleRate = 16000;

namespace detail {

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return std::uint16_t(b[0] | b[1] << 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
    out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {char(v & 0xff), char(v >> 8 & 0xff)};
    out.write(b, 2);
}

}  // namespace detail

// Samples are returned as doubles in [-1, 1).
inline std::vector<double> read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open wav file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw FormatError(path + ": not a RIFF file");
    detail::read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw FormatError(path + ": not a WAVE file");

    int channels = 0, rate = 0, bits = 0;
    std::vector<double> samples;
    bool got_fmt = false, got_data = false;
    while (in.read(tag, 4)) {
        std::uint32_t size = detail::read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            std::uint16_t fmt = detail::read_u16(in);
            channels = detail::read_u16(in);
            rate = int(detail::read_u32(in));
            detail::read_u32(in);  // byte rate
            detail::read_u16(in);  // block align
            bits = detail::read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            if (fmt != 1) throw FormatError(path + ": only PCM wav supported");
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw FormatError(path + ": data chunk before fmt");
            if (channels != 1) throw ValidationError(path + ": expected mono audio");
            if (bits != 16) throw ValidationError(path + ": expected 16-bit PCM");
            if (rate != kSampleRate)
                throw ValidationError(path + ": expected 16 kHz, got " + std::to_string(rate));
            std::uint32_t n = size / 2;
            samples.resize(n);
            std::vector<char> raw(size);
            in.read(raw.data(), size);
            if (!in) throw IoError(path + ": truncated data chunk");
            for (std::uint32_t i = 0; i < n; ++i) {
                std::int16_t v = std::int16_t((unsigned char)raw[2 * i] |
                                              (unsigned char)raw[2 * i + 1] << 8);
                samples[i] = v / 32768.0;
            }
            got_data = true;
            break;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!got_data) throw FormatError(path + ": no data chunk");
    return samples;
}

inline void write_wav(const std::string& path, const std::vector<double>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write wav file: " + path);
    std::uint32_t data_size = std::uint32_t(samples.size() * 2);
    out.write("RIFF", 4);
    detail::write_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    detail::write_u32(out, 16);
    detail::write_u16(out, 1);   // PCM
    detail::write_u16(out, 1);   // mono
    detail::write_u32(out, kSampleRate);
    detail::write_u32(out, kSampleRate * 2);
    detail::write_u16(out, 2);
    detail::write_u16(out, 16);
    out.write("data", 4);
    detail::write_u32(out, data_size);
    for (double s : samples) {
        double c = s < -1.0 ? -1.0 : (s > 0.999969 ? 0.999969 : s);
        auto v = std::int16_t(c * 32768.0);
        char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
        out.write(b, 2);
    }
    if (!out) throw IoError("short write: " + path);
}

}  // namespace samos
