#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "samos/common.hpp"
#include "samos/nn/params.hpp"

namespace samos {

// Named-parameter map plus stage/freeze metadata. Values are float32, the
// unit of exact arithmetic averaging and of the on-disk archive.
struct Checkpoint {
    struct Tensor {
        int rows = 0;
        int cols = 0;
        std::vector<float> values;  // row-major
    };

    std::map<std::string, Tensor> tensors;
    int stage = 0;  // 1..3, 0 = untrained
    int epoch = 0;
    double dev_srcc = 0.0;
    std::uint64_t config_hash = 0;
    std::string source_epochs;  // set by average_checkpoints

    static Checkpoint from_params(const nn::ParameterStore& ps) {
        Checkpoint ck;
        for (const auto* p : ps.all()) {
            Tensor t;
            t.rows = int(p->value.rows());
            t.cols = int(p->value.cols());
            t.values.reserve(size_t(t.rows) * size_t(t.cols));
            for (int i = 0; i < t.rows; ++i)
                for (int j = 0; j < t.cols; ++j) t.values.push_back(float(p->value(i, j)));
            ck.tensors[p->name] = std::move(t);
        }
        return ck;
    }

    void load_into(nn::ParameterStore& ps) const {
        for (auto* p : ps.all()) {
            auto it = tensors.find(p->name);
            if (it == tensors.end())
                throw ValidationError("checkpoint missing parameter: " + p->name);
            const Tensor& t = it->second;
            if (t.rows != p->value.rows() || t.cols != p->value.cols())
                throw ValidationError("checkpoint shape mismatch for " + p->name);
            for (int i = 0; i < t.rows; ++i)
                for (int j = 0; j < t.cols; ++j)
                    p->value(i, j) = double(t.values[size_t(i) * size_t(t.cols) + size_t(j)]);
        }
        for (const auto& [name, t] : tensors)
            if (!ps.has(name)) throw ValidationError("checkpoint has unknown parameter: " + name);
    }
};

// Archive layout: magic "SMCK", u32 version=1, u32 manifest byte length,
// manifest text, then one concatenated float32 little-endian payload.
// Manifest lines: `meta <key> <value>` then `tensor <name> <rows> <cols> <offset>`
// with offsets in floats from the start of the payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ostringstream man;
    man << "meta stage " << ck.stage << "\n";
    man << "meta epoch " << ck.epoch << "\n";
    man.precision(17);
    man << "meta dev_srcc " << ck.dev_srcc << "\n";
    man << "meta config_hash " << ck.config_hash << "\n";
    if (!ck.source_epochs.empty()) man << "meta source_epochs " << ck.source_epochs << "\n";
    std::size_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {
        man << "tensor " << name << ' ' << t.rows << ' ' << t.cols << ' ' << offset << "\n";
        offset += t.values.size();
    }
    std::string manifest = man.str();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    auto w32 = [&](std::uint32_t v) {
        char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
        out.write(b, 4);
    };
    out.write("SMCK", 4);
    w32(kCheckpointVersion);
    w32(std::uint32_t(manifest.size()));
    out.write(manifest.data(), std::streamsize(manifest.size()));
    for (const auto& [name, t] : ck.tensors)
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  std::streamsize(t.values.size() * 4));
    if (!out) throw IoError("short write: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SMCK", 4) != 0)
        throw FormatError(path + ": bad magic, not a checkpoint");
    auto r32 = [&]() -> std::uint32_t {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw IoError(path + ": truncated checkpoint header");
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    };
    std::uint32_t version = r32();
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint32_t man_len = r32();
    std::string manifest(man_len, '\0');
    in.read(manifest.data(), man_len);
    if (!in) throw IoError(path + ": truncated manifest");

    Checkpoint ck;
    struct Entry {
        std::string name;
        int rows, cols;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::istringstream ms(manifest);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string key, value;
            ls >> key >> value;
            if (key == "stage") ck.stage = std::stoi(value);
            else if (key == "epoch") ck.epoch = std::stoi(value);
            else if (key == "dev_srcc") ck.dev_srcc = std::stod(value);
            else if (key == "config_hash") ck.config_hash = std::stoull(value);
            else if (key == "source_epochs") ck.source_epochs = value;
        } else if (kind == "tensor") {
            Entry e;
            ls >> e.name >> e.rows >> e.cols >> e.offset;
            if (!ls || e.rows <= 0 || e.cols <= 0)
                throw FormatError(path + ": bad tensor manifest line: " + line);
            entries.push_back(std::move(e));
        } else {
            throw FormatError(path + ": unknown manifest line: " + line);
        }
    }
    for (const auto& e : entries) {
        Checkpoint::Tensor t;
        t.rows = e.rows;
        t.cols = e.cols;
        t.values.resize(size_t(e.rows) * size_t(e.cols));
        in.seekg(std::streamoff(12 + man_len + e.offset * 4));
        in.read(reinterpret_cast<char*>(t.values.data()), std::streamsize(t.values.size() * 4));
        if (!in) throw IoError(path + ": truncated payload for tensor " + e.name);
        ck.tensors[e.name] = std::move(t);
    }
    return ck;
}

// Per-parameter arithmetic mean (accumulated in double). Metadata records
// the source epochs.
inline Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks) {
    if (cks.empty()) throw ValidationError("average_checkpoints: no checkpoints");
    Checkpoint out = cks.front();
    std::ostringstream src;
    for (size_t i = 0; i < cks.size(); ++i) src << (i ? "," : "") << cks[i].epoch;
    out.source_epochs = src.str();
    for (auto& [name, t] : out.tensors) {
        std::vector<double> acc(t.values.begin(), t.values.end());
        for (size_t k = 1; k < cks.size(); ++k) {
            auto it = cks[k].tensors.find(name);
            if (it == cks[k].tensors.end())
                throw ValidationError("checkpoint schema mismatch: missing " + name);
            const auto& u = it->second;
            if (u.rows != t.rows || u.cols != t.cols)
                throw ValidationError("checkpoint schema mismatch: shape of " + name);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += double(u.values[i]);
        }
        for (size_t i = 0; i < acc.size(); ++i)
            t.values[i] = float(acc[i] / double(cks.size()));
    }
    for (const auto& ck : cks)
        if (ck.tensors.size() != out.tensors.size())
            throw ValidationError("checkpoint schema mismatch: tensor count");
    return out;
}

}  // namespace samos
