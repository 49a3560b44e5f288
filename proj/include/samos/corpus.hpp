#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos {

enum class Split { train, dev, test };

inline Split parse_split(const std::string& s, int line) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw ParseError("line " + std::to_string(line) + ": unknown split '" + s + "'");
}

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

// One listener's score for one utterance of one synthesis system.
struct RatingRecord {
    std::string utterance_id;
    std::string system_id;
    std::string listener_id;
    int score = 0;  // integer in [1,5]
    Split split = Split::train;
    std::string wav_path;
};

struct Utterance {
    std::string utterance_id;
    std::string system_id;
    std::string wav_path;
    Split split = Split::train;
    std::vector<std::pair<std::string, int>> ratings;  // (listener_id, score), ascending listener_id
    double mean_score = 0.0;
};

// listener_id -> contiguous index; index 0 is reserved for the virtual
// mean-listener and is always present.
class ListenerVocabulary {
  public:
    static constexpr const char* kMeanListener = "__mean__";

    ListenerVocabulary() { index_["__mean__"] = 0; names_.push_back(kMeanListener); }

    int add(const std::string& listener_id) {
        auto it = index_.find(listener_id);
        if (it != index_.end()) return it->second;
        int idx = int(names_.size());
        index_[listener_id] = idx;
        names_.push_back(listener_id);
        return idx;
    }

    int lookup(const std::string& listener_id) const {
        auto it = index_.find(listener_id);
        if (it == index_.end())
            throw VocabularyError("unknown listener id: " + listener_id);
        return it->second;
    }

    bool contains(const std::string& listener_id) const {
        return index_.count(listener_id) != 0;
    }

    int size() const { return int(names_.size()); }
    const std::string& name(int idx) const { return names_.at(size_t(idx)); }

    static ListenerVocabulary from_utterances(const std::vector<Utterance>& utts) {
        // Collect ids first so indices do not depend on utterance order.
        std::set<std::string> ids;
        for (const auto& u : utts)
            for (const auto& [lid, sc] : u.ratings) ids.insert(lid);
        ListenerVocabulary v;
        for (const auto& id : ids) v.add(id);
        return v;
    }

  private:
    std::map<std::string, int> index_;
    std::vector<std::string> names_;
};

// (utterance, listener, label) triple after mean-listener expansion.
struct TrainingSample {
    std::string utterance_id;
    std::string wav_path;
    int listener_index = 0;
    double label_score = 0.0;                  // in [1,5]
    std::array<double, 5> label_distribution;  // sums to 1
};

// Classification target for one sample. A real listener contributes a
// one-hot vector at their score; the mean-listener target is the average
// of the per-listener one-hot vectors.
inline std::array<double, 5> build_classification_target(const std::vector<int>& scores,
                                                         bool is_mean) {
    if (scores.empty()) throw ValidationError("classification target from empty rating list");
    std::array<double, 5> target{};
    if (!is_mean && scores.size() != 1)
        throw ValidationError("non-mean classification target expects a single score");
    for (int s : scores) {
        if (s < 1 || s > 5)
            throw ValidationError("score out of range [1,5]: " + std::to_string(s));
        target[size_t(s - 1)] += 1.0;
    }
    for (double& t : target) t /= double(scores.size());
    return target;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Ratings file: header `utterance_id,system_id,listener_id,score,split,wav_path`,
// one RatingRecord per row. Utterances come back sorted by utterance_id with
// ratings sorted by listener_id.
inline std::vector<Utterance> load_ratings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ratings file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty ratings file");
    {
        auto header = detail::split_csv_line(line);
        const std::vector<std::string> expected = {"utterance_id", "system_id", "listener_id",
                                                   "score",        "split",     "wav_path"};
        if (header != expected)
            throw ParseError(path + ": bad header row, expected "
                             "utterance_id,system_id,listener_id,score,split,wav_path");
    }

    std::map<std::string, Utterance> by_utt;
    std::set<std::pair<std::string, std::string>> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 6)
            throw ParseError(path + " line " + std::to_string(lineno) + ": expected 6 fields, got " +
                             std::to_string(f.size()));
        for (int i = 0; i < 3; ++i)
            if (f[size_t(i)].empty())
                throw ParseError(path + " line " + std::to_string(lineno) + ": empty field");

        int score;
        try {
            size_t pos = 0;
            score = std::stoi(f[3], &pos);
            if (pos != f[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": bad score '" + f[3] + "'");
        }
        if (score < 1 || score > 5)
            throw ValidationError(path + " line " + std::to_string(lineno) + ": score " +
                                  std::to_string(score) + " outside [1,5]");
        Split split = parse_split(f[4], lineno);

        if (!seen.insert({f[0], f[2]}).second)
            throw ValidationError(path + " line " + std::to_string(lineno) + ": duplicate rating for (" +
                                  f[0] + ", " + f[2] + ")");

        auto& u = by_utt[f[0]];
        if (u.ratings.empty()) {
            u.utterance_id = f[0];
            u.system_id = f[1];
            u.wav_path = f[5];
            u.split = split;
        } else if (u.system_id != f[1] || u.wav_path != f[5] || u.split != split) {
            throw ValidationError(path + " line " + std::to_string(lineno) + ": utterance " + f[0] +
                                  " has inconsistent system/split/wav across rows");
        }
        u.ratings.emplace_back(f[2], score);
    }

    std::vector<Utterance> utts;
    utts.reserve(by_utt.size());
    for (auto& [id, u] : by_utt) {
        std::sort(u.ratings.begin(), u.ratings.end());
        double sum = 0.0;
        for (const auto& [lid, sc] : u.ratings) sum += sc;
        u.mean_score = sum / double(u.ratings.size());
        utts.push_back(std::move(u));
    }
    return utts;  // std::map iteration is already lexicographic by utterance_id
}

// Mean-listener expansion: each utterance with m listeners yields m+1
// samples (one per listener, plus one mean-listener sample); with
// mean_only, exactly one mean-listener sample per utterance.
inline std::vector<TrainingSample> expand_training_samples(const std::vector<Utterance>& utterances,
                                                           const ListenerVocabulary& vocab,
                                                           bool mean_only) {
    std::vector<TrainingSample> out;
    for (const auto& u : utterances) {
        if (u.ratings.empty())
            throw ValidationError("utterance " + u.utterance_id + " has no ratings");
        if (!mean_only) {
            for (const auto& [lid, sc] : u.ratings) {
                TrainingSample s;
                s.utterance_id = u.utterance_id;
                s.wav_path = u.wav_path;
                s.listener_index = vocab.lookup(lid);
                s.label_score = double(sc);
                s.label_distribution = build_classification_target({sc}, false);
                out.push_back(std::move(s));
            }
        }
        // The mean-listener target is the average of one-hot targets summed
        // in ascending listener_id order (ratings are kept sorted).
        std::vector<int> scores;
        scores.reserve(u.ratings.size());
        for (const auto& [lid, sc] : u.ratings) scores.push_back(sc);
        TrainingSample s;
        s.utterance_id = u.utterance_id;
        s.wav_path = u.wav_path;
        s.listener_index = 0;
        s.label_score = u.mean_score;
        s.label_distribution = build_classification_target(scores, true);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<Utterance> filter_split(const std::vector<Utterance>& utts, Split split) {
    std::vector<Utterance> out;
    for (const auto& u : utts)
        if (u.split == split) out.push_back(u);
    return out;
}

}  // namespace samos
