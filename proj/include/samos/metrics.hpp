#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos {

struct ScoreRow {
    std::string utterance_id;
    std::string system_id;
    double predicted = 0.0;
    double truth = 0.0;
};

using ScoreTable = std::vector<ScoreRow>;

enum class MetricLevel { utterance, system };

struct MetricReport {
    MetricLevel level = MetricLevel::utterance;
    double mse = 0.0;
    double lcc = 0.0;
    double srcc = 0.0;
    double ktau = 0.0;
    int n = 0;
};

inline void check_pair(const std::vector<double>& x, const std::vector<double>& y, size_t min_len) {
    if (x.size() != y.size())
        throw InputError("metric input length mismatch: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    if (x.size() < min_len)
        throw InputError("metric input too short: need at least " + std::to_string(min_len));
}

inline double mse(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y, 1);
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return acc / double(x.size());
}

// Pearson linear correlation.
inline double lcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y, 2);
    double n = double(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("correlation undefined: zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

// Fractional ranks (1-based), ties get the average rank of their run.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double r = (double(i + 1) + double(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank correlation: Pearson on average ranks.
inline double srcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y, 2);
    return lcc(average_ranks(x), average_ranks(y));
}

namespace detail {

// Merge sort counting (weighted) swaps; the workhorse of Knight's
// O(n log n) Kendall tau.
inline double merge_count(std::vector<double>& v, std::vector<double>& buf, size_t lo, size_t hi) {
    if (hi - lo < 2) return 0.0;
    size_t mid = (lo + hi) / 2;
    double swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += double(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + std::ptrdiff_t(lo), buf.begin() + std::ptrdiff_t(hi),
              v.begin() + std::ptrdiff_t(lo));
    return swaps;
}

// Sum over tie groups of g*(g-1)/2 for consecutive equal values (input sorted).
inline double tie_pairs(const std::vector<double>& sorted) {
    double t = 0.0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double g = double(j - i + 1);
        t += g * (g - 1.0) / 2.0;
        i = j + 1;
    }
    return t;
}

}  // namespace detail

enum class TauVariant { tau_b, tau_a };

// Kendall rank correlation via Knight's algorithm. tau-b applies tie
// corrections in the denominator; tau-a divides by n(n-1)/2.
inline double ktau(const std::vector<double>& x, const std::vector<double>& y,
                   TauVariant variant = TauVariant::tau_b) {
    check_pair(x, y, 2);
    size_t n = x.size();

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }

    double total = double(n) * double(n - 1) / 2.0;
    double tx = detail::tie_pairs(xs);

    // Joint ties: pairs tied in both x and y.
    double txy = 0.0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && xs[j + 1] == xs[i] && ys[j + 1] == ys[i]) ++j;
            double g = double(j - i + 1);
            txy += g * (g - 1.0) / 2.0;
            i = j + 1;
        }
    }

    std::vector<double> buf(n), ysorted = ys;
    double swaps = detail::merge_count(ysorted, buf, 0, n);  // ysorted ends up sorted
    double ty = detail::tie_pairs(ysorted);

    // Pairs not tied in x: discordant = swaps; concordant = rest.
    double disc = swaps;
    double conc = total - tx - ty + txy - disc;
    double num = conc - disc;

    if (variant == TauVariant::tau_a) {
        if (total == 0.0) throw UndefinedCorrelationError("tau undefined for n < 2");
        return num / total;
    }
    double den = std::sqrt((total - tx) * (total - ty));
    if (den == 0.0)
        throw UndefinedCorrelationError("tau-b undefined: all pairs tied in one input");
    return num / den;
}

// Per-system (mean predicted, mean truth), sorted by system_id.
inline std::vector<std::tuple<std::string, double, double>> system_aggregate(const ScoreTable& table) {
    if (table.empty()) throw InputError("system_aggregate: empty score table");
    std::map<std::string, std::pair<std::pair<double, double>, int>> acc;
    for (const auto& r : table) {
        auto& a = acc[r.system_id];
        a.first.first += r.predicted;
        a.first.second += r.truth;
        a.second += 1;
    }
    std::vector<std::tuple<std::string, double, double>> out;
    out.reserve(acc.size());
    for (const auto& [sys, a] : acc)
        out.emplace_back(sys, a.first.first / a.second, a.first.second / a.second);
    return out;
}

inline MetricReport evaluate_report(const ScoreTable& table, MetricLevel level,
                                    TauVariant variant = TauVariant::tau_b) {
    if (table.empty()) throw InputError("evaluate_report: empty score table");
    std::vector<double> pred, truth;
    if (level == MetricLevel::system) {
        auto agg = system_aggregate(table);
        if (agg.size() < 2)
            throw InputError("system-level report requires at least 2 systems, got " +
                             std::to_string(agg.size()));
        for (const auto& [sys, p, t] : agg) {
            pred.push_back(p);
            truth.push_back(t);
        }
    } else {
        for (const auto& r : table) {
            pred.push_back(r.predicted);
            truth.push_back(r.truth);
        }
    }
    MetricReport rep;
    rep.level = level;
    rep.n = int(pred.size());
    rep.mse = mse(pred, truth);
    try {
        rep.lcc = lcc(pred, truth);
        rep.srcc = srcc(pred, truth);
        rep.ktau = ktau(pred, truth, variant);
    } catch (const UndefinedCorrelationError& e) {
        throw UndefinedCorrelationError(std::string("report at ") +
                                        (level == MetricLevel::system ? "system" : "utterance") +
                                        " level: " + e.what());
    }
    return rep;
}

// Score table CSV: `utterance_id,system_id,predicted,truth` with header.
inline void write_score_table(const std::string& path, const ScoreTable& table) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write score table: " + path);
    out << "utterance_id,system_id,predicted,truth\n";
    out.precision(17);
    for (const auto& r : table)
        out << r.utterance_id << ',' << r.system_id << ',' << r.predicted << ',' << r.truth << '\n';
}

inline ScoreTable read_score_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty score table");
    ScoreTable table;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        ScoreRow r;
        std::string p, t;
        if (!std::getline(ss, r.utterance_id, ',') || !std::getline(ss, r.system_id, ',') ||
            !std::getline(ss, p, ',') || !std::getline(ss, t))
            throw ParseError(path + " line " + std::to_string(lineno) + ": expected 4 fields");
        try {
            r.predicted = std::stod(p);
            r.truth = std::stod(t);
        } catch (const std::exception&) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": bad number");
        }
        if (!std::isfinite(r.predicted) || !std::isfinite(r.truth))
            throw ValidationError(path + " line " + std::to_string(lineno) + ": non-finite score");
        table.push_back(std::move(r));
    }
    return table;
}

inline std::string format_report(const MetricReport& rep) {
    const char* prefix = rep.level == MetricLevel::system ? "S_" : "U_";
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << prefix << "MSE  " << rep.mse << "\n"
       << prefix << "LCC  " << rep.lcc << "\n"
       << prefix << "SRCC " << rep.srcc << "\n"
       << prefix << "KTAU " << rep.ktau << "\n"
       << "n " << rep.n << "\n";
    return os.str();
}

}  // namespace samos
