#pragma once

// CSV interchange for feature vectors and Monte Carlo prediction replicates.
//
//   features:    id,fold,f0,...,f{D-1}      (fold column optional)
//   predictions: id,rep,p0,...,p{C-1}[,label]
//   labels:      id,label

#include "driftgate/error.hpp"
#include "driftgate/feature_stats.hpp"
#include "driftgate/uncertainty.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

namespace driftgate {

namespace csv {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Line {
    std::size_t number = 0; // 1-based
    std::vector<std::string_view> fields;
};

/// Splits text into non-empty lines of comma-separated fields (no quoting).
inline std::vector<Line> split(std::string_view text) {
    std::vector<Line> lines;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++number;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (raw.find_first_not_of(" \t") == std::string_view::npos) continue;
        Line line{number, {}};
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = raw.find(',', start);
            std::string_view field = raw.substr(start, comma == std::string_view::npos ? raw.npos : comma - start);
            while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
            while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
            line.fields.push_back(field);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

inline Error parse_error(const std::string& path, std::size_t line, const std::string& what) {
    return Error(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view field, const std::string& path, std::size_t line) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty())
        throw parse_error(path, line, "not a number: '" + std::string(field) + "'");
    if (!std::isfinite(v)) throw parse_error(path, line, "non-finite value '" + std::string(field) + "'");
    return v;
}

inline long parse_int(std::string_view field, const std::string& path, std::size_t line) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw parse_error(path, line, "not an integer: '" + std::string(field) + "'");
    return v;
}

/// 17 significant digits: enough to reproduce any binary64 value exactly.
inline void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.append(buf, ptr);
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << text;
}

} // namespace csv

inline FeatureMatrix parse_features(std::string_view text, const std::string& path = "<features>") {
    const auto lines = csv::split(text);
    FeatureMatrix m;
    if (lines.empty()) return m;

    const auto& header = lines.front().fields;
    if (header.empty() || header[0] != "id")
        throw csv::parse_error(path, lines.front().number, "header must start with 'id'");
    const bool has_fold = header.size() > 1 && header[1] == "fold";
    const std::size_t first_feature = has_fold ? 2 : 1;
    if (header.size() <= first_feature) throw csv::parse_error(path, lines.front().number, "header has no feature columns");
    const std::size_t dim = header.size() - first_feature;

    const std::size_t n = lines.size() - 1;
    m.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    m.ids.reserve(n);
    if (has_fold) m.fold_tags.emplace().reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& line = lines[r + 1];
        if (line.fields.size() != header.size())
            throw Error(ErrorCode::DimensionMismatch, path + ":" + std::to_string(line.number) + ": expected " +
                                                          std::to_string(header.size()) + " fields, found " +
                                                          std::to_string(line.fields.size()));
        if (line.fields[0].empty()) throw csv::parse_error(path, line.number, "empty id");
        m.ids.emplace_back(line.fields[0]);
        if (has_fold) m.fold_tags->push_back(static_cast<int>(csv::parse_int(line.fields[1], path, line.number)));
        for (std::size_t k = 0; k < dim; ++k)
            m.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                csv::parse_double(line.fields[first_feature + k], path, line.number);
    }
    m.validate();
    return m;
}

inline FeatureMatrix load_features(const std::string& path) { return parse_features(csv::read_file(path), path); }

inline std::string format_features(const FeatureMatrix& m) {
    std::string out = "id";
    if (m.fold_tags) out += ",fold";
    for (std::size_t k = 0; k < m.dim(); ++k) out += ",f" + std::to_string(k);
    out += '\n';
    out.reserve(out.size() + m.rows() * (m.dim() * 24 + 16));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out += m.ids[r];
        if (m.fold_tags) out += "," + std::to_string((*m.fold_tags)[r]);
        for (std::size_t k = 0; k < m.dim(); ++k) {
            out += ',';
            csv::append_double(out, m.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
        }
        out += '\n';
    }
    return out;
}

inline void save_features(const std::string& path, const FeatureMatrix& m) { csv::write_file(path, format_features(m)); }

/// Groups replicate rows by id (first-appearance order) and sorts each group by `rep`.
/// With strict_reps set, every id must hold exactly that many replicates.
inline McPredictionSet parse_mc_predictions(std::string_view text, const std::string& path = "<predictions>",
                                            std::optional<std::size_t> strict_reps = std::nullopt) {
    const auto lines = csv::split(text);
    McPredictionSet set;
    if (lines.empty()) return set;

    const auto& header = lines.front().fields;
    if (header.size() < 4 || header[0] != "id" || header[1] != "rep")
        throw csv::parse_error(path, lines.front().number, "header must be id,rep,p0,p1[,...][,label]");
    const bool has_label = header.back() == "label";
    const std::size_t classes = header.size() - 2 - (has_label ? 1 : 0);
    if (classes < 2) throw csv::parse_error(path, lines.front().number, "need at least two probability columns");

    struct Group {
        std::vector<std::pair<long, std::vector<double>>> rows;
        std::optional<int> label;
    };
    std::unordered_map<std::string, std::size_t> index;
    std::vector<Group> groups;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto& line = lines[r];
        if (line.fields.size() != header.size())
            throw Error(ErrorCode::DimensionMismatch, path + ":" + std::to_string(line.number) + ": expected " +
                                                          std::to_string(header.size()) + " fields");
        const std::string id(line.fields[0]);
        if (id.empty()) throw csv::parse_error(path, line.number, "empty id");
        auto [it, inserted] = index.emplace(id, groups.size());
        if (inserted) {
            groups.emplace_back();
            set.ids.push_back(id);
        }
        Group& g = groups[it->second];
        const long rep = csv::parse_int(line.fields[1], path, line.number);
        std::vector<double> probs(classes);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            probs[c] = csv::parse_double(line.fields[2 + c], path, line.number);
            if (probs[c] < 0.0 || probs[c] > 1.0)
                throw Error(ErrorCode::InvalidProbabilityRow,
                            path + ":" + std::to_string(line.number) + ": probability outside [0, 1]");
            sum += probs[c];
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            throw Error(ErrorCode::InvalidProbabilityRow,
                        path + ":" + std::to_string(line.number) + ": probabilities sum to " + std::to_string(sum));
        if (has_label) {
            const int label = static_cast<int>(csv::parse_int(line.fields.back(), path, line.number));
            if (g.label && *g.label != label) throw csv::parse_error(path, line.number, "conflicting labels for id " + id);
            g.label = label;
        }
        g.rows.emplace_back(rep, std::move(probs));
    }

    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto& rows = groups[i].rows;
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (rows[k].first == rows[k - 1].first)
                throw Error(ErrorCode::ParseError, path + ": duplicate rep " + std::to_string(rows[k].first) +
                                                       " for id " + set.ids[i]);
        if (strict_reps && rows.size() != *strict_reps)
            throw Error(ErrorCode::RepCountMismatch, "id " + set.ids[i] + " has " + std::to_string(rows.size()) +
                                                         " replicates, expected " + std::to_string(*strict_reps));
        Matrix reps(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(classes));
        for (std::size_t k = 0; k < rows.size(); ++k)
            for (std::size_t c = 0; c < classes; ++c)
                reps(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k].second[c];
        set.replicates.push_back(std::move(reps));
        set.labels.push_back(groups[i].label);
    }
    set.validate();
    return set;
}

inline McPredictionSet load_mc_predictions(const std::string& path, std::optional<std::size_t> strict_reps = std::nullopt) {
    return parse_mc_predictions(csv::read_file(path), path, strict_reps);
}

inline std::string format_mc_predictions(const McPredictionSet& set) {
    const Eigen::Index classes = set.replicates.empty() ? 2 : set.replicates.front().cols();
    bool any_label = false;
    for (const auto& l : set.labels) any_label = any_label || l.has_value();
    std::string out = "id,rep";
    for (Eigen::Index c = 0; c < classes; ++c) out += ",p" + std::to_string(c);
    if (any_label) out += ",label";
    out += '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Matrix& reps = set.replicates[i];
        for (Eigen::Index r = 0; r < reps.rows(); ++r) {
            out += set.ids[i] + "," + std::to_string(r);
            for (Eigen::Index c = 0; c < reps.cols(); ++c) {
                out += ',';
                csv::append_double(out, reps(r, c));
            }
            if (any_label) {
                if (!set.labels[i]) throw Error(ErrorCode::InvalidArgument, "labels must be all present or all absent");
                out += "," + std::to_string(*set.labels[i]);
            }
            out += '\n';
        }
    }
    return out;
}

inline void save_mc_predictions(const std::string& path, const McPredictionSet& set) {
    csv::write_file(path, format_mc_predictions(set));
}

/// id -> class index from an `id,label` file.
inline std::unordered_map<std::string, int> parse_labels(std::string_view text, const std::string& path = "<labels>") {
    const auto lines = csv::split(text);
    std::unordered_map<std::string, int> labels;
    if (lines.empty()) return labels;
    const auto& header = lines.front().fields;
    if (header.size() != 2 || header[0] != "id" || header[1] != "label")
        throw csv::parse_error(path, lines.front().number, "header must be id,label");
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto& line = lines[r];
        if (line.fields.size() != 2) throw Error(ErrorCode::DimensionMismatch, path + ":" + std::to_string(line.number) + ": expected 2 fields");
        const int label = static_cast<int>(csv::parse_int(line.fields[1], path, line.number));
        if (label < 0) throw csv::parse_error(path, line.number, "negative label");
        if (!labels.emplace(std::string(line.fields[0]), label).second)
            throw csv::parse_error(path, line.number, "duplicate id " + std::string(line.fields[0]));
    }
    return labels;
}

inline std::unordered_map<std::string, int> load_labels(const std::string& path) {
    return parse_labels(csv::read_file(path), path);
}

} // namespace driftgate
