#pragma once

// CSV datasets (label first, then features; optional header row) and the JSON
// model document.

#include "sfda/classifier.hpp"
#include "sfda/error.hpp"
#include "sfda/estimators.hpp"
#include "sfda/model.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sfda::io {

inline constexpr int kModelVersion = 1;
inline constexpr const char* kModelFormat = "sfda-model";

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& v) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

}  // namespace detail

/// Numeric table of a CSV file; a first row whose first token is not a number
/// is taken as a header and skipped. Blank lines are ignored.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
    const std::string text = detail::read_file(path);
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string_view line = detail::trim(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split(line);
        std::vector<double> row(fields.size());
        double first = 0;
        if (rows.empty() && line_no == 1 && !detail::parse_double(fields[0], first)) continue;  // header
        for (std::size_t j = 0; j < fields.size(); ++j)
            if (!detail::parse_double(fields[j], row[j]))
                throw ValidationError("csv", path + ":" + std::to_string(line_no) + ": field " + std::to_string(j + 1) +
                                                 " is not a number ('" + std::string(fields[j]) + "')");
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError("csv", path + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(rows.front().size()) + " fields, found " +
                                             std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("csv", path + ": no data rows");
    return rows;
}

inline int parse_label(double v, const std::string& where) {
    if (v != std::floor(v) || v < 1 || v > 1e6) throw ValidationError("label_range", where + ": label must be a positive integer");
    return static_cast<int>(v);
}

/// Splits a table into integer labels (first column) and observations.
inline std::pair<std::vector<int>, Matrix> split_labeled(const std::vector<std::vector<double>>& rows,
                                                         const std::string& path) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(rows.front().size()) - 1;
    if (p < 1) throw ValidationError("shape", path + ": need a label column and at least one feature");
    std::vector<int> labels(rows.size());
    Matrix x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        labels[static_cast<std::size_t>(i)] = parse_label(r[0], path + " row " + std::to_string(i + 1));
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = r[static_cast<std::size_t>(j + 1)];
    }
    return {std::move(labels), std::move(x)};
}

inline LabeledDataset read_dataset(const std::string& path) {
    auto [labels, x] = split_labeled(read_numeric_csv(path), path);
    return make_dataset(std::move(x), std::move(labels));
}

inline Matrix read_unlabeled(const std::string& path) {
    const auto rows = read_numeric_csv(path);
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return x;
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
inline void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        out << content;
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("error writing '" + path + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw IoError("cannot move output into place at '" + path + "': " + ec.message());
    }
}

inline std::string labeled_csv(const std::vector<int>& labels, const Matrix& x) {
    std::string s;
    s += "label";
    for (Eigen::Index j = 0; j < x.cols(); ++j) s += ",x" + std::to_string(j + 1);
    s += '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        s += std::to_string(labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            s += ',';
            s += format_double(x(i, j));
        }
        s += '\n';
    }
    return s;
}

inline void write_dataset(const std::string& path, const LabeledDataset& d) {
    write_file(path, labeled_csv(d.labels, d.observations));
}

// Model document ------------------------------------------------------------

using nlohmann::json;

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Matrix json_matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw ValidationError("model", std::string("field '") + name + "' has the wrong number of rows");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
            throw ValidationError("model", std::string("field '") + name + "' has a malformed row");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline json model_json(const DiscriminantModel& m) {
    const auto& p = m.params;
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["p"] = m.dim();
    j["K"] = m.num_classes();
    j["params"] = {{"tau", p.penalty.tau},
                   {"lambda", p.penalty.lambda},
                   {"kappa", p.kappa},
                   {"kappa_scale", to_string(p.kappa_scale)},
                   {"variant", to_string(p.variant)},
                   {"solver",
                    {{"max_outer_iters", p.solver.max_outer_iters},
                     {"max_inner_iters", p.solver.max_inner_iters},
                     {"tol_outer", p.solver.tol_outer},
                     {"tol_inner", p.solver.tol_inner}}}};
    j["components"] = matrix_json(m.components);
    j["constraints"] = matrix_json(m.constraints);
    j["class_means"] = matrix_json(m.summaries.class_means);
    j["counts"] = m.summaries.counts;
    j["overall_mean"] = matrix_json(m.summaries.overall_mean.transpose());
    j["gram"] = matrix_json(m.gram);
    j["discriminant"] = matrix_json(m.discriminant);
    return j;
}

inline DiscriminantModel model_from_json(const json& j) {
    try {
        if (j.value("format", "") != kModelFormat) throw ValidationError("model", "not an sfda model document");
        if (j.at("version").get<int>() != kModelVersion)
            throw ValidationError("model", "unsupported model version " + j.at("version").dump());
        const auto p = j.at("p").get<Eigen::Index>();
        const int K = j.at("K").get<int>();
        if (p < 1 || K < 2) throw ValidationError("model", "invalid dimensions");
        DiscriminantModel m;
        const auto& pj = j.at("params");
        m.params.penalty = {pj.at("tau").get<double>(), pj.at("lambda").get<double>()};
        m.params.kappa = pj.at("kappa").get<double>();
        m.params.kappa_scale = parse_kappa_scale(pj.at("kappa_scale").get<std::string>());
        m.params.variant = parse_variant(pj.at("variant").get<std::string>());
        const auto& sj = pj.at("solver");
        m.params.solver.max_outer_iters = sj.at("max_outer_iters").get<int>();
        m.params.solver.max_inner_iters = sj.at("max_inner_iters").get<int>();
        m.params.solver.tol_outer = sj.at("tol_outer").get<double>();
        m.params.solver.tol_inner = sj.at("tol_inner").get<double>();
        m.params.validate();
        m.components = json_matrix(j.at("components"), K - 1, p, "components");
        m.constraints = json_matrix(j.at("constraints"), K - 2, p, "constraints");
        m.summaries.class_means = json_matrix(j.at("class_means"), K, p, "class_means");
        m.summaries.counts = j.at("counts").get<std::vector<int>>();
        if (static_cast<int>(m.summaries.counts.size()) != K) throw ValidationError("model", "counts must have K entries");
        m.summaries.overall_mean = json_matrix(j.at("overall_mean"), 1, p, "overall_mean").transpose();
        m.gram = json_matrix(j.at("gram"), K - 1, K - 1, "gram");
        m.discriminant = json_matrix(j.at("discriminant"), p, p, "discriminant");
        m.gram_inverse = checked_gram_inverse(m.gram);
        return m;
    } catch (const json::exception& e) {
        throw ValidationError("model", std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const std::string& path, const DiscriminantModel& m) { write_file(path, model_json(m).dump() + "\n"); }

inline DiscriminantModel load_model(const std::string& path) {
    const std::string text = detail::read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError("model", path + ": " + e.what());
    }
    return model_from_json(j);
}

// Multichannel records: label, then channels * T values, channel-major.

struct Record {
    int label = 0;
    Matrix channels;  // c x T
};

inline std::vector<Record> read_records(const std::string& path, int channels) {
    if (channels < 1) throw ValidationError("channels", "channel count must be positive");
    const auto rows = read_numeric_csv(path);
    const auto width = static_cast<long>(rows.front().size()) - 1;
    if (width < channels || width % channels != 0)
        throw ValidationError("shape", path + ": " + std::to_string(width) + " values per record do not split into " +
                                           std::to_string(channels) + " channels");
    const long T = width / channels;
    std::vector<Record> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Record r;
        r.label = parse_label(rows[i][0], path + " row " + std::to_string(i + 1));
        r.channels.resize(channels, T);
        for (int c = 0; c < channels; ++c)
            for (long t = 0; t < T; ++t) r.channels(c, t) = rows[i][static_cast<std::size_t>(1 + c * T + t)];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sfda::io
