#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "persic/common.hpp"

namespace persic {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Json = nlohmann::ordered_json;

inline Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec vec_from_json(const Json& a) {
    if (!a.is_array()) fail("expected a JSON array of numbers");
    Vec v(static_cast<Eigen::Index>(a.size()));
    Eigen::Index i = 0;
    for (const auto& x : a) {
        if (!x.is_number()) fail("expected a number in array, got ", x.type_name());
        v[i++] = x.get<double>();
    }
    return v;
}

// Matrices serialize as {"rows": r, "cols": c, "data": [row-major numbers]}.
inline Json mat_to_json(const Mat& m) {
    Json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    Json data = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
}

inline Mat mat_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        fail("matrix data size ", data.size(), " does not match ", rows, "x", cols);
    Mat m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    return m;
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) fail("cannot open for writing: ", path.string());
    out << j.dump(1) << "\n";
    if (!out) fail("write failed: ", path.string());
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open: ", path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail("malformed JSON in ", path.string(), ": ", e.what());
    }
    return j;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace persic
