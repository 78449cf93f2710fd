#pragma once

// JSON scenario files. Matrices are written as {"re": [[...]], "im": [[...]]};
// on input a plain real array [[...]] and {"diag": [...]} are accepted too.
//
//   {"d": 1, "N": 1, "A": {"diag": [0]}, "B": [[1]],
//    "Gamma0": {"diag": [0]}, "Gamma": {"diag": [1]},
//    "ac": {"start": -1, "end": 1, "densities": [M0, M1, ...]},   (optional)
//    "seed": 7, "tolerances": {"ak.agreement": 1e-9}}             (optional)

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "finrank/scenario.hpp"

namespace finrank {

using Json = nlohmann::json;

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

[[noreturn]] inline void field_error(const std::string& field, const std::string& what) {
    throw ValidationError("field '" + field + "': " + what);
}

inline double number_at(const Json& v, const std::string& field) {
    if (!v.is_number()) field_error(field, "expected a number");
    return v.get<double>();
}

inline Eigen::MatrixXd real_array(const Json& v, const std::string& field) {
    if (!v.is_array() || v.empty()) field_error(field, "expected a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    Eigen::Index cols = -1;
    Eigen::MatrixXd out;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = v[static_cast<std::size_t>(i)];
        const std::string rf = field + "[" + std::to_string(i) + "]";
        if (!row.is_array()) field_error(rf, "expected an array");
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            out.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            field_error(rf, "ragged row: expected " + std::to_string(cols) + " entries");
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = number_at(row[static_cast<std::size_t>(j)], rf + "[" + std::to_string(j) + "]");
        }
    }
    return out;
}

inline CMatrix matrix_from_json(const Json& v, const std::string& field) {
    if (v.is_array()) return real_array(v, field).cast<Complex>();
    if (!v.is_object()) field_error(field, "expected an array or an object with diag or re/im");
    if (v.contains("diag")) {
        const Json& diag = v["diag"];
        if (!diag.is_array() || diag.empty()) field_error(field + ".diag", "expected a nonempty array");
        const auto n = static_cast<Eigen::Index>(diag.size());
        CMatrix out = CMatrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            out(k, k) = number_at(diag[static_cast<std::size_t>(k)], field + ".diag[" + std::to_string(k) + "]");
        }
        return out;
    }
    if (!v.contains("re")) field_error(field, "missing 're'");
    const Eigen::MatrixXd re = real_array(v["re"], field + ".re");
    Eigen::MatrixXd im = Eigen::MatrixXd::Zero(re.rows(), re.cols());
    if (v.contains("im")) {
        im = real_array(v["im"], field + ".im");
        if (im.rows() != re.rows() || im.cols() != re.cols()) field_error(field, "'re' and 'im' shapes differ");
    }
    CMatrix out(re.rows(), re.cols());
    out.real() = re;
    out.imag() = im;
    return out;
}

inline HermitianMatrix hermitian_from_json(const Json& v, const std::string& field, Eigen::Index n) {
    const CMatrix m = matrix_from_json(v, field);
    if (m.rows() != n || m.cols() != n) {
        std::ostringstream os;
        os << "expected " << n << "x" << n << ", got " << m.rows() << "x" << m.cols();
        field_error(field, os.str());
    }
    const Asymmetry a = max_asymmetry(m);
    if (a.value > HermitianMatrix::kTolerance) {
        std::ostringstream os;
        os << "not Hermitian at (" << a.row << "," << a.col << "): |m_ij - conj(m_ji)| = " << a.value;
        field_error(field, os.str());
    }
    return HermitianMatrix(m);
}

inline Json matrix_to_json(const CMatrix& m) {
    Json re = Json::array();
    Json im = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json rr = Json::array();
        Json ri = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(rr);
        im.push_back(ri);
    }
    return Json{{"re", re}, {"im", im}};
}

inline Eigen::Index dimension_at(const Json& j, const char* key) {
    if (!j.contains(key)) field_error(key, "missing");
    const Json& v = j[key];
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 64) {
        field_error(key, "expected an integer in [1, 64]");
    }
    return static_cast<Eigen::Index>(v.get<long long>());
}

}  // namespace detail

/// Builds and validates a Scenario from parsed JSON.
inline Scenario scenario_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
    Scenario s;
    s.d = detail::dimension_at(j, "d");
    s.n = detail::dimension_at(j, "N");
    if (s.d > s.n) detail::field_error("d", "must not exceed N");
    for (const char* key : {"A", "B", "Gamma0", "Gamma"}) {
        if (!j.contains(key)) detail::field_error(key, "missing");
    }
    s.a = detail::hermitian_from_json(j["A"], "A", s.n);
    s.b = detail::matrix_from_json(j["B"], "B");
    if (s.b.rows() != s.n || s.b.cols() != s.d) {
        std::ostringstream os;
        os << "expected " << s.n << "x" << s.d << ", got " << s.b.rows() << "x" << s.b.cols();
        detail::field_error("B", os.str());
    }
    s.gamma0 = detail::hermitian_from_json(j["Gamma0"], "Gamma0", s.d);
    s.gamma = detail::hermitian_from_json(j["Gamma"], "Gamma", s.d);
    const double lmin = lambda_min(s.gamma);
    if (!(lmin > 1e-12)) {
        std::ostringstream os;
        os << "field 'Gamma': must be positive definite, lambda_min = " << lmin;
        throw NotPsdError(os.str(), lmin);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) detail::field_error("seed", "expected an unsigned 64-bit integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("tolerances")) {
        const Json& t = j["tolerances"];
        if (!t.is_object()) detail::field_error("tolerances", "expected an object");
        for (auto it = t.begin(); it != t.end(); ++it) {
            const double v = detail::number_at(it.value(), "tolerances." + it.key());
            if (!(v > 0.0)) detail::field_error("tolerances." + it.key(), "must be positive");
            s.tolerances[it.key()] = v;
        }
    }
    if (j.contains("ac")) {
        const Json& ac = j["ac"];
        if (!ac.is_object() || !ac.contains("start") || !ac.contains("end") || !ac.contains("densities")) {
            detail::field_error("ac", "expected {start, end, densities}");
        }
        AcDensity grid;
        grid.start = detail::number_at(ac["start"], "ac.start");
        grid.end = detail::number_at(ac["end"], "ac.end");
        if (!ac["densities"].is_array()) detail::field_error("ac.densities", "expected an array of matrices");
        for (std::size_t k = 0; k < ac["densities"].size(); ++k) {
            const std::string field = "ac.densities[" + std::to_string(k) + "]";
            HermitianMatrix w = detail::hermitian_from_json(ac["densities"][k], field, s.d);
            const double lw = lambda_min(w);
            if (lw < -1e-12) {
                std::ostringstream os;
                os << "field '" << field << "': density must be PSD, lambda_min = " << lw;
                throw NotPsdError(os.str(), lw);
            }
            grid.densities.push_back(std::move(w));
        }
        s.ac = std::move(grid);
        (void)MatrixMeasure(s.d, {}, s.ac);  // grid shape checks
    }
    const OperatorModel model(s.a, s.b);
    if (!model.cyclicity().cyclic) throw ValidationError("Ran B is not cyclic for A");
    return s;
}

/// Parses scenario text; syntax errors report line:column.
inline Scenario parse_scenario(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError("scenario JSON syntax error at " + detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    return scenario_from_json(j);
}

/// Reads a file, or treats the argument as inline JSON when it starts with '{'.
inline Scenario load_scenario(const std::string& path_or_text) {
    const auto first = path_or_text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && path_or_text[first] == '{') return parse_scenario(path_or_text);
    std::ifstream in(path_or_text);
    if (!in) throw ArgumentError("cannot open scenario file '" + path_or_text + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_scenario(text);
}

inline Json scenario_to_json(const Scenario& s) {
    Json j;
    j["d"] = s.d;
    j["N"] = s.n;
    j["A"] = detail::matrix_to_json(s.a.matrix());
    j["B"] = detail::matrix_to_json(s.b);
    j["Gamma0"] = detail::matrix_to_json(s.gamma0.matrix());
    j["Gamma"] = detail::matrix_to_json(s.gamma.matrix());
    j["seed"] = s.seed;
    if (!s.tolerances.empty()) j["tolerances"] = s.tolerances;
    if (s.ac) {
        Json dens = Json::array();
        for (const HermitianMatrix& w : s.ac->densities) dens.push_back(detail::matrix_to_json(w.matrix()));
        j["ac"] = Json{{"start", s.ac->start}, {"end", s.ac->end}, {"densities", dens}};
    }
    return j;
}

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string scenario_digest(const Scenario& s) {
    const std::string text = scenario_to_json(s).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace finrank
