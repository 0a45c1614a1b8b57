#pragma once

// JSON experiment configs and CSV output.
//
// Config layout (matrices are row-major nested arrays):
//   {"system": {"a", "b", "c0", "ck"}, "noise": {"sigma_w", "sigma_z", "x0_mean", "sigma_0"},
//    "cost": {"q", "q_t", "r"}, "horizon": int, "runs": int, "seed": int}

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "sim.hpp"

namespace bilq {

struct ExperimentConfig {
    BilinearSystem sys;
    NoiseSpec noise;
    CostSpec cost;
    int horizon = 1;
    int runs = 1;
    std::uint64_t seed = 0;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("config: missing field '" + path + key + "'");
    return j.at(key);
}

inline Matrix json_matrix(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    if (!j[0].is_array()) throw ConfigError("config: '" + path + "' row 0 is not an array");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError("config: '" + path + "' row " + std::to_string(r) + " has inconsistent length");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number())
                throw ConfigError("config: '" + path + "[" + std::to_string(r) + "][" + std::to_string(c) +
                                  "]' is not a number");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

inline Vector json_vector(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("config: '" + path + "[" + std::to_string(i) + "]' is not a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline nlohmann::json to_json(const Matrix& m) {
    auto out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

inline nlohmann::json to_json(const Vector& v) {
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

} // namespace detail

[[nodiscard]] inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const auto& s = detail::field(j, "system", "");
    cfg.sys.a = detail::json_matrix(detail::field(s, "a", "system."), "system.a");
    cfg.sys.b = detail::json_matrix(detail::field(s, "b", "system."), "system.b");
    cfg.sys.c0 = detail::json_matrix(detail::field(s, "c0", "system."), "system.c0");
    const auto& ck = detail::field(s, "ck", "system.");
    if (!ck.is_array()) throw ConfigError("config: 'system.ck' must be an array of matrices");
    for (std::size_t k = 0; k < ck.size(); ++k)
        cfg.sys.ck.push_back(detail::json_matrix(ck[k], "system.ck[" + std::to_string(k) + "]"));

    const auto& nz = detail::field(j, "noise", "");
    cfg.noise.sigma_w = detail::json_matrix(detail::field(nz, "sigma_w", "noise."), "noise.sigma_w");
    cfg.noise.sigma_z = detail::json_matrix(detail::field(nz, "sigma_z", "noise."), "noise.sigma_z");
    cfg.noise.x0_mean = detail::json_vector(detail::field(nz, "x0_mean", "noise."), "noise.x0_mean");
    cfg.noise.sigma_0 = detail::json_matrix(detail::field(nz, "sigma_0", "noise."), "noise.sigma_0");

    const auto& c = detail::field(j, "cost", "");
    cfg.cost.q = detail::json_matrix(detail::field(c, "q", "cost."), "cost.q");
    cfg.cost.q_t = detail::json_matrix(detail::field(c, "q_t", "cost."), "cost.q_t");
    cfg.cost.r = detail::json_matrix(detail::field(c, "r", "cost."), "cost.r");

    auto int_field = [&](const char* key, long long fallback) -> long long {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number_integer()) throw ConfigError(std::string("config: '") + key + "' must be an integer");
        return j.at(key).get<long long>();
    };
    cfg.horizon = static_cast<int>(int_field("horizon", 1));
    cfg.runs = static_cast<int>(int_field("runs", 1));
    cfg.seed = static_cast<std::uint64_t>(int_field("seed", 0));
    return cfg;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

[[nodiscard]] inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["system"]["a"] = detail::to_json(cfg.sys.a);
    j["system"]["b"] = detail::to_json(cfg.sys.b);
    j["system"]["c0"] = detail::to_json(cfg.sys.c0);
    j["system"]["ck"] = nlohmann::json::array();
    for (const auto& c : cfg.sys.ck) j["system"]["ck"].push_back(detail::to_json(c));
    j["noise"]["sigma_w"] = detail::to_json(cfg.noise.sigma_w);
    j["noise"]["sigma_z"] = detail::to_json(cfg.noise.sigma_z);
    j["noise"]["x0_mean"] = detail::to_json(cfg.noise.x0_mean);
    j["noise"]["sigma_0"] = detail::to_json(cfg.noise.sigma_0);
    j["cost"]["q"] = detail::to_json(cfg.cost.q);
    j["cost"]["q_t"] = detail::to_json(cfg.cost.q_t);
    j["cost"]["r"] = detail::to_json(cfg.cost.r);
    j["horizon"] = cfg.horizon;
    j["runs"] = cfg.runs;
    j["seed"] = cfg.seed;
    return j;
}

// ============================================================================
// CSV
// ============================================================================

/// 17 significant digits, '.' separator regardless of the global locale.
[[nodiscard]] inline std::string format_double(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

inline constexpr const char* kTrajectoryHeader = "run,t,stage_cost,cum_cost,u_norm,est_err,cov_trace";
inline constexpr const char* kSummaryHeader = "t,metric,p25,p50,p75,policy,obs_model";
inline constexpr const char* kLandscapeHeader = "u,f_total,f_lqg,g";

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRecord>& runs) {
    os << kTrajectoryHeader << '\n';
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& rec = runs[r];
        for (std::size_t t = 0; t < rec.stage_cost.size(); ++t) {
            os << r << ',' << t << ',' << format_double(rec.stage_cost[t]) << ',' << format_double(rec.cum_cost[t])
               << ',' << format_double(rec.u_norm[t]) << ',' << format_double(rec.est_err[t]) << ','
               << format_double(rec.cov_trace[t]) << '\n';
        }
    }
}

inline void write_summary_header(std::ostream& os) { os << kSummaryHeader << '\n'; }

inline void write_summary_rows(std::ostream& os, const MonteCarloResult& mc, std::string_view policy,
                               std::string_view obs_model) {
    for (const auto& s : mc.series) {
        for (std::size_t t = 0; t < s.p50.size(); ++t) {
            os << t << ',' << s.metric << ',' << format_double(s.p25[t]) << ',' << format_double(s.p50[t]) << ','
               << format_double(s.p75[t]) << ',' << policy << ',' << obs_model << '\n';
        }
    }
}

inline void write_landscape_csv(std::ostream& os, const LandscapeTable& table) {
    os << kLandscapeHeader << '\n';
    for (const auto& row : table.rows)
        os << format_double(row.u) << ',' << format_double(row.f_total) << ',' << format_double(row.f_lqg) << ','
           << format_double(row.g) << '\n';
}

inline void write_critical_points_csv(std::ostream& os, const std::vector<CriticalPoint>& points) {
    os << "u,kind,f_value,second_derivative,imag\n";
    for (const auto& cp : points)
        os << format_double(cp.u) << ',' << to_string(cp.kind) << ',' << format_double(cp.f_value) << ','
           << format_double(cp.second_derivative) << ',' << format_double(cp.root_u.imag()) << '\n';
}

} // namespace bilq
