#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "sim.hpp"

namespace aoi_copilot {

/// Raised for unreadable or schema-invalid configuration. Carries every
/// diagnostic found, not just the first.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> diagnostics)
        : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

    [[nodiscard]] const std::vector<std::string> &diagnostics() const { return diagnostics_; }

private:
    static std::string join(const std::vector<std::string> &lines) {
        std::string out;
        for (const auto &l : lines) { out += (out.empty() ? "" : "; ") + l; }
        return out;
    }
    std::vector<std::string> diagnostics_;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
    std::vector<std::string> errors;

    void reject_unknown(const json &obj, const std::string &where, std::set<std::string> known) {
        for (const auto &[key, _] : obj.items()) {
            if (!known.count(key)) { errors.push_back(where + ": unknown key '" + key + "'"); }
        }
    }

    template <typename T>
    void read(const json &obj, const std::string &where, const char *key, T &out) {
        if (!obj.contains(key)) { return; }
        const json &v = obj.at(key);
        const std::string path = where + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) { return fail(path, "expected boolean"); }
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) { return fail(path, "expected integer"); }
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
                    out = v.get<T>();
                } else {
                    fail(path, "expected non-negative integer");
                }
            } else {
                out = v.get<T>();
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) { return fail(path, "expected number"); }
            out = v.get<T>();
        } else {
            static_assert(std::is_same_v<T, std::string>);
            if (!v.is_string()) { return fail(path, "expected string"); }
            out = v.get<std::string>();
        }
    }

    void read_matrix(const json &obj, const std::string &where, const char *key, Matrix &out) {
        if (!obj.contains(key)) { return; }
        const json &v = obj.at(key);
        const std::string path = where + "." + key;
        if (!v.is_array() || v.empty() || !v.front().is_array()) {
            return fail(path, "expected array of rows");
        }
        const auto rows = static_cast<Index>(v.size());
        const auto cols = static_cast<Index>(v.front().size());
        Matrix m(rows, cols);
        for (Index r = 0; r < rows; ++r) {
            const json &row = v[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
                return fail(path, "rows must have equal length");
            }
            for (Index c = 0; c < cols; ++c) {
                if (!row[static_cast<std::size_t>(c)].is_number()) { return fail(path, "expected numbers"); }
                m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
            }
        }
        out = m;
    }

    const json *section(const json &root, const char *key) {
        if (!root.contains(key)) { return nullptr; }
        if (!root.at(key).is_object()) {
            fail(key, "expected object");
            return nullptr;
        }
        return &root.at(key);
    }

    void fail(const std::string &path, const std::string &msg) { errors.push_back(path + ": " + msg); }
};

}  // namespace detail

inline std::optional<SchedulerKind> parse_scheduler(const std::string &name) {
    if (name == "proposed") { return SchedulerKind::proposed; }
    if (name == "round_robin") { return SchedulerKind::round_robin; }
    return std::nullopt;
}

/// Applies a JSON document onto `base`. Unknown keys and type mismatches are
/// collected and raised together. Semantic validation runs last unless the
/// caller defers it (e.g. to apply flag overrides first).
inline SimConfig config_from_json(const nlohmann::json &doc, SimConfig base = {},
                                  bool check_semantics = true) {
    detail::ConfigReader rd;
    if (!doc.is_object()) { throw ConfigError({"config: top level must be an object"}); }
    rd.reject_unknown(doc, "config",
                      {"systems", "steps", "runs", "scheduler", "predictor_enabled", "radio", "lyapunov",
                       "gpr", "plant_noise_var", "master_seed", "warmup_slots"});
    rd.read(doc, "config", "systems", base.systems);
    rd.read(doc, "config", "steps", base.steps);
    rd.read(doc, "config", "runs", base.runs);
    rd.read(doc, "config", "predictor_enabled", base.predictor_enabled);
    rd.read(doc, "config", "plant_noise_var", base.plant_noise_var);
    rd.read(doc, "config", "master_seed", base.master_seed);
    rd.read(doc, "config", "warmup_slots", base.warmup_slots);
    if (doc.contains("scheduler")) {
        std::string name;
        rd.read(doc, "config", "scheduler", name);
        if (auto kind = parse_scheduler(name)) {
            base.scheduler = *kind;
        } else if (doc.at("scheduler").is_string()) {
            rd.fail("config.scheduler", "expected 'proposed' or 'round_robin'");
        }
    }
    if (const auto *radio = rd.section(doc, "radio")) {
        rd.reject_unknown(*radio, "radio", {"p_max", "snr_th", "n0", "sigma_x"});
        rd.read(*radio, "radio", "p_max", base.radio.p_max);
        rd.read(*radio, "radio", "snr_th", base.radio.snr_th);
        rd.read(*radio, "radio", "n0", base.radio.n0);
        rd.read_matrix(*radio, "radio", "sigma_x", base.radio.sigma_x);
    }
    if (const auto *lyap = rd.section(doc, "lyapunov")) {
        rd.reject_unknown(*lyap, "lyapunov", {"v_weight", "omega_beta", "omega_power"});
        rd.read(*lyap, "lyapunov", "v_weight", base.lyapunov.v_weight);
        rd.read(*lyap, "lyapunov", "omega_beta", base.lyapunov.omega_beta);
        rd.read(*lyap, "lyapunov", "omega_power", base.lyapunov.omega_power);
    }
    if (const auto *gpr = rd.section(doc, "gpr")) {
        rd.reject_unknown(*gpr, "gpr", {"h", "lambda", "jitter", "w_max"});
        rd.read(*gpr, "gpr", "h", base.gpr.h);
        rd.read(*gpr, "gpr", "lambda", base.gpr.lambda);
        if (gpr->contains("jitter")) {
            rd.read(*gpr, "gpr", "jitter", base.gpr.jitter);
        } else if (gpr->contains("h")) {
            base.gpr.jitter = 1e-6 * base.gpr.h * base.gpr.h;
        }
        rd.read(*gpr, "gpr", "w_max", base.gpr_window);
    }
    if (rd.errors.empty() && check_semantics) {
        for (auto &e : validate(base)) { rd.errors.push_back("config: " + e); }
    }
    if (!rd.errors.empty()) { throw ConfigError(std::move(rd.errors)); }
    return base;
}

inline SimConfig load_config(const std::string &path, SimConfig base = {},
                             bool check_semantics = true) {
    std::ifstream in(path);
    if (!in) { throw ConfigError({"cannot open config file '" + path + "'"}); }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError({"config '" + path + "' is not valid JSON: " + e.what()});
    }
    return config_from_json(doc, std::move(base), check_semantics);
}

inline nlohmann::json config_to_json(const SimConfig &c) {
    nlohmann::json sigma = nlohmann::json::array();
    for (Index r = 0; r < c.radio.sigma_x.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Index col = 0; col < c.radio.sigma_x.cols(); ++col) { row.push_back(c.radio.sigma_x(r, col)); }
        sigma.push_back(row);
    }
    return {{"systems", c.systems},
            {"steps", c.steps},
            {"runs", c.runs},
            {"scheduler", to_string(c.scheduler)},
            {"predictor_enabled", c.predictor_enabled},
            {"radio", {{"p_max", c.radio.p_max}, {"snr_th", c.radio.snr_th}, {"n0", c.radio.n0}, {"sigma_x", sigma}}},
            {"lyapunov",
             {{"v_weight", c.lyapunov.v_weight},
              {"omega_beta", c.lyapunov.omega_beta},
              {"omega_power", c.lyapunov.omega_power}}},
            {"gpr", {{"h", c.gpr.h}, {"lambda", c.gpr.lambda}, {"jitter", c.gpr.jitter}, {"w_max", c.gpr_window}}},
            {"plant_noise_var", c.plant_noise_var},
            {"master_seed", c.master_seed},
            {"warmup_slots", c.warmup_slots}};
}

}  // namespace aoi_copilot
