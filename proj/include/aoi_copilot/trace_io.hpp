#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sim.hpp"

namespace aoi_copilot {

/// Writes to `<path>.tmp` and renames onto `path` on commit(); an
/// uncommitted file is removed on destruction.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path)
        : path_(std::move(path)), tmp_(path_.string() + ".tmp") {
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) { throw std::runtime_error("cannot open '" + tmp_.string() + "' for writing"); }
    }
    AtomicFile(const AtomicFile &) = delete;
    AtomicFile &operator=(const AtomicFile &) = delete;
    ~AtomicFile() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    std::ofstream &stream() { return out_; }

    void commit() {
        out_.flush();
        if (!out_) { throw std::runtime_error("write to '" + tmp_.string() + "' failed"); }
        out_.close();
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

inline void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
    AtomicFile f(path);
    f.stream() << content;
    f.commit();
}

/// 9 significant digits, as printf("%.9g").
inline std::string format_float(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string trace_csv_header(Index state_dim) {
    std::string h = "run,slot,system";
    for (Index d = 0; d < state_dim; ++d) { h += ",x" + std::to_string(d); }
    h += ",abs_angle,beta,alpha,xi,power,trK,trV,m_bar,q_beta,q_power,q_stab,gamma_beta,gamma_power";
    return h;
}

inline void append_csv_row(std::string &out, const TraceRecord &r) {
    out += std::to_string(r.run);
    out += ',';
    out += std::to_string(r.slot);
    out += ',';
    out += std::to_string(r.system);
    for (Index d = 0; d < r.x.size(); ++d) {
        out += ',';
        out += format_float(r.x[d]);
    }
    for (double v : {r.abs_angle}) { (out += ',') += format_float(v); }
    (out += ',') += std::to_string(r.beta);
    (out += ',') += std::to_string(r.alpha);
    (out += ',') += std::to_string(r.xi);
    for (double v : {r.power, r.trK, r.trV, r.m_bar, r.q_beta, r.q_power, r.q_stab, r.gamma_beta,
                     r.gamma_power}) {
        (out += ',') += format_float(v);
    }
    out += '\n';
}

inline nlohmann::json metrics_to_json(const ExperimentMetrics &m) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto &[name, s] : m.metrics) {
        doc[name] = {{"mean", s.mean}, {"std", s.std}, {"per_system", s.per_system}};
    }
    nlohmann::json first_div = nlohmann::json::array();
    for (const auto &r : m.per_run) { first_div.push_back(r.first_divergence_slot); }
    doc["experiment"] = {{"scheduler", to_string(m.scheduler)},
                         {"predictor_enabled", m.predictor_enabled},
                         {"runs", m.runs},
                         {"diverged_runs", m.diverged_runs},
                         {"diverged_fraction", m.diverged_fraction()},
                         {"first_divergence_slot", first_div}};
    return doc;
}

}  // namespace aoi_copilot
