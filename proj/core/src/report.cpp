// SPDX-License-Identifier: Apache-2.0
#include "stbem/report.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "stbem/errors.hpp"

namespace stbem {

namespace {

using nlohmann::json;

// Shortest representation that parses back to the same double.
std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json pilots_json(const PilotBook& book) {
    json seq = json::array();
    for (Eigen::Index g = 0; g < book.sequences.rows(); ++g) {
        json row = json::array();
        for (Eigen::Index t = 0; t < book.sequences.cols(); ++t)
            row.push_back({hexfloat(book.sequences(g, t).real()), hexfloat(book.sequences(g, t).imag())});
        seq.push_back(std::move(row));
    }
    return {{"mode", book.mode == PilotMode::uplink ? "uplink" : "downlink"},
            {"N", book.N},
            {"mu", book.mu},
            {"T", book.T},
            {"slots", book.slots},
            {"power", hexfloat(book.power)},
            {"sequences", std::move(seq)}};
}

json config_json(const SystemConfig& c) {
    return {{"M", c.M},   {"d_over_lambda", c.d_over_lambda}, {"K", c.K},   {"G", c.G},
            {"N", c.N},   {"Ts", c.Ts},                       {"fd", c.fd}, {"P", c.P},
            {"noise_var", c.noise_var}, {"seed", c.seed}};
}

json spec_json(const ExperimentSpec& s) {
    return {{"scenario", to_string(s.scenario)},
            {"snr_grid", s.snr_grid},
            {"n_blocks", s.n_blocks},
            {"n_trials", s.n_trials},
            {"baselines", s.baselines},
            {"speed_kmh", s.speed_kmh},
            {"fixed_upsilon", s.fixed_upsilon},
            {"max_as_deg", s.max_as_deg},
            {"cell_radius_m", s.cell_radius_m},
            {"mu", s.mu},
            {"window", s.window},
            {"guard", s.guard},
            {"eta", s.eta},
            {"wavelength_ratio", s.wavelength_ratio},
            {"tracking_snr_db", s.tracking_snr_db},
            {"dl_pilot_divisors", s.dl_pilot_divisors},
            {"em_max_iters", s.em_max_iters},
            {"em_tol", s.em_tol},
            {"round_measurement", s.round_measurement},
            {"estimate_noise", s.estimate_noise},
            {"min_bits", s.min_bits},
            {"per_block_rows", s.per_block_rows}};
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.scenario << ',' << number(r.snr_db) << ',' << r.block << ',' << r.method << ',' << r.trial << ','
           << number(r.value) << '\n';
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    os << "user,block,true_doa,obs_bin,pred_mean,pred_var,filt_mean,filt_var,innovation,smooth_mean,smooth_var,"
          "dft_doa,sigma2_hat,dtheta_hat,ssi_tracked,ssi_dft,ssi_reference\n";
    for (const auto& r : rows) {
        os << r.user << ',' << r.block;
        for (double v : {r.true_doa, r.obs_bin, r.pred_mean, r.pred_var, r.filt_mean, r.filt_var, r.innovation,
                         r.smooth_mean, r.smooth_var, r.dft_doa, r.sigma2_hat, r.dtheta_hat})
            os << ',' << number(v);
        os << ',' << r.ssi_tracked << ',' << r.ssi_dft << ',' << r.ssi_reference << '\n';
    }
}

std::string manifest_json(const Manifest& m) {
    json trials = json::array();
    for (const auto& t : m.trials) {
        json learned = json::array();
        for (std::size_t s = 0; s < t.learned.size(); ++s) {
            json users = json::array();
            for (const auto& p : t.learned[s])
                users.push_back({{"q_omega", hexfloat(p.q_omega)}, {"q_u", hexfloat(p.q_u)}});
            learned.push_back(std::move(users));
        }
        json initial = json::array();
        for (double d : t.initial_doa) initial.push_back(hexfloat(d));
        json entry{{"trial", t.trial},
                   {"initial_doa", std::move(initial)},
                   {"learned", std::move(learned)},
                   {"groups", t.plan.groups},
                   {"diagnostics", t.diagnostics}};
        if (t.ul_pilots) entry["ul_pilots"] = pilots_json(*t.ul_pilots);
        trials.push_back(std::move(entry));
    }
    json dl = json::array();
    for (const auto& b : m.dl_pilots) dl.push_back(pilots_json(b));
    const json root{{"config", config_json(m.cfg)},
                    {"experiment", spec_json(m.spec)},
                    {"mu", m.mu},
                    {"mu_dl", m.mu_dl},
                    {"blocks_per_trial", m.blocks_per_trial},
                    {"bits_per_point", m.bits_per_point},
                    {"truth_q_omega", hexfloat(m.truth_q_omega)},
                    {"dl_pilots", std::move(dl)},
                    {"trials", std::move(trials)}};
    return root.dump(2) + "\n";
}

std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hexfloat(const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw Error(ErrorKind::config, "not a hexfloat: '" + s + "'");
    return v;
}

void apply_config_json(const std::string& text, SystemConfig& cfg, ExperimentSpec& spec) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config parse error: ") + e.what());
    }
    if (!root.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
    const json sys = root.contains("config") ? root["config"] : root;
    const json exp = root.contains("experiment") ? root["experiment"] : root;

    read(sys, "M", cfg.M);
    read(sys, "d_over_lambda", cfg.d_over_lambda);
    read(sys, "K", cfg.K);
    read(sys, "G", cfg.G);
    read(sys, "N", cfg.N);
    read(sys, "Ts", cfg.Ts);
    read(sys, "fd", cfg.fd);
    read(sys, "P", cfg.P);
    read(sys, "noise_var", cfg.noise_var);
    read(sys, "seed", cfg.seed);

    if (exp.contains("scenario")) {
        if (!exp["scenario"].is_string()) throw Error(ErrorKind::config, "scenario must be a string");
        spec.scenario = parse_scenario(exp["scenario"].get<std::string>());
    }
    read(exp, "snr_grid", spec.snr_grid);
    read(exp, "n_blocks", spec.n_blocks);
    read(exp, "n_trials", spec.n_trials);
    read(exp, "baselines", spec.baselines);
    read(exp, "speed_kmh", spec.speed_kmh);
    read(exp, "fixed_upsilon", spec.fixed_upsilon);
    read(exp, "max_as_deg", spec.max_as_deg);
    read(exp, "cell_radius_m", spec.cell_radius_m);
    read(exp, "mu", spec.mu);
    read(exp, "window", spec.window);
    read(exp, "guard", spec.guard);
    read(exp, "eta", spec.eta);
    read(exp, "wavelength_ratio", spec.wavelength_ratio);
    read(exp, "tracking_snr_db", spec.tracking_snr_db);
    read(exp, "dl_pilot_divisors", spec.dl_pilot_divisors);
    read(exp, "em_max_iters", spec.em_max_iters);
    read(exp, "em_tol", spec.em_tol);
    read(exp, "round_measurement", spec.round_measurement);
    read(exp, "estimate_noise", spec.estimate_noise);
    read(exp, "min_bits", spec.min_bits);
    read(exp, "per_block_rows", spec.per_block_rows);
}

void load_config(const std::string& path, SystemConfig& cfg, ExperimentSpec& spec) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_json(ss.str(), cfg, spec);
}

std::vector<double> parse_snr_grid(const std::string& text) {
    auto to_double = [&](const std::string& s) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
            throw Error(ErrorKind::config, "bad SNR value '" + s + "' in '" + text + "'");
        return v;
    };
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::string cur;
        std::istringstream is(s);
        while (std::getline(is, cur, sep)) parts.push_back(cur);
        if (!s.empty() && s.back() == sep) parts.emplace_back();
        return parts;
    };
    if (text.empty()) throw Error(ErrorKind::config, "empty SNR grid");
    if (text.find(':') != std::string::npos) {
        const auto p = split(text, ':');
        if (p.size() != 3) throw Error(ErrorKind::config, "SNR range must be start:step:stop, got '" + text + "'");
        const double a = to_double(p[0]), step = to_double(p[1]), b = to_double(p[2]);
        if (!(step > 0.0) || b < a) throw Error(ErrorKind::config, "SNR range needs step > 0 and stop >= start");
        const long long n = static_cast<long long>(std::floor((b - a) / step + 1e-9)) + 1;
        if (n > 10000) throw Error(ErrorKind::config, "SNR range too long");
        std::vector<double> grid;
        for (long long i = 0; i < n; ++i) grid.push_back(a + static_cast<double>(i) * step);
        return grid;
    }
    std::vector<double> grid;
    for (const auto& p : split(text, ',')) grid.push_back(to_double(p));
    return grid;
}

}  // namespace stbem
