// Command-line surface: flag parsing, experiment orchestration, and
// serialization of cycle records, work distributions, tau sweeps, coherence
// curves, and the stage-CD expansion report to plot-ready CSV or JSON.
//
// Output is deterministic for a given configuration except for the single
// "generated" timestamp entry. CSV carries a '#'-prefixed metadata block with
// a full parameter echo; JSON carries the same data with full-precision
// (round-trip exact) numbers.
#pragma once

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qotto/fcs_stats.hpp"
#include "qotto/otto_cycle.hpp"
#include "qotto/spin_model.hpp"
#include "qotto/thermo_channels.hpp"

namespace qotto {

enum class OutputFormat { csv, json };
enum class GridSpacing { linear, log };

struct TauGrid {
    double start = 0.0;
    double stop = 0.0;
    int count = 0;
    GridSpacing spacing = GridSpacing::linear;

    void validate() const {
        if (count < 1) throw ValidationError("tau grid count must be >= 1");
        if (!(start <= stop)) throw ValidationError("tau grid start must be <= stop");
        if (!(start > 0.0)) throw ValidationError("tau grid values must be > 0");
    }

    std::vector<double> values() const {
        validate();
        std::vector<double> v(static_cast<std::size_t>(count));
        if (count == 1) {
            v[0] = start;
            return v;
        }
        for (int i = 0; i < count; ++i) {
            const double f = static_cast<double>(i) / (count - 1);
            v[static_cast<std::size_t>(i)] =
                spacing == GridSpacing::linear
                    ? start + f * (stop - start)
                    : start * std::exp(f * std::log(stop / start));
        }
        return v;
    }

    std::string to_string() const {
        std::ostringstream os;
        os << start << ":" << stop << ":" << count
           << (spacing == GridSpacing::log ? ":log" : ":linear");
        return os.str();
    }

    // "start:stop:count[:log|:linear]"
    static TauGrid parse(const std::string& text) {
        std::vector<std::string> fields;
        std::string item;
        std::istringstream is(text);
        while (std::getline(is, item, ':')) fields.push_back(item);
        if (fields.size() < 3 || fields.size() > 4)
            throw ValidationError("tau grid must be start:stop:count[:log]");
        TauGrid g;
        try {
            std::size_t used = 0;
            g.start = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
            g.stop = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
            g.count = std::stoi(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
        } catch (const std::exception&) {
            throw ValidationError("tau grid has a malformed numeric field: " + text);
        }
        if (fields.size() == 4) {
            if (fields[3] == "log")
                g.spacing = GridSpacing::log;
            else if (fields[3] == "linear")
                g.spacing = GridSpacing::linear;
            else
                throw ValidationError("tau grid spacing must be 'linear' or 'log'");
        }
        g.validate();
        return g;
    }
};

struct RunConfig {
    EngineParams params;
    std::string command;  // cycle | work-dist | sweep-tau | coherence | expansion-report
    std::optional<TauGrid> tau_grid;
    std::string out_path;  // empty = stdout
    OutputFormat format = OutputFormat::csv;
    double tolerance = 1e-10;
    unsigned long seed = 0;  // reserved; every computation is deterministic

    void validate() const {
        params.validate();
        if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
        if (tau_grid) tau_grid->validate();
    }
};

namespace detail {

using Cell = std::variant<double, long long, bool, std::string>;

struct Report {
    std::string kind;
    std::vector<std::pair<std::string, Cell>> meta;  // parameter echo + residuals
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string cell_to_text(const Cell& c) {
    if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
    if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
    if (std::holds_alternative<bool>(c)) return std::get<bool>(c) ? "true" : "false";
    std::string s = std::get<std::string>(c);
    for (char& ch : s)
        if (ch == ',' || ch == '\n') ch = ';';
    return s;
}

inline nlohmann::ordered_json cell_to_json(const Cell& c) {
    if (std::holds_alternative<double>(c)) return std::get<double>(c);
    if (std::holds_alternative<long long>(c)) return std::get<long long>(c);
    if (std::holds_alternative<bool>(c)) return std::get<bool>(c);
    return std::get<std::string>(c);
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline std::string render_csv(const Report& r) {
    std::ostringstream os;
    os << "# kind: " << r.kind << "\n";
    os << "# generated: " << utc_timestamp() << "\n";
    for (const auto& [key, value] : r.meta) os << "# " << key << ": " << cell_to_text(value) << "\n";
    for (std::size_t i = 0; i < r.columns.size(); ++i)
        os << (i ? "," : "") << r.columns[i];
    os << "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << cell_to_text(row[i]);
        os << "\n";
    }
    return os.str();
}

inline std::string render_json(const Report& r) {
    nlohmann::ordered_json j;
    j["kind"] = r.kind;
    j["generated"] = utc_timestamp();
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [key, value] : r.meta) meta[key] = cell_to_json(value);
    j["meta"] = meta;
    j["columns"] = r.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        nlohmann::ordered_json jr = nlohmann::ordered_json::array();
        for (const Cell& c : row) jr.push_back(cell_to_json(c));
        rows.push_back(jr);
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

inline void emit(const Report& r, const RunConfig& cfg) {
    const std::string text =
        cfg.format == OutputFormat::csv ? render_csv(r) : render_json(r);
    if (cfg.out_path.empty()) {
        std::cout << text;
        if (!std::cout) throw IoError("failed writing to stdout");
        return;
    }
    std::ofstream f(cfg.out_path, std::ios::binary);
    if (!f) throw IoError("cannot open output file: " + cfg.out_path);
    f << text;
    f.flush();
    if (!f) throw IoError("failed writing output file: " + cfg.out_path);
}

inline void echo_params(Report& r, const RunConfig& cfg, bool with_tau) {
    r.meta.emplace_back("command", cfg.command);
    r.meta.emplace_back("mode", to_string(cfg.params.mode));
    r.meta.emplace_back("gamma", cfg.params.gamma);
    r.meta.emplace_back("coupling_J", cfg.params.coupling_j);
    r.meta.emplace_back("b1", cfg.params.field_b1);
    r.meta.emplace_back("b2", cfg.params.field_b2);
    r.meta.emplace_back("temp", cfg.params.temperature);
    r.meta.emplace_back("temp_hot", cfg.params.temperature_hot);
    if (with_tau)
        r.meta.emplace_back("tau", cfg.params.tau);
    else
        r.meta.emplace_back("tau_grid", cfg.tau_grid ? cfg.tau_grid->to_string() : "");
    r.meta.emplace_back("tol", cfg.tolerance);
}

inline std::string sanitize_message(const std::exception& e) {
    std::string s = e.what();
    for (char& ch : s)
        if (ch == ',' || ch == '\n') ch = ';';
    return s;
}

}  // namespace detail

// Coherence is always measured in the instantaneous-field eigenbasis: B1 at
// the cycle ends (A, D), B2 in the middle (B, C).
inline detail::Report cmd_cycle(const RunConfig& cfg) {
    const CycleContext ctx = run_cycle_context(cfg.params, cfg.tolerance);
    const CycleRecord& rec = ctx.record;
    detail::Report r;
    r.kind = "cycle";
    detail::echo_params(r, cfg, true);
    r.columns = {"e_a", "e_b", "e_c", "e_d", "w1", "w2", "q_in", "q_out", "w_engine",
                 "is_engine", "coherence_a", "coherence_b", "coherence_c", "coherence_d"};
    r.rows.push_back({rec.e_a, rec.e_b, rec.e_c, rec.e_d, rec.w1, rec.w2, rec.q_in,
                      rec.q_out, rec.w_engine, rec.is_engine,
                      coherence_l1(rec.rho_a, ctx.eig_b1), coherence_l1(rec.rho_b, ctx.eig_b2),
                      coherence_l1(rec.rho_c, ctx.eig_b2), coherence_l1(rec.rho_d, ctx.eig_b1)});
    return r;
}

inline detail::Report cmd_work_dist(const RunConfig& cfg) {
    const CycleContext ctx = run_cycle_context(cfg.params, cfg.tolerance);
    const FcsBundle bundle = fcs_bundle(ctx);
    detail::Report r;
    r.kind = "work_distribution";
    detail::echo_params(r, cfg, true);
    for (const WorkDistribution* d : {&bundle.ab, &bundle.cd, &bundle.full}) {
        const std::string tag = to_string(d->stage);
        r.meta.emplace_back("normalization_residual_" + tag, d->normalization_residual());
        r.meta.emplace_back("off_diagonal_sum_" + tag, d->off_diagonal_sum());
    }
    r.columns = {"w", "p", "origin", "stage"};
    for (const WorkDistribution* d : {&bundle.ab, &bundle.cd, &bundle.full})
        for (const WorkPoint& q : d->points)
            r.rows.push_back({q.w, q.p, to_string(q.origin), to_string(d->stage)});
    return r;
}

inline detail::Report cmd_sweep_tau(const RunConfig& cfg) {
    if (!cfg.tau_grid) throw ValidationError("sweep-tau requires --tau-grid");
    detail::Report r;
    r.kind = "tau_sweep";
    detail::echo_params(r, cfg, false);
    r.columns = {"tau",    "w1",     "w2",
                 "q_in",   "q_out",  "w_engine",
                 "is_engine", "mean_w", "mean_w_diagonal",
                 "mean_w_off_diagonal", "var_w", "coherence_c",
                 "status"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const double tau : cfg.tau_grid->values()) {
        EngineParams p = cfg.params;
        p.tau = tau;
        try {
            const CycleContext ctx = run_cycle_context(p, cfg.tolerance);
            const FcsBundle bundle = fcs_bundle(ctx);
            const double m1 = moments(bundle.full, 1);
            const double m2 = moments(bundle.full, 2);
            const AverageSplit split = average_split(bundle.full);
            r.rows.push_back({tau, ctx.record.w1, ctx.record.w2, ctx.record.q_in,
                              ctx.record.q_out, ctx.record.w_engine, ctx.record.is_engine, m1,
                              split.diagonal, split.off_diagonal, m2 - m1 * m1,
                              coherence_l1(ctx.record.rho_c, ctx.eig_b2), std::string("ok")});
        } catch (const std::exception& e) {
            r.rows.push_back({tau, nan, nan, nan, nan, nan, false, nan, nan, nan, nan, nan,
                              detail::sanitize_message(e)});
        }
    }
    return r;
}

inline detail::Report cmd_coherence(const RunConfig& cfg) {
    if (!cfg.tau_grid) throw ValidationError("coherence requires --tau-grid");
    detail::Report r;
    r.kind = "coherence";
    detail::echo_params(r, cfg, false);
    r.columns = {"tau", "coherence_a", "coherence_b", "coherence_c", "coherence_d", "status"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const double tau : cfg.tau_grid->values()) {
        EngineParams p = cfg.params;
        p.tau = tau;
        try {
            const CycleContext ctx = run_cycle_context(p, cfg.tolerance);
            r.rows.push_back({tau, coherence_l1(ctx.record.rho_a, ctx.eig_b1),
                              coherence_l1(ctx.record.rho_b, ctx.eig_b2),
                              coherence_l1(ctx.record.rho_c, ctx.eig_b2),
                              coherence_l1(ctx.record.rho_d, ctx.eig_b1), std::string("ok")});
        } catch (const std::exception& e) {
            r.rows.push_back({tau, nan, nan, nan, nan, detail::sanitize_message(e)});
        }
    }
    return r;
}

inline detail::Report cmd_expansion_report(const RunConfig& cfg) {
    const CycleContext ctx = run_cycle_context(cfg.params, cfg.tolerance);
    const std::vector<ExpansionTerm> terms = stage_cd_expansion(ctx);
    const FcsBundle bundle = fcs_bundle(ctx);

    // Reassemble the eight terms into a distribution and compare with the
    // stage-CD result point by point.
    std::vector<qotto::detail::RawPoint> raw;
    for (const ExpansionTerm& t : terms) {
        qotto::detail::RawPoint q;
        q.w = t.work;
        (t.name.rfind("diag_", 0) == 0 ? q.p_diagonal : q.p_off_diagonal) = t.weight;
        raw.push_back(q);
    }
    const std::vector<WorkPoint> reassembled = qotto::detail::cluster_points(std::move(raw));
    double residual = 0.0;
    if (reassembled.size() != bundle.cd.points.size()) {
        residual = std::numeric_limits<double>::infinity();
    } else {
        for (std::size_t i = 0; i < reassembled.size(); ++i) {
            residual = std::max(residual, std::abs(reassembled[i].w - bundle.cd.points[i].w));
            residual = std::max(residual, std::abs(reassembled[i].p - bundle.cd.points[i].p));
        }
    }

    detail::Report r;
    r.kind = "expansion_report";
    detail::echo_params(r, cfg, true);
    r.meta.emplace_back("reassembly_residual", residual);
    r.columns = {"term", "w", "weight"};
    for (const ExpansionTerm& t : terms) r.rows.push_back({t.name, t.work, t.weight});
    return r;
}

inline detail::Report run_command(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.command == "cycle") return cmd_cycle(cfg);
    if (cfg.command == "work-dist") return cmd_work_dist(cfg);
    if (cfg.command == "sweep-tau") return cmd_sweep_tau(cfg);
    if (cfg.command == "coherence") return cmd_coherence(cfg);
    if (cfg.command == "expansion-report") return cmd_expansion_report(cfg);
    throw ValidationError("unknown command: " + cfg.command);
}

// Exit codes: 0 success, 2 validation/usage, 3 numerical failure, 4 I/O.
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Measurement-based quantum Otto engine: FCS work distributions, "
                 "coherence, and cycle observables for two coupled spins"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string mode_text = "measurement_based";
    std::string format_text = "csv";
    std::string grid_text;

    app.add_option("--mode", mode_text, "Engine mode: measurement_based | two_bath")
        ->check(CLI::IsMember({"measurement_based", "measurement", "two_bath", "two-bath"}));
    app.add_option("--gamma", cfg.params.gamma, "Anisotropy in [-1, 1]");
    app.add_option("--coupling-J", cfg.params.coupling_j, "Spin-spin coupling J > 0")
        ->required();
    app.add_option("--b1", cfg.params.field_b1, "Field before the expansion stroke");
    app.add_option("--b2", cfg.params.field_b2, "Field after the expansion stroke");
    app.add_option("--temp", cfg.params.temperature, "Cold bath temperature");
    app.add_option("--temp-hot", cfg.params.temperature_hot,
                   "Hot bath temperature (two_bath mode)");
    app.add_option("--tau", cfg.params.tau, "Unitary stroke duration");
    app.add_option("--tau-grid", grid_text, "Sweep grid start:stop:count[:log]");
    app.add_option("--tol", cfg.tolerance, "Integrator error tolerance");
    app.add_option("--out", cfg.out_path, "Output path (default: stdout)");
    app.add_option("--format", format_text, "Output format: csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", cfg.seed, "Reserved; outputs are deterministic");

    for (const char* name : {"cycle", "work-dist", "sweep-tau", "coherence", "expansion-report"})
        app.add_subcommand(name)->fallthrough();
    app.fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        cfg.params.mode = (mode_text == "two_bath" || mode_text == "two-bath")
                              ? EngineMode::two_bath
                              : EngineMode::measurement_based;
        cfg.format = format_text == "json" ? OutputFormat::json : OutputFormat::csv;
        if (!grid_text.empty()) cfg.tau_grid = TauGrid::parse(grid_text);
        detail::emit(run_command(cfg), cfg);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qotto
