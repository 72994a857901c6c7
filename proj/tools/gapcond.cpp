// gapcond: run solves and eps-sweeps for two nearly touching inclusions.
//
//   gapcond sweep --config configs/two_discs.json --out out/
//   gapcond report --config configs/two_discs.json --out out/
//
// Exit codes: 0 success, 2 config error, 3 solver failure, 4 fit failure.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gapcond/gapcond.hpp"

namespace {

using namespace gapcond;

struct Options {
    std::string config;
    std::string out;
    std::string eps_override;
    int threads = 0;
    double tolerance = 0.0;
};

std::vector<double> parse_eps_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--eps-override: cannot parse \"" + item + "\"");
        }
    }
    if (out.empty()) throw ConfigError("--eps-override: empty list");
    return out;
}

ExperimentConfig load(const Options& o)
{
    auto cfg = load_config(o.config);
    if (!o.eps_override.empty()) cfg.eps = parse_eps_list(o.eps_override);
    if (o.threads > 0) cfg.threads = o.threads;
    if (o.tolerance > 0.0) cfg.solver.tolerance = o.tolerance;
    if (!o.out.empty()) cfg.output_dir = o.out;
    cfg.validate();
    return cfg;
}

std::filesystem::path out_dir(const ExperimentConfig& cfg) { return cfg.output_dir; }

int fit_status(const SweepAnalysis& a) { return a.errors.empty() ? 0 : 4; }

int cmd_solve(const Options& o)
{
    const auto cfg = load(o);
    std::vector<SweepRecord> rows;
    for (double e : cfg.eps) {
        rows.push_back(run_solve(cfg, e));
        const auto& r = rows.back();
        std::printf("eps %-10.4g  E1 %.10g  Q %.10g  Theta %.10g  C1 %.10g  C2 %.10g  identity %.2e  (%.1f s)\n", r.eps, r.E1,
                    r.Q_eps, r.Theta_eps, r.C1, r.C2, r.identity_residual, r.wall_time);
    }
    write_atomic(out_dir(cfg) / "solve.csv", sweep_csv(rows));
    return 0;
}

int cmd_sweep(const Options& o)
{
    const auto cfg = load(o);
    const auto res = run_sweep(cfg);
    write_outputs(cfg, out_dir(cfg), res);
    std::fputs(summary_text(cfg, res.records, res.analysis, res.failures, res.layer).c_str(), stdout);
    if (cfg.dim == 2 && res.records.empty()) return res.failures.empty() ? 3 : res.failures.front().exit_code;
    if (cfg.dim == 2 && res.records.size() < 3) return 4;
    if (!res.failures.empty()) return res.failures.front().exit_code;
    return fit_status(res.analysis);
}

SweepResult from_csv(const ExperimentConfig& cfg)
{
    SweepResult res;
    if (cfg.dim == 2) {
        res.records = read_sweep_csv(out_dir(cfg) / "sweep.csv");
        if (res.records.size() >= 3) res.analysis = analyze_sweep(cfg, res.records);
        else if (!res.records.empty()) res.analysis.errors.push_back("fits need at least 3 records");
    }
    return res;
}

int cmd_energy_fit(const Options& o)
{
    const auto cfg = load(o);
    auto res = from_csv(cfg);
    Json j = Json::object();
    if (res.analysis.energy1) j["inclusion1"] = energy_json(*res.analysis.energy1);
    if (res.analysis.energy2) j["inclusion2"] = energy_json(*res.analysis.energy2);
    j["fit_errors"] = res.analysis.errors;
    write_atomic(out_dir(cfg) / "energy_fit.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return res.analysis.energy1 ? 0 : 4;
}

int cmd_limits(const Options& o)
{
    const auto cfg = load(o);
    auto res = from_csv(cfg);
    Json j = Json::object();
    if (res.analysis.limits) j["limits"] = limits_json(*res.analysis.limits);
    Json pre = Json::array();
    for (const auto& r : res.records) pre.push_back({{"eps", r.eps}, {"prefactor", r.prefactor}});
    j["prefactors"] = pre;
    j["fit_errors"] = res.analysis.errors;
    write_atomic(out_dir(cfg) / "limits.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return res.analysis.limits ? 0 : 4;
}

// Re-solves each eps and measures grad u against the singular term built from the
// limit constants of an earlier sweep.
int cmd_reconstruct(const Options& o)
{
    const auto cfg = load(o);
    auto res = from_csv(cfg);
    if (!res.analysis.limits) {
        for (const auto& e : res.analysis.errors) std::fprintf(stderr, "%s\n", e.c_str());
        return 4;
    }
    const auto& L = *res.analysis.limits;
    std::string csv = "eps,prefactor,max_gap_grad_u,max_gap_residual,ratio\r\n";
    for (double e : cfg.eps) {
        const auto out = run_solve_detailed(cfg, e);
        const double pf = singular_prefactor(2, L.Q_star.value, L.Theta_star.value, L.Mtilde.value, e);
        const double resid = max_gap_residual(out.samples, out.geometry, pf);
        const double g = out.record.max_gap_grad_u;
        csv += format_number(e) + "," + format_number(pf) + "," + format_number(g) + "," + format_number(resid) + "," +
               format_number(resid / g) + "\r\n";
        std::printf("eps %-10.4g  prefactor %.8g  max|grad u| %.6g  residual %.6g\n", e, pf, g, resid);
    }
    write_atomic(out_dir(cfg) / "reconstruct.csv", csv);
    return 0;
}

int cmd_report(const Options& o)
{
    const auto cfg = load(o);
    auto res = from_csv(cfg);
    res.layer = asymptotic_layer(cfg);
    write_outputs(cfg, out_dir(cfg), res, false);
    std::fputs(summary_text(cfg, res.records, res.analysis, res.failures, res.layer).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gradient blow-up experiments for two nearly touching inclusions"};
    app.require_subcommand(1);
    Options opt;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory (overrides the config)");
        sub->add_option("--eps-override", opt.eps_override, "comma-separated eps list, strictly decreasing");
        sub->add_option("--threads", opt.threads, "concurrent per-eps solves")->check(CLI::PositiveNumber);
        sub->add_option("--tolerance", opt.tolerance, "linear solver tolerance")->check(CLI::PositiveNumber);
    };
    int status = 0;
    const auto bind = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        sub->callback([&status, &opt, fn] { status = fn(opt); });
    };
    bind("solve", "solve each eps once and write solve.csv", cmd_solve);
    bind("sweep", "full eps-sweep: sweep.csv, report.json, summary.txt", cmd_sweep);
    bind("energy-fit", "fit E = kappa/rho + M to an existing sweep.csv", cmd_energy_fit);
    bind("limits", "extrapolate Q*, Theta*, Mtilde from an existing sweep.csv", cmd_limits);
    bind("reconstruct", "re-solve and compare grad u with the singular term", cmd_reconstruct);
    bind("report", "rewrite report.json and summary.txt from sweep.csv", cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const gapcond::Error& e) {
        std::fprintf(stderr, "gapcond: %s\n", e.what());
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "gapcond: config: %s\n", e.what());
        return 2;
    } catch (const std::bad_alloc&) {
        std::fprintf(stderr, "gapcond: out of memory\n");
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gapcond: %s\n", e.what());
        return 3;
    }
    return status;
}
