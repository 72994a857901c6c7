#pragma once

// Config-driven experiments: single solves, eps-sweeps, fits, and the files they
// leave behind (sweep.csv, report.json, summary.txt).

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gapcond/asymptotics.hpp"
#include "gapcond/errors.hpp"
#include "gapcond/field_solver.hpp"
#include "gapcond/functionals.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/grid.hpp"
#include "gapcond/oracle.hpp"
#include "gapcond/reconstruction.hpp"

namespace gapcond {

using Json = nlohmann::ordered_json;

inline constexpr int config_schema_version = 1;
inline constexpr int csv_schema_version = 1;

// ---------------------------------------------------------------------------
// Boundary data families

struct PhiSpec {
    std::string family = "linear";
    Json params = Json::object();
    BoundaryData data;
    Parity parity = Parity::none;
};

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

inline double number(const Json& obj, const std::string& key, const std::string& where)
{
    if (!obj.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!obj.at(key).is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
    return obj.at(key).get<double>();
}

inline double number_or(const Json& obj, const std::string& key, double fallback, const std::string& where)
{
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

inline std::vector<double> numbers(const Json& obj, const std::string& key, const std::string& where)
{
    if (!obj.contains(key) || !obj.at(key).is_array()) throw ConfigError(where + ": \"" + key + "\" must be an array");
    std::vector<double> out;
    for (const auto& v : obj.at(key)) {
        if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline int integer(const Json& obj, const std::string& key, int fallback, const std::string& where)
{
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number_integer()) throw ConfigError(where + ": \"" + key + "\" must be an integer");
    return obj.at(key).get<int>();
}

// Polar angle in the (x1, x_n) plane, or the angle of the full point in 3D.
inline double polar_angle(const Point& p, int dim) { return std::atan2(p[static_cast<std::size_t>(dim - 1)], p[0]); }

inline Parity detect_parity(const std::function<double(const Point&)>& f, int dim)
{
    bool even = true, odd = true;
    for (int k = 0; k < 24; ++k) {
        const double t = 0.37 + 0.23 * k;
        Point p{1.7 * std::cos(t), 0.0, 0.0};
        p[1] = dim == 3 ? 0.6 * std::sin(1.3 * t) : 0.0;
        p[static_cast<std::size_t>(dim - 1)] = 1.3 * std::sin(t) + 0.1;
        Point m = p;
        m[static_cast<std::size_t>(dim - 1)] = -m[static_cast<std::size_t>(dim - 1)];
        const double a = f(p), b = f(m);
        const double scale = 1e-12 * (1.0 + std::abs(a) + std::abs(b));
        if (std::abs(a - b) > scale) even = false;
        if (std::abs(a + b) > scale) odd = false;
    }
    if (even && odd) return Parity::even;   // phi vanishes on the samples; treat as even
    return even ? Parity::even : odd ? Parity::odd : Parity::none;
}

} // namespace detail

inline std::string to_string(Parity p)
{
    switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    case Parity::none: return "none";
    }
    return "none";
}

/// Families: constant {value}; linear {gradient, offset}; polynomial {terms: [{coefficient,
/// powers}]}; trigonometric {offset, terms: [{amplitude, mode, phase}]} in the polar
/// angle of the (x1, x_n) plane.
inline PhiSpec parse_phi(const Json& j, int dim)
{
    const std::string where = "phi";
    if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError("phi: missing \"family\"");
    PhiSpec s;
    s.family = j.at("family").get<std::string>();
    s.params = j;
    const auto ud = static_cast<std::size_t>(dim);
    if (s.family == "constant") {
        detail::check_keys(j, {"family", "value"}, where);
        const double c = detail::number(j, "value", where);
        s.data = {[c](const Point&) { return c; }, "constant " + std::to_string(c)};
    } else if (s.family == "linear") {
        detail::check_keys(j, {"family", "gradient", "offset"}, where);
        const auto g = detail::numbers(j, "gradient", where);
        if (g.size() != ud) throw ConfigError("phi: linear gradient needs " + std::to_string(dim) + " entries");
        const double c = detail::number_or(j, "offset", 0.0, where);
        s.data = {[g, c, ud](const Point& p) {
                      double v = c;
                      for (std::size_t k = 0; k < ud; ++k) v += g[k] * p[k];
                      return v;
                  },
                  "linear"};
    } else if (s.family == "polynomial") {
        detail::check_keys(j, {"family", "terms"}, where);
        if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
            throw ConfigError("phi: polynomial needs a non-empty \"terms\" array");
        std::vector<std::pair<double, std::vector<int>>> terms;
        for (const auto& t : j.at("terms")) {
            detail::check_keys(t, {"coefficient", "powers"}, "phi term");
            std::vector<int> pw;
            if (!t.contains("powers") || !t.at("powers").is_array()) throw ConfigError("phi term: missing \"powers\"");
            for (const auto& e : t.at("powers")) {
                if (!e.is_number_integer() || e.get<int>() < 0) throw ConfigError("phi term: powers must be non-negative integers");
                pw.push_back(e.get<int>());
            }
            if (pw.size() != ud) throw ConfigError("phi term: need " + std::to_string(dim) + " powers");
            terms.emplace_back(detail::number(t, "coefficient", "phi term"), pw);
        }
        s.data = {[terms, ud](const Point& p) {
                      double v = 0.0;
                      for (const auto& [c, pw] : terms) {
                          double m = c;
                          for (std::size_t k = 0; k < ud; ++k) m *= std::pow(p[k], pw[k]);
                          v += m;
                      }
                      return v;
                  },
                  "polynomial"};
    } else if (s.family == "trigonometric") {
        detail::check_keys(j, {"family", "offset", "terms"}, where);
        if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
            throw ConfigError("phi: trigonometric needs a non-empty \"terms\" array");
        struct Mode {
            double amplitude, mode, phase;
        };
        std::vector<Mode> modes;
        for (const auto& t : j.at("terms")) {
            detail::check_keys(t, {"amplitude", "mode", "phase"}, "phi term");
            modes.push_back({detail::number(t, "amplitude", "phi term"), detail::number(t, "mode", "phi term"),
                             detail::number_or(t, "phase", 0.0, "phi term")});
        }
        const double c = detail::number_or(j, "offset", 0.0, where);
        s.data = {[modes, c, dim](const Point& p) {
                      const double th = detail::polar_angle(p, dim);
                      double v = c;
                      for (const auto& m : modes) v += m.amplitude * std::cos(m.mode * th + m.phase);
                      return v;
                  },
                  "trigonometric"};
    } else {
        throw ConfigError("phi: unknown family \"" + s.family + "\"");
    }
    s.parity = detail::detect_parity(s.data.phi, dim);
    return s;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
    int schema_version = config_schema_version;
    int dim = 2;
    InclusionShape upper = InclusionShape::disc(1.0, Side::upper);
    InclusionShape lower = InclusionShape::disc(1.0, Side::lower);
    OuterDomain outer;
    double kappa_lb = 1.0;
    PhiSpec phi;
    std::vector<double> eps{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    ResolutionSpec grid;
    bool noise_estimate = true;   // companion solve on a coarser grid for the Theta_eps noise floor
    SolverOptions solver;
    QuadratureOptions quadrature;
    std::string output_dir = "out";
    std::uint64_t seed = 0;       // reserved; no numerics are random
    int threads = 1;
    Json source = Json::object();

    void validate() const
    {
        if (schema_version != config_schema_version) throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
        check_dimension(dim);
        upper.validate();
        lower.validate();
        if (upper.dim != dim || lower.dim != dim) throw ConfigError("shape dimensions differ from \"dimension\"");
        if (upper.side() != Side::upper || lower.side() != Side::lower) throw ConfigError("upper/lower shapes are on the wrong side");
        outer.validate();
        if (outer.dim() != dim) throw ConfigError("outer domain dimension differs from \"dimension\"");
        if (!(kappa_lb > 0.0)) throw ConfigError("kappa_lb must be positive");
        if (eps.empty()) throw ConfigError("eps list is empty");
        for (std::size_t k = 0; k < eps.size(); ++k) {
            if (!(eps[k] > 0.0 && eps[k] < 1.0)) throw ConfigError("every eps must lie in (0, 1)");
            if (k > 0 && !(eps[k] < eps[k - 1])) throw ConfigError("eps list must be strictly decreasing");
        }
        grid.validate();
        if (!(solver.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
        if (!(quadrature.abs_tolerance > 0.0)) throw ConfigError("quadrature tolerance must be positive");
        if (threads < 1) throw ConfigError("threads must be at least 1");
        check_touching(upper, lower);
    }
};

namespace detail {

inline InclusionShape parse_shape(const Json& j, Side side, int dim, const std::string& where)
{
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(where + ": missing \"kind\"");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "disc") {
        check_keys(j, {"kind", "radius"}, where);
        return InclusionShape::disc(number(j, "radius", where), side, dim);
    }
    if (kind == "ellipse") {
        check_keys(j, {"kind", "tangential_axes", "normal_axis"}, where);
        const auto t = numbers(j, "tangential_axes", where);
        if (t.size() != static_cast<std::size_t>(dim - 1)) throw ConfigError(where + ": need n-1 tangential axes");
        return InclusionShape::ellipse({t[0], dim == 3 ? t[1] : t[0]}, number(j, "normal_axis", where), side, dim);
    }
    if (kind == "perturbed_disc") {
        check_keys(j, {"kind", "radius", "cubic"}, where);
        return InclusionShape::perturbed_disc(number(j, "radius", where), numbers(j, "cubic", where), side, dim);
    }
    throw ConfigError(where + ": unknown shape kind \"" + kind + "\"");
}

inline OuterDomain parse_outer(const Json& j)
{
    const std::string where = "geometry.outer";
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(where + ": missing \"kind\"");
    const auto kind = j.at("kind").get<std::string>();
    OuterDomain o;
    if (kind == "disc" || kind == "ball") {
        check_keys(j, {"kind", "radius", "clearance"}, where);
        o.kind = kind == "disc" ? OuterKind::disc : OuterKind::ball;
        o.radius = number(j, "radius", where);
    } else if (kind == "rounded_rectangle") {
        check_keys(j, {"kind", "half_widths", "corner_radius", "clearance"}, where);
        o.kind = OuterKind::rounded_rectangle;
        const auto hw = numbers(j, "half_widths", where);
        if (hw.size() != 2) throw ConfigError(where + ": half_widths needs two entries");
        o.half_widths = {hw[0], hw[1]};
        o.corner_radius = number(j, "corner_radius", where);
    } else {
        throw ConfigError(where + ": unknown outer kind \"" + kind + "\"");
    }
    o.clearance = number_or(j, "clearance", 0.0, where);
    return o;
}

} // namespace detail

inline ExperimentConfig parse_config(const Json& j)
{
    using namespace detail;
    check_keys(j, {"schema_version", "dimension", "geometry", "phi", "eps", "grid", "solver", "quadrature", "output", "seed",
                   "threads"},
               "config");
    ExperimentConfig c;
    c.source = j;
    if (!j.contains("schema_version")) throw ConfigError("config: missing \"schema_version\"");
    c.schema_version = integer(j, "schema_version", 0, "config");
    c.dim = integer(j, "dimension", 2, "config");
    check_dimension(c.dim);

    if (!j.contains("geometry")) throw ConfigError("config: missing \"geometry\"");
    const auto& g = j.at("geometry");
    check_keys(g, {"upper", "lower", "outer", "kappa_lb"}, "geometry");
    if (!g.contains("upper") || !g.contains("lower") || !g.contains("outer"))
        throw ConfigError("geometry: needs \"upper\", \"lower\" and \"outer\"");
    c.upper = parse_shape(g.at("upper"), Side::upper, c.dim, "geometry.upper");
    c.lower = parse_shape(g.at("lower"), Side::lower, c.dim, "geometry.lower");
    c.outer = parse_outer(g.at("outer"));
    c.kappa_lb = number_or(g, "kappa_lb", c.kappa_lb, "geometry");

    if (!j.contains("phi")) throw ConfigError("config: missing \"phi\"");
    c.phi = parse_phi(j.at("phi"), c.dim);
    if (!j.contains("eps")) throw ConfigError("config: missing \"eps\"");
    c.eps = numbers(j, "eps", "config");

    if (j.contains("grid")) {
        const auto& r = j.at("grid");
        check_keys(r, {"gap_layers", "tangential_layers", "far_spacing", "grading", "tangential_grading", "max_nodes",
                       "refinement", "noise_estimate"},
                   "grid");
        c.grid.gap_layers = integer(r, "gap_layers", c.grid.gap_layers, "grid");
        c.grid.tangential_layers = integer(r, "tangential_layers", c.grid.tangential_layers, "grid");
        c.grid.far_spacing = number_or(r, "far_spacing", c.grid.far_spacing, "grid");
        c.grid.grading = number_or(r, "grading", c.grid.grading, "grid");
        c.grid.tangential_grading = number_or(r, "tangential_grading", c.grid.tangential_grading, "grid");
        const double mn = number_or(r, "max_nodes", static_cast<double>(c.grid.max_nodes), "grid");
        if (!(mn >= 1.0)) throw ConfigError("grid: max_nodes must be positive");
        c.grid.max_nodes = static_cast<std::size_t>(mn);
        c.grid.refinement = integer(r, "refinement", c.grid.refinement, "grid");
        if (r.contains("noise_estimate")) {
            if (!r.at("noise_estimate").is_boolean()) throw ConfigError("grid: noise_estimate must be a boolean");
            c.noise_estimate = r.at("noise_estimate").get<bool>();
        }
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, {"kind", "tolerance", "max_iterations"}, "solver");
        if (s.contains("kind")) {
            const auto k = s.at("kind").get<std::string>();
            if (k == "direct") c.solver.kind = LinearSolverKind::direct;
            else if (k == "pcg") c.solver.kind = LinearSolverKind::pcg;
            else throw ConfigError("solver: kind must be \"direct\" or \"pcg\"");
        }
        c.solver.tolerance = number_or(s, "tolerance", c.solver.tolerance, "solver");
        c.solver.max_iterations = integer(s, "max_iterations", c.solver.max_iterations, "solver");
    }
    if (j.contains("quadrature")) {
        const auto& q = j.at("quadrature");
        check_keys(q, {"abs_tolerance", "max_subdivisions"}, "quadrature");
        c.quadrature.abs_tolerance = number_or(q, "abs_tolerance", c.quadrature.abs_tolerance, "quadrature");
        c.quadrature.max_subdivisions = integer(q, "max_subdivisions", c.quadrature.max_subdivisions, "quadrature");
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, {"directory"}, "output");
        if (o.contains("directory")) c.output_dir = o.at("directory").get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("config: seed must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    c.threads = integer(j, "threads", 1, "config");
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// FNV-1a of the geometry section, so energy series from different shapes are not mixed.
inline std::string geometry_hash(const ExperimentConfig& c)
{
    const std::string s = c.source.contains("geometry") ? c.source.at("geometry").dump() : std::string{};
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Sweep records

struct SweepRecord {
    double eps = 0, rho = 0, E1 = 0, E2 = 0, a11 = 0, a12 = 0, a21 = 0, a22 = 0, alpha1 = 0, alpha2 = 0, b1 = 0, b2 = 0;
    double Q_eps = 0, Theta_eps = 0, C1 = 0, C2 = 0, max_gap_grad_u = 0, max_gap_residual = 0;
    double wall_time = 0;   // report.json only; kept out of the CSV so reruns are byte-identical
    // Additional columns.
    double identity_residual = 0, theta_alternative = 0, prefactor = 0, reciprocity_defect = 0, column_defect1 = 0,
           column_defect2 = 0, u_flux1 = 0, u_flux2 = 0, max_gap_grad_v1 = 0, max_gap_grad_v1_minus_ubar = 0,
           axis_grad_v1_scaled = 0, max_outside_grad_v1 = 0, v1_min = 0, v1_max = 0, u_min = 0, u_max = 0,
           theta_coarse = NAN, theta_noise = NAN, nodes = 0, gap_nodes = 0;
};

struct CsvColumn {
    const char* name;
    double SweepRecord::*field;
};

inline const std::vector<CsvColumn>& csv_columns()
{
    static const std::vector<CsvColumn> cols{
        {"eps", &SweepRecord::eps},
        {"rho", &SweepRecord::rho},
        {"E1", &SweepRecord::E1},
        {"E2", &SweepRecord::E2},
        {"a11", &SweepRecord::a11},
        {"a12", &SweepRecord::a12},
        {"a21", &SweepRecord::a21},
        {"a22", &SweepRecord::a22},
        {"alpha1", &SweepRecord::alpha1},
        {"alpha2", &SweepRecord::alpha2},
        {"b1", &SweepRecord::b1},
        {"b2", &SweepRecord::b2},
        {"Q_eps", &SweepRecord::Q_eps},
        {"Theta_eps", &SweepRecord::Theta_eps},
        {"C1", &SweepRecord::C1},
        {"C2", &SweepRecord::C2},
        {"max_gap_grad_u", &SweepRecord::max_gap_grad_u},
        {"max_gap_residual", &SweepRecord::max_gap_residual},
        {"identity_residual", &SweepRecord::identity_residual},
        {"theta_alternative", &SweepRecord::theta_alternative},
        {"prefactor", &SweepRecord::prefactor},
        {"reciprocity_defect", &SweepRecord::reciprocity_defect},
        {"column_defect1", &SweepRecord::column_defect1},
        {"column_defect2", &SweepRecord::column_defect2},
        {"u_flux1", &SweepRecord::u_flux1},
        {"u_flux2", &SweepRecord::u_flux2},
        {"max_gap_grad_v1", &SweepRecord::max_gap_grad_v1},
        {"max_gap_grad_v1_minus_ubar", &SweepRecord::max_gap_grad_v1_minus_ubar},
        {"axis_grad_v1_scaled", &SweepRecord::axis_grad_v1_scaled},
        {"max_outside_grad_v1", &SweepRecord::max_outside_grad_v1},
        {"v1_min", &SweepRecord::v1_min},
        {"v1_max", &SweepRecord::v1_max},
        {"u_min", &SweepRecord::u_min},
        {"u_max", &SweepRecord::u_max},
        {"theta_coarse", &SweepRecord::theta_coarse},
        {"theta_noise", &SweepRecord::theta_noise},
        {"nodes", &SweepRecord::nodes},
        {"gap_nodes", &SweepRecord::gap_nodes},
    };
    return cols;
}

inline std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string sweep_csv(const std::vector<SweepRecord>& rows)
{
    // The trailing "schema" column carries the CSV schema version on every row.
    std::string out;
    const auto& cols = csv_columns();
    for (const auto& c : cols) out += std::string(c.name) + ",";
    out += "schema\r\n";
    for (const auto& r : rows) {
        for (const auto& c : cols) out += format_number(r.*(c.field)) + ",";
        out += std::to_string(csv_schema_version) + "\r\n";
    }
    return out;
}

inline std::vector<SweepRecord> read_sweep_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string() + "; run the sweep first");
    std::string line;
    const auto& cols = csv_columns();
    const auto split = [](std::string s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
        std::vector<std::string> f;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        return f;
    };
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": missing header");
    const auto header = split(line);
    if (header.size() != cols.size() + 1 || header.back() != "schema")
        throw ConfigError(path.string() + ": not a sweep CSV of schema " + std::to_string(csv_schema_version));
    for (std::size_t c = 0; c < cols.size(); ++c)
        if (header[c] != cols[c].name) throw ConfigError(path.string() + ": unexpected column " + header[c]);
    std::vector<SweepRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split(line);
        if (f.size() != cols.size() + 1) throw ConfigError(path.string() + ": malformed row");
        if (f.back() != std::to_string(csv_schema_version))
            throw ConfigError(path.string() + ": unsupported CSV schema " + f.back());
        SweepRecord r;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            // from_chars keeps subnormals, which stod reports as out of range.
            const char* b = f[c].data();
            const char* e = b + f[c].size();
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(b, e, v);
            if (ec != std::errc() || ptr != e) throw ConfigError(path.string() + ": bad number \"" + f[c] + "\"");
            r.*(cols[c].field) = v;
        }
        rows.push_back(r);
    }
    return rows;
}

/// Write-then-rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Single solve

/// Gradient samples kept from a solve so the residual against the limit constants
/// can be evaluated once the sweep is complete.
struct GapSamples {
    std::vector<Point> points;
    std::vector<Gradient> grad_u;
};

struct SolveOutcome {
    SweepRecord record;
    GapGeometry geometry;
    GapSamples samples;
};

inline FunctionalRecord functional_record(const SweepRecord& r)
{
    FunctionalRecord f;
    f.eps = r.eps;
    f.rho = r.rho;
    f.Q_eps = r.Q_eps;
    f.Theta_eps = r.Theta_eps;
    f.C_diff = r.C1 - r.C2;
    f.alpha = {r.alpha1, r.alpha2};
    f.v0_flux = {-r.b1, -r.b2};
    f.identity_residual = r.identity_residual;
    f.theta_noise = r.theta_noise;
    return f;
}

/// A coarser companion of `spec`: far spacing and tangential layers halved in resolution,
/// grading ratios squared. The normal layer count stays at its floor.
inline ResolutionSpec coarse_companion(ResolutionSpec spec)
{
    spec.far_spacing *= 2.0;
    spec.tangential_layers = std::max(2, spec.tangential_layers / 2);
    spec.grading *= spec.grading;
    if (spec.tangential_grading > 0.0) spec.tangential_grading *= spec.tangential_grading;
    return spec;
}

inline double max_gap_residual(const GapSamples& s, const GapGeometry& geom, double prefactor)
{
    const SingularTerm term{geom.dim, prefactor, geom};
    double m = 0.0;
    for (std::size_t k = 0; k < s.points.size(); ++k) {
        const Vec3 t = prefactor == 0.0 ? Vec3{} : term.at(s.points[k]);
        m = std::max(m, std::hypot(s.grad_u[k][0] - t[0], s.grad_u[k][1] - t[1]));
    }
    return m;
}

/// geometry -> grid -> three solves -> fluxes -> functionals -> gap diagnostics. The
/// residual uses Q_eps sqrt(eps)/Theta_eps until the sweep supplies limit constants.
inline SolveOutcome run_solve_detailed(const ExperimentConfig& cfg, double eps)
{
    cfg.validate();
    if (cfg.dim != 2) throw ConfigError("direct field solves are two-dimensional; 3D configs support the asymptotic layer only");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    const auto t0 = std::chrono::steady_clock::now();

    const Domain2D domain = make_pair_domain(cfg.upper, cfg.lower, cfg.outer, eps, cfg.kappa_lb);
    auto grid = std::make_shared<const GradedGrid>(build_grid(domain, cfg.grid));
    FieldSolver solver(grid, cfg.solver);
    const auto v1 = solve_vi(1, solver);
    const auto v2 = solve_vi(2, solver);
    const auto v0 = solve_v0(cfg.phi.data, solver);
    const FluxSystem fs = assemble_flux_system(v1, v2, v0);
    const auto u = assemble_u(fs, v1, v2, v0);

    SolveOutcome out;
    out.geometry = *domain.gap;
    SweepRecord& r = out.record;
    r.eps = eps;
    r.rho = rho(2, eps);
    r.E1 = energy_of(v1);
    r.E2 = energy_of(v2);
    r.a11 = fs.a[0][0];
    r.a12 = fs.a[0][1];
    r.a21 = fs.a[1][0];
    r.a22 = fs.a[1][1];
    r.alpha1 = fs.alpha[0];
    r.alpha2 = fs.alpha[1];
    r.b1 = fs.b[0];
    r.b2 = fs.b[1];
    r.C1 = fs.C1;
    r.C2 = fs.C2;
    r.Q_eps = q_eps(fs);
    r.Theta_eps = theta_eps(fs, 2, eps);
    r.theta_alternative = theta_eps_alternative(fs, 2, eps);
    r.identity_residual = c_diff_identity_check(fs, r.Q_eps, r.Theta_eps, 2, eps).relative;
    r.reciprocity_defect = fs.reciprocity_defect();
    r.column_defect1 = fs.column_defect(0);
    r.column_defect2 = fs.column_defect(1);
    r.u_flux1 = flux_inclusion(u, 1);
    r.u_flux2 = flux_inclusion(u, 2);
    r.nodes = static_cast<double>(grid->unknowns());
    r.gap_nodes = grid->gap_nodes_on_axis(eps);
    const auto [v1min, v1max] = std::minmax_element(v1.values.begin(), v1.values.end());
    const auto [umin, umax] = std::minmax_element(u.values.begin(), u.values.end());
    r.v1_min = *v1min;
    r.v1_max = *v1max;
    r.u_min = *umin;
    r.u_max = *umax;

    // Gap diagnostics on Omega_{R0/2}, where u_bar is explicit.
    const GapGeometry& geom = out.geometry;
    const auto inner = gap_patch(geom, 0.5 * geom.R0);
    const auto full = gap_patch(geom, geom.R0);
    const auto gu = gradient(u);
    const auto gv = gradient(v1);
    std::size_t axis_col = 0;
    for (std::size_t i = 1; i < grid->nx(); ++i)
        if (std::abs(grid->xs[i]) < std::abs(grid->xs[axis_col])) axis_col = i;
    double axis_max = 0.0;
    for (std::size_t k = 0; k < grid->unknowns(); ++k) {
        const Point p = grid->position(k);
        const double nv = std::hypot(gv[k][0], gv[k][1]);
        if (inner.contains(p)) {
            out.samples.points.push_back(p);
            out.samples.grad_u.push_back(gu[k]);
            r.max_gap_grad_u = std::max(r.max_gap_grad_u, std::hypot(gu[k][0], gu[k][1]));
            r.max_gap_grad_v1 = std::max(r.max_gap_grad_v1, nv);
            const Vec3 ub = ubar_grad(geom, p);
            r.max_gap_grad_v1_minus_ubar = std::max(r.max_gap_grad_v1_minus_ubar, std::hypot(gv[k][0] - ub[0], gv[k][1] - ub[1]));
            if (static_cast<std::size_t>(grid->ij[k][0]) == axis_col) axis_max = std::max(axis_max, nv);
        } else if (!full.contains(p)) {
            r.max_outside_grad_v1 = std::max(r.max_outside_grad_v1, nv);
        }
    }
    if (out.samples.points.empty()) throw ResolutionError("no grid nodes inside the gap patch");
    r.axis_grad_v1_scaled = eps * axis_max;
    r.prefactor = singular_prefactor(2, r.Q_eps, r.Theta_eps, 0.0, eps);
    r.max_gap_residual = max_gap_residual(out.samples, geom, r.prefactor);

    if (cfg.noise_estimate) {
        auto coarse_spec = coarse_companion(cfg.grid);
        auto cgrid = std::make_shared<const GradedGrid>(build_grid(domain, coarse_spec));
        FieldSolver cs(cgrid, cfg.solver);
        const auto c1 = solve_vi(1, cs);
        const auto c2 = solve_vi(2, cs);
        FluxSystem cf;
        cf.a[0][0] = flux_inclusion(c1, 1);
        cf.a[0][1] = flux_inclusion(c2, 1);
        cf.alpha = {flux_outer(c1), flux_outer(c2)};
        r.theta_coarse = theta_eps(cf, 2, eps);
        // Second order: the fine-grid error is about a third of the fine-coarse gap.
        r.theta_noise = std::abs(r.Theta_eps - r.theta_coarse) / 3.0;
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline SweepRecord run_solve(const ExperimentConfig& cfg, double eps) { return run_solve_detailed(cfg, eps).record; }

// ---------------------------------------------------------------------------
// Sweep analysis

struct GrowthCheck {
    double gradient_factor = 0.0;   // max|grad u| at smallest eps over that at largest eps
    double residual_factor = 0.0;   // max over min of the gap residual across the sweep
};

/// Windowed non-growth test of B(eps) = max |grad(v1 - u_bar)|: growth exponents
/// d log B / d log(1/eps) over windows of three consecutive eps. Growth is flagged
/// when every window grows faster than `threshold` or the last window does.
struct WindowedGrowth {
    std::vector<double> exponents;
    double threshold = 0.05;
    bool growing = false;
};

inline WindowedGrowth windowed_growth(const std::vector<double>& eps, const std::vector<double>& b, double threshold = 0.05)
{
    WindowedGrowth w;
    w.threshold = threshold;
    if (eps.size() < 3) return w;
    for (std::size_t k = 0; k + 3 <= eps.size(); ++k) {
        std::vector<double> x, y;
        for (std::size_t i = k; i < k + 3; ++i) {
            x.push_back(-std::log(eps[i]));
            y.push_back(std::log(b[i]));
        }
        const auto f = fit_linear({[](double) { return 1.0; }, [](double t) { return t; }}, x, y);
        w.exponents.push_back(f.coef[1]);
    }
    const bool all = std::all_of(w.exponents.begin(), w.exponents.end(), [&](double e) { return e > threshold; });
    w.growing = all || w.exponents.back() > threshold;
    return w;
}

struct LayerRow {
    double eps = 0.0;
    double rho = 0.0;
    double gap_integral = 0.0;         // for the configured shapes, |x'| < R0
    double quadratic_integral = 0.0;   // quadratic model with the same lambdas and R0
    double closed_form = 0.0;
    double difference = 0.0;           // quadratic_integral - closed_form
};

/// The explicit asymptotic layer: gap integrals against the 2D/3D closed forms.
inline std::vector<LayerRow> asymptotic_layer(const ExperimentConfig& cfg)
{
    cfg.validate();
    std::vector<LayerRow> rows;
    for (double e : cfg.eps) {
        const GapGeometry g = make_gap_geometry(cfg.upper, cfg.lower, e, cfg.kappa_lb);
        const GapGeometry qg = quadratic_gap_geometry(cfg.dim, g.lambdas, e, g.R0);
        LayerRow r;
        r.eps = e;
        r.rho = rho(cfg.dim, e);
        r.gap_integral = gap_integral(g, e, g.R0, 0.0, cfg.quadrature).value;
        r.quadratic_integral = gap_integral(qg, e, g.R0, 0.0, cfg.quadrature).value;
        r.closed_form = cfg.dim == 2 ? closed_form_2d(g.lambdas[0], g.R0, e)
                                     : closed_form_3d(g.lambdas[0], g.lambdas[1], g.R0, e, cfg.quadrature);
        r.difference = r.quadratic_integral - r.closed_form;
        rows.push_back(r);
    }
    return rows;
}

struct SweepAnalysis {
    std::optional<AsymptoticModel> energy1;
    std::optional<AsymptoticModel> energy2;
    std::optional<LimitConstants> limits;
    std::optional<BlowupFit> blowup;
    GrowthCheck growth;
    WindowedGrowth v1_growth;
    double axis_band_low = 0.0, axis_band_high = 0.0;   // range of eps max|grad v1| on x' = 0
    double max_identity_residual = 0.0;
    std::vector<std::string> errors;   // fit failures, in order
};

/// Fits and limits over the successful records. When `samples` are supplied the gap
/// residual columns are recomputed against Q* sqrt(eps)/Theta*.
inline SweepAnalysis analyze_sweep(const ExperimentConfig& cfg, std::vector<SweepRecord>& rows,
                                   const std::vector<SolveOutcome>* outcomes = nullptr)
{
    SweepAnalysis a;
    for (const auto& r : rows) a.max_identity_residual = std::max(a.max_identity_residual, r.identity_residual);
    if (rows.empty()) return a;
    std::vector<double> lambdas;
    try {
        lambdas = make_gap_geometry(cfg.upper, cfg.lower, rows.front().eps, cfg.kappa_lb).lambdas;
    } catch (const Error& e) {
        a.errors.push_back(e.what());
        return a;
    }
    const auto series = [&](int i) {
        EnergySeries s;
        s.inclusion = i;
        s.geometry_hash = geometry_hash(cfg);
        for (const auto& r : rows) {
            s.eps.push_back(r.eps);
            s.energy.push_back(i == 1 ? r.E1 : r.E2);
        }
        return s;
    };
    try {
        a.energy1 = fit_energy_model(series(1), 2, lambdas);
        a.energy2 = fit_energy_model(series(2), 2, lambdas);
    } catch (const FitError& e) {
        a.errors.push_back(std::string("energy fit: ") + e.what());
    }
    if (a.energy1) {
        std::vector<FunctionalRecord> fr;
        for (const auto& r : rows) fr.push_back(functional_record(r));
        try {
            a.limits = extrapolate_limits(fr, 2, lambdas, a.energy1->M_of(1));
        } catch (const FitError& e) {
            a.errors.push_back(std::string("limits: ") + e.what());
        }
    }
    if (a.limits) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            auto& r = rows[k];
            r.prefactor = singular_prefactor(2, a.limits->Q_star.value, a.limits->Theta_star.value, a.limits->Mtilde.value, r.eps);
            if (outcomes) {
                const auto& o = (*outcomes)[k];
                r.max_gap_residual = max_gap_residual(o.samples, o.geometry, r.prefactor);
            }
        }
        std::vector<double> eps, g;
        for (const auto& r : rows) {
            eps.push_back(r.eps);
            g.push_back(r.max_gap_grad_u);
        }
        try {
            a.blowup = blowup_rate_fit(eps, g, a.limits->Q_star.value, a.limits->Q_star.error);
        } catch (const FitError& e) {
            a.errors.push_back(std::string("blow-up fit: ") + e.what());
        }
    }
    double rmin = INFINITY, rmax = 0.0;
    std::vector<double> eps, b;
    a.axis_band_low = INFINITY;
    for (const auto& r : rows) {
        rmin = std::min(rmin, r.max_gap_residual);
        rmax = std::max(rmax, r.max_gap_residual);
        eps.push_back(r.eps);
        b.push_back(r.max_gap_grad_v1_minus_ubar);
        a.axis_band_low = std::min(a.axis_band_low, r.axis_grad_v1_scaled);
        a.axis_band_high = std::max(a.axis_band_high, r.axis_grad_v1_scaled);
    }
    a.growth.gradient_factor = rows.back().max_gap_grad_u / rows.front().max_gap_grad_u;
    a.growth.residual_factor = rmin > 0.0 ? rmax / rmin : INFINITY;
    a.v1_growth = windowed_growth(eps, b);
    return a;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline Json estimate_json(const Estimate& e) { return {{"value", e.value}, {"error", e.error}}; }

inline Json extrapolated_json(const Extrapolated& e)
{
    return {{"value", e.value},
            {"error", e.error},
            {"coefficient", e.coefficient},
            {"condition_number", e.condition},
            {"residual_rms", e.residual_rms},
            {"free_exponent", std::isfinite(e.free_exponent) ? Json(e.free_exponent) : Json(nullptr)},
            {"free_exponent_value", std::isfinite(e.free_value) ? Json(e.free_value) : Json(nullptr)}};
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

} // namespace detail

inline Json energy_json(const AsymptoticModel& m)
{
    const auto& f = m.fit;
    Json tails = Json::array();
    for (const auto& t : f.tails)
        tails.push_back({{"first_index", t.first}, {"kappa", detail::estimate_json(t.kappa)}, {"M", detail::estimate_json(t.M)}});
    return {{"n", m.n},
            {"kappa_n", m.kappa_n},
            {"provenance", to_string(m.provenance)},
            {"M", detail::estimate_json(m.M.front().M)},
            {"inclusion", m.M.front().inclusion},
            {"M_constant", detail::estimate_json(f.M_constant)},
            {"fit_residuals", m.fit_residuals},
            {"remainder",
             {{"resolved", f.remainder_resolved},
              {"exponent", f.remainder.exponent},
              {"offset", f.remainder.offset},
              {"coefficient", f.remainder.coefficient},
              {"bound_exponent", f.bound_exponent}}},
            {"free_fit", {{"kappa", detail::estimate_json(f.kappa_free)}, {"M", detail::estimate_json(f.M_free)},
                          {"kappa_ratio", f.kappa_free.value / m.kappa_n}, {"residuals", f.free_residuals}}},
            {"tail_fits", tails},
            {"tail_max_deviation", f.tail_max_deviation},
            {"tails_consistent", f.tails_consistent}};
}

inline Json limits_json(const LimitConstants& L)
{
    Json checks = Json::array();
    for (const auto& c : L.theta_checks)
        checks.push_back({{"eps", c.eps},
                          {"theta_eps", c.theta_eps},
                          {"model", c.model},
                          {"residual", c.residual},
                          {"noise_floor", c.noise_floor},
                          {"remainder_E", c.remainder},
                          {"gap_ratio", c.gap_ratio}});
    return {{"n", L.n},
            {"kappa_n", L.kappa_n},
            {"Q_star", detail::extrapolated_json(L.Q_star)},
            {"alpha1_star", detail::extrapolated_json(L.alpha1_star)},
            {"alpha2_star", detail::extrapolated_json(L.alpha2_star)},
            {"Theta_star", detail::estimate_json(L.Theta_star)},
            {"M1", detail::estimate_json(L.M1)},
            {"Mtilde", detail::estimate_json(L.Mtilde)},
            {"Mtilde_sign", L.Mtilde.value > 0 ? "positive" : L.Mtilde.value < 0 ? "negative" : "zero"},
            {"delta0", L.delta0},
            {"gap_ratio_limit", L.gap_ratio_limit},
            {"theta_checks", checks},
            {"theta_within_noise", L.theta_within_noise},
            {"has_noise_floor", L.has_noise_floor}};
}

inline Json layer_json(const std::vector<LayerRow>& rows)
{
    Json out = Json::array();
    for (const auto& r : rows)
        out.push_back({{"eps", r.eps},
                       {"rho", r.rho},
                       {"gap_integral", r.gap_integral},
                       {"quadratic_integral", r.quadratic_integral},
                       {"closed_form", r.closed_form},
                       {"difference", r.difference}});
    return out;
}

struct Failure {
    double eps = 0.0;
    std::string message;
    int exit_code = 3;
};

inline Json report_json(const ExperimentConfig& cfg, const std::vector<SweepRecord>& rows, const SweepAnalysis& a,
                        const std::vector<Failure>& failures, const std::vector<LayerRow>& layer)
{
    Json j;
    j["schema_version"] = config_schema_version;
    j["config"] = cfg.source;
    j["dimension"] = cfg.dim;
    if (rows.empty() && cfg.dim == 2) {
        j["empty_report"] = true;
    } else {
        j["empty_report"] = false;
    }
    if (cfg.dim == 2 && !rows.empty()) {
        const auto g = make_gap_geometry(cfg.upper, cfg.lower, rows.front().eps, cfg.kappa_lb);
        j["lambdas"] = g.lambdas;
        j["R0"] = g.R0;
        j["kappa_n"] = kappa(2, g.lambdas);
        j["phi"] = {{"family", cfg.phi.family}, {"parity", to_string(cfg.phi.parity)}};
        if (a.energy1) j["energy_fit"] = energy_json(*a.energy1);
        if (a.energy2) j["energy_fit_inclusion2"] = energy_json(*a.energy2);
        if (a.limits) j["limits"] = limits_json(*a.limits);
        if (a.blowup) {
            j["blowup"] = {{"refused", a.blowup->refused}, {"reason", a.blowup->reason}, {"slope", a.blowup->slope},
                           {"std_error", a.blowup->std_error}, {"ci95", {a.blowup->ci_low, a.blowup->ci_high}},
                           {"points", a.blowup->points}};
        }
        j["residual_growth"] = {{"gradient_factor", a.growth.gradient_factor}, {"residual_factor", a.growth.residual_factor}};
        j["v1_minus_ubar_growth"] = {{"window_exponents", a.v1_growth.exponents},
                                     {"threshold", a.v1_growth.threshold},
                                     {"growing", a.v1_growth.growing}};
        j["axis_band"] = {a.axis_band_low, a.axis_band_high};
        j["max_identity_residual"] = a.max_identity_residual;
        Json recs = Json::array();
        for (const auto& r : rows) {
            Json o;
            for (const auto& c : csv_columns()) o[c.name] = detail::finite_or_null(r.*(c.field));
            o["wall_time"] = r.wall_time;
            recs.push_back(o);
        }
        j["records"] = recs;
    }
    if (!layer.empty()) j[cfg.dim == 2 ? "asymptotic_layer_2d" : "asymptotic_layer_3d"] = layer_json(layer);
    Json fails = Json::array();
    for (const auto& f : failures) fails.push_back({{"eps", f.eps}, {"error", f.message}, {"exit_code", f.exit_code}});
    j["failures"] = fails;
    j["fit_errors"] = a.errors;
    return j;
}

inline std::string summary_text(const ExperimentConfig& cfg, const std::vector<SweepRecord>& rows, const SweepAnalysis& a,
                                const std::vector<Failure>& failures, const std::vector<LayerRow>& layer)
{
    using detail::fmt;
    std::string s;
    const auto line = [&](const std::string& t) { s += t + "\n"; };
    if (cfg.dim == 2 && rows.empty()) line("EMPTY REPORT: no successful solves");

    if (!rows.empty()) {
        if (a.energy1) {
            const auto& m = *a.energy1;
            const double M = m.M.front().M.value;
            line("Energy of v1 against kappa/rho + M1");
            line("  kappa_n = " + fmt("%.10g", m.kappa_n) + "   M1 = " + fmt("%.6g", M) + " +- " + fmt("%.2g", m.M.front().M.error));
            line("  eps            E1                 kappa/rho+M1       difference");
            for (const auto& r : rows)
                line("  " + fmt("%-14.6g", r.eps) + fmt("%-19.12g", r.E1) + fmt("%-19.12g", m.kappa_n / r.rho + M) +
                     fmt("%.3e", r.E1 - m.kappa_n / r.rho - M));
            line("  free fit: kappa = " + fmt("%.8g", m.fit.kappa_free.value) + " +- " + fmt("%.2g", m.fit.kappa_free.error) +
                 " (ratio " + fmt("%.5f", m.fit.kappa_free.value / m.kappa_n) + "), M = " + fmt("%.6g", m.fit.M_free.value) +
                 " +- " + fmt("%.2g", m.fit.M_free.error));
            line("  measured remainder exponent " + fmt("%.3f", m.fit.remainder.exponent) + " against the smooth-boundary bound " +
                 fmt("%.3f", m.fit.bound_exponent) + (m.fit.remainder_resolved ? "" : " (not resolved)"));
            line("");
        }
        if (a.limits) {
            const auto& L = *a.limits;
            line("Limit constants (value +- extrapolation error)");
            line("  Q*      = " + fmt("%.10g", L.Q_star.value) + " +- " + fmt("%.2g", L.Q_star.error));
            line("  alpha1* = " + fmt("%.10g", L.alpha1_star.value) + " +- " + fmt("%.2g", L.alpha1_star.error));
            line("  alpha2* = " + fmt("%.10g", L.alpha2_star.value) + " +- " + fmt("%.2g", L.alpha2_star.error));
            line("  Theta*  = " + fmt("%.10g", L.Theta_star.value) + " +- " + fmt("%.2g", L.Theta_star.error));
            line("  Mtilde  = " + fmt("%.6g", L.Mtilde.value) + " +- " + fmt("%.2g", L.Mtilde.error) +
                 (L.Mtilde.value > 0 ? " (positive)" : " (negative)"));
            line("  delta0  = " + fmt("%.6g", L.delta0));
            line("");
            line("Theta_eps against Theta*(1 - Mtilde rho)");
            line("  eps            Theta_eps          model              residual     noise floor");
            for (const auto& c : L.theta_checks)
                line("  " + fmt("%-14.6g", c.eps) + fmt("%-19.12g", c.theta_eps) + fmt("%-19.12g", c.model) +
                     fmt("%-13.3e", c.residual) + fmt("%.3e", c.noise_floor));
            line("");
        }
        line("Identity residuals |C1 - C2 - rho Q/Theta| / max(|C1 - C2|, 1e-6)");
        for (const auto& r : rows) line("  eps " + fmt("%-12.6g", r.eps) + fmt("%.3e", r.identity_residual));
        line("");
        line("Gap residual against gradient growth");
        line("  eps            max|grad u|        max residual   ratio      prefactor");
        for (const auto& r : rows)
            line("  " + fmt("%-14.6g", r.eps) + fmt("%-19.10g", r.max_gap_grad_u) + fmt("%-15.6g", r.max_gap_residual) +
                 fmt("%-11.4g", r.max_gap_residual / r.max_gap_grad_u) + fmt("%.8g", r.prefactor));
        line("  gradient factor " + fmt("%.4g", a.growth.gradient_factor) + ", residual factor " + fmt("%.4g", a.growth.residual_factor));
        if (a.blowup) {
            if (a.blowup->refused) line("  blow-up fit refused: " + a.blowup->reason);
            else
                line("  blow-up slope " + fmt("%.4f", a.blowup->slope) + " (95% CI " + fmt("%.4f", a.blowup->ci_low) + " .. " +
                     fmt("%.4f", a.blowup->ci_high) + ")");
        }
        line("");
        line("v1 against u_bar in the gap");
        line("  eps            max|grad(v1-ubar)|  eps*max|grad v1| on x'=0   max|grad v1| outside");
        for (const auto& r : rows)
            line("  " + fmt("%-14.6g", r.eps) + fmt("%-20.6g", r.max_gap_grad_v1_minus_ubar) + fmt("%-27.6g", r.axis_grad_v1_scaled) +
                 fmt("%.6g", r.max_outside_grad_v1));
        std::string ex;
        for (double e : a.v1_growth.exponents) ex += fmt(" %.3f", e);
        line("  window growth exponents:" + ex + (a.v1_growth.growing ? "  (growing)" : "  (bounded)"));
        line("");
    }
    if (!layer.empty()) {
        line(cfg.dim == 2 ? "Asymptotic layer (2D): gap integral against closed form" : "Asymptotic layer (3D): gap integral against closed form");
        line("  eps            rho            shapes             quadratic          closed form        difference");
        for (const auto& r : layer)
            line("  " + fmt("%-14.6g", r.eps) + fmt("%-15.6g", r.rho) + fmt("%-19.12g", r.gap_integral) +
                 fmt("%-19.12g", r.quadratic_integral) + fmt("%-19.12g", r.closed_form) + fmt("%.3e", r.difference));
        line("");
    }
    for (const auto& f : failures) line("FAILED eps " + fmt("%.6g", f.eps) + ": " + f.message);
    for (const auto& e : a.errors) line("FIT ERROR: " + e);
    return s;
}

struct SweepResult {
    std::vector<SweepRecord> records;
    SweepAnalysis analysis;
    std::vector<Failure> failures;
    std::vector<LayerRow> layer;
};

inline void write_outputs(const ExperimentConfig& cfg, const std::filesystem::path& dir, const SweepResult& res, bool write_csv = true)
{
    if (write_csv && cfg.dim == 2) write_atomic(dir / "sweep.csv", sweep_csv(res.records));
    write_atomic(dir / "report.json", report_json(cfg, res.records, res.analysis, res.failures, res.layer).dump(2) + "\n");
    write_atomic(dir / "summary.txt", summary_text(cfg, res.records, res.analysis, res.failures, res.layer));
}

/// Solves every eps (concurrently up to cfg.threads), then fits and extrapolates.
/// Failed solves are recorded and skipped; fits need at least three successes.
inline SweepResult run_sweep(const ExperimentConfig& cfg)
{
    cfg.validate();
    SweepResult res;
    if (cfg.dim != 2) {
        res.layer = asymptotic_layer(cfg);
        return res;
    }
    const std::size_t m = cfg.eps.size();
    std::vector<std::optional<SolveOutcome>> slots(m);
    std::vector<std::optional<Failure>> errs(m);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < m; k = next++) {
            try {
                slots[k] = run_solve_detailed(cfg, cfg.eps[k]);
            } catch (const Error& e) {
                errs[k] = Failure{cfg.eps[k], e.what(), e.exit_code()};
            } catch (const std::bad_alloc&) {
                errs[k] = Failure{cfg.eps[k], "out of memory", 3};
            }
        }
    };
    const int nt = std::max(1, std::min<int>(cfg.threads, static_cast<int>(m)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<SolveOutcome> outcomes;
    for (std::size_t k = 0; k < m; ++k) {
        if (slots[k]) {
            res.records.push_back(slots[k]->record);
            outcomes.push_back(std::move(*slots[k]));
        } else if (errs[k]) {
            res.failures.push_back(*errs[k]);
        }
    }
    if (res.records.size() >= 3) res.analysis = analyze_sweep(cfg, res.records, &outcomes);
    else if (!res.records.empty()) res.analysis.errors.push_back("fits need at least 3 successful solves");
    for (const auto& r : res.records) res.analysis.max_identity_residual = std::max(res.analysis.max_identity_residual, r.identity_residual);
    res.layer = asymptotic_layer(cfg);
    return res;
}

} // namespace gapcond
