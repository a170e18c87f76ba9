#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hopfcole::cli {

namespace {


std::vector<CommandSpec> make_specs()
{
    return {
        {"verify",
         "exact identity, attention identity and LSE-transformer tables",
         {{"seed", "1", "RNG seed"},
          {"eps", "1.0,0.5,0.2,0.1,0.05", "viscosities of the identity table"},
          {"t", "1.0", "diffusion time"},
          {"points", "500", "evaluation points per identity row"},
          {"atoms", "4", "support size of the identity networks"},
          {"attn_dims", "4,8,16,32,64", "attention widths"},
          {"attn_trials", "500", "random batches per width"},
          {"attn_queries", "8", "queries per batch"},
          {"attn_keys", "16", "keys per batch"},
          {"l2_trials", "200", "L2-attention partition checks"},
          {"block_eps", "0.05,0.1,0.2,0.5,1.0", "FFN viscosities of the transformer block"},
          {"block_d", "8", "token width"},
          {"block_tokens", "16", "sequence length"},
          {"block_atoms", "32", "atoms per FFN network"}}},
        {"quadrature",
         "grid-support convergence rate and viscosity bias",
         {{"seed", "1", "RNG seed"},
          {"d", "1,2", "dimensions"},
          {"Ns", "auto", "atom targets; auto picks the odd-grid ladder up to 1e4"},
          {"t", "1.0", "diffusion time"},
          {"g", "abs", "initial data: abs (|y|) or smooth (|y|^2/2)"},
          {"eval_per_axis", "101", "evaluation grid over the central 80% of [-2,2]^d"},
          {"oracle_spacing", "0.1", "oracle node spacing in units of eps"},
          {"slope_tol", "0.15", "allowed distance of the fitted slope from -1/d"},
          {"bias_supports", "100", "random supports for the bias curve"},
          {"bias_atoms", "50", "atoms per bias support (d = 1)"},
          {"bias_eps", "0.2,0.1,0.05,0.02", "decreasing viscosities spanning a decade"},
          {"bias_points", "2001", "bias evaluation points"}}},
        {"scaling",
         "loss-vs-N at eps = N^(-1/d) for smooth data, and d_eff = 1/alpha",
         {{"seed", "1", "RNG seed"},
          {"d", "1,2", "dimensions"},
          {"Ns", "auto", "atom targets; auto picks a ladder that stays above the floor"},
          {"t", "1.0", "diffusion time"},
          {"eval_per_axis", "101", "evaluation grid per axis"},
          {"floor", "1e-13", "rms losses at or below this are roundoff and excluded from the fit"},
          {"alphas", "0.076,0.35,0.24,0.38", "published exponents to convert"}}},
        {"robustness",
         "Hessian bound, certified radius and near-shock curvature",
         {{"seed", "1", "RNG seed"},
          {"trials", "10000", "random (net, x, eps) triples"},
          {"atoms", "8", "neurons per random net"},
          {"eps_min", "0.01", "log-uniform eps range"},
          {"eps_max", "10", ""},
          {"tau", "1.0", "output tolerance of the certificate"},
          {"perturb_trials", "500", "sampled perturbation checks"},
          {"shock_delta", "8.0", "two-atom separation"},
          {"shock_t", "0.5", ""},
          {"shock_eps", "0.05", ""},
          {"shock_ks", "1,2,4,8", "refinement levels"},
          {"shock_points", "8001", "grid points over the atom span"}}},
        {"bifurcation",
         "critical points of the attribution entropy across eps",
         {{"seed", "4", "RNG seed of the two-cluster support"},
          {"atoms", "16", "support size, split evenly between the clusters"},
          {"separation", "1.0", "clusters centred at (+-separation, 0)"},
          {"spread", "0.35", "cluster standard deviation"},
          {"g_far", "1.0", "g on the second cluster (0 on the first)"},
          {"t", "1.0", "diffusion time"},
          {"eps_min", "0.08", "geometric eps grid"},
          {"eps_max", "20", ""},
          {"eps_points", "16", ""},
          {"per_axis", "21", "seed grid per axis"},
          {"margin", "0.5", "seed grid padding"},
          {"bisections", "10", "log-eps bisection steps per count drop"}}},
        {"attribution",
         "influence and gradient oracles, NTK definiteness",
         {{"seed", "1", "RNG seed"},
          {"instances", "200", "random supports"},
          {"tol", "1e-5", "relative tolerance against central differences"},
          {"ntk_trials", "100", "Gram matrices"}}},
        {"characteristics",
         "co-state exactness, Euler order, Hamiltonian drift, feedforward adjoint",
         {{"seed", "1", "RNG seed"},
          {"instances", "100", "random instances per drift family"},
          {"tol", "1e-6", "relative tolerance against central differences"},
          {"fd_step", "1e-6", "state step"},
          {"trajectory_layers", "20", "layers of the exported example trajectory"}}},
        {"integrable",
         "Hirota residuals and the tau-log identity",
         {{"seed", "1", "RNG seed"},
          {"instances", "500", "random tau-functions"},
          {"max_components", "8", "N ranges over 1..max_components"},
          {"kmax", "3.0", "wavenumbers uniform in [-kmax, kmax]"},
          {"tol", "1e-10", "bilinear residual bound"},
          {"identity_trials", "200", "tau-log identity checks"}}},
        {"build",
         "network JSON from a support CSV",
         {{"seed", "1", "unused; recorded for uniformity"},
          {"support", "", "input CSV with columns y_0..y_{d-1},g"},
          {"t", "1.0", "diffusion time"},
          {"eps", "0.1", "viscosity"},
          {"network", "network.json", "output file name, relative to --out"}}},
    };
}

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

const std::vector<CommandSpec>& command_specs()
{
    static const std::vector<CommandSpec> specs = make_specs();
    return specs;
}

const CommandSpec& command_spec(const std::string& name)
{
    for (const auto& s : command_specs())
        if (s.name == name) return s;
    throw Error("unknown command '" + name + "'");
}

Config::Config(const std::string& command) : command_(command)
{
    for (const auto& p : command_spec(command).params) {
        order_.push_back(p.key);
        values_[p.key] = p.value;
    }
}

void Config::set(const std::string& key, const std::string& value)
{
    require(values_.count(key) == 1, "command '" + command_ + "' has no parameter '" + key + "'");
    values_[key] = trim(value);
}

void Config::load_file(const std::filesystem::path& path)
{
    std::ifstream f(path);
    require(f.good(), "cannot read config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

const std::string& Config::text(const std::string& key) const
{
    const auto it = values_.find(key);
    require(it != values_.end(), "command '" + command_ + "' has no parameter '" + key + "'");
    return it->second;
}

double Config::number(const std::string& key) const
{
    try {
        return io::parse_double(text(key));
    } catch (const Error&) {
        throw Error("parameter '" + key + "' is not a number: '" + text(key) + "'");
    }
}

long long Config::integer(const std::string& key) const
{
    const std::string& s = text(key);
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    require(pos == s.size() && !s.empty(), "parameter '" + key + "' is not an integer: '" + s + "'");
    return v;
}

std::uint64_t Config::seed() const
{
    const std::string& s = text("seed");
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    require(pos == s.size() && !s.empty() && s[0] != '-', "seed must be a 64-bit unsigned integer: '" + s + "'");
    return v;
}

std::vector<double> Config::numbers(const std::string& key) const
{
    std::vector<double> out;
    for (const auto& item : split_list(text(key))) {
        try {
            out.push_back(io::parse_double(item));
        } catch (const Error&) {
            throw Error("parameter '" + key + "' has a non-numeric entry '" + item + "'");
        }
    }
    return out;
}

std::vector<long long> Config::integers(const std::string& key) const
{
    std::vector<long long> out;
    for (double v : numbers(key)) {
        require(v == std::floor(v), "parameter '" + key + "' must hold integers");
        out.push_back(static_cast<long long>(v));
    }
    return out;
}

nlohmann::ordered_json Config::to_json() const
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : order_) j[k] = values_.at(k);
    return j;
}

void Report::check(const std::string& name, bool ok, const std::string& detail)
{
    assertions.push_back({name, ok, detail});
}

bool Report::passed() const
{
    for (const auto& a : assertions)
        if (!a.passed) return false;
    return true;
}

void Report::absorb(Report other)
{
    for (auto& t : other.tables) tables.push_back(std::move(t));
    for (auto& a : other.assertions) assertions.push_back(std::move(a));
    for (auto& [k, v] : other.results.items()) results[k] = v;
    for (auto& f : other.files) files.push_back(std::move(f));
}

int run_command(const Config& cfg, const std::filesystem::path& out_dir, std::ostream& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    Report report;
    try {
        report = run_experiments(cfg);
    } catch (const Error& e) {
        report.check("completed", false, e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(out_dir);
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& t : report.tables) {
        const auto path = out_dir / (t.name + ".csv");
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "cannot write " + path.string());
        io::write_csv(f, t);
        files.push_back(path.filename().string());
    }
    for (const auto& [name, content] : report.files) {
        const auto path = out_dir / name;
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "cannot write " + path.string());
        f << content;
        files.push_back(name);
    }

    nlohmann::ordered_json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["command"] = cfg.command();
    summary["config"] = cfg.to_json();
    summary["results"] = report.results;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& a : report.assertions) list.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
    summary["assertions"] = list;
    summary["passed"] = report.passed();
    summary["tables"] = files;
    summary["duration_seconds"] = seconds;
    const auto summary_path = out_dir / (cfg.command() + "_summary.json");
    std::ofstream f(summary_path, std::ios::binary);
    require(f.good(), "cannot write " + summary_path.string());
    f << summary.dump(2) << '\n';

    log << cfg.command() << " (seed " << cfg.seed() << ")\n";
    for (const auto& a : report.assertions)
        log << (a.passed ? "  PASS  " : "  FAIL  ") << a.name << "  " << a.detail << '\n';
    log << (report.passed() ? "ok" : "FAILED") << " in " << seconds << " s; wrote " << summary_path.string() << '\n';
    return report.passed() ? 0 : 1;
}

} // namespace hopfcole::cli
