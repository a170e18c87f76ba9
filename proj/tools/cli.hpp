#pragma once

// Experiment harness behind the `hopfcole` executable. Every command reads a
// flat key=value config whose defaults live in one table (command_specs), runs
// a set of experiments, and yields CSV tables plus named pass/fail assertions.

#include "hopfcole/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hopfcole::cli {

struct Param {
    std::string key;
    std::string value; ///< default, as text
    std::string help;
};

struct CommandSpec {
    std::string name;
    std::string help;
    std::vector<Param> params;
};

/// The single defaults table.
const std::vector<CommandSpec>& command_specs();
const CommandSpec& command_spec(const std::string& name);

class Config {
public:
    explicit Config(const std::string& command);

    const std::string& command() const { return command_; }

    /// Unknown keys are rejected.
    void set(const std::string& key, const std::string& value);
    /// Lines `key = value`; '#' starts a comment.
    void load_file(const std::filesystem::path& path);

    const std::string& text(const std::string& key) const;
    double number(const std::string& key) const;
    long long integer(const std::string& key) const;
    std::uint64_t seed() const;
    /// Comma-separated list.
    std::vector<double> numbers(const std::string& key) const;
    std::vector<long long> integers(const std::string& key) const;

    nlohmann::ordered_json to_json() const;

private:
    std::string command_;
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

struct Assertion {
    std::string name;
    bool passed;
    std::string detail;
};

struct Report {
    std::vector<io::Table> tables;
    std::vector<Assertion> assertions;
    nlohmann::ordered_json results = nlohmann::ordered_json::object();
    std::vector<std::pair<std::string, std::string>> files; ///< extra outputs: name relative to out_dir, content

    void check(const std::string& name, bool passed, const std::string& detail);
    bool passed() const;
    void absorb(Report other);
};

// Experiments. Each reads only the keys of its command.
Report verify_identity(const Config& cfg);
Report verify_attention(const Config& cfg);
Report verify_transformer(const Config& cfg);
Report quadrature_rate(const Config& cfg, int d);
Report viscosity_bias(const Config& cfg);
Report scaling_sweep(const Config& cfg, int d);
Report scaling_deff(const Config& cfg);
Report robustness_bound(const Config& cfg);
Report robustness_radius(const Config& cfg);
Report near_shock(const Config& cfg);
Report bifurcation(const Config& cfg);
Report attribution_oracles(const Config& cfg);
Report ntk_definiteness(const Config& cfg);
Report costate_exactness(const Config& cfg);
Report euler_and_hamiltonian(const Config& cfg);
Report feedforward_adjoint_check(const Config& cfg);
Report integrable_residuals(const Config& cfg);
Report tau_identity(const Config& cfg);
Report build_from_support(const Config& cfg);

/// Every experiment of the config's command.
Report run_experiments(const Config& cfg);

/// Runs the command, writes `<table>.csv` and `<command>_summary.json` under
/// out_dir, logs one line per assertion. Returns 0 iff every assertion passed.
int run_command(const Config& cfg, const std::filesystem::path& out_dir, std::ostream& log);

constexpr int kSchemaVersion = 1;

} // namespace hopfcole::cli
