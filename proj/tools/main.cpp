#include "cli.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>

int main(int argc, char** argv)
{
    using namespace hopfcole::cli;

    CLI::App app{"Hopf-Cole networks: exact identities, convergence and stability experiments"};
    app.require_subcommand(1);

    struct Slot {
        std::string config_file;
        std::string out_dir = "out";
        std::map<std::string, std::string> flags;
    };
    std::map<std::string, Slot> slots;

    for (const auto& spec : command_specs()) {
        auto* sub = app.add_subcommand(spec.name, spec.help);
        Slot& slot = slots[spec.name];
        sub->add_option("--config", slot.config_file, "key = value file, applied before flags");
        sub->add_option("--out", slot.out_dir, "output directory")->capture_default_str();
        for (const auto& p : spec.params) {
            std::string help = p.help;
            if (!p.value.empty()) help += (help.empty() ? "" : " ") + std::string("[default: ") + p.value + "]";
            sub->add_option("--" + p.key, slot.flags[p.key], help);
        }
    }

    CLI11_PARSE(app, argc, argv);

    for (auto* sub : app.get_subcommands()) {
        const std::string name = sub->get_name();
        Slot& slot = slots[name];
        try {
            Config cfg(name);
            if (!slot.config_file.empty()) cfg.load_file(slot.config_file);
            for (const auto& p : command_spec(name).params)
                if (sub->count("--" + p.key) > 0) cfg.set(p.key, slot.flags[p.key]);
            return run_command(cfg, slot.out_dir, std::cout);
        } catch (const hopfcole::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
    }
    return 2;
}
