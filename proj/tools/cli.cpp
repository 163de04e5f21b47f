#include "cli.hpp"

#include "weyllab/errors.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace weyllab::cli {

namespace {

using json = nlohmann::json;

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

// Command-specific flags; each one overrides the config field `key`.
const std::map<std::string, std::vector<FlagSpec>>& command_flags() {
    static const std::map<std::string, std::vector<FlagSpec>> flags = {
        {"recurrence",
         {{"--eps", "eps", "eps grid"},
          {"--T", "T", "T grid"},
          {"--samples", "samples", "Monte-Carlo samples per cell"},
          {"--K", "K", "surrogate factor (volume of S_{T, K eps})"},
          {"--t-min", "t_min", "start of the return-time window"}}},
        {"invariants",
         {{"--t-max", "t_max", "horizon of the expansion-rate estimate"},
          {"--orbit-samples", "orbit_samples", "orbits for the expansion rate"},
          {"--entropy-samples", "entropy_samples", "candidate pool for separated sets"},
          {"--T-list", "T_list", "entropy time grid"},
          {"--eps-list", "eps_list", "entropy scale grid"}}},
        {"spectrum",
         {{"--lambda", "lambda", "eigenvalue cut-off grid"},
          {"--h", "h", "semiclassical parameter grid"},
          {"--R", "R", "frequency radius grid (lambda = R^2)"}}},
        {"weyl", {{"--lambda", "lambda", "eigenvalue cut-off grid"}, {"--h", "h", "semiclassical parameter grid"}}},
        {"plan",
         {{"--class", "class", "anosov, lie_group or surfrev"},
          {"--p", "p", "rank of the Lie group"},
          {"--r", "r", "vanishing order of the return map"},
          {"--h", "h", "semiclassical parameter"},
          {"--ell", "ell", "margin added to lambda_max"},
          {"--lambda-max", "lambda_max", "maximal expansion rate"},
          {"--c", "c", "constant in eps = c h^delta"}}},
        {"returnmap",
         {{"--alpha", "alpha", "direction grid in (0, pi)"},
          {"--count", "count", "number of evenly spaced directions"},
          {"--order-grid", "order_grid", "grid size for the vanishing order (0 skips it)"}}},
        {"scaling-fit",
         {{"--in", "in", "recurrence CSV"}, {"--mode", "mode", "power or exponential"}}},
        {"verify-bound",
         {{"--in", "in", "weyl CSV"},
          {"--shape", "shape", "power or inverse_log"},
          {"--exponent", "exponent", "exponent of the power shape"},
          {"--slack", "slack", "multiplicative slack"}}},
    };
    return flags;
}

struct Invocation {
    std::string config_path, out_dir, model, seed, threads;
    bool check = false, quiet = false;
    std::map<std::string, std::string> overrides;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

unsigned parse_threads(const json& v) {
    std::int64_t n = -1;
    if (v.is_number_integer()) n = v.get<std::int64_t>();
    else if (v.is_string()) {
        try {
            n = std::stoll(v.get<std::string>());
        } catch (const std::exception&) {
        }
    }
    if (n < 0 || n > 4096) throw ConfigError("field 'threads' must be an integer in [0, 4096]");
    return static_cast<unsigned>(n);
}

int execute(const std::string& command, const Invocation& inv, std::ostream& out, std::ostream& err) {
    json raw = load_config(inv.config_path);
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    unsigned threads = 0;
    if (raw.contains("threads")) threads = parse_threads(raw["threads"]);
    std::string out_dir = raw.value("out", std::string("weyllab-out"));
    raw.erase("threads");
    raw.erase("out");
    if (!inv.threads.empty()) threads = parse_threads(inv.threads);
    if (!inv.out_dir.empty()) out_dir = inv.out_dir;
    if (!inv.seed.empty()) raw["seed"] = inv.seed;
    if (!inv.model.empty()) {
        if (inv.model.front() == '{') {
            try {
                raw["model"] = json::parse(inv.model);
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("--model: ") + e.what());
            }
        } else {
            raw["model"] = {{"kind", inv.model}};
        }
    }
    for (const auto& [key, value] : inv.overrides) raw[key] = value;

    std::ostringstream null_log;
    std::ostream& log = inv.quiet ? null_log : err;
    Params params(raw);
    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    auto result = run_command(command, params, threads, log);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& key : params.unused()) log << "warning: ignoring config field '" << key << "'\n";

    json config = params.resolved();
    config["command"] = command;
    const auto hash = config_hash(config);

    if (inv.check) {
        const auto res = check_outputs(out_dir, hash, result.files);
        for (const auto& m : res.messages) out << m << '\n';
        out << (res.ok ? "check passed" : "check FAILED") << '\n';
        return res.ok ? 0 : 1;
    }
    RunRecord rec{command, config, std::nullopt, threads, wall, started};
    if (result.stochastic) rec.seed = config.at("seed").get<std::uint64_t>();
    write_outputs(out_dir, result.files, make_manifest(rec, result.files));
    for (const auto& line : result.summary) out << line << '\n';
    log << command << ": wrote " << result.files.size() + 1 << " files to " << out_dir << " in " << wall << " s\n";
    return 0;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"weyllab: recurrence, invariants and Weyl-law experiments on model flows"};
    app.require_subcommand(1);
    Invocation inv;
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->set_help_flag("--help", "print this help"); // -h would clash with --h
        sub->add_option("--config", inv.config_path, "JSON config file");
        sub->add_option("--seed", inv.seed, "seed (unsigned 64-bit)");
        sub->add_option("--threads", inv.threads, "worker threads, 0 for all cores");
        sub->add_option("--out", inv.out_dir, "output directory");
        sub->add_option("--model", inv.model, "model descriptor as JSON, or a bare kind");
        sub->add_flag("--check", inv.check, "rerun and compare against the manifest in --out");
        sub->add_flag("-q,--quiet", inv.quiet, "no log lines");
        for (const auto& f : command_flags().at(name)) {
            const std::string key = f.key;
            sub->add_option_function<std::string>(
                f.flag, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, f.help);
        }
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help(); // delegates to the selected subcommand
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        return execute(command, inv, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 3;
    }
}

} // namespace weyllab::cli
