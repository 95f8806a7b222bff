// raylink: dataset generation, training, evaluation and reporting.
//
//   raylink gen   [--config FILE] [--<key> VALUE ...] [--export-facets ID]
//   raylink train (detector-gnn | detector-pbgnn | refiner) [...]
//   raylink eval  [--oracle] [--cache-refined] [...]
//   raylink report [...]
//
// Every config key is accepted as a long flag with '_' written as '-'.
// Exit codes: 0 success, 1 usage, 2 runtime fault, 3 divergence.

#include "raylink/config.hpp"
#include "raylink/log.hpp"
#include "raylink/pipeline.hpp"

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using raylink::config::RunConfig;

struct CommonArgs
{
    std::string config_file;
    std::map<std::string, std::string> overrides;
};

std::string flag_name(std::string key)
{
    for (char& c : key)
        if (c == '_') c = '-';
    return "--" + key;
}

void add_config_options(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("--config", args.config_file, "flat key = value configuration file");
    for (const auto& k : raylink::config::keys()) {
        const std::string key = k.name;
        cmd->add_option_function<std::string>(
               flag_name(key), [&args, key](const std::string& v) { args.overrides[key] = v; }, k.help)
            ->type_name("VALUE")
            ->group("Configuration");
    }
}

// Prints each distinct warning once and how often it repeated at exit.
class WarningDigest
{
  public:
    WarningDigest()
    {
        raylink::set_warning_handler([this](const std::string& m) {
            if (counts_[m]++ == 0) std::cerr << "warning: " << m << '\n';
        });
    }
    ~WarningDigest()
    {
        raylink::set_warning_handler({});
        for (const auto& [message, n] : counts_)
            if (n > 1) std::cerr << "warning repeated " << n << " times: " << message << '\n';
    }

  private:
    std::map<std::string, std::size_t> counts_;
};

RunConfig resolve(const CommonArgs& args)
{
    RunConfig config;
    if (!args.config_file.empty()) raylink::config::apply_file(config, args.config_file);
    for (const auto& [key, value] : args.overrides) raylink::config::set_value(config, key, value);
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv)
{
#if defined(__GLIBC__)
    // Autodiff tapes allocate and free large buffers every step; keep them in the heap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"raylink: LIDAR-aided blockage detection and MIMO precoding simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("raylink ") + raylink::pipeline::kVersion);

    CommonArgs gen_args, train_args, eval_args, report_args;

    auto* gen = app.add_subcommand("gen", "generate a dataset into dataset_dir");
    add_config_options(gen, gen_args);
    std::optional<std::uint64_t> export_id;
    std::string export_out;
    gen->add_option("--export-facets", export_id, "write the reconstructed facets of one scene id as CSV and exit");
    gen->add_option("--facets-out", export_out, "facet CSV destination (default: stdout)");

    auto* train = app.add_subcommand("train", "train a detector or the refiner");
    add_config_options(train, train_args);
    std::string target;
    train->add_option("target", target, "detector-gnn | detector-pbgnn | refiner")
        ->required()
        ->check(CLI::IsMember({"detector-gnn", "detector-pbgnn", "refiner"}));

    auto* eval = app.add_subcommand("eval", "evaluate detectors and precoders on the test split");
    add_config_options(eval, eval_args);
    raylink::pipeline::EvalOptions eval_opts;
    eval->add_flag("--oracle", eval_opts.oracle, "replace every estimate by the true Gram matrix");
    eval->add_flag("--cache-refined", eval_opts.cache_refined, "write refined estimates to refined.bin");

    auto* report = app.add_subcommand("report", "merge the results CSVs into report.csv");
    add_config_options(report, report_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    WarningDigest digest;
    try {
        if (gen->parsed()) {
            const auto config = resolve(gen_args);
            if (export_id) {
                if (export_out.empty()) {
                    raylink::pipeline::export_facets(config, *export_id, std::cout);
                } else {
                    std::ofstream os(export_out);
                    if (!os) throw std::runtime_error("cannot write " + export_out);
                    raylink::pipeline::export_facets(config, *export_id, os);
                }
                return 0;
            }
            raylink::pipeline::cmd_gen(config, &std::cerr);
        } else if (train->parsed()) {
            const auto config = resolve(train_args);
            raylink::pipeline::cmd_train(config, raylink::pipeline::train_target_from_string(target), &std::cerr);
        } else if (eval->parsed()) {
            raylink::pipeline::cmd_eval(resolve(eval_args), eval_opts, &std::cerr);
        } else if (report->parsed()) {
            raylink::pipeline::cmd_report(resolve(report_args), std::cout);
        }
    } catch (const raylink::config::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const raylink::pipeline::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
