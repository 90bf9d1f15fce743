// Command-line runner: train, eval, sweep, selftest.
//
// Precedence: built-in defaults < --config file < EHCR_<KEY> environment
// variables < --set KEY=VALUE < dedicated flags.

#include "ehcr/checks.hpp"
#include "ehcr/errors.hpp"
#include "ehcr/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kSelftest = 3 };

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> algorithm;
    std::optional<std::string> mode;
    std::optional<int> episodes;
    std::optional<int> steps;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--algorithm", f.algorithm,
                    "aaddpg|ddpg|dqn|greedy|random|const_t_aaddpg|const_t_random|aor");
    cmd->add_option("--mode", f.mode, "noma|ofdm");
    cmd->add_option("--episodes", f.episodes, "training episodes")->check(CLI::PositiveNumber);
    cmd->add_option("--steps", f.steps, "steps per episode")->check(CLI::PositiveNumber);
    cmd->add_option("--set", f.sets, "KEY=VALUE override (repeatable)");
}

void apply_any(ehcr::ExperimentSpec& spec, const std::string& key, const std::string& value) {
    const auto& keys = ehcr::param_keys();
    if (std::find(keys.begin(), keys.end(), key) != keys.end())
        ehcr::apply_key_value(spec.params, key, value);
    else
        ehcr::apply_spec_key(spec, key, value);
}

ehcr::ExperimentSpec build_spec(const CommonFlags& f) {
    ehcr::ExperimentSpec spec;
    if (!f.config.empty()) ehcr::load_spec_file(spec, f.config);
    ehcr::apply_env_overrides(spec, [](const char* k) { return std::getenv(k); });
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ehcr::UsageError("--set expects KEY=VALUE, got '" + kv + "'");
        apply_any(spec, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.seed) spec.params.seed = *f.seed;
    if (f.out) spec.out_dir = *f.out;
    if (f.algorithm) spec.algorithm = ehcr::algorithm_from_string(*f.algorithm);
    if (f.mode) spec.mode = ehcr::access_mode_from_string(*f.mode);
    if (f.episodes) spec.schedule.episodes = *f.episodes;
    if (f.steps) spec.schedule.steps = *f.steps;
    spec.params.validate();
    if (spec.schedule.episodes < 1 || spec.schedule.steps < 1)
        throw ehcr::UsageError("episodes and steps must be positive");
    return spec;
}

void print_metrics(const char* label, const ehcr::EpisodeMetrics& m) {
    std::cout << label << ": reward " << m.avg_reward << ", anpl " << m.anpl << ", sumrate " << m.sumrate
              << ", energy_eff " << m.energy_eff << ", delay " << m.avg_delay << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting cognitive-radio NOMA resource management simulator"};
    app.require_subcommand(1);

    CommonFlags train_f, eval_f, sweep_f;
    auto* train_cmd = app.add_subcommand("train", "train an agent and write checkpoint, metrics and summary");
    add_common(train_cmd, train_f);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or a parameter-free policy");
    add_common(eval_cmd, eval_f);
    std::string checkpoint;
    std::optional<int> eval_episodes;
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->check(CLI::ExistingFile);
    eval_cmd->add_option("--eval-episodes", eval_episodes, "evaluation episodes")->check(CLI::PositiveNumber);

    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate over one parameter axis");
    add_common(sweep_cmd, sweep_f);
    std::string sweep_arg;
    int jobs = 1;
    sweep_cmd->add_option("--sweep", sweep_arg, "AXIS=v1,v2,...")->required();
    sweep_cmd->add_option("--jobs", jobs, "parallel sweep points")->check(CLI::PositiveNumber);

    auto* self_cmd = app.add_subcommand("selftest", "run the built-in correctness checks");
    bool quick = false;
    std::uint64_t self_seed = 7;
    self_cmd->add_flag("--quick", quick, "smaller sample sizes");
    self_cmd->add_option("--seed", self_seed, "seed for randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*train_cmd) {
            const auto spec = build_spec(train_f);
            if (!ehcr::is_trainable(spec.algorithm))
                throw ehcr::UsageError("algorithm '" + ehcr::to_string(spec.algorithm) +
                                       "' is not trainable; use eval");
            const auto r = ehcr::run_train(spec);
            std::cout << "trained " << ehcr::to_string(spec.algorithm) << " for " << r.history.size()
                      << " episodes; outputs in " << spec.out_dir << '\n';
            if (r.summary.contains("final")) {
                const auto n = r.history.size();
                print_metrics("final episodes", ehcr::mean_metrics(r.history, n - std::min<std::size_t>(n, 20), n));
            }
        } else if (*eval_cmd) {
            const auto spec = build_spec(eval_f);
            const bool needs_ckpt = spec.algorithm != ehcr::Algorithm::Random &&
                                    spec.algorithm != ehcr::Algorithm::ConstTRandom &&
                                    spec.algorithm != ehcr::Algorithm::Aor;
            if (needs_ckpt && checkpoint.empty())
                throw ehcr::UsageError("algorithm '" + ehcr::to_string(spec.algorithm) + "' needs --checkpoint");
            const int episodes = eval_episodes.value_or(spec.resolved_eval_episodes());
            const auto r = ehcr::run_eval(spec, needs_ckpt ? checkpoint : std::string{}, episodes);
            print_metrics("evaluation mean", ehcr::mean_metrics(r.history, 0, r.history.size()));
        } else if (*sweep_cmd) {
            auto spec = build_spec(sweep_f);
            const auto eq = sweep_arg.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == sweep_arg.size())
                throw ehcr::UsageError("--sweep expects AXIS=v1,v2,...");
            spec.sweep_axis = sweep_arg.substr(0, eq);
            std::stringstream ss(sweep_arg.substr(eq + 1));
            for (std::string v; std::getline(ss, v, ',');)
                if (!v.empty()) spec.sweep_values.push_back(v);
            const auto points = ehcr::run_sweep(spec, jobs);
            int failed = 0;
            for (const auto& pt : points) {
                if (pt.ok) {
                    std::cout << spec.sweep_axis << '=' << pt.value << ": anpl " << pt.metrics.anpl << ", reward "
                              << pt.metrics.avg_reward << '\n';
                } else {
                    ++failed;
                    std::cout << spec.sweep_axis << '=' << pt.value << ": error: " << pt.error << '\n';
                }
            }
            if (failed > 0) return kRuntime;
        } else if (*self_cmd) {
            const auto rep = ehcr::run_selftest({self_seed, quick});
            rep.print(std::cout);
            return rep.all_passed() ? kOk : kSelftest;
        }
    } catch (const ehcr::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ehcr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
