#include "ehcr/experiment.hpp"

#include "ehcr/errors.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace ehcr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Algorithm, std::string>>& algorithm_names() {
    static const std::vector<std::pair<Algorithm, std::string>> t = {
        {Algorithm::Aaddpg, "aaddpg"},        {Algorithm::Ddpg, "ddpg"},
        {Algorithm::Dqn, "dqn"},              {Algorithm::Greedy, "greedy"},
        {Algorithm::Random, "random"},        {Algorithm::ConstTAaddpg, "const_t_aaddpg"},
        {Algorithm::ConstTRandom, "const_t_random"}, {Algorithm::Aor, "aor"},
    };
    return t;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("option '" + key + "': not a number: '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("option '" + key + "': not an integer: '" + v + "'");
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw IoError("write failed: '" + path.string() + "'");
}

json number_or_null(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

} // namespace

std::string to_string(Algorithm a) {
    for (const auto& [k, v] : algorithm_names())
        if (k == a) return v;
    return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
    for (const auto& [k, v] : algorithm_names())
        if (v == s) return k;
    throw ConfigError("unknown algorithm '" + s + "'");
}

std::string to_string(AccessMode m) { return m == AccessMode::NOMA ? "noma" : "ofdm"; }

AccessMode access_mode_from_string(const std::string& s) {
    if (s == "noma") return AccessMode::NOMA;
    if (s == "ofdm") return AccessMode::OFDM;
    throw ConfigError("unknown access mode '" + s + "' (expected noma or ofdm)");
}

bool is_trainable(Algorithm a) {
    switch (a) {
    case Algorithm::Aaddpg:
    case Algorithm::Ddpg:
    case Algorithm::Dqn:
    case Algorithm::Greedy:
    case Algorithm::ConstTAaddpg: return true;
    default: return false;
    }
}

int ExperimentSpec::resolved_eval_episodes() const {
    if (eval_episodes >= 0) return eval_episodes;
    return std::max(1, (3 * schedule.episodes) / 7);
}

void apply_spec_key(ExperimentSpec& spec, const std::string& key, const std::string& v) {
    if (key == "episodes") {
        spec.schedule.episodes = static_cast<int>(to_long(key, v));
    } else if (key == "steps") {
        spec.schedule.steps = static_cast<int>(to_long(key, v));
    } else if (key == "gamma") {
        spec.ddpg.gamma = spec.dqn.gamma = to_double(key, v);
    } else if (key == "tau") {
        spec.ddpg.tau = spec.dqn.tau = to_double(key, v);
    } else if (key == "batch") {
        spec.ddpg.batch = spec.dqn.batch = static_cast<int>(to_long(key, v));
    } else if (key == "memory") {
        const long m = to_long(key, v);
        if (m <= 0) throw ConfigError("memory must be > 0");
        spec.ddpg.memory = spec.dqn.memory = static_cast<std::size_t>(m);
    } else if (key == "lr_actor") {
        spec.ddpg.lr_actor = to_double(key, v);
    } else if (key == "lr_critic") {
        spec.ddpg.lr_critic = to_double(key, v);
    } else if (key == "lr_dqn") {
        spec.dqn.lr = to_double(key, v);
    } else if (key == "noise_n0") {
        spec.ddpg.noise_n0 = to_double(key, v);
    } else if (key == "noise_floor") {
        spec.ddpg.noise_floor = to_double(key, v);
    } else if (key == "noise_floor_fraction") {
        spec.ddpg.noise_floor_fraction = to_double(key, v);
    } else if (key == "eval_episodes") {
        spec.eval_episodes = static_cast<int>(to_long(key, v));
    } else if (key == "algorithm") {
        spec.algorithm = algorithm_from_string(v);
    } else if (key == "mode") {
        spec.mode = access_mode_from_string(v);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void load_spec_file(ExperimentSpec& spec, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    std::map<std::string, std::string> extra;
    spec.params = parse_config(ss.str(), &extra, spec.params);
    for (const auto& [k, v] : extra) apply_spec_key(spec, k, v);
}

void apply_env_overrides(ExperimentSpec& spec, const std::function<const char*(const char*)>& getenv_fn) {
    auto upper = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };
    for (const auto& key : param_keys()) {
        const std::string var = "EHCR_" + upper(key);
        if (const char* v = getenv_fn(var.c_str())) apply_key_value(spec.params, key, v);
    }
    for (const char* key : {"episodes", "steps", "gamma", "tau", "batch", "memory", "lr_actor", "lr_critic", "lr_dqn",
                            "noise_n0", "noise_floor", "noise_floor_fraction", "eval_episodes", "algorithm", "mode"}) {
        const std::string var = "EHCR_" + upper(key);
        if (const char* v = getenv_fn(var.c_str())) apply_spec_key(spec, key, v);
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
    return splitmix64(master ^ fnv1a(purpose));
}

std::uint64_t sweep_point_seed(std::uint64_t master, const std::string& axis, const std::string& value) {
    return splitmix64(fnv1a(value, fnv1a("=", fnv1a(axis, splitmix64(master)))));
}

Topology make_topology(const ExperimentSpec& spec) {
    spec.params.validate();
    Rng rng(derive_seed(spec.params.seed, "topology"));
    return generate_topology(spec.params, rng);
}

Environment make_env(const ExperimentSpec& spec, std::string_view purpose) {
    Environment env(spec.params, make_topology(spec), derive_seed(spec.params.seed, purpose));
    env.set_access_mode(spec.mode);
    return env;
}

Trained train_algorithm(const ExperimentSpec& spec, const EpisodeCallback& on_episode) {
    if (!is_trainable(spec.algorithm))
        throw UsageError("algorithm '" + to_string(spec.algorithm) + "' has no trainable parameters");
    auto env = make_env(spec, "train");
    Rng rng(derive_seed(spec.params.seed, "agent"));
    Trained out;
    if (spec.algorithm == Algorithm::Dqn) {
        auto nets = make_dqn(env.obs_dim(), spec.dqn, rng);
        auto r = train_dqn(env, std::move(nets), spec.schedule, rng, on_episode);
        out.dqn = std::move(r.nets);
        out.history = std::move(r.history);
        out.transitions = r.transitions;
        return out;
    }
    DdpgConfig cfg = spec.ddpg;
    cfg.use_adjuster = spec.algorithm != Algorithm::Ddpg;
    cfg.action_dims = spec.algorithm == Algorithm::ConstTAaddpg ? 1 : 2;
    cfg.fixed_alpha = 0.5;
    auto nets = make_agent(env.obs_dim(), cfg, rng);
    auto r = train(env, std::move(nets), spec.schedule, rng, on_episode);
    out.agent = std::move(r.nets);
    out.history = std::move(r.history);
    out.transitions = r.transitions;
    out.first_update_at = r.first_update_at;
    return out;
}

std::unique_ptr<Policy> make_policy(const ExperimentSpec& spec, const Trained& trained) {
    auto need_agent = [&]() -> const AgentNets& {
        if (!trained.agent) throw ConfigError("algorithm '" + to_string(spec.algorithm) + "' needs a trained agent");
        return *trained.agent;
    };
    switch (spec.algorithm) {
    case Algorithm::Aaddpg:
    case Algorithm::Ddpg: return std::make_unique<DdpgPolicy>(need_agent());
    case Algorithm::Greedy: return std::make_unique<GreedyPolicy>(need_agent());
    case Algorithm::ConstTAaddpg: {
        const auto& a = need_agent();
        if (a.cfg.action_dims != 1) throw ConfigError("const_t_aaddpg needs a power-only agent");
        return std::make_unique<ConstantTPolicy>(PowerSource::Actor, &a);
    }
    case Algorithm::ConstTRandom: return std::make_unique<ConstantTPolicy>(PowerSource::Random, nullptr);
    case Algorithm::Random: return std::make_unique<RandomPolicy>();
    case Algorithm::Aor: return std::make_unique<AorPolicy>();
    case Algorithm::Dqn:
        if (!trained.dqn) throw ConfigError("dqn evaluation needs a trained Q-network");
        return std::make_unique<DqnPolicy>(*trained.dqn);
    }
    throw ConfigError("unsupported algorithm");
}

std::vector<EpisodeMetrics> evaluate(const ExperimentSpec& spec, Policy& policy, int episodes, std::string_view purpose) {
    auto env = make_env(spec, purpose);
    Rng rng(derive_seed(spec.params.seed, std::string(purpose) + "/policy"));
    std::vector<EpisodeMetrics> out;
    for (int e = 0; e < episodes; ++e) {
        auto obs = env.reset();
        MetricsAccumulator acc;
        for (int t = 0; t < spec.schedule.steps; ++t) {
            auto r = env.step_physical(policy.act(env, obs, rng));
            acc.add(r);
            obs = std::move(r.next_obs);
        }
        out.push_back(acc.finish());
    }
    return out;
}

json params_to_json(const SystemParams& p) {
    return json{
        {"M", p.M},
        {"N", p.N},
        {"BW", p.BW},
        {"T", p.T},
        {"C", p.C},
        {"lambda", p.lambda},
        {"P1", p.P1},
        {"P2", p.P2},
        {"p_p", p.p_p},
        {"p_max", p.p_max},
        {"E_max", p.E_max},
        {"B_max", p.B_max},
        {"eta", p.eta},
        {"noise_w", p.noise_w},
        {"noise_dbm", 10.0 * std::log10(p.noise_w / 1e-3)},
        {"R0", p.R0},
        {"R1", p.R1},
        {"E0", p.E0},
        {"wavelength", p.wavelength},
        {"d_s_range", {p.d_s_range.lo, p.d_s_range.hi}},
        {"d_p_range", {p.d_p_range.lo, p.d_p_range.hi}},
        {"w1", p.w1},
        {"w2", p.w2},
        {"w3", p.w3},
        {"seed", p.seed},
    };
}

json spec_to_json(const ExperimentSpec& spec) {
    const auto& d = spec.ddpg;
    return json{
        {"algorithm", to_string(spec.algorithm)},
        {"mode", to_string(spec.mode)},
        {"seed", spec.params.seed},
        {"params", params_to_json(spec.params)},
        {"schedule", {{"episodes", spec.schedule.episodes}, {"steps", spec.schedule.steps}}},
        {"training",
         {{"hidden", d.hidden},
          {"gamma", d.gamma},
          {"tau", d.tau},
          {"batch", d.batch},
          {"memory", d.memory},
          {"lr_actor", d.lr_actor},
          {"lr_critic", d.lr_critic},
          {"noise_n0", d.noise_n0},
          {"noise_floor", d.noise_floor},
          {"noise_floor_fraction", d.noise_floor_fraction},
          {"lr_dqn", spec.dqn.lr}}},
        {"eval_episodes", spec.resolved_eval_episodes()},
    };
}

json metrics_to_json(const EpisodeMetrics& m) {
    return json{{"avg_reward", number_or_null(m.avg_reward)}, {"anpl", number_or_null(m.anpl)},
                {"sumrate", number_or_null(m.sumrate)},       {"energy_eff", number_or_null(m.energy_eff)},
                {"avg_delay", number_or_null(m.avg_delay)}};
}

void save_checkpoint(const std::string& path, const ExperimentSpec& spec, const Trained& trained) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "ehcr-checkpoint v1\nalgorithm " << to_string(spec.algorithm) << "\nobs_dim " << (2 * spec.params.M + 3)
      << '\n';
    if (trained.dqn) {
        f << "kind dqn\n";
        save_dqn(f, *trained.dqn);
    } else if (trained.agent) {
        f << "kind agent\n";
        save_agent(f, *trained.agent);
    } else {
        throw UsageError("save_checkpoint: nothing trained");
    }
    if (!f) throw IoError("write failed: '" + path + "'");
}

Trained load_checkpoint(const std::string& path, const ExperimentSpec& spec) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    std::string tok, version, algo, kind;
    int obs_dim = 0;
    f >> tok >> version;
    if (tok != "ehcr-checkpoint" || version != "v1") throw CheckpointError("not a checkpoint file: '" + path + "'");
    f >> tok >> algo >> tok >> obs_dim >> tok >> kind;
    if (!f) throw CheckpointError("checkpoint header malformed");
    if (obs_dim != 2 * spec.params.M + 3)
        throw CheckpointError("checkpoint observation dimension " + std::to_string(obs_dim) + " does not match M=" +
                              std::to_string(spec.params.M));
    Trained t;
    if (kind == "dqn") {
        t.dqn = load_dqn(f);
        if (t.dqn->q.input_dim() != obs_dim) throw CheckpointError("checkpoint network input dimension mismatch");
    } else if (kind == "agent") {
        t.agent = load_agent(f);
        if (t.agent->actor.input_dim() != obs_dim) throw CheckpointError("checkpoint network input dimension mismatch");
    } else {
        throw CheckpointError("unknown checkpoint kind '" + kind + "'");
    }
    return t;
}

RunOutput run_train(const ExperimentSpec& spec) {
    spec.params.validate();
    auto trained = train_algorithm(spec);
    ensure_dir(spec.out_dir);
    const fs::path out(spec.out_dir);
    save_checkpoint((out / "checkpoint.txt").string(), spec, trained);
    export_csv((out / "train_metrics.csv").string(), trained.history);

    RunOutput r;
    r.history = trained.history;
    r.summary = spec_to_json(spec);
    r.summary["phase"] = "train";
    r.summary["transitions"] = trained.transitions;
    r.summary["first_update_at"] = trained.first_update_at;
    if (!trained.history.empty()) {
        const auto n = trained.history.size();
        r.summary["final"] = metrics_to_json(mean_metrics(trained.history, n - std::min<std::size_t>(n, 20), n));
    }
    write_text(out / "summary.json", r.summary.dump(2) + "\n");
    return r;
}

RunOutput run_eval(const ExperimentSpec& spec, const std::string& checkpoint, int episodes) {
    spec.params.validate();
    if (episodes < 1) throw UsageError("evaluation needs at least one episode");
    Trained trained;
    if (!checkpoint.empty()) trained = load_checkpoint(checkpoint, spec);
    auto policy = make_policy(spec, trained);
    RunOutput r;
    r.history = evaluate(spec, *policy, episodes);
    ensure_dir(spec.out_dir);
    const fs::path out(spec.out_dir);
    export_csv((out / "eval_metrics.csv").string(), r.history);
    r.summary = spec_to_json(spec);
    r.summary["phase"] = "eval";
    r.summary["checkpoint"] = checkpoint;
    r.summary["episodes"] = episodes;
    r.summary["mean"] = metrics_to_json(mean_metrics(r.history, 0, r.history.size()));
    write_text(out / "eval_summary.json", r.summary.dump(2) + "\n");
    return r;
}

std::vector<SweepPoint> run_sweep(const ExperimentSpec& spec, int jobs) {
    if (spec.sweep_axis.empty() || spec.sweep_values.empty()) throw UsageError("sweep needs an axis and values");
    const auto& keys = param_keys();
    if (std::find(keys.begin(), keys.end(), spec.sweep_axis) == keys.end() || spec.sweep_axis == "seed")
        throw UsageError("unknown sweep axis '" + spec.sweep_axis + "'");
    // Type-check every value up front.
    for (const auto& v : spec.sweep_values) {
        SystemParams probe = spec.params;
        apply_key_value(probe, spec.sweep_axis, v);
    }
    ensure_dir(spec.out_dir);
    const fs::path out(spec.out_dir);

    std::vector<SweepPoint> points(spec.sweep_values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            auto& pt = points[i];
            pt.value = spec.sweep_values[i];
            pt.seed = sweep_point_seed(spec.params.seed, spec.sweep_axis, pt.value);
            ExperimentSpec ps = spec;
            json summary;
            try {
                apply_key_value(ps.params, spec.sweep_axis, pt.value);
                ps.params.seed = pt.seed;
                ps.params.validate();
                Trained trained;
                if (is_trainable(ps.algorithm)) trained = train_algorithm(ps);
                auto policy = make_policy(ps, trained);
                const auto hist = evaluate(ps, *policy, ps.resolved_eval_episodes());
                pt.metrics = mean_metrics(hist, 0, hist.size());
                pt.ok = true;
                summary = spec_to_json(ps);
                summary["axis"] = spec.sweep_axis;
                summary["value"] = pt.value;
                summary["mean"] = metrics_to_json(pt.metrics);
            } catch (const std::exception& e) {
                pt.ok = false;
                pt.error = e.what();
                summary = json{{"axis", spec.sweep_axis}, {"value", pt.value}, {"seed", pt.seed}, {"error", pt.error}};
            }
            write_text(out / ("point_" + std::to_string(i) + ".json"), summary.dump(2) + "\n");
        }
    };
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv.imbue(std::locale::classic());
    csv.precision(15);
    csv << "axis,value,seed,status,avg_reward,anpl,sumrate,energy_eff,avg_delay\n";
    auto put = [&](double x) {
        if (std::isnan(x))
            csv << "nan";
        else
            csv << x;
    };
    for (const auto& pt : points) {
        csv << spec.sweep_axis << ',' << pt.value << ',' << pt.seed << ',' << (pt.ok ? "ok" : "error");
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        for (double x : {pt.ok ? pt.metrics.avg_reward : nan, pt.ok ? pt.metrics.anpl : nan,
                         pt.ok ? pt.metrics.sumrate : nan, pt.ok ? pt.metrics.energy_eff : nan,
                         pt.ok ? pt.metrics.avg_delay : nan}) {
            csv << ',';
            put(x);
        }
        csv << '\n';
    }
    write_text(out / "sweep.csv", csv.str());
    return points;
}

} // namespace ehcr
