// cdfi command-line tool: analyze, verify, simulate, rerun.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdfi/error.hpp"
#include "cdfi/io.hpp"
#include "cdfi/moments.hpp"
#include "cdfi/params.hpp"
#include "cdfi/rates.hpp"
#include "cdfi/regime.hpp"
#include "cdfi/simulate.hpp"
#include "cdfi/stats.hpp"
#include "cdfi/transforms.hpp"
#include "cdfi/varenv.hpp"

namespace fs = std::filesystem;
using namespace cdfi;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0, kExitModel = 2, kExitConvergence = 3, kExitCheck = 4, kExitResource = 5;

const std::vector<std::string> kSuites = {"lln", "clt-t", "clt-x", "speed", "tail", "expmoment", "varenv"};

// Multi-valued keys may repeat in plan files and on the command line.
bool multi_key(const std::string& k) { return k == "param"; }

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Settings from a plan file overlaid by command-line flags.
class Settings {
public:
    void set(const std::string& key, const std::string& value) {
        if (multi_key(key)) values_[key].push_back(value);
        else values_[key] = {value};
    }
    void override_with(const Settings& o) {
        for (const auto& [k, v] : o.values_) values_[k] = v;
    }
    bool has(const std::string& k) const { return values_.count(k) > 0; }
    std::optional<std::string> str(const std::string& k) const {
        auto it = values_.find(k);
        if (it == values_.end()) return std::nullopt;
        return it->second.back();
    }
    std::vector<std::string> all(const std::string& k) const {
        auto it = values_.find(k);
        return it == values_.end() ? std::vector<std::string>{} : it->second;
    }
    double real(const std::string& k, double fallback) const {
        const auto s = str(k);
        if (!s) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(*s, &pos);
            if (pos != s->size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument(k + ": expected a number, got '" + *s + "'");
        }
    }
    std::int64_t integer(const std::string& k, std::int64_t fallback) const {
        const auto s = str(k);
        if (!s) return fallback;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(*s, &pos);
            if (pos != s->size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument(k + ": expected an integer, got '" + *s + "'");
        }
    }
    bool flag(const std::string& k) const {
        const auto s = str(k);
        if (!s) return false;
        if (*s == "true" || *s == "1" || *s == "yes") return true;
        if (*s == "false" || *s == "0" || *s == "no") return false;
        throw std::invalid_argument(k + ": expected true or false");
    }

    static Settings from_plan(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open plan file '" + path + "'");
        Settings s;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("plan file line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
            std::replace(key.begin(), key.end(), '-', '_');
            s.set(key, value);
        }
        return s;
    }

private:
    std::map<std::string, std::vector<std::string>> values_;
};

std::vector<double> parse_real_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": bad number '" + item + "'");
        }
    }
    return out;
}

// "a..b" or "n1,n2,...".
std::vector<std::int64_t> parse_levels(const std::string& s) {
    std::vector<std::int64_t> out;
    if (s.find("..") != std::string::npos) {
        const auto [a, b] = parse_level_range(s);
        if (b - a > 100000) throw std::invalid_argument("levels: range too long for an ensemble (max 100001 levels)");
        for (auto n = a; n <= b; ++n) out.push_back(n);
        return out;
    }
    for (double v : parse_real_list(s, "levels")) {
        if (v != std::floor(v)) throw std::invalid_argument("levels must be integers");
        out.push_back(std::int64_t(v));
    }
    return out;
}

// Up to k log-spaced distinct levels covering [a, b].
std::vector<std::int64_t> pick_levels(std::int64_t a, std::int64_t b, int k = 4) {
    std::set<std::int64_t> s{a, b};
    for (int i = 1; i + 1 < k; ++i)
        s.insert(std::llround(std::exp(std::log(double(a)) + (std::log(double(b)) - std::log(double(a))) * i / (k - 1))));
    return {s.rbegin(), s.rend()};
}

struct Context {
    std::string subcommand;
    std::vector<std::string> argv;  // as given, without the program name
    Settings settings;
    fs::path out_dir;
    bool quiet = false;
    int workers = 1;
    std::uint64_t seed = 0;
    bool seed_generated = false;
    json inputs = json::object();
    std::vector<fs::path> outputs;
    bool resource_limit = false;

    std::ostream discard{nullptr};

    std::ostream& log() { return quiet ? discard : std::cout; }
    std::ofstream open(const std::string& name) {
        fs::create_directories(out_dir);
        const auto p = out_dir / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
        outputs.push_back(p);
        return f;
    }
};

RateModel load_model(Context& ctx) {
    const auto& s = ctx.settings;
    const auto preset = s.str("preset"), path = s.str("model");
    if (preset && path) throw ModelError("give either --preset or --model, not both");
    if (!preset && !path) throw ModelError("no model: use --preset <name> or --model <file>");
    ParamList overrides;
    for (const auto& a : s.all("param")) {
        try {
            const auto [k, v] = parse_param_assignment(a);
            set_param(overrides, k, v);
        } catch (const std::invalid_argument& e) {
            throw ModelError(std::string("--param: ") + e.what());
        }
    }
    json src;
    RateModel m = [&] {
        if (preset) {
            src["preset"] = *preset;
            return RateModel::preset(*preset, overrides);
        }
        src["path"] = *path;
        src["file_digest"] = file_digest(*path);
        auto base = RateModel::from_file(*path);
        if (overrides.empty()) return base;
        ParamList merged = base.params();
        for (const auto& [k, v] : overrides) set_param(merged, k, v);
        return RateModel::preset(family_name(base.family()), merged);
    }();
    src["canonical"] = m.canonical();
    src["digest"] = hex64(fnv1a(m.canonical()));
    ctx.inputs["model"] = src;
    return m;
}

// ---------------------------------------------------------------------------------------------
// analyze

int cmd_analyze(Context& ctx) {
    const auto model = load_model(ctx);
    const auto [lo, hi] = parse_level_range(ctx.settings.str("levels").value_or("1..1000"));
    const double tol = ctx.settings.real("tol", 1e-9);
    const auto table = AnalysisTable::build(model, lo, hi, tol);
    {
        auto f = ctx.open("table.csv");
        table.write_csv(f);
    }
    const auto rep = regime(table);
    const auto report = check_assumptions(model);
    json r = json::parse(rep.to_json());
    json a;
    a["l_estimate"] = report.l_estimate;
    a["fitted_mu_index"] = report.fitted_mu_index;
    a["sum_inv_mu"] = std::string(verdict_name(report.sum_inv_mu));
    a["growth_sup"] = report.growth_sup;
    a["ratio_violation"] = report.ratio_violation;
    a["extinction_condition_holds"] = report.extinction_condition_holds;
    a["warnings"] = report.warnings;
    r["assumptions"] = a;
    const std::string text = r.dump(2) + "\n";
    {
        auto f = ctx.open("regime.json");
        f << text;
    }
    if (rep.regime == Regime::II && rep.alpha_estimate > 0 && rep.alpha_estimate <= 1 && report.l_estimate >= 0 &&
        report.l_estimate < 1) {
        const auto law = limit_law_fixed_point(report.l_estimate, rep.alpha_estimate, linear_grid(0.1, 10, 100));
        auto f = ctx.open("limit_law.csv");
        law.write_csv(f);
    }
    if (ctx.quiet) std::cout << text;
    ctx.log() << "regime " << regime_name(rep.regime) << ", alpha " << format_real(rep.alpha_estimate) << " on levels "
              << lo << ".." << hi << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// verify

std::vector<double> hitting_sample(const Ensemble& e, std::int64_t n) {
    std::vector<double> out;
    for (const auto& r : e.records)
        if (auto t = r.T(n)) out.push_back(*t);
    return out;
}

Entrance entrance_for(const RateModel& model, std::int64_t N0) {
    try {
        hitting_mean_from_infinity(model, N0);
        return Entrance::mean_offset;
    } catch (const ConvergenceError&) {
        return Entrance::finite;
    }
}

double model_index(const RateModel& model) {
    if (auto r = model.claimed_rv_index()) return *r;
    return check_assumptions(model).fitted_mu_index;
}

Ensemble run_ensemble(Context& ctx, const RateModel& model, EnsemblePlan plan) {
    plan.workers = ctx.workers;
    auto e = monte_carlo(model, plan);
    if (e.summary.runaway > 0) ctx.resource_limit = true;
    return e;
}

std::vector<CheckResult> suite_lln(Context& ctx, const RateModel& model) {
    const auto& s = ctx.settings;
    const auto [a, b] = parse_level_range(s.str("levels").value_or("10..100"));
    const auto levels = pick_levels(a, b);
    const std::int64_t reps = s.integer("reps", 10000);
    std::vector<CheckResult> out;
    std::int64_t N0 = s.integer("N0", 0);
    if (N0 == 0) {
        const auto proxy = infinity_proxy_check(model, b, {4 * b, 8 * b, 16 * b, 32 * b}, std::min<std::int64_t>(reps, 4000),
                                                ctx.seed, ctx.workers);
        CheckResult c;
        c.name = "proxy";
        c.statistic = proxy.ks.back();
        c.threshold = proxy.threshold;
        c.n = b;
        c.reps = std::min<std::int64_t>(reps, 4000);
        c.seed = ctx.seed;
        c.detail("direction", "two-sample KS of T_n between the two largest N0 <= 1% critical value");
        c.detail("outcome", proxy.outcome).detail("recommended_N0", double(proxy.recommended_N0));
        out.push_back(c.decide());
        N0 = proxy.stable ? proxy.recommended_N0 : proxy.N0s.back();
    }
    EnsemblePlan plan;
    plan.N0 = N0;
    plan.reps = reps;
    plan.levels = levels;
    plan.stop_level = levels.back();
    plan.entrance = entrance_for(model, N0);
    plan.keep_records = true;
    plan.master_seed = ctx.seed;
    const auto ens = run_ensemble(ctx, model, plan);
    for (auto n : levels) {
        auto c = lln_check(hitting_sample(ens, n), hitting_mean_from_infinity(model, n), {n, reps, ctx.seed});
        c.detail("N0", double(N0));
        out.push_back(c);
    }
    return out;
}

std::vector<CheckResult> suite_clt_t(Context& ctx, const RateModel& model) {
    const auto& s = ctx.settings;
    const auto [a, b] = parse_level_range(s.str("levels").value_or("50..100"));
    const auto levels = pick_levels(a, b, 3);
    const std::int64_t reps = s.integer("reps", 20000);
    const std::int64_t N0 = s.integer("N0", 20 * b);
    const auto table = AnalysisTable::build(model, a, 2 * b);
    const auto hyp = clt_hypotheses(table);
    EnsemblePlan plan;
    plan.N0 = N0;
    plan.reps = reps;
    plan.levels = levels;
    plan.stop_level = levels.back();
    plan.entrance = entrance_for(model, N0);
    plan.keep_records = true;
    plan.master_seed = ctx.seed;
    const auto ens = run_ensemble(ctx, model, plan);
    std::vector<CheckResult> out;
    for (auto n : levels) {
        const auto& row = table.at(n);
        auto c = clt_check_T(hitting_sample(ens, n), row.E_inf_T, row.var_T, {n, reps, ctx.seed}, hyp.holds);
        c.detail("variance_ratio_first", hyp.variance_ratio_first).detail("variance_ratio_last", hyp.variance_ratio_last);
        c.detail("third_ratio_first", hyp.third_ratio_first).detail("third_ratio_last", hyp.third_ratio_last);
        out.push_back(c);
    }
    return out;
}

std::vector<double> observation_times(Context& ctx, SpeedFunction& v, const std::vector<std::int64_t>& targets) {
    if (auto t = ctx.settings.str("obs_times")) return parse_real_list(*t, "obs-times");
    if (auto g = ctx.settings.str("t_grid")) return parse_grid(*g);
    std::vector<double> out;
    for (auto n : targets) out.push_back(v.E_inf_T(n));
    return out;
}

Ensemble speed_ensemble(Context& ctx, const RateModel& model, const std::vector<double>& times, SpeedFunction& v,
                        std::int64_t reps) {
    std::int64_t vmax = 1;
    for (double t : times) vmax = std::max(vmax, v(t));
    const std::int64_t N0 = ctx.settings.integer("N0", 20 * vmax);
    EnsemblePlan plan;
    plan.N0 = N0;
    plan.reps = reps;
    plan.observation_times = times;
    std::sort(plan.observation_times.begin(), plan.observation_times.end());
    plan.t_max = plan.observation_times.back();
    plan.entrance = entrance_for(model, N0);
    plan.keep_records = true;
    plan.master_seed = ctx.seed;
    return run_ensemble(ctx, model, plan);
}

std::vector<CheckResult> suite_clt_x(Context& ctx, const RateModel& model) {
    SpeedFunction v(model);
    auto times = observation_times(ctx, v, {100, 1000});
    const double rho = ctx.settings.real("rho", model_index(model));
    const auto ens = speed_ensemble(ctx, model, times, v, ctx.settings.integer("reps", 20000));
    return clt_check_X(ens.records, v, rho, {-1, ens.summary.replications, ctx.seed});
}

std::vector<CheckResult> suite_speed(Context& ctx, const RateModel& model) {
    SpeedFunction v(model);
    const auto times = observation_times(ctx, v, {100, 300, 1000});
    const auto ens = speed_ensemble(ctx, model, times, v, ctx.settings.integer("reps", 1000));
    auto checks = speed_ratio_check(ens.records, v, {-1, ens.summary.replications, ctx.seed});
    const auto& obs = ens.records.front().observation_times;
    for (std::size_t j = 0; j < checks.size(); ++j) {
        double sum = 0;
        std::int64_t cnt = 0;
        for (const auto& r : ens.records)
            if (r.observed_states[j] >= 0) {
                sum += obs[j] * double(r.observed_states[j]);
                ++cnt;
            }
        checks[j].detail("mean_tX", cnt ? sum / double(cnt) : std::numeric_limits<double>::quiet_NaN());
    }
    return checks;
}

std::vector<CheckResult> suite_tail(Context& ctx, const RateModel& model) {
    const auto& s = ctx.settings;
    TailOptions o;
    o.N0 = s.integer("N0", 400);
    o.reps = s.integer("reps", 100000);
    o.seed = ctx.seed;
    o.workers = ctx.workers;
    o.tolerance = s.real("tol", 0.1);
    std::vector<double> grid;
    if (auto g = s.str("t_grid")) {
        grid = parse_grid(*g);
    } else {
        if (!model.pure_death()) throw std::invalid_argument("tail: models with births need --t-grid");
        const auto [lo, hi] = suggest_tail_grid(model, o.N0, o.p_lo, o.p_hi);
        grid = log_grid(lo, hi, 20);
    }
    const auto method = model.pure_death() && !s.flag("mc") ? TailMethod::exact_hypoexp : TailMethod::mc;
    return {tail_index_check(model, method, grid, o)};
}

std::vector<CheckResult> suite_expmoment(Context& ctx, const RateModel& model) {
    const auto& s = ctx.settings;
    const double a = s.real("a", 1.0);
    const std::int64_t k_a = s.integer("k_a", model.absorbing_level() + 1);
    const std::int64_t k = s.integer("k", std::max<std::int64_t>(20, 2 * k_a));
    return {exp_moment_estimate(model, a, k, k_a, s.integer("reps", 10000), ctx.seed, ctx.workers)};
}

MildPhase parse_mild(const std::string& req) {
    const auto colon = req.find(':');
    const std::string kind = req.substr(0, colon);
    const double lambda = colon == std::string::npos ? 100.0 : std::stod(req.substr(colon + 1));
    if (kind == "constant") return MildPhase::constant_birth(lambda);
    if (kind == "yule") return MildPhase::yule(lambda);
    throw std::invalid_argument("mild phase must be constant[:lambda] or yule[:lambda]");
}

void write_survival(Context& ctx, const SurvivalEstimate& est) {
    auto f = ctx.open("survival.csv");
    est.write_csv(f);
    if (est.censored > 0) ctx.resource_limit = true;
}

std::vector<CheckResult> suite_varenv(Context& ctx, const RateModel& harsh) {
    const auto& s = ctx.settings;
    const double c = s.real("c", 1.0), beta = s.real("beta", 0.5), threshold = s.real("threshold", 1e-2);
    const std::int64_t K = s.integer("epochs", 1000), reps = s.integer("reps", 1000);
    CheckResult r;
    r.reps = reps;
    r.seed = ctx.seed;
    if (s.flag("counterexample")) {
        CounterexampleOptions co;
        const auto mild = parse_mild(s.str("mild").value_or("constant:100"));
        co.lambda = mild.lambda;
        co.yule = mild.kind == MildPhase::Kind::yule;
        const auto sched = counterexample_schedule(harsh, c, beta, K, co);
        {
            auto f = ctx.open("schedule.csv");
            sched.write_csv(f);
        }
        RunOptions ro;
        ro.workers = ctx.workers;
        ro.threshold = threshold;
        const auto est = run_schedule(sched, s.integer("N0", sched.initial_state), K, reps, ctx.seed, ro);
        write_survival(ctx, est);
        r.name = "varenv-survival";
        r.statistic = 1 - est.survival_lo;
        r.threshold = 1 - threshold;
        r.detail("direction", "survival lower bound at the horizon >= threshold");
        r.detail("survival", est.survival_prob).detail("survival_lo", est.survival_lo);
        r.detail("x_1", double(sched.initial_state));
        return {r.decide()};
    }
    CompminOptions co;
    co.workers = ctx.workers;
    co.threshold = threshold;
    co.N0 = s.integer("N0", 100);
    co.gap = s.real("gap", 1.0);
    const auto est = compmin_experiment(harsh, parse_mild(s.str("mild").value_or("constant:100")), c, beta, K, reps,
                                        ctx.seed, co);
    write_survival(ctx, est);
    r.name = "varenv-extinction";
    r.statistic = est.survival_prob;
    r.threshold = threshold;
    r.informative = !est.extinction_predicted.value_or(false);
    r.detail("direction", "survival at the horizon <= threshold (finite-horizon surrogate for extinction)");
    r.detail("rho", est.rho).detail("beta", beta).detail("monotone", est.monotone() ? "true" : "false");
    if (r.informative) r.detail("note", "beta >= rho - 1: extinction is not predicted; informative only");
    return {r.decide()};
}

int cmd_verify(Context& ctx, const std::string& suite) {
    if (std::find(kSuites.begin(), kSuites.end(), suite) == kSuites.end())
        throw std::invalid_argument("unknown suite '" + suite + "'");
    const auto model = load_model(ctx);
    std::vector<CheckResult> checks;
    if (suite == "lln") checks = suite_lln(ctx, model);
    else if (suite == "clt-t") checks = suite_clt_t(ctx, model);
    else if (suite == "clt-x") checks = suite_clt_x(ctx, model);
    else if (suite == "speed") checks = suite_speed(ctx, model);
    else if (suite == "tail") checks = suite_tail(ctx, model);
    else if (suite == "expmoment") checks = suite_expmoment(ctx, model);
    else checks = suite_varenv(ctx, model);

    {
        auto f = ctx.open("checks.csv");
        write_checks_csv(f, checks);
    }
    const std::string text = checks_to_json(checks) + "\n";
    {
        auto f = ctx.open("checks.json");
        f << text;
    }
    if (ctx.quiet) std::cout << text;
    bool ok = true;
    for (const auto& c : checks) {
        ctx.log() << (c.informative ? "INFO " : c.passed ? "PASS " : "FAIL ") << c.name
                  << (c.n >= 0 ? " n=" + std::to_string(c.n) : std::string()) << " statistic " << format_real(c.statistic)
                  << " threshold " << format_real(c.threshold) << "\n";
        if (!c.informative && !c.passed) ok = false;
    }
    if (ctx.resource_limit) {
        std::cerr << "cdfi: runaway or censored replicates hit the resource ceiling\n";
        return kExitResource;
    }
    return ok ? kExitOk : kExitCheck;
}

// ---------------------------------------------------------------------------------------------
// simulate

int cmd_simulate_varenv(Context& ctx, const RateModel& harsh) {
    const auto& s = ctx.settings;
    const double c = s.real("c", 1.0), beta = s.real("beta", 0.5);
    const std::int64_t reps = s.integer("reps", 1000);
    const auto mild = parse_mild(s.str("mild").value_or("constant:100"));
    EnvSchedule sched = [&] {
        if (auto path = s.str("schedule")) {
            std::ifstream in(*path);
            if (!in) throw std::invalid_argument("cannot open schedule file '" + *path + "'");
            ctx.inputs["schedule"] = json{{"path", *path}, {"file_digest", file_digest(*path)}};
            EnvSchedule e{harsh, mild, EnvSchedule::read_csv(in), std::nullopt, {}, {}, 0};
            e.validate();
            return e;
        }
        const std::int64_t K = s.integer("epochs", 1000);
        if (s.flag("counterexample")) {
            CounterexampleOptions co;
            co.lambda = mild.lambda;
            co.yule = mild.kind == MildPhase::Kind::yule;
            return counterexample_schedule(harsh, c, beta, K, co);
        }
        return make_schedule(harsh, mild, c, beta, K, s.real("gap", 1.0));
    }();
    if (!s.has("schedule")) {
        auto f = ctx.open("schedule.csv");
        sched.write_csv(f);
    }
    RunOptions ro;
    ro.workers = ctx.workers;
    ro.threshold = s.real("threshold", 1e-2);
    if (s.has("ceiling")) ro.ceiling = s.integer("ceiling", ro.ceiling);
    const std::int64_t N0 = s.integer("N0", sched.initial_state > 0 ? sched.initial_state : 100);
    const auto est = run_schedule(sched, N0, std::int64_t(sched.epochs.size()), reps, ctx.seed, ro);
    write_survival(ctx, est);
    ctx.log() << "survival after " << est.horizon << " epochs: " << format_real(est.survival_prob) << " ["
              << format_real(est.survival_lo) << ", " << format_real(est.survival_hi) << "]\n";
    return ctx.resource_limit ? kExitResource : kExitOk;
}

int cmd_simulate(Context& ctx) {
    const auto model = load_model(ctx);
    const auto& s = ctx.settings;
    if (s.has("schedule") || s.has("beta") || s.flag("counterexample")) return cmd_simulate_varenv(ctx, model);
    EnsemblePlan plan;
    plan.N0 = s.integer("N0", 1000);
    plan.reps = s.integer("reps", 1000);
    if (auto l = s.str("levels")) plan.levels = parse_levels(*l);
    if (auto g = s.str("t_grid")) plan.t_grid = parse_grid(*g);
    if (auto o = s.str("obs_times")) plan.observation_times = parse_real_list(*o, "obs-times");
    if (auto l = s.str("laplace")) plan.laplace_points = parse_real_list(*l, "laplace");
    plan.t_max = s.real("t_max", plan.t_max);
    plan.stop_level = s.integer("stop_level", -1);
    plan.ceiling = s.integer("ceiling", 0);
    plan.wilson_z = s.real("z", 3.0);
    const auto entrance = s.str("entrance").value_or("finite");
    if (entrance == "finite") plan.entrance = Entrance::finite;
    else if (entrance == "mean-offset" || entrance == "mean_offset") plan.entrance = Entrance::mean_offset;
    else throw std::invalid_argument("entrance must be finite or mean-offset");
    plan.keep_records = s.flag("trajectories");
    plan.master_seed = ctx.seed;
    const auto ens = run_ensemble(ctx, model, plan);
    {
        auto f = ctx.open("levels.csv");
        ens.summary.write_levels_csv(f);
    }
    if (!plan.laplace_points.empty()) {
        auto f = ctx.open("transforms.csv");
        ens.summary.write_transform_csv(f);
    }
    if (!plan.t_grid.empty()) {
        auto f = ctx.open("cdf.csv");
        ens.summary.write_cdf_csv(f);
    }
    if (plan.keep_records) {
        auto f = ctx.open("trajectories.csv");
        write_trajectories_csv(f, ens.records);
    }
    ctx.log() << ens.summary.replications << " replicates from N0 = " << plan.N0 << ", " << ens.summary.events
              << " events, " << ens.summary.runaway << " runaway, " << ens.summary.censored << " censored\n";
    return ctx.resource_limit ? kExitResource : kExitOk;
}

// ---------------------------------------------------------------------------------------------
// manifest and dispatch

std::string join_command(const std::vector<std::string>& argv) {
    std::string s = "cdfi";
    for (const auto& a : argv) {
        const bool plain = !a.empty() && a.find_first_of(" \t\"'\\$") == std::string::npos;
        s += " " + (plain ? a : "'" + a + "'");
    }
    return s;
}

void write_manifest(Context& ctx, int code, const std::string& status) {
    json m;
    m["tool"] = "cdfi";
    m["version"] = CDFI_VERSION;
    m["subcommand"] = ctx.subcommand;
    m["command_line"] = join_command(ctx.argv);
    m["argv"] = ctx.argv;
    m["seed"] = ctx.seed;
    m["seed_generated"] = ctx.seed_generated;
    m["workers"] = ctx.workers;
    m["inputs"] = ctx.inputs;
    json outs = json::array();
    for (const auto& p : ctx.outputs) {
        std::string digest;
        try {
            digest = file_digest(p.string());
        } catch (const std::exception&) {
        }
        outs.push_back({{"path", p.string()}, {"digest", digest}});
    }
    m["outputs"] = outs;
    m["status"] = status;
    m["exit_code"] = code;
    fs::create_directories(ctx.out_dir);
    std::ofstream f(ctx.out_dir / "manifest.json", std::ios::binary);
    f << m.dump(2) << "\n";
}

int workers_from(const Settings& s) {
    std::int64_t w = 1;
    if (s.has("workers")) w = s.integer("workers", 1);
    else if (const char* env = std::getenv("CDFI_WORKERS")) {
        try {
            w = std::stoll(env);
        } catch (const std::exception&) {
            throw std::invalid_argument("CDFI_WORKERS must be a positive integer");
        }
    }
    if (w < 1 || w > 1024) throw std::invalid_argument("workers must lie in 1..1024");
    return int(w);
}

struct CommonFlags {
    std::map<std::string, std::string> single;
    std::vector<std::string> params;
    std::string plan;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    const std::vector<std::pair<std::string, std::string>> opts = {
        {"--preset", "named model preset"},
        {"--model", "model file (key = value)"},
        {"--levels", "level range a..b (ensembles also accept n1,n2,...)"},
        {"--tol", "tolerance (analysis: relative series tolerance; tail: relative slope tolerance)"},
        {"--seed", "master seed (generated and recorded when absent)"},
        {"--workers", "worker threads (default: CDFI_WORKERS or 1)"},
        {"--reps", "Monte Carlo replicates"},
        {"--t-grid", "time grid a:b:steps or a:b:steps:log"},
        {"--out", "output directory (default: .)"},
        {"--N0", "starting level standing in for infinity"},
        {"--obs-times", "observation times t1,t2,..."},
        {"--laplace", "Laplace points a1,a2,..."},
        {"--entrance", "finite or mean-offset"},
        {"--t-max", "simulation horizon"},
        {"--stop-level", "stop each replicate at this level"},
        {"--ceiling", "runaway ceiling"},
        {"--trajectories", "write per-trajectory CSV (true/false)"},
        {"--rho", "regular-variation index override"},
        {"--mc", "tail suite: force Monte Carlo (true/false)"},
        {"--a", "exponential moment: a"},
        {"--k", "exponential moment: starting level k"},
        {"--k-a", "exponential moment: target level k_a"},
        {"--schedule", "environment schedule CSV i,a_i,t_i"},
        {"--mild", "mild phase: constant[:lambda] or yule[:lambda]"},
        {"--c", "schedule constant c in t_i = c / log^beta i"},
        {"--beta", "schedule exponent beta"},
        {"--epochs", "number of harsh epochs"},
        {"--gap", "mild gap length"},
        {"--counterexample", "build the survival counterexample schedule (true/false)"},
        {"--threshold", "survival threshold for the extinction surrogate"},
        {"--z", "Wilson interval z"},
    };
    for (const auto& [name, help] : opts) {
        std::string key = name.substr(2);
        std::replace(key.begin(), key.end(), '-', '_');
        sub->add_option(name, f.single[key], help);
    }
    sub->add_option("--param", f.params, "model parameter k=v (repeatable)");
    sub->add_option("--plan", f.plan, "plan file (key = value); flags override it");
    sub->add_flag("--quiet", f.quiet, "stdout carries only data");
}

int run(const std::vector<std::string>& argv);

int cmd_rerun(const std::string& manifest_path, const std::string& out, bool quiet) {
    std::ifstream in(manifest_path);
    if (!in) throw std::invalid_argument("cannot open manifest '" + manifest_path + "'");
    const json m = json::parse(in);
    for (const auto& key : {"model", "schedule", "plan"}) {
        if (!m["inputs"].contains(key)) continue;
        const auto& inp = m["inputs"][key];
        if (!inp.contains("file_digest")) continue;
        const auto path = inp["path"].get<std::string>();
        if (file_digest(path) != inp["file_digest"].get<std::string>())
            throw ModelError(std::string(key) + " file '" + path + "' changed since the manifest was written");
    }
    std::vector<std::string> argv;
    const auto old = m["argv"].get<std::vector<std::string>>();
    for (std::size_t i = 0; i < old.size(); ++i) {
        if (old[i] == "--out") {
            ++i;
            continue;
        }
        if (old[i].rfind("--out=", 0) == 0) continue;
        if (quiet && old[i] == "--quiet") continue;
        argv.push_back(old[i]);
    }
    const fs::path out_dir = out.empty() ? fs::path(manifest_path).parent_path() : fs::path(out);
    argv.push_back("--out");
    argv.push_back(out_dir.string());
    if (quiet) argv.push_back("--quiet");
    const int code = run(argv);
    bool same = true;
    for (const auto& o : m["outputs"]) {
        const auto name = fs::path(o["path"].get<std::string>()).filename();
        std::string now;
        try {
            now = file_digest((out_dir / name).string());
        } catch (const std::exception&) {
        }
        if (now != o["digest"].get<std::string>()) {
            std::cerr << "cdfi: output " << name.string() << " differs from the manifest\n";
            same = false;
        }
    }
    if (code != m["exit_code"].get<int>())
        std::cerr << "cdfi: exit code " << code << " differs from the recorded " << m["exit_code"].get<int>() << "\n";
    if (!quiet) std::cout << (same ? "reproduced " : "NOT reproduced ") << m["outputs"].size() << " outputs\n";
    return same && code == m["exit_code"].get<int>() ? kExitOk : kExitCheck;
}

int run(const std::vector<std::string>& argv) {
    CLI::App app{"cdfi: birth-death processes coming down from infinity"};
    app.set_version_flag("--version", CDFI_VERSION);
    app.require_subcommand(1);

    CommonFlags fa, fv, fs_;
    auto* analyze = app.add_subcommand("analyze", "exact per-level table and regime report");
    add_common(analyze, fa);
    auto* verify = app.add_subcommand("verify", "run a verification suite: lln, clt-t, clt-x, speed, tail, expmoment, varenv");
    std::string suite;
    verify->add_option("suite", suite, "suite name")->required();
    add_common(verify, fv);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensembles or varying-environment survival runs");
    add_common(simulate, fs_);
    auto* rerun = app.add_subcommand("rerun", "re-execute a run from its manifest and compare outputs");
    std::string manifest, rerun_out;
    bool rerun_quiet = false;
    rerun->add_option("manifest", manifest, "manifest.json")->required();
    rerun->add_option("--out", rerun_out, "output directory (default: the manifest's directory)");
    rerun->add_flag("--quiet", rerun_quiet, "stdout carries only data");

    std::vector<std::string> rev(argv.rbegin(), argv.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitModel;
    }

    if (rerun->parsed()) {
        try {
            return cmd_rerun(manifest, rerun_out, rerun_quiet);
        } catch (const ModelError& e) {
            std::cerr << "cdfi: " << e.what() << "\n";
            return kExitModel;
        } catch (const std::exception& e) {
            std::cerr << "cdfi: " << e.what() << "\n";
            return kExitModel;
        }
    }

    Context ctx;
    ctx.argv = argv;
    CommonFlags* flags = nullptr;
    if (analyze->parsed()) ctx.subcommand = "analyze", flags = &fa;
    else if (verify->parsed()) ctx.subcommand = "verify", flags = &fv;
    else ctx.subcommand = "simulate", flags = &fs_;
    ctx.quiet = flags->quiet;

    int code = kExitOk;
    std::string status = "ok";
    bool manifest_ready = false;
    try {
        Settings cli;
        auto* sub = analyze->parsed() ? analyze : verify->parsed() ? verify : simulate;
        for (const auto& [k, v] : flags->single) {
            std::string name = "--" + k;
            std::replace(name.begin() + 2, name.end(), '_', '-');
            if (sub->count(name) > 0) cli.set(k, v);
        }
        for (const auto& p : flags->params) cli.set("param", p);
        if (!flags->plan.empty()) {
            ctx.settings = Settings::from_plan(flags->plan);
            ctx.inputs["plan"] = json{{"path", flags->plan}, {"file_digest", file_digest(flags->plan)}};
            ctx.settings.override_with(cli);
        } else {
            ctx.settings = cli;
        }
        ctx.out_dir = ctx.settings.str("out").value_or(".");
        manifest_ready = true;
        ctx.workers = workers_from(ctx.settings);
        if (ctx.settings.has("seed")) {
            const auto v = ctx.settings.integer("seed", 0);
            if (v < 0) throw std::invalid_argument("seed must be >= 0");
            ctx.seed = std::uint64_t(v);
        } else {
            std::random_device rd;
            ctx.seed = ((std::uint64_t(rd()) << 32) | rd()) & 0x7fffffffffffffffULL;
            ctx.seed_generated = true;
            ctx.argv.push_back("--seed");
            ctx.argv.push_back(std::to_string(ctx.seed));
            if (!ctx.quiet) std::cerr << "cdfi: seed " << ctx.seed << " (generated)\n";
        }
        if (analyze->parsed()) code = cmd_analyze(ctx);
        else if (verify->parsed()) code = cmd_verify(ctx, suite);
        else code = cmd_simulate(ctx);
        if (code == kExitCheck) status = "checks failed";
        else if (code == kExitResource) status = "resource ceiling reached";
    } catch (const ModelError& e) {
        code = kExitModel;
        status = std::string("model error: ") + e.what();
    } catch (const ConvergenceError& e) {
        code = kExitConvergence;
        status = std::string("convergence error: ") + e.what();
    } catch (const ResourceError& e) {
        code = kExitResource;
        status = std::string("resource error: ") + e.what();
    } catch (const std::invalid_argument& e) {
        code = kExitModel;
        status = std::string("invalid argument: ") + e.what();
    } catch (const std::exception& e) {
        code = kExitModel;
        status = std::string("error: ") + e.what();
    }
    if (code != kExitOk && code != kExitCheck && code != kExitResource) std::cerr << "cdfi: " << status << "\n";
    if (manifest_ready) {
        try {
            write_manifest(ctx, code, status);
        } catch (const std::exception& e) {
            std::cerr << "cdfi: cannot write manifest: " << e.what() << "\n";
        }
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args);
}
