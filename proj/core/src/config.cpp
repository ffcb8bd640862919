#include "mcem/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mcem/errors.hpp"

namespace mcem {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, int line,
                            const std::string& want, const std::string& got) {
    throw config_error("line " + std::to_string(line) + ": key '" + key +
                       "' expects " + want + ", got '" + got + "'");
}

double parse_f64(const std::string& key, const std::string& v, int line) {
    char* end = nullptr;
    errno = 0;
    double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
        bad_value(key, line, "a real number", v);
    return x;
}

std::int64_t parse_i64(const std::string& key, const std::string& v, int line) {
    char* end = nullptr;
    errno = 0;
    long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        bad_value(key, line, "an integer", v);
    return x;
}

int parse_int(const std::string& key, const std::string& v, int line) {
    std::int64_t x = parse_i64(key, v, line);
    if (x < -2147483648LL || x > 2147483647LL)
        bad_value(key, line, "a 32-bit integer", v);
    return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v, int line) {
    char* end = nullptr;
    errno = 0;
    if (!v.empty() && v[0] == '-') bad_value(key, line, "a nonnegative integer", v);
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        bad_value(key, line, "a nonnegative integer", v);
    return x;
}

bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_value(key, line, "true or false", v);
}

std::vector<double> parse_list_f64(const std::string& key, const std::string& v,
                                   int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_f64(key, trim(item), line));
    if (out.empty()) bad_value(key, line, "a comma-separated list of reals", v);
    return out;
}

std::vector<std::int64_t> parse_list_i64(const std::string& key,
                                         const std::string& v, int line) {
    std::vector<std::int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_i64(key, trim(item), line));
    if (out.empty()) bad_value(key, line, "a comma-separated list of integers", v);
    return out;
}

struct KeySpec {
    ConfigKeyInfo info;
    std::function<void(RunConfig&, const std::string&, int)> set;
};

// Single source of truth: the parser accepts exactly these keys and the
// help text lists exactly these keys.
const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = {
        {{"model", "lmm|glmm", "", "which model family to run"},
         [](RunConfig& c, const std::string& v, int) { c.model = v; }},
        {{"algorithm", "em|em-gradient|mcem|stable-mcem|mcem-adaptive", "",
          "which driver to run"},
         [](RunConfig& c, const std::string& v, int) { c.algorithm = v; }},
        {{"dataset", "builtin-bulls|synthetic|<path>", "by model",
          "data source; lmm defaults to builtin-bulls, glmm to synthetic"},
         [](RunConfig& c, const std::string& v, int) { c.dataset = v; }},
        {{"theta0", "comma-separated reals", "by model",
          "starting parameters; lmm: 55,45,260, glmm: 2,1"},
         [](RunConfig& c, const std::string& v, int line) {
             c.theta0 = parse_list_f64("theta0", v, line);
         }},
        {{"seed", "unsigned 64-bit integer", "",
          "random seed; required by the Monte Carlo algorithms"},
         [](RunConfig& c, const std::string& v, int line) {
             c.seed = parse_u64("seed", v, line);
         }},
        {{"out", "path", "trace.csv", "output CSV path"},
         [](RunConfig& c, const std::string& v, int) { c.out = v; }},
        {{"delta", "real > 0", "0.001",
          "guard constant in the relative-change stopping rule"},
         [](RunConfig& c, const std::string& v, int line) {
             c.delta = parse_f64("delta", v, line);
         }},
        {{"epsilon", "real > 0", "1e-06",
          "relative-change threshold of the stopping rule"},
         [](RunConfig& c, const std::string& v, int line) {
             c.epsilon = parse_f64("epsilon", v, line);
         }},
        {{"consecutive", "integer >= 1", "3",
          "small changes in a row needed to stop"},
         [](RunConfig& c, const std::string& v, int line) {
             c.consecutive = parse_int("consecutive", v, line);
         }},
        {{"max_iter", "integer >= 1", "500", "iteration cap"},
         [](RunConfig& c, const std::string& v, int line) {
             c.max_iter = parse_i64("max_iter", v, line);
         }},
        {{"schedule", "constant|polynomial", "constant",
          "per-iteration Monte Carlo sample size rule"},
         [](RunConfig& c, const std::string& v, int) { c.schedule = v; }},
        {{"m0", "integer >= 2", "1000",
          "base sample size; also the starting m for mcem-adaptive"},
         [](RunConfig& c, const std::string& v, int line) {
             c.m0 = parse_i64("m0", v, line);
         }},
        {{"alpha", "real > 1", "2",
          "polynomial schedule exponent (m_t = ceil(m0*(1+t)^alpha))"},
         [](RunConfig& c, const std::string& v, int line) {
             c.alpha = parse_f64("alpha", v, line);
         }},
        {{"r0", "comma-separated reals > 0", "1",
          "stable-mcem region radii; one value broadcasts to all components"},
         [](RunConfig& c, const std::string& v, int line) {
             c.r0 = parse_list_f64("r0", v, line);
         }},
        {{"growth_c", "real > 1", "2", "stable-mcem region growth factor"},
         [](RunConfig& c, const std::string& v, int line) {
             c.growth_c = parse_f64("growth_c", v, line);
         }},
        {{"batches", "integer >= 2", "10",
          "mcem-adaptive sub-updates per accuracy check"},
         [](RunConfig& c, const std::string& v, int line) {
             c.batches = parse_int("batches", v, line);
         }},
        {{"conf", "real in (0,1)", "0.95",
          "mcem-adaptive interval level (also the ascent check level)"},
         [](RunConfig& c, const std::string& v, int line) {
             c.conf = parse_f64("conf", v, line);
         }},
        {{"adapt_growth", "real > 1", "1.5",
          "mcem-adaptive sample size multiplier when swamped"},
         [](RunConfig& c, const std::string& v, int line) {
             c.adapt_growth = parse_f64("adapt_growth", v, line);
         }},
        {{"m_cap", "integer >= m0", "100000",
          "mcem-adaptive sample size ceiling"},
         [](RunConfig& c, const std::string& v, int line) {
             c.m_cap = parse_i64("m_cap", v, line);
         }},
        {{"burnin", "integer >= 0", "500",
          "glmm chain sweeps discarded before collecting draws"},
         [](RunConfig& c, const std::string& v, int line) {
             c.burnin = parse_i64("burnin", v, line);
         }},
        {{"quad_nodes", "integer >= 10", "32",
          "glmm quadrature nodes for loglik evaluation"},
         [](RunConfig& c, const std::string& v, int line) {
             c.quad_nodes = parse_int("quad_nodes", v, line);
         }},
        {{"gen_q", "integer >= 1", "10", "synthetic glmm: number of groups"},
         [](RunConfig& c, const std::string& v, int line) {
             c.gen_q = parse_int("gen_q", v, line);
         }},
        {{"gen_n", "integer >= 1", "15",
          "synthetic glmm: observations per group"},
         [](RunConfig& c, const std::string& v, int line) {
             c.gen_n = parse_int("gen_n", v, line);
         }},
        {{"gen_beta", "real", "6", "synthetic glmm: true slope"},
         [](RunConfig& c, const std::string& v, int line) {
             c.gen_beta = parse_f64("gen_beta", v, line);
         }},
        {{"gen_sigma2", "real > 0", "2",
          "synthetic glmm: true intercept variance"},
         [](RunConfig& c, const std::string& v, int line) {
             c.gen_sigma2 = parse_f64("gen_sigma2", v, line);
         }},
        {{"gen_seed", "unsigned 64-bit integer", "606",
          "synthetic glmm: generation seed"},
         [](RunConfig& c, const std::string& v, int line) {
             c.gen_seed = parse_u64("gen_seed", v, line);
         }},
        {{"exp_kind", "hit-prob|rate|mcem-error-scaling", "hit-prob",
          "which experiment the experiment command runs"},
         [](RunConfig& c, const std::string& v, int) { c.exp_kind = v; }},
        {{"exp_m_grid", "comma-separated integers >= 2", "100,1000,10000",
          "sample sizes the experiment sweeps over"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_m_grid = parse_list_i64("exp_m_grid", v, line);
         }},
        {{"exp_t0", "integer >= 1", "30",
          "hit-prob: iteration budget per run"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_t0 = parse_int("exp_t0", v, line);
         }},
        {{"exp_epsilon", "real > 0", "0.5", "hit-prob: target ball radius"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_epsilon = parse_f64("exp_epsilon", v, line);
         }},
        {{"exp_r", "integer >= 1", "50", "hit-prob: replicate runs per cell"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_r = parse_int("exp_r", v, line);
         }},
        {{"exp_standardized", "true|false", "false",
          "hit-prob: standardize distances by |target component|+1"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_standardized = parse_bool("exp_standardized", v, line);
         }},
        {{"exp_window", "integer >= 3", "10",
          "rate: number of tail ratios examined"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_window = parse_int("exp_window", v, line);
         }},
        {{"exp_seeds", "integer >= 1", "30",
          "mcem-error-scaling: replicates per sample size"},
         [](RunConfig& c, const std::string& v, int line) {
             c.exp_seeds = parse_int("exp_seeds", v, line);
         }},
    };
    return specs;
}

const KeySpec* find_key(const std::string& key) {
    for (const auto& spec : key_specs())
        if (key == spec.info.key) return &spec;
    return nullptr;
}

} // namespace

const std::vector<ConfigKeyInfo>& config_keys() {
    static const std::vector<ConfigKeyInfo> keys = [] {
        std::vector<ConfigKeyInfo> out;
        for (const auto& spec : key_specs()) out.push_back(spec.info);
        return out;
    }();
    return keys;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno) +
                               ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error("line " + std::to_string(lineno) +
                               ": missing key before '='");
        if (value.empty())
            throw config_error("line " + std::to_string(lineno) + ": key '" +
                               key + "' has an empty value");
        auto it = seen.find(key);
        if (it != seen.end())
            throw config_error("duplicate key '" + key + "' (lines " +
                               std::to_string(it->second) + " and " +
                               std::to_string(lineno) + ")");
        seen[key] = lineno;
        const KeySpec* spec = find_key(key);
        if (!spec)
            throw config_error("line " + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
        spec->set(cfg, value, lineno);
    }
    if (!seen.count("model"))
        throw config_error("missing required key 'model'");
    if (!seen.count("algorithm"))
        throw config_error("missing required key 'algorithm'");
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

void RunConfig::validate() const {
    if (model != "lmm" && model != "glmm")
        throw config_error("model must be 'lmm' or 'glmm', got '" + model + "'");
    if (algorithm != "em" && algorithm != "em-gradient" && algorithm != "mcem" &&
        algorithm != "stable-mcem" && algorithm != "mcem-adaptive")
        throw config_error("algorithm must be one of em, em-gradient, mcem, "
                           "stable-mcem, mcem-adaptive; got '" +
                           algorithm + "'");
    if (schedule != "constant" && schedule != "polynomial")
        throw config_error("schedule must be 'constant' or 'polynomial', got '" +
                           schedule + "'");
    if (exp_kind != "hit-prob" && exp_kind != "rate" &&
        exp_kind != "mcem-error-scaling")
        throw config_error("exp_kind must be one of hit-prob, rate, "
                           "mcem-error-scaling; got '" +
                           exp_kind + "'");

    if (model == "lmm" && dataset == "synthetic")
        throw config_error("dataset 'synthetic' is only available for glmm");
    if ((algorithm == "em" || algorithm == "em-gradient") && model != "lmm")
        throw config_error("algorithm '" + algorithm +
                           "' needs a model with closed-form updates (lmm)");

    const bool monte_carlo = algorithm == "mcem" || algorithm == "stable-mcem" ||
                             algorithm == "mcem-adaptive";
    if (monte_carlo && !seed)
        throw config_error("algorithm '" + algorithm + "' requires a seed");
    if (algorithm == "stable-mcem" && schedule != "polynomial")
        throw config_error("stable-mcem requires the polynomial schedule "
                           "(its theory needs summable 1/m_t)");

    if (!(delta > 0)) throw config_error("delta must be > 0");
    if (!(epsilon > 0)) throw config_error("epsilon must be > 0");
    if (consecutive < 1) throw config_error("consecutive must be >= 1");
    if (max_iter < 1) throw config_error("max_iter must be >= 1");
    if (m0 < 2) throw config_error("m0 must be >= 2");
    if (schedule == "polynomial" && !(alpha > 1.0))
        throw config_error("alpha must be > 1 for the polynomial schedule");
    for (double r : r0)
        if (!(r > 0)) throw config_error("r0 entries must be > 0");
    if (!(growth_c > 1)) throw config_error("growth_c must be > 1");
    if (batches < 2) throw config_error("batches must be >= 2");
    if (!(conf > 0 && conf < 1)) throw config_error("conf must lie in (0,1)");
    if (!(adapt_growth > 1)) throw config_error("adapt_growth must be > 1");
    if (algorithm == "mcem-adaptive") {
        if (m_cap < m0) throw config_error("m_cap must be >= m0");
        if (m0 < 2 * static_cast<std::int64_t>(batches))
            throw config_error("mcem-adaptive needs m0 >= 2*batches");
    }
    if (burnin < 0) throw config_error("burnin must be >= 0");
    if (quad_nodes < 10) throw config_error("quad_nodes must be >= 10");
    if (gen_q < 1) throw config_error("gen_q must be >= 1");
    if (gen_n < 1) throw config_error("gen_n must be >= 1");
    if (!(gen_sigma2 > 0)) throw config_error("gen_sigma2 must be > 0");
    if (exp_m_grid.empty()) throw config_error("exp_m_grid must be non-empty");
    for (std::int64_t m : exp_m_grid)
        if (m < 2) throw config_error("exp_m_grid entries must be >= 2");
    if (exp_t0 < 1) throw config_error("exp_t0 must be >= 1");
    if (!(exp_epsilon > 0)) throw config_error("exp_epsilon must be > 0");
    if (exp_r < 1) throw config_error("exp_r must be >= 1");
    if (exp_window < 3) throw config_error("exp_window must be >= 3");
    if (exp_seeds < 1) throw config_error("exp_seeds must be >= 1");

    if (!theta0.empty()) {
        const std::size_t want = (model == "lmm") ? 3 : 2;
        if (theta0.size() != want)
            throw config_error("theta0 needs " + std::to_string(want) +
                               " components for model '" + model + "'");
    }
}

std::string config_help_text() {
    std::ostringstream os;
    os << "Config file keys (key = value, one per line, '#' comments):\n";
    for (const auto& k : config_keys()) {
        os << "  " << k.key << " (" << k.type << ")";
        if (k.def[0] != '\0') os << " [default: " << k.def << "]";
        os << "\n      " << k.help << "\n";
    }
    os << "\nOutput CSV schemas (one row per grid cell / iteration):\n"
          "  run traces:         t,m,p,loglik,<component names...>\n"
          "  hit-prob:           m,R,T0,epsilon,hits,fraction\n"
          "  rate:               window,median_rate,cv,jacobian_rate\n"
          "  mcem-error-scaling: m,seeds,dev_<component>...\n"
          "The rate experiment reruns the deterministic EM with a tightened\n"
          "stop (epsilon 1e-12, max_iter >= 2000) so the tail ratios are\n"
          "measured against a fully converged target.\n";
    return os.str();
}

} // namespace mcem
