#include "nnloc/cli.hpp"

#include "nnloc/diagnostics.hpp"
#include "nnloc/errors.hpp"
#include "nnloc/parallel.hpp"
#include "nnloc/risk.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace nnloc {

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw InvalidParameter("unknown key '" + key + "' in " + where);
        }
    }
}

void require_object(const Json& j, const std::string& where) {
    if (!j.is_object()) {
        throw InvalidParameter(where + " must be a JSON object");
    }
}

double number(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw InvalidParameter(where + " needs a number '" + key + "'");
    }
    return j.at(key).get<double>();
}

std::uint64_t unsigned_number(const Json& j, const std::string& what) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        throw InvalidParameter(what + " must be a nonnegative integer");
    }
    return j.get<std::uint64_t>();
}

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::vector<double> number_list(const Json& j, const std::string& what) {
    if (!j.is_array()) {
        throw InvalidParameter(what + " must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) {
            throw InvalidParameter(what + " must be an array of numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// output

std::string with_suffix(const std::string& path, const std::string& suffix) {
    if (suffix.empty()) {
        return path;
    }
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return path + "_" + suffix;
    }
    return path.substr(0, dot) + "_" + suffix + path.substr(dot);
}

void emit(const RunConfig& cfg, const std::string& suffix, const std::string& content) {
    if (cfg.output_path.empty() || cfg.output_path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    const std::string path = with_suffix(cfg.output_path, suffix);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidParameter("cannot open output file " + path);
    }
    out << content;
    if (!out) {
        throw InvalidParameter("cannot write output file " + path);
    }
}

std::string csv_file(const RunConfig& cfg, const std::string& body) {
    return "# config " + cfg.to_json().dump() + "\n" + body;
}

std::string json_file(const RunConfig& cfg, const Json& result) {
    return Json{{"config", cfg.to_json()}, {"result", result}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// shared preconditions

struct Bound {
    ProblemSetup setup;
    Loss loss;
};

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw InvalidParameter(msg);
    }
}

void check_model_assumptions(const RunConfig& cfg) {
    const auto rep = check_assumptions(*cfg.model, *cfg.n, default_assumption_grid());
    if (!rep.passed) {
        const auto& v = rep.violations.front();
        std::ostringstream os;
        os << cfg.model->describe() << " violates the density assumption (" << to_string(v.kind) << " at t=" << v.t
           << ")";
        throw AssumptionError(os.str());
    }
}

Bound bind(const RunConfig& cfg, bool need_loss) {
    require(cfg.model.has_value(), "config needs 'model'");
    require(cfg.n.has_value(), "config needs 'n'");
    if (need_loss) {
        require(cfg.loss.has_value(), "config needs 'loss'");
    }
    check_model_assumptions(cfg);
    return Bound{ProblemSetup(*cfg.model, *cfg.n), cfg.loss ? *cfg.loss : Loss::power(2.0)};
}

bool use_mc(const RunConfig& cfg, const Loss& loss) {
    if (cfg.method == "quadrature") {
        return false;
    }
    if (cfg.method == "monte_carlo") {
        return true;
    }
    return !loss.convex() || (loss.power_family() && loss.p() < 1.0);
}

std::string l_tag(double l) {
    std::ostringstream os;
    os << "l" << l;
    return os.str();
}

// ---------------------------------------------------------------------------
// commands

int cmd_density_check(RunConfig& cfg) {
    require(cfg.model.has_value(), "config needs 'model'");
    require(cfg.n.has_value(), "config needs 'n'");
    const auto rep = check_assumptions(*cfg.model, *cfg.n, default_assumption_grid());
    Json result = rep.to_json();
    if (rep.passed) {
        result["normalizing_constant"] = normalizing_constant(*cfg.model, *cfg.n);
    }
    if (cfg.format == "json") {
        emit(cfg, "", json_file(cfg, result));
    } else {
        std::ostringstream os;
        os << "# " << Json{{"passed", rep.passed}, {"grid_size", rep.grid_size}, {"tolerance", rep.tolerance}}.dump()
           << "\n";
        if (rep.passed) {
            os << "# normalizing_constant " << fmt17(result.at("normalizing_constant").get<double>()) << "\n";
        }
        os << "t,kind,value\n";
        for (const auto& v : rep.violations) {
            os << fmt17(v.t) << "," << to_string(v.kind) << "," << fmt17(v.value) << "\n";
        }
        emit(cfg, "", csv_file(cfg, os.str()));
    }
    std::cerr << "density-check: " << cfg.model->describe() << ", n=" << *cfg.n << ": "
              << (rep.passed ? "assumptions hold" : "assumption violated") << "\n";
    return rep.passed ? kExitOk : kExitAssumption;
}

int cmd_g_table(RunConfig& cfg) {
    const Bound b = bind(cfg, true);
    if (cfg.l_values.empty()) {
        cfg.l_values = {0.0};
    }
    if (!cfg.y_grid) {
        cfg.y_grid = GridSpec::from_json("default_y", "y_grid");
    }
    std::vector<ShrinkTable> tables;
    for (double l : cfg.l_values) {
        try {
            tables.push_back(g_pi_table(b.setup, b.loss, l, cfg.y_grid->values));
        } catch (const Divergence& e) {
            throw Divergence("l=" + fmt17(l) + ": " + e.what());
        } catch (const NonNormalizable& e) {
            throw NonNormalizable("l=" + fmt17(l) + ": " + e.what());
        }
    }
    if (cfg.format == "json") {
        Json arr = Json::array();
        for (const auto& t : tables) {
            arr.push_back(t.to_json());
        }
        emit(cfg, "", json_file(cfg, arr));
    } else if (tables.size() == 1 || cfg.output_path.empty()) {
        std::string body;
        for (const auto& t : tables) {
            body += t.to_csv();
        }
        emit(cfg, "", csv_file(cfg, body));
    } else {
        for (const auto& t : tables) {
            emit(cfg, l_tag(t.l), csv_file(cfg, t.to_csv()));
        }
    }
    for (const auto& t : tables) {
        std::cerr << "g-table: l=" << t.l << " provenance=" << to_string(t.provenance)
                  << " right_limit=" << t.right_limit << (t.monotone ? "" : " (not monotone)") << "\n";
    }
    return kExitOk;
}

int cmd_risk_curve(RunConfig& cfg) {
    const Bound b = bind(cfg, true);
    require(!cfg.estimators.empty(), "risk-curve needs at least one entry in 'estimators'");
    if (!cfg.lambda_grid) {
        cfg.lambda_grid = GridSpec::from_json("dominance", "lambda_grid");
    }
    const bool mc = use_mc(cfg, b.loss);
    std::vector<std::pair<std::string, RiskCurve>> curves;
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) {
        const auto spec = cfg.estimators[i].build(b.setup, b.loss);
        auto c = mc ? risk_curve_mc(spec, cfg.lambda_grid->values, cfg.reps, lambda_seed(cfg.seed, 1000 + i))
                    : risk_curve(spec, cfg.lambda_grid->values, cfg.risk_spec);
        curves.emplace_back(cfg.estimators[i].tag(), std::move(c));
    }
    if (cfg.format == "json") {
        Json arr = Json::array();
        for (const auto& [tag, c] : curves) {
            arr.push_back(c.to_json());
        }
        emit(cfg, "", json_file(cfg, arr));
    } else if (curves.size() == 1 || cfg.output_path.empty()) {
        std::string body;
        for (const auto& [tag, c] : curves) {
            body += c.to_csv();
        }
        emit(cfg, "", csv_file(cfg, body));
    } else {
        for (const auto& [tag, c] : curves) {
            emit(cfg, tag, csv_file(cfg, c.to_csv()));
        }
    }
    std::cerr << "risk-curve: " << curves.size() << " estimator(s), " << cfg.lambda_grid->values.size()
              << " lambda points, " << (mc ? "Monte Carlo" : "quadrature") << "\n";
    return kExitOk;
}

int cmd_dominance(RunConfig& cfg) {
    const Bound b = bind(cfg, true);
    require(cfg.estimators.size() == 2, "dominance needs exactly two 'estimators': candidate, then reference");
    if (!cfg.lambda_grid) {
        cfg.lambda_grid = GridSpec::from_json("dominance", "lambda_grid");
    }
    const auto a = cfg.estimators[0].build(b.setup, b.loss);
    const auto ref = cfg.estimators[1].build(b.setup, b.loss);
    const bool mc = use_mc(cfg, b.loss);
    const auto rep = mc ? dominance_check_mc(a, ref, cfg.lambda_grid->values, cfg.reps, cfg.seed, cfg.mc_z)
                        : dominance_check(a, ref, cfg.lambda_grid->values, cfg.risk_spec);
    if (cfg.format == "json") {
        emit(cfg, "", json_file(cfg, rep.to_json()));
    } else {
        emit(cfg, "", csv_file(cfg, rep.to_csv()));
    }
    std::cerr << "dominance: " << a.describe() << " vs " << ref.describe() << ": " << to_string(rep.overall()) << "\n";
    return kExitOk;
}

int cmd_diagnostics(RunConfig& cfg) {
    const Bound b = bind(cfg, true);
    auto opt = DiagnosticsOptions::standard();
    if (cfg.lambda_grid) {
        opt.d_lambdas = cfg.lambda_grid->values;
        opt.w_lambdas = cfg.lambda_grid->values;
    } else {
        cfg.lambda_grid = GridSpec::from_json("diagnostics", "lambda_grid");
    }
    if (cfg.y_grid) {
        opt.psi_ys = cfg.y_grid->values;
        opt.d_ys = cfg.y_grid->values;
    } else {
        cfg.y_grid = GridSpec::from_json(Json{{"kind", "linspace"}, {"start", -3}, {"stop", 3}, {"count", 13}}, "y_grid");
    }
    if (!b.loss.power_family() || b.loss.p() < 1.0) {
        opt.w_ys.clear();
    }
    const auto rep = run_diagnostics(b.setup, b.loss, opt);
    if (cfg.format == "json") {
        emit(cfg, "", json_file(cfg, rep.to_json()));
    } else {
        const KFunction k(b.setup, b.loss);
        std::vector<double> lams{0.0};
        lams.insert(lams.end(), opt.psi_lambdas.begin(), opt.psi_lambdas.end());
        const auto g = psi_grid(b.setup, k, lams, opt.psi_ys, opt.psi_spec);
        emit(cfg, "", csv_file(cfg, "# report " + rep.to_json().dump() + "\n" +
                                        g.to_csv(Json{{"quantity", "psi"}, {"passed", rep.passed()}})));
    }
    std::cerr << "diagnostics: " << (rep.passed() ? "all checks pass" : "some checks fail") << "\n";
    return rep.passed() ? kExitOk : kExitAccuracy;
}

std::vector<double> read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidParameter("cannot read sample file " + path);
    }
    std::vector<double> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) {
                if (first) {
                    // header line
                    out.clear();
                    break;
                }
                throw InvalidParameter("sample file " + path + ": not a number: '" + tok + "'");
            }
            out.push_back(v);
        }
        if (!line.empty()) {
            first = false;
        }
    }
    return out;
}

int cmd_estimate(RunConfig& cfg) {
    require(cfg.model.has_value(), "config needs 'model'");
    require(cfg.loss.has_value(), "config needs 'loss'");
    require(cfg.sample.empty() || cfg.sample_csv.empty(), "give either 'sample' or 'sample_csv', not both");
    if (!cfg.sample_csv.empty()) {
        cfg.sample = read_sample_csv(cfg.sample_csv);
    }
    require(cfg.sample.size() >= 2, "estimate needs a sample of at least two observations");
    const auto cs = canonicalize(cfg.sample);
    if (cfg.n && *cfg.n != cs.n) {
        throw InvalidParameter("config n=" + std::to_string(*cfg.n) + " does not match the sample (n=" +
                               std::to_string(cs.n) + ")");
    }
    cfg.n = cs.n;
    if (cfg.estimators.empty()) {
        cfg.estimators.push_back(EstimatorDescriptor{});
    }
    const Bound b = bind(cfg, true);
    const double root_n = std::sqrt(static_cast<double>(cfg.sample.size()));
    Json rows = Json::array();
    std::ostringstream os;
    os << "# " << Json{{"x", cs.x}, {"s", cs.s}, {"n", cs.n}}.dump() << "\n";
    os << "estimator,mu_hat,theta_hat\n";
    for (const auto& d : cfg.estimators) {
        const auto spec = d.build(b.setup, b.loss);
        const double mu = spec.evaluate(cs.x, cs.s);
        rows.push_back({{"estimator", d.to_json()}, {"mu_hat", mu}, {"theta_hat", mu / root_n}});
        os << d.tag() << "," << fmt17(mu) << "," << fmt17(mu / root_n) << "\n";
    }
    if (cfg.format == "json") {
        emit(cfg, "", json_file(cfg, Json{{"x", cs.x}, {"s", cs.s}, {"n", cs.n}, {"estimates", rows}}));
    } else {
        emit(cfg, "", csv_file(cfg, os.str()));
    }
    return kExitOk;
}

int cmd_suite(RunConfig& cfg) {
    SuiteOptions opt;
    opt.tags = cfg.suite_tags;
    opt.tolerance = cfg.suite_tolerance;
    opt.seed = cfg.seed;
    opt.mc_reps = cfg.suite_mc_reps;
    const auto rep = run_suite(opt, [](const CriterionResult& r) { std::cerr << r.summary_line() << "\n"; });
    if (cfg.format == "json") {
        emit(cfg, "", json_file(cfg, rep.to_json()));
    } else {
        std::ostringstream os;
        os << "id,passed,failure,seconds,time_limit,measured,expected\n";
        for (const auto& r : rep.results) {
            os << r.id << "," << (r.passed ? "true" : "false") << "," << to_string(r.failure) << "," << fmt17(r.seconds)
               << "," << fmt17(r.time_limit) << "," << csv_quote(r.measured) << "," << csv_quote(r.expected) << "\n";
        }
        emit(cfg, "", csv_file(cfg, os.str()));
    }
    std::cerr << "suite: " << (rep.passed() ? "all criteria pass" : "some criteria fail") << "\n";
    return rep.exit_code();
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) {
        return RunConfig{};
    }
    std::ifstream in(path);
    if (!in) {
        throw InvalidParameter("cannot read config file " + path);
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidParameter("config file " + path + " is not valid JSON: " + e.what());
    }
    return RunConfig::from_json(j);
}

} // namespace

// ---------------------------------------------------------------------------

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const AssumptionError*>(&e)) {
        return kExitAssumption;
    }
    if (dynamic_cast<const Divergence*>(&e) || dynamic_cast<const NonNormalizable*>(&e)) {
        return kExitExistence;
    }
    if (dynamic_cast<const AccuracyNotReached*>(&e) || dynamic_cast<const NoRoot*>(&e) ||
        dynamic_cast<const ConsistencyError*>(&e) || dynamic_cast<const Singularity*>(&e)) {
        return kExitAccuracy;
    }
    return kExitConfig;
}

GridSpec GridSpec::from_json(const Json& j, const std::string& what) {
    GridSpec g;
    g.descriptor = j;
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "dominance") {
            g.values = dominance_lambda_grid();
        } else if (name == "diagnostics") {
            g.values = default_lambda_grid();
        } else if (name == "default_y") {
            g.values = default_y_grid();
        } else {
            throw InvalidParameter(what + ": unknown named grid '" + name + "'");
        }
    } else if (j.is_array()) {
        g.values = number_list(j, what);
    } else if (j.is_object()) {
        reject_unknown(j, {"kind", "start", "stop", "count"}, what);
        if (!j.contains("kind") || !j.at("kind").is_string()) {
            throw InvalidParameter(what + " needs a string 'kind'");
        }
        const std::string kind = j.at("kind").get<std::string>();
        const double a = number(j, "start", what);
        const double b = number(j, "stop", what);
        if (!j.contains("count")) {
            throw InvalidParameter(what + " needs 'count'");
        }
        const auto count = unsigned_number(j.at("count"), what + ".count");
        if (count < 1 || count > 1000000) {
            throw InvalidParameter(what + ".count must be in [1, 1e6]");
        }
        if (kind == "linspace") {
            g.values = linspace(a, b, count);
        } else if (kind == "logspace") {
            g.values = logspace(a, b, count);
        } else {
            throw InvalidParameter(what + ": unknown grid kind '" + kind + "'");
        }
    } else {
        throw InvalidParameter(what + " must be a name, an array or a grid object");
    }
    if (g.values.empty()) {
        throw InvalidParameter(what + " is empty");
    }
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (!std::isfinite(g.values[i]) || (i > 0 && !(g.values[i] > g.values[i - 1]))) {
            throw InvalidParameter(what + " must be finite and strictly increasing");
        }
    }
    return g;
}

EstimatorDescriptor EstimatorDescriptor::from_json(const Json& j) {
    require_object(j, "estimator");
    reject_unknown(j, {"kind", "l"}, "estimator");
    if (!j.contains("kind") || !j.at("kind").is_string()) {
        throw InvalidParameter("estimator needs a string 'kind'");
    }
    const std::string kind = j.at("kind").get<std::string>();
    EstimatorDescriptor d;
    if (kind == "mre") {
        d.kind = EstimatorKind::MRE;
    } else if (kind == "truncated_mre") {
        d.kind = EstimatorKind::TruncatedMRE;
    } else if (kind == "gen_bayes") {
        d.kind = EstimatorKind::GenBayes;
        d.l = j.contains("l") ? number(j, "l", "estimator") : 0.0;
        return d;
    } else {
        throw InvalidParameter("unknown estimator kind '" + kind + "'");
    }
    if (j.contains("l")) {
        throw InvalidParameter("'l' applies to gen_bayes estimators only");
    }
    return d;
}

Json EstimatorDescriptor::to_json() const {
    switch (kind) {
    case EstimatorKind::MRE:
        return Json{{"kind", "mre"}};
    case EstimatorKind::TruncatedMRE:
        return Json{{"kind", "truncated_mre"}};
    case EstimatorKind::GenBayes:
        return Json{{"kind", "gen_bayes"}, {"l", l}};
    }
    return Json::object();
}

std::string EstimatorDescriptor::tag() const {
    switch (kind) {
    case EstimatorKind::MRE:
        return "mre";
    case EstimatorKind::TruncatedMRE:
        return "truncated_mre";
    case EstimatorKind::GenBayes:
        return "gen_bayes_" + l_tag(l);
    }
    return "estimator";
}

EstimatorSpec EstimatorDescriptor::build(const ProblemSetup& setup, const Loss& loss) const {
    switch (kind) {
    case EstimatorKind::MRE:
        return EstimatorSpec::mre(setup, loss);
    case EstimatorKind::TruncatedMRE:
        return EstimatorSpec::truncated_mre(setup, loss);
    case EstimatorKind::GenBayes:
        return EstimatorSpec::gen_bayes(setup, loss, l);
    }
    throw InvalidParameter("unknown estimator kind");
}

RunConfig RunConfig::from_json(const Json& j) {
    require_object(j, "config");
    reject_unknown(j,
                   {"schema", "model", "n", "loss", "estimators", "l", "lambda_grid", "y_grid", "seed", "risk",
                    "tolerances", "sample", "sample_csv", "suite", "output"},
                   "config");
    if (!j.contains("schema") || !j.at("schema").is_number_integer() || j.at("schema").get<int>() != 1) {
        throw InvalidParameter("config needs \"schema\": 1");
    }
    RunConfig c;
    if (j.contains("model")) {
        c.model = ModelDensity::from_json(j.at("model"));
    }
    if (j.contains("n")) {
        const auto n = unsigned_number(j.at("n"), "n");
        if (n < 1 || n > 10000) {
            throw InvalidParameter("n must be in [1, 10000]");
        }
        c.n = static_cast<int>(n);
    }
    if (j.contains("loss")) {
        c.loss = Loss::from_json(j.at("loss"));
    }
    if (j.contains("estimators")) {
        if (!j.at("estimators").is_array()) {
            throw InvalidParameter("'estimators' must be an array");
        }
        for (const auto& e : j.at("estimators")) {
            c.estimators.push_back(EstimatorDescriptor::from_json(e));
        }
    }
    if (j.contains("l")) {
        c.l_values = number_list(j.at("l"), "l");
    }
    if (j.contains("lambda_grid")) {
        c.lambda_grid = GridSpec::from_json(j.at("lambda_grid"), "lambda_grid");
        if (c.lambda_grid->values.front() < 0.0) {
            throw InvalidParameter("lambda_grid must be >= 0");
        }
    }
    if (j.contains("y_grid")) {
        c.y_grid = GridSpec::from_json(j.at("y_grid"), "y_grid");
    }
    if (j.contains("seed")) {
        c.seed = unsigned_number(j.at("seed"), "seed");
    }
    if (j.contains("risk")) {
        const Json& r = j.at("risk");
        require_object(r, "risk");
        reject_unknown(r, {"method", "reps"}, "risk");
        if (r.contains("method")) {
            if (!r.at("method").is_string()) {
                throw InvalidParameter("risk.method must be a string");
            }
            c.method = r.at("method").get<std::string>();
            if (c.method != "auto" && c.method != "quadrature" && c.method != "monte_carlo") {
                throw InvalidParameter("risk.method must be auto, quadrature or monte_carlo");
            }
        }
        if (r.contains("reps")) {
            c.reps = unsigned_number(r.at("reps"), "risk.reps");
            if (c.reps < 2) {
                throw InvalidParameter("risk.reps must be at least 2");
            }
        }
    }
    if (j.contains("tolerances")) {
        const Json& t = j.at("tolerances");
        require_object(t, "tolerances");
        reject_unknown(t, {"rel_tol", "abs_tol", "max_subdivisions", "mc_z"}, "tolerances");
        if (t.contains("rel_tol")) {
            c.risk_spec.rel_tol = number(t, "rel_tol", "tolerances");
        }
        if (t.contains("abs_tol")) {
            c.risk_spec.abs_tol = number(t, "abs_tol", "tolerances");
        }
        if (t.contains("max_subdivisions")) {
            c.risk_spec.max_subdivisions = static_cast<int>(unsigned_number(t.at("max_subdivisions"), "max_subdivisions"));
        }
        c.risk_spec.validate();
        if (t.contains("mc_z")) {
            c.mc_z = number(t, "mc_z", "tolerances");
            if (!(c.mc_z > 0.0)) {
                throw InvalidParameter("tolerances.mc_z must be positive");
            }
        }
    }
    if (j.contains("sample")) {
        c.sample = number_list(j.at("sample"), "sample");
    }
    if (j.contains("sample_csv")) {
        if (!j.at("sample_csv").is_string()) {
            throw InvalidParameter("sample_csv must be a path string");
        }
        c.sample_csv = j.at("sample_csv").get<std::string>();
    }
    if (j.contains("suite")) {
        const Json& s = j.at("suite");
        require_object(s, "suite");
        reject_unknown(s, {"tags", "tolerance", "mc_reps"}, "suite");
        if (s.contains("tags")) {
            if (!s.at("tags").is_array()) {
                throw InvalidParameter("suite.tags must be an array of strings");
            }
            for (const auto& t : s.at("tags")) {
                if (!t.is_string()) {
                    throw InvalidParameter("suite.tags must be an array of strings");
                }
                c.suite_tags.push_back(t.get<std::string>());
            }
        }
        if (s.contains("tolerance")) {
            c.suite_tolerance = number(s, "tolerance", "suite");
            if (!(*c.suite_tolerance > 0.0)) {
                throw InvalidParameter("suite.tolerance must be positive");
            }
        }
        if (s.contains("mc_reps")) {
            c.suite_mc_reps = unsigned_number(s.at("mc_reps"), "suite.mc_reps");
        }
    }
    if (j.contains("output")) {
        const Json& o = j.at("output");
        require_object(o, "output");
        reject_unknown(o, {"path", "format"}, "output");
        if (o.contains("path")) {
            if (!o.at("path").is_string()) {
                throw InvalidParameter("output.path must be a string");
            }
            c.output_path = o.at("path").get<std::string>();
        }
        if (o.contains("format")) {
            if (!o.at("format").is_string()) {
                throw InvalidParameter("output.format must be a string");
            }
            c.format = o.at("format").get<std::string>();
        }
    }
    if (c.format != "csv" && c.format != "json") {
        throw InvalidParameter("output format must be csv or json");
    }
    return c;
}

Json RunConfig::to_json() const {
    Json j{{"schema", 1}};
    if (model) {
        j["model"] = model->to_json();
    }
    if (n) {
        j["n"] = *n;
    }
    if (loss) {
        j["loss"] = loss->to_json();
    }
    if (!estimators.empty()) {
        Json e = Json::array();
        for (const auto& d : estimators) {
            e.push_back(d.to_json());
        }
        j["estimators"] = e;
    }
    if (!l_values.empty()) {
        j["l"] = l_values;
    }
    if (lambda_grid) {
        j["lambda_grid"] = lambda_grid->descriptor;
    }
    if (y_grid) {
        j["y_grid"] = y_grid->descriptor;
    }
    j["seed"] = seed;
    j["risk"] = {{"method", method}, {"reps", reps}};
    j["tolerances"] = {{"rel_tol", risk_spec.rel_tol},
                       {"abs_tol", risk_spec.abs_tol},
                       {"max_subdivisions", risk_spec.max_subdivisions},
                       {"mc_z", mc_z}};
    if (!sample.empty()) {
        j["sample"] = sample;
    }
    if (!sample_csv.empty()) {
        j["sample_csv"] = sample_csv;
    }
    Json s{{"tags", suite_tags}, {"mc_reps", suite_mc_reps}};
    if (suite_tolerance) {
        s["tolerance"] = *suite_tolerance;
    }
    j["suite"] = s;
    j["output"] = {{"path", output_path}, {"format", format}};
    return j;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Estimation of a nonnegative location parameter with unknown scale"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string format;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> tags;
    std::optional<double> tolerance;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(RunConfig&);
        bool needs_config;
    };
    const Command commands[] = {
        {"density-check", "check the density shape assumption and normalizability", cmd_density_check, true},
        {"g-table", "tabulate the generalized Bayes shrink function for each l", cmd_g_table, true},
        {"risk-curve", "risk of each estimator over a lambda grid", cmd_risk_curve, true},
        {"dominance", "compare the risk of two estimators over a lambda grid", cmd_dominance, true},
        {"diagnostics", "psi, D and tail-probability diagnostics of the l = 0 estimator", cmd_diagnostics, true},
        {"estimate", "estimate mu and theta from a raw i.i.d. sample", cmd_estimate, true},
        {"suite", "run the acceptance battery", cmd_suite, false},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        auto* opt = sub->add_option("--config", config_path, "run configuration (JSON, schema 1)");
        if (c.needs_config) {
            opt->required();
        }
        sub->add_option("--out", out_path, "output path (default: stdout)");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
        sub->add_option("--tag", tags, "criterion tag or id filter (repeatable)");
        if (std::string(c.name) == "suite") {
            sub->add_option("--tolerance", tolerance, "replace every tolerance of the battery")
                ->check(CLI::PositiveNumber);
        }
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        for (const auto& [sub, cmd] : subs) {
            if (!sub->parsed()) {
                continue;
            }
            RunConfig cfg = load_config(config_path);
            if (!out_path.empty()) {
                cfg.output_path = out_path;
            }
            if (!format.empty()) {
                cfg.format = format;
            }
            if (seed) {
                cfg.seed = *seed;
            }
            if (threads) {
                set_default_threads(*threads);
            }
            cfg.suite_tags.insert(cfg.suite_tags.end(), tags.begin(), tags.end());
            if (tolerance) {
                cfg.suite_tolerance = tolerance;
            }
            return cmd->run(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "nnloc: error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitConfig;
}

} // namespace nnloc
