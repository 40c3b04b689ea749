#include "epflow/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace epflow {

namespace pt = boost::property_tree;

const char* scenario_name(Scenario s)
{
    switch (s) {
    case Scenario::affine: return "affine";
    case Scenario::field_validation: return "field_validation";
    case Scenario::radial: return "radial";
    case Scenario::full3d: return "full3d";
    case Scenario::norms: return "norms";
    case Scenario::sweep: return "sweep";
    }
    return "unknown";
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys()
{
    static const std::map<std::string, std::set<std::string>> keys = {
        {"run", {"scenario", "out", "threads"}},
        {"gas", {"gamma", "delta", "field_sign"}},
        {"affine", {"A0", "A1", "t_end", "rtol", "atol", "picard_T", "linear_rel_tol", "fit_lo", "fit_hi"}},
        {"grid", {"n_r", "n_theta", "n_phi", "radial_n_r"}},
        {"stepper", {"cfl", "max_dt", "cadence", "field_on", "abort_on_apriori", "rule", "tau_max", "n_steps", "dt",
                     "snapshot_every"}},
        {"data", {"t1", "t3", "v1", "v3", "theta_lin", "theta_rot", "v_lin", "v_rot"}},
        {"norms", {"N", "gammas"}},
        {"field", {"poisson", "identities", "lambda", "center_rule", "base_rule", "levels"}},
        {"sweep", {"delta", "gamma", "response"}},
        {"checks", {"scattering", "curl_transport"}},
    };
    return keys;
}

[[noreturn]] void bad(const std::string& key, const std::string& why)
{
    throw Error(ErrorCode::config, "config key " + key + ": " + why);
}

std::vector<double> numbers(const std::string& key, const std::string& text)
{
    std::string s = text;
    for (char& c : s)
        if (c == ',') c = ' ';
    std::istringstream is(s);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) bad(key, "not a number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

class Reader {
public:
    explicit Reader(const pt::ptree& t) : t_(t) {}

    const pt::ptree::value_type* find(const std::string& sec, const std::string& key) const
    {
        auto s = t_.find(sec);
        if (s == t_.not_found()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.not_found() ? nullptr : &*k;
    }
    void real(const std::string& sec, const std::string& key, double& v) const
    {
        if (auto* e = find(sec, key)) v = one(sec + "." + key, e->second.data());
    }
    void integer(const std::string& sec, const std::string& key, int& v) const
    {
        if (auto* e = find(sec, key)) {
            double x = one(sec + "." + key, e->second.data());
            if (x != static_cast<int>(x)) bad(sec + "." + key, "expected an integer");
            v = static_cast<int>(x);
        }
    }
    void flag(const std::string& sec, const std::string& key, bool& v) const
    {
        if (auto* e = find(sec, key)) {
            const std::string& s = e->second.data();
            if (s == "true" || s == "1" || s == "yes") v = true;
            else if (s == "false" || s == "0" || s == "no") v = false;
            else bad(sec + "." + key, "expected true or false");
        }
    }
    void text(const std::string& sec, const std::string& key, std::string& v) const
    {
        if (auto* e = find(sec, key)) v = e->second.data();
    }
    void list(const std::string& sec, const std::string& key, std::vector<double>& v) const
    {
        if (auto* e = find(sec, key)) v = numbers(sec + "." + key, e->second.data());
    }
    void matrix(const std::string& sec, const std::string& key, Mat3& m) const
    {
        if (auto* e = find(sec, key)) {
            auto v = numbers(sec + "." + key, e->second.data());
            if (v.size() != 9) bad(sec + "." + key, "expected 9 numbers (row major)");
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) m(i, j) = v[3 * i + j];
        }
    }
    void rule(const std::string& sec, const std::string& key, PolarRule& r) const
    {
        if (auto* e = find(sec, key)) {
            auto v = numbers(sec + "." + key, e->second.data());
            if (v.size() != 3) bad(sec + "." + key, "expected n_u n_psi n_rho");
            for (double x : v)
                if (!(x >= 1.0) || x != static_cast<int>(x)) bad(sec + "." + key, "counts must be positive integers");
            r.n_u = static_cast<int>(v[0]);
            r.n_psi = static_cast<int>(v[1]);
            r.n_rho = static_cast<int>(v[2]);
        }
    }

private:
    static double one(const std::string& key, const std::string& s)
    {
        auto v = numbers(key, s);
        if (v.size() != 1) bad(key, "expected a single number");
        return v.front();
    }
    const pt::ptree& t_;
};

bool is_isotropic(const Mat3& M) { return (M - M(0, 0) * Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

RunConfig parse_config(const std::string& text)
{
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::config, std::string("config parse error: ") + e.what());
    }
    for (const auto& [sec, body] : tree) {
        auto s = known_keys().find(sec);
        if (s == known_keys().end()) throw Error(ErrorCode::config, "unknown config section [" + sec + "]");
        if (!body.data().empty()) throw Error(ErrorCode::config, "key '" + sec + "' outside any section");
        for (const auto& [key, v] : body)
            if (!s->second.count(key)) throw Error(ErrorCode::config, "unknown config key " + sec + "." + key);
    }

    Reader r(tree);
    RunConfig c;
    std::string scen;
    r.text("run", "scenario", scen);
    if (scen.empty()) throw Error(ErrorCode::config, "config key run.scenario is required");
    bool found = false;
    for (Scenario s : {Scenario::affine, Scenario::field_validation, Scenario::radial, Scenario::full3d,
                       Scenario::norms, Scenario::sweep})
        if (scen == scenario_name(s)) {
            c.scenario = s;
            found = true;
        }
    if (!found) bad("run.scenario", "unknown scenario '" + scen + "'");
    r.text("run", "out", c.out_dir);
    r.integer("run", "threads", c.threads);

    double gamma = c.params.gamma, delta = c.params.delta;
    int sign = c.params.field_sign;
    r.real("gas", "gamma", gamma);
    r.real("gas", "delta", delta);
    r.integer("gas", "field_sign", sign);
    if (!(gamma > 1.0)) bad("gas.gamma", "must exceed 1");
    c.params = GasParams::make(gamma, delta, sign);

    r.matrix("affine", "A0", c.A0);
    r.matrix("affine", "A1", c.A1);
    r.real("affine", "t_end", c.t_end);
    r.real("affine", "rtol", c.tol.rtol);
    r.real("affine", "atol", c.tol.atol);
    r.real("affine", "picard_T", c.picard_T);
    r.real("affine", "linear_rel_tol", c.linear_rel_tol);
    r.real("affine", "fit_lo", c.fit_lo);
    r.real("affine", "fit_hi", c.fit_hi);

    r.integer("grid", "n_r", c.grid_n_r);
    r.integer("grid", "n_theta", c.grid_n_theta);
    r.integer("grid", "n_phi", c.grid_n_phi);
    r.integer("grid", "radial_n_r", c.radial_n_r);

    StepperConfig& s = c.stepper;
    r.real("stepper", "cfl", s.cfl);
    r.real("stepper", "max_dt", s.max_dt);
    r.integer("stepper", "cadence", s.cadence);
    r.flag("stepper", "field_on", s.field_on);
    r.flag("stepper", "abort_on_apriori", s.abort_on_apriori);
    r.rule("stepper", "rule", s.rule);
    r.real("stepper", "tau_max", c.tau_max);
    r.integer("stepper", "n_steps", c.n_steps);
    r.real("stepper", "dt", c.dt);
    r.integer("stepper", "snapshot_every", c.snapshot_every);
    s.mode = c.scenario == Scenario::full3d ? StepMode::full_3d : StepMode::radial_1d;

    r.real("data", "t1", c.radial_data.t1);
    r.real("data", "t3", c.radial_data.t3);
    r.real("data", "v1", c.radial_data.v1);
    r.real("data", "v3", c.radial_data.v3);
    r.matrix("data", "theta_lin", c.full3d_data.theta_lin);
    r.real("data", "theta_rot", c.full3d_data.theta_rot);
    r.matrix("data", "v_lin", c.full3d_data.v_lin);
    r.real("data", "v_rot", c.full3d_data.v_rot);

    r.integer("norms", "N", c.norm_order);
    r.list("norms", "gammas", c.norm_gammas);

    r.flag("field", "poisson", c.field_poisson);
    r.flag("field", "identities", c.field_identities);
    r.matrix("field", "lambda", c.Lambda);
    r.rule("field", "center_rule", c.center_rule);
    r.rule("field", "base_rule", c.base_rule);
    r.integer("field", "levels", c.levels);

    r.list("sweep", "delta", c.sweep_delta);
    r.list("sweep", "gamma", c.sweep_gamma);
    r.flag("sweep", "response", c.sweep_response);

    r.flag("checks", "scattering", c.check_scattering);
    r.flag("checks", "curl_transport", c.check_curl_transport);
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void RunConfig::validate() const
{
    auto wrap = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::config) throw;
            throw Error(ErrorCode::config, e.what());
        }
    };
    const bool dynamics = scenario == Scenario::radial || scenario == Scenario::full3d ||
                          (scenario == Scenario::sweep && sweep_response);
    wrap([&] { params.validate(dynamics); });
    if (out_dir.empty()) bad("run.out", "must not be empty");
    if (threads < 1) bad("run.threads", "must be >= 1");
    if (!(t_end > 0.0)) bad("affine.t_end", "must be positive");
    if (!(tol.rtol > 0.0 && tol.atol > 0.0)) bad("affine.rtol", "tolerances must be positive");
    if (!(picard_T >= 0.0 && picard_T <= t_end)) bad("affine.picard_T", "must lie in [0, t_end]");
    if (!(linear_rel_tol > 0.0)) bad("affine.linear_rel_tol", "must be positive");
    if (!(fit_lo > 0.0 && fit_hi > fit_lo)) bad("affine.fit_lo", "need 0 < fit_lo < fit_hi");
    if (!(A0.determinant() > 0.0)) bad("affine.A0", "det A0 must be positive");
    if (!(A1.determinant() > 0.0)) bad("affine.A1", "det A1 must be positive");
    if (grid_n_r < 4 || grid_n_theta < 4 || grid_n_phi < 4 || grid_n_phi % 2 != 0)
        bad("grid", "need n_r, n_theta >= 4 and an even n_phi >= 4");
    if (radial_n_r < 4) bad("grid.radial_n_r", "must be >= 4");
    wrap([&] { stepper.validate(); });
    if (!(tau_max > 0.0)) bad("stepper.tau_max", "must be positive");
    if (n_steps < 1) bad("stepper.n_steps", "must be >= 1");
    if (!(dt > 0.0)) bad("stepper.dt", "must be positive");
    if (snapshot_every < 1) bad("stepper.snapshot_every", "must be >= 1");
    if (norm_order < 0) bad("norms.N", "must be >= 0");
    for (double g : norm_gammas)
        if (!(g > 1.0)) bad("norms.gammas", "every gamma must exceed 1");
    if (levels < 1) bad("field.levels", "must be >= 1");
    if (scenario == Scenario::field_validation) {
        wrap([&] { KernelSpec::make(Lambda); });
        if (!field_poisson && !field_identities) bad("field", "enable poisson or identities");
    }
    if ((scenario == Scenario::radial || (scenario == Scenario::sweep && sweep_response)) &&
        (!is_isotropic(A0) || !is_isotropic(A1)))
        bad("affine.A0", "radial runs need A0 and A1 proportional to the identity");
    if (scenario == Scenario::sweep) {
        for (double d : sweep_delta)
            if (!(d > 0.0)) bad("sweep.delta", "every delta must be positive");
        for (double g : sweep_gamma)
            if (!(g > 1.0 && (!sweep_response || g < 5.0 / 3.0))) bad("sweep.gamma", "gamma out of range");
    }
    if (check_curl_transport && snapshot_every != 1)
        bad("checks.curl_transport", "needs stepper.snapshot_every = 1");
}

}  // namespace epflow
