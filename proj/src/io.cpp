#include "opacity/io.hpp"

#include "opacity/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace opacity {

namespace {

using json = nlohmann::json;

constexpr double kRowTolerance = 1e-9;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(std::string_view text, const std::string& source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        std::string what = e.what();
        const auto cut = what.find("syntax error");
        if (cut != std::string::npos) what = what.substr(cut);
        throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column), what);
    }
}

// Object reader that tracks its JSON pointer and rejects unknown keys.
class Section {
public:
    Section(const json& node, std::string source, std::string path)
        : node_(node), source_(std::move(source)), path_(std::move(path)) {
        if (!node_.is_object()) fail_here("expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    std::string where(const std::string& key) const { return source_ + ":" + path_ + "/" + key; }
    const std::string& source() const { return source_; }
    std::string pointer(const std::string& key) const { return path_ + "/" + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const { throw ParseError(where(key), what); }
    [[noreturn]] void fail_here(const std::string& what) const {
        throw ParseError(source_ + ":" + (path_.empty() ? "/" : path_), what);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "expected a finite number");
        return x;
    }

    long long integer(const std::string& key, long long fallback, long long lo, long long hi) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi))
            fail(key, "value out of range");
        const long long x = v.get<long long>();
        if (x < lo || x > hi) fail(key, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return x;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    template <class E>
    E choice(const std::string& key, E fallback, const std::vector<std::pair<std::string, E>>& options) {
        if (!has(key)) return fallback;
        const std::string value = text(key, "");
        std::string names;
        for (const auto& [name, e] : options) {
            if (name == value) return e;
            names += (names.empty() ? "" : ", ") + name;
        }
        fail(key, "unknown value '" + value + "' (expected one of: " + names + ")");
    }

    Section child(const std::string& key) { return Section(raw(key), source_, pointer(key)); }

    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!seen_.contains(key)) fail(key, "unknown field");
    }

private:
    const json& node_;
    std::string source_;
    std::string path_;
    std::set<std::string> seen_;
};

// Count given either as an integer or as a list of names.
Index count_field(Section& s, const std::string& key) {
    if (!s.has(key)) s.fail(key, "missing field");
    const json& v = s.raw(key);
    if (v.is_number_unsigned() && v.get<std::uint64_t>() >= 1 && v.get<std::uint64_t>() <= 100000)
        return static_cast<Index>(v.get<std::uint64_t>());
    if (v.is_array() && !v.empty()) {
        for (const json& name : v)
            if (!name.is_string()) s.fail(key, "names must be strings");
        return static_cast<Index>(v.size());
    }
    s.fail(key, "expected a positive count or a non-empty list of names");
}

Index index_entry(const json& v, Index bound, const Section& s, const std::string& key, const char* what) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() >= static_cast<std::uint64_t>(bound))
        s.fail(key, std::string(what) + " index out of range");
    return static_cast<Index>(v.get<std::uint64_t>());
}

double probability_entry(const json& v, const Section& s, const std::string& key) {
    if (!v.is_number()) s.fail(key, "probability must be a number");
    const double p = v.get<double>();
    if (!(p >= 0.0 && p <= 1.0 + kRowTolerance)) s.fail(key, "probability outside [0, 1]");
    return p;
}

template <class RowRef>
void normalize_row(RowRef row, const Section& s, const std::string& key, const std::string& label) {
    const double total = row.sum();
    if (std::abs(total - 1.0) > kRowTolerance)
        s.fail(key, label + " sums to " + json(total).dump() + ", not 1");
    // Rows already stochastic to rounding are kept verbatim so documents round-trip exactly.
    if (std::abs(total - 1.0) > 1e-12) row /= total;
}

ModelDocument parse_model_json(const json& node, const std::string& source, const std::string& path) {
    Section s(node, source, path);
    const Index n = count_field(s, "states");
    const Index k = count_field(s, "actions");

    if (!s.has("transitions")) s.fail("transitions", "missing field");
    const json& triples = s.raw("transitions");
    if (!triples.is_array()) s.fail("transitions", "expected a list of [i, a, j, p]");
    std::vector<Mat> p(static_cast<std::size_t>(k), Mat::Zero(n, n));
    std::set<std::tuple<Index, Index, Index>> seen;
    for (const json& t : triples) {
        if (!t.is_array() || t.size() != 4) s.fail("transitions", "each entry must be [i, a, j, p]");
        const Index i = index_entry(t[0], n, s, "transitions", "state");
        const Index a = index_entry(t[1], k, s, "transitions", "action");
        const Index j = index_entry(t[2], n, s, "transitions", "state");
        if (!seen.emplace(i, a, j).second) s.fail("transitions", "duplicate entry for (i, a, j)");
        p[static_cast<std::size_t>(a)](i, j) = probability_entry(t[3], s, "transitions");
    }
    for (Index a = 0; a < k; ++a)
        for (Index i = 0; i < n; ++i)
            normalize_row(p[static_cast<std::size_t>(a)].row(i), s, "transitions",
                          "row (state " + std::to_string(i) + ", action " + std::to_string(a) + ")");

    if (!s.has("initial")) s.fail("initial", "missing field");
    const json& mu = s.raw("initial");
    if (!mu.is_array() || static_cast<Index>(mu.size()) != n) s.fail("initial", "expected one probability per state");
    Vec initial(n);
    for (Index i = 0; i < n; ++i) initial[i] = probability_entry(mu[static_cast<std::size_t>(i)], s, "initial");
    normalize_row(initial, s, "initial", "initial distribution");

    Mat reward = Mat::Zero(n, k);
    if (s.has("rewards")) {
        const json& r = s.raw("rewards");
        if (!r.is_array() || static_cast<Index>(r.size()) != n) s.fail("rewards", "expected one row per state");
        for (Index i = 0; i < n; ++i) {
            const json& row = r[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Index>(row.size()) != k) s.fail("rewards", "expected one entry per action");
            for (Index a = 0; a < k; ++a) {
                const json& v = row[static_cast<std::size_t>(a)];
                if (!v.is_number() || !std::isfinite(v.get<double>())) s.fail("rewards", "rewards must be finite numbers");
                reward(i, a) = v.get<double>();
            }
        }
    }

    const double discount = s.number("discount", 0.95);
    if (!(discount >= 0.0 && discount <= 1.0)) s.fail("discount", "discount must lie in [0, 1]");

    std::vector<std::string> symbols;
    if (!s.has("observations")) s.fail("observations", "missing field");
    const json& syms = s.raw("observations");
    if (!syms.is_array() || syms.empty()) s.fail("observations", "expected a non-empty list of symbols");
    for (const json& sym : syms) {
        if (!sym.is_string()) s.fail("observations", "symbols must be strings");
        symbols.push_back(sym.get<std::string>());
    }
    std::map<std::string, Index> symbol_of;
    for (std::size_t o = 0; o < symbols.size(); ++o)
        if (!symbol_of.emplace(symbols[o], static_cast<Index>(o)).second)
            s.fail("observations", "duplicate symbol '" + symbols[o] + "'");

    if (!s.has("emissions")) s.fail("emissions", "missing field");
    const json& em = s.raw("emissions");
    if (!em.is_array()) s.fail("emissions", "expected a list of [state, symbol, p]");
    Mat emission = Mat::Zero(n, static_cast<Index>(symbols.size()));
    std::set<std::pair<Index, Index>> seen_em;
    for (const json& e : em) {
        if (!e.is_array() || e.size() != 3 || !e[1].is_string())
            s.fail("emissions", "each entry must be [state, \"symbol\", p]");
        const Index i = index_entry(e[0], n, s, "emissions", "state");
        const auto it = symbol_of.find(e[1].get<std::string>());
        if (it == symbol_of.end()) s.fail("emissions", "unknown symbol '" + e[1].get<std::string>() + "'");
        if (!seen_em.emplace(i, it->second).second) s.fail("emissions", "duplicate entry for (state, symbol)");
        emission(i, it->second) = probability_entry(e[2], s, "emissions");
    }
    for (Index i = 0; i < n; ++i)
        normalize_row(emission.row(i), s, "emissions", "emission row of state " + std::to_string(i));
    s.finish();

    try {
        return {Mdp(std::move(p), std::move(initial), std::move(reward), discount),
                ObservationModel(std::move(symbols), std::move(emission))};
    } catch (const ModelError& e) {
        s.fail_here(e.what());
    }
}

json model_to_json(const Mdp& mdp, const ObservationModel& obs) {
    json doc;
    doc["states"] = mdp.num_states();
    doc["actions"] = mdp.num_actions();
    json triples = json::array();
    for (Index i = 0; i < mdp.num_states(); ++i)
        for (Index a = 0; a < mdp.num_actions(); ++a)
            for (Index j = 0; j < mdp.num_states(); ++j)
                if (const double p = mdp.transition(i, a, j); p != 0.0) triples.push_back({i, a, j, p});
    doc["transitions"] = std::move(triples);
    doc["initial"] = std::vector<double>(mdp.initial().data(), mdp.initial().data() + mdp.num_states());
    json rewards = json::array();
    for (Index i = 0; i < mdp.num_states(); ++i) {
        json row = json::array();
        for (Index a = 0; a < mdp.num_actions(); ++a) row.push_back(mdp.reward()(i, a));
        rewards.push_back(std::move(row));
    }
    doc["rewards"] = std::move(rewards);
    doc["discount"] = mdp.discount();
    doc["observations"] = obs.symbols();
    json em = json::array();
    for (Index i = 0; i < obs.num_states(); ++i)
        for (Index o = 0; o < obs.num_symbols(); ++o)
            if (const double p = obs.emission(i, o); p != 0.0)
                em.push_back({i, obs.symbols()[static_cast<std::size_t>(o)], p});
    doc["emissions"] = std::move(em);
    return doc;
}

std::vector<Cell> parse_cells(Section& s, const std::string& key, const std::vector<Cell>& fallback) {
    if (!s.has(key)) return fallback;
    const json& v = s.raw(key);
    if (!v.is_array()) s.fail(key, "expected a list of [x, y] cells");
    std::vector<Cell> out;
    for (const json& c : v) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() || !c[1].is_number_integer())
            s.fail(key, "each cell must be [x, y]");
        out.push_back({c[0].get<int>(), c[1].get<int>()});
    }
    return out;
}

json cells_to_json(const std::vector<Cell>& cells) {
    json out = json::array();
    for (const Cell& c : cells) out.push_back({c.x, c.y});
    return out;
}

GridSpec parse_grid(Section s) {
    const std::string preset = s.text("preset", "default");
    GridSpec g;
    if (preset == "default") {
        g = GridSpec::default_layout();
    } else if (preset == "four_corners") {
        g = GridSpec::four_corners();
    } else {
        s.fail("preset", "unknown preset '" + preset + "' (expected default or four_corners)");
    }
    g.width = static_cast<int>(s.integer("width", g.width, 1, 1000));
    g.height = static_cast<int>(s.integer("height", g.height, 1, 1000));
    g.slip = s.number("slip", g.slip);
    g.discount = s.number("discount", g.discount);
    g.goal_reward = s.number("goal_reward", g.goal_reward);
    if (s.has("sensors")) {
        const json& list = s.raw("sensors");
        if (!list.is_array()) s.fail("sensors", "expected a list of sensors");
        g.sensors.clear();
        for (std::size_t k = 0; k < list.size(); ++k) {
            Section sensor(list[k], s.source(), s.pointer("sensors") + "/" + std::to_string(k));
            Sensor out;
            out.symbol = sensor.text("symbol", "");
            out.hit_prob = sensor.number("hit_prob", 0.9);
            out.cells = parse_cells(sensor, "cells", {});
            sensor.finish();
            g.sensors.push_back(std::move(out));
        }
    }
    g.secret_cells = parse_cells(s, "secret_cells", g.secret_cells);
    g.goal_cells = parse_cells(s, "goal_cells", g.goal_cells);
    g.initial_cells = parse_cells(s, "initial_cells", g.initial_cells);
    if (s.has("initial_weights")) {
        const json& w = s.raw("initial_weights");
        if (!w.is_array()) s.fail("initial_weights", "expected a list of numbers");
        g.initial_weights.clear();
        for (const json& x : w) {
            if (!x.is_number()) s.fail("initial_weights", "expected a list of numbers");
            g.initial_weights.push_back(x.get<double>());
        }
    } else if (s.has("initial_cells")) {
        g.initial_weights.assign(g.initial_cells.size(), 1.0 / static_cast<double>(g.initial_cells.size()));
    }
    s.finish();
    try {
        g.validate();
    } catch (const ModelError& e) {
        s.fail_here(e.what());
    }
    return g;
}

json grid_to_json(const GridSpec& g) {
    json sensors = json::array();
    for (const Sensor& s : g.sensors)
        sensors.push_back({{"symbol", s.symbol}, {"hit_prob", s.hit_prob}, {"cells", cells_to_json(s.cells)}});
    return {{"width", g.width},
            {"height", g.height},
            {"slip", g.slip},
            {"discount", g.discount},
            {"goal_reward", g.goal_reward},
            {"sensors", std::move(sensors)},
            {"secret_cells", cells_to_json(g.secret_cells)},
            {"goal_cells", cells_to_json(g.goal_cells)},
            {"initial_cells", cells_to_json(g.initial_cells)},
            {"initial_weights", g.initial_weights}};
}

ModelSource parse_model_section(Section s) {
    ModelSource m;
    int sources = 0;
    for (const char* key : {"grid", "file", "inline", "random"}) sources += s.has(key) ? 1 : 0;
    if (sources != 1) s.fail_here("exactly one of grid, file, inline, random is required");
    if (s.has("grid")) {
        m.kind = ModelSource::Kind::Grid;
        m.grid = parse_grid(s.child("grid"));
    } else if (s.has("file")) {
        m.kind = ModelSource::Kind::File;
        m.file = s.text("file", "");
        if (m.file.empty()) s.fail("file", "empty path");
    } else if (s.has("inline")) {
        m.kind = ModelSource::Kind::Inline;
        m.inline_model = parse_model_json(s.raw("inline"), s.source(), s.pointer("inline"));
    } else {
        m.kind = ModelSource::Kind::Random;
        Section r = s.child("random");
        m.random.states = r.integer("states", m.random.states, 1, 1000);
        m.random.actions = r.integer("actions", m.random.actions, 1, 1000);
        m.random.symbols = r.integer("symbols", m.random.symbols, 1, 1000);
        m.random.seed = r.unsigned_integer("seed", m.random.seed);
        m.random.discount = r.number("discount", m.random.discount);
        m.random.theta_scale = r.number("theta_scale", m.random.theta_scale);
        if (!(m.random.discount >= 0.0 && m.random.discount <= 1.0)) r.fail("discount", "discount must lie in [0, 1]");
        r.finish();
    }
    s.finish();
    return m;
}

SolverConfig parse_solver_section(Section s) {
    SolverConfig c;
    c.eta = s.number("eta", c.eta);
    c.kappa = s.number("kappa", c.kappa);
    if (s.has("delta") && s.raw("delta").is_string()) {
        if (s.text("delta", "") != "-inf") s.fail("delta", "expected a number or \"-inf\"");
        c.delta = -std::numeric_limits<double>::infinity();
    } else {
        c.delta = s.number("delta", c.delta);
    }
    c.horizon = static_cast<int>(s.integer("horizon", c.horizon, 0, 100000));
    c.samples = static_cast<int>(s.integer("samples", c.samples, 1, 100000000));
    c.iterations = static_cast<int>(s.integer("iterations", c.iterations, 0, 100000000));
    c.seed = s.unsigned_integer("seed", c.seed);
    c.mode = s.choice("mode", c.mode, {{"exact", EntropyMode::Exact}, {"sampled", EntropyMode::Sampled}});
    c.lambda0 = s.number("lambda0", c.lambda0);
    if (s.has("theta0")) {
        const json& t = s.raw("theta0");
        if (!t.is_array() || t.empty() || !t[0].is_array() || t[0].empty())
            s.fail("theta0", "expected a list of per-state rows");
        Mat theta(static_cast<Index>(t.size()), static_cast<Index>(t[0].size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!t[i].is_array() || t[i].size() != t[0].size()) s.fail("theta0", "rows must have equal length");
            for (std::size_t a = 0; a < t[i].size(); ++a) {
                if (!t[i][a].is_number() || !std::isfinite(t[i][a].get<double>()))
                    s.fail("theta0", "entries must be finite numbers");
                theta(static_cast<Index>(i), static_cast<Index>(a)) = t[i][a].get<double>();
            }
        }
        c.theta0 = PolicyParams(std::move(theta));
    }
    c.grad_tol = s.number("grad_tol", c.grad_tol);
    c.slack_tol = s.number("slack_tol", c.slack_tol);
    c.window = static_cast<int>(s.integer("window", c.window, 1, 100000000));
    c.value_horizon = s.choice("value_horizon", c.value_horizon,
                               {{"finite", ValueHorizon::Finite}, {"infinite", ValueHorizon::Infinite}});
    c.value_start = s.choice("value_start", c.value_start,
                             {{"expected", ValueStart::Expected}, {"worst_case", ValueStart::WorstCase}});
    c.value_estimator = s.choice("value_estimator", c.value_estimator,
                                 {{"exact", ValueEstimator::Exact}, {"reinforce", ValueEstimator::Reinforce}});
    c.value_episodes = static_cast<int>(s.integer("value_episodes", c.value_episodes, 1, 100000000));
    c.backtrack = s.boolean("backtrack", c.backtrack);
    c.enumeration_cap = s.unsigned_integer("enumeration_cap", c.enumeration_cap);
    c.engine = s.choice("engine", c.engine,
                        {{"adjoint", GradientEngine::Adjoint}, {"messages", GradientEngine::Messages}});
    c.eval_samples = static_cast<int>(s.integer("eval_samples", c.eval_samples, 1, 100000000));
    s.finish();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        s.fail_here(e.what());
    }
    return c;
}

SweepConfig parse_baseline_section(Section s) {
    SweepConfig b;
    if (!s.has("taus")) s.fail("taus", "missing field");
    const json& taus = s.raw("taus");
    if (!taus.is_array() || taus.empty()) s.fail("taus", "expected a non-empty list of tau values");
    for (const json& t : taus) {
        if (!t.is_number() || !(t.get<double>() >= 0.0) || !std::isfinite(t.get<double>()))
            s.fail("taus", "tau values must be finite and >= 0");
        b.taus.push_back(t.get<double>());
    }
    b.base.step_size = s.number("step_size", b.base.step_size);
    b.base.iterations = static_cast<int>(s.integer("iterations", b.base.iterations, 0, 100000000));
    b.base.seed = s.unsigned_integer("seed", b.base.seed);
    s.finish();
    try {
        b.base.validate();
    } catch (const std::invalid_argument& e) {
        s.fail_here(e.what());
    }
    return b;
}

template <class E>
std::string name_of(E value, const std::vector<std::pair<std::string, E>>& options) {
    for (const auto& [name, e] : options)
        if (e == value) return name;
    return "?";
}

json solver_to_json(const SolverConfig& c) {
    json j = {
        {"eta", c.eta},
        {"kappa", c.kappa},
        {"horizon", c.horizon},
        {"samples", c.samples},
        {"iterations", c.iterations},
        {"seed", c.seed},
        {"mode", c.mode == EntropyMode::Exact ? "exact" : "sampled"},
        {"lambda0", c.lambda0},
        {"grad_tol", c.grad_tol},
        {"slack_tol", c.slack_tol},
        {"window", c.window},
        {"value_horizon", c.value_horizon == ValueHorizon::Finite ? "finite" : "infinite"},
        {"value_start", c.value_start == ValueStart::Expected ? "expected" : "worst_case"},
        {"value_estimator", c.value_estimator == ValueEstimator::Exact ? "exact" : "reinforce"},
        {"value_episodes", c.value_episodes},
        {"backtrack", c.backtrack},
        {"enumeration_cap", c.enumeration_cap},
        {"engine", c.engine == GradientEngine::Adjoint ? "adjoint" : "messages"},
        {"eval_samples", c.eval_samples},
    };
    if (c.constrained())
        j["delta"] = c.delta;
    else
        j["delta"] = "-inf";
    if (c.theta0) {
        json rows = json::array();
        for (Index i = 0; i < c.theta0->num_states(); ++i) {
            json row = json::array();
            for (Index a = 0; a < c.theta0->num_actions(); ++a) row.push_back((*c.theta0)(i, a));
            rows.push_back(std::move(row));
        }
        j["theta0"] = std::move(rows);
    }
    return j;
}

json config_to_json(const ExperimentConfig& c) {
    json model;
    switch (c.model.kind) {
        case ModelSource::Kind::Grid: model["grid"] = grid_to_json(c.model.grid); break;
        case ModelSource::Kind::File: model["file"] = c.model.file; break;
        case ModelSource::Kind::Inline:
            model["inline"] = model_to_json(c.model.inline_model->mdp, c.model.inline_model->obs);
            break;
        case ModelSource::Kind::Random: {
            const RandomModelSpec& r = c.model.random;
            model["random"] = {{"states", r.states},     {"actions", r.actions},         {"symbols", r.symbols},
                               {"seed", r.seed},         {"discount", r.discount},       {"theta_scale", r.theta_scale}};
            break;
        }
    }
    json objective = {{"kind", c.objective.kind == Objective::Kind::LastState ? "last_state" : "initial_state"}};
    if (c.objective.secret_states) objective["secret_states"] = *c.objective.secret_states;

    json doc = {{"model", std::move(model)},
                {"objective", std::move(objective)},
                {"solver", solver_to_json(c.solver)},
                {"output", {{"prefix", c.output_prefix}}}};
    if (c.baseline)
        doc["baseline"] = {{"taus", c.baseline->taus},
                           {"step_size", c.baseline->base.step_size},
                           {"iterations", c.baseline->base.iterations},
                           {"seed", c.baseline->base.seed}};
    return doc;
}

}  // namespace

ModelDocument parse_model_document(std::string_view text, const std::string& source) {
    return parse_model_json(parse_json(text, source), source, "");
}

ModelDocument load_model_document(const std::filesystem::path& path) {
    return parse_model_document(read_file(path), path.string());
}

std::string write_model_document(const Mdp& mdp, const ObservationModel& obs) {
    // One entry per line keeps large documents diffable.
    const json doc = model_to_json(mdp, obs);
    std::string out = "{\n";
    bool first = true;
    for (const auto& [key, value] : doc.items()) {
        out += first ? "" : ",\n";
        first = false;
        out += "  " + json(key).dump() + ": ";
        if (value.is_array() && !value.empty() && value[0].is_array()) {
            out += "[\n";
            for (std::size_t k = 0; k < value.size(); ++k)
                out += "    " + value[k].dump() + (k + 1 < value.size() ? ",\n" : "\n");
            out += "  ]";
        } else {
            out += value.dump();
        }
    }
    return out + "\n}\n";
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
    const json doc = parse_json(text, source);
    Section root(doc, source, "");
    ExperimentConfig c;
    if (!root.has("model")) root.fail("model", "missing section");
    c.model = parse_model_section(root.child("model"));

    const json no_objective = json::object();
    Section obj = root.has("objective") ? root.child("objective") : Section(no_objective, source, "/objective");
    c.objective.kind = obj.choice("kind", Objective::Kind::LastState,
                                  {{"last_state", Objective::Kind::LastState},
                                   {"initial_state", Objective::Kind::InitialState}});
    if (obj.has("secret_states")) {
        if (c.objective.kind != Objective::Kind::LastState)
            obj.fail("secret_states", "only the last_state objective takes a secret set");
        const json& list = obj.raw("secret_states");
        if (!list.is_array()) obj.fail("secret_states", "expected a list of state indices");
        std::vector<Index> states;
        for (const json& v : list) {
            if (!v.is_number_unsigned()) obj.fail("secret_states", "expected a list of state indices");
            states.push_back(static_cast<Index>(v.get<std::uint64_t>()));
        }
        c.objective.secret_states = std::move(states);
    } else if (c.objective.kind == Objective::Kind::LastState && c.model.kind != ModelSource::Kind::Grid) {
        obj.fail("secret_states", "required for last_state on non-grid models");
    }
    obj.finish();

    c.solver = root.has("solver") ? parse_solver_section(root.child("solver")) : SolverConfig{};
    if (root.has("baseline")) c.baseline = parse_baseline_section(root.child("baseline"));
    if (root.has("output")) {
        Section out = root.child("output");
        c.output_prefix = out.text("prefix", c.output_prefix);
        if (c.output_prefix.empty()) out.fail("prefix", "empty output prefix");
        out.finish();
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    ExperimentConfig c = parse_config(read_file(path), path.string());
    c.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    return c;
}

std::string serialize_config(const ExperimentConfig& config, bool pretty) {
    const json doc = config_to_json(config);
    return pretty ? doc.dump(2) + "\n" : doc.dump();
}

std::string config_hash(const ExperimentConfig& config) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t h = fnv1a64(serialize_config(config, false));
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = kHex[h & 0xF];
    return out;
}

Problem build_problem(const ExperimentConfig& config) {
    std::optional<ModelDocument> model;
    std::optional<GridWorld> grid;
    switch (config.model.kind) {
        case ModelSource::Kind::Grid:
            grid = build_gridworld(config.model.grid);
            model = ModelDocument{grid->mdp, grid->obs};
            break;
        case ModelSource::Kind::File: model = load_model_document(config.base_dir / config.model.file); break;
        case ModelSource::Kind::Inline: model = *config.model.inline_model; break;
        case ModelSource::Kind::Random: {
            RandomModel r = random_model(config.model.random);
            model = ModelDocument{std::move(r.mdp), std::move(r.obs)};
            break;
        }
    }

    Objective objective = Objective::initial_state();
    if (config.objective.kind == Objective::Kind::LastState) {
        SecretSpec secret;
        if (config.objective.secret_states) {
            for (Index s : *config.objective.secret_states) {
                if (s >= model->mdp.num_states())
                    throw ParseError("/objective/secret_states", "state " + std::to_string(s) + " out of range");
                secret.secret_states.push_back(s);
            }
        } else {
            secret = grid->secret();
        }
        objective = Objective::last_state(std::move(secret));
    }
    if (config.solver.theta0 && (config.solver.theta0->num_states() != model->mdp.num_states() ||
                                 config.solver.theta0->num_actions() != model->mdp.num_actions()))
        throw ParseError("/solver/theta0", "shape does not match the model (" + std::to_string(model->mdp.num_states()) +
                                               " x " + std::to_string(model->mdp.num_actions()) + ")");
    return {std::move(model->mdp), std::move(model->obs), std::move(objective)};
}

}  // namespace opacity
