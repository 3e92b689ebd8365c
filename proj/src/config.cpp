#include "credopt/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace credopt {
namespace {

using json = nlohmann::json;

// Input iterator that counts newlines as the parser consumes characters.
struct LineCountingIterator {
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* at;
    int* line;

    reference operator*() const { return *at; }
    LineCountingIterator& operator++() {
        if (*at == '\n') ++*line;
        ++at;
        return *this;
    }
    LineCountingIterator operator++(int) {
        LineCountingIterator old = *this;
        ++*this;
        return old;
    }
    bool operator==(const LineCountingIterator& o) const { return at == o.at; }
    bool operator!=(const LineCountingIterator& o) const { return at != o.at; }
};

// Records the line of every object key, by JSON pointer.
class KeyLines : public nlohmann::json_sax<json> {
public:
    explicit KeyLines(int* line) : line_(line) {}
    std::map<std::string, int> lines;
    std::string error;

    bool null() override { return value(); }
    bool boolean(bool) override { return value(); }
    bool number_integer(number_integer_t) override { return value(); }
    bool number_unsigned(number_unsigned_t) override { return value(); }
    bool number_float(number_float_t, const string_t&) override { return value(); }
    bool string(string_t&) override { return value(); }
    bool binary(binary_t&) override { return value(); }
    bool start_object(std::size_t) override {
        enter();
        stack_.push_back({true, 0, ""});
        return true;
    }
    bool end_object() override {
        stack_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override {
        enter();
        stack_.push_back({false, 0, ""});
        return true;
    }
    bool end_array() override {
        stack_.pop_back();
        return true;
    }
    bool key(string_t& k) override {
        stack_.back().key = k;
        lines[pointer()] = *line_;
        return true;
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& e) override {
        error = e.what();
        return false;
    }

private:
    struct Frame {
        bool object;
        int index;
        std::string key;
    };
    std::string pointer() const {
        std::string p;
        for (const auto& f : stack_) p += "/" + (f.object ? f.key : std::to_string(f.index - 1));
        return p;
    }
    void enter() {
        if (!stack_.empty() && !stack_.back().object) ++stack_.back().index;
    }
    bool value() {
        enter();
        return true;
    }
    int* line_;
    std::vector<Frame> stack_;
};

class Reader {
public:
    Reader(std::string source, std::map<std::string, int> lines, std::string prefix)
        : source_(std::move(source)), lines_(std::move(lines)), prefix_(std::move(prefix)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ConfigError(source_, line_of(field), field, what);
    }

    int line_of(const std::string& field) const {
        std::string p = prefix_ + "/" + field;
        std::replace(p.begin(), p.end(), '.', '/');
        while (!p.empty()) {
            auto it = lines_.find(p);
            if (it != lines_.end()) return it->second;
            p.erase(p.rfind('/'));
        }
        return 0;
    }

    void only_keys(const json& obj, const std::string& field, std::set<std::string> allowed) const {
        if (!obj.is_object()) fail(field, "must be an object");
        for (const auto& [k, v] : obj.items()) {
            if (!allowed.count(k)) fail(field.empty() ? k : field + "." + k, "unknown key");
        }
    }

    double number(const json& obj, const std::string& key, const std::string& field, double fallback) const {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number()) fail(field, "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(field, "must be finite");
        return d;
    }

    long integer(const json& obj, const std::string& key, const std::string& field, long fallback) const {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number_integer()) fail(field, "must be an integer");
        return v.get<long>();
    }

    std::string text(const json& obj, const std::string& key, const std::string& field,
                     const std::string& fallback) const {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_string()) fail(field, "must be a string");
        return v.get<std::string>();
    }

    Vec vector(const json& v, const std::string& field) const {
        if (!v.is_array()) fail(field, "must be an array of numbers");
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(field, "must be an array of numbers");
            out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        }
        return out;
    }

    Mat matrix(const json& v, const std::string& field) const {
        if (!v.is_array() || v.empty()) fail(field, "must be a non-empty array of rows");
        const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
        Mat out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_array() || v[i].size() != cols || cols == 0) fail(field, "rows must have equal length");
            const Vec row = vector(v[i], field);
            out.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
        return out;
    }

private:
    std::string source_;
    std::map<std::string, int> lines_;
    std::string prefix_;
};

std::string message_of(const ValidationError& e) {
    const std::string w = e.what();
    return e.field().empty() ? w : w.substr(e.field().size() + 2);
}

VolatilityKind volatility_kind(const Reader& rd, const std::string& s) {
    if (s == "constant") return VolatilityKind::constant;
    if (s == "default_dependent") return VolatilityKind::default_dependent;
    if (s == "local") return VolatilityKind::local;
    rd.fail("model.volatility.kind", "must be constant, default_dependent or local");
}

const char* volatility_name(VolatilityKind k) {
    switch (k) {
        case VolatilityKind::constant:
            return "constant";
        case VolatilityKind::default_dependent:
            return "default_dependent";
        case VolatilityKind::local:
            return "local";
    }
    return "constant";
}

const char* utility_name(UtilityKind k) {
    switch (k) {
        case UtilityKind::log:
            return "log";
        case UtilityKind::power:
            return "power";
        case UtilityKind::exponential:
            return "exponential";
    }
    return "power";
}

ModelSpec read_model(const Reader& rd, const json& m, const json* regime) {
    rd.only_keys(m, "model",
                 {"n_assets", "n_defaults", "horizon", "s0", "mu", "sigma", "beta", "lambda", "volatility", "limits"});
    ModelSpec spec;
    spec.n_assets = static_cast<int>(rd.integer(m, "n_assets", "model.n_assets", 1));
    spec.n_defaults = static_cast<int>(rd.integer(m, "n_defaults", "model.n_defaults", 1));
    if (spec.n_assets < 1 || spec.n_assets > kMaxDim) rd.fail("model.n_assets", "must be in [1, 4]");
    if (spec.n_defaults < 1 || spec.n_defaults > kMaxDim) rd.fail("model.n_defaults", "must be in [1, 4]");
    spec.horizon = rd.number(m, "horizon", "model.horizon", 1.0);
    spec.s0 = m.contains("s0") ? rd.vector(m.at("s0"), "model.s0") : Vec::Ones(spec.n_assets);
    if (!m.contains("sigma")) rd.fail("model.sigma", "is required");
    if (!m.contains("beta")) rd.fail("model.beta", "is required");
    spec.sigma = rd.matrix(m.at("sigma"), "model.sigma");
    spec.beta = rd.matrix(m.at("beta"), "model.beta");
    if (regime) {
        if (m.contains("mu")) rd.fail("model.mu", "drift is given per regime in regime.mu_by_regime");
        if (m.contains("lambda")) rd.fail("model.lambda", "intensity is given per regime in regime.lambda_by_regime");
    } else {
        if (!m.contains("mu")) rd.fail("model.mu", "is required");
        if (!m.contains("lambda")) rd.fail("model.lambda", "is required");
        spec.mu = rd.vector(m.at("mu"), "model.mu");
        spec.lambda = rd.vector(m.at("lambda"), "model.lambda");
    }
    if (m.contains("volatility")) {
        const json& v = m.at("volatility");
        rd.only_keys(v, "model.volatility", {"kind", "post_default_scale", "elasticity", "reference", "floor", "cap"});
        auto& vol = spec.volatility;
        vol.kind = volatility_kind(rd, rd.text(v, "kind", "model.volatility.kind", "constant"));
        vol.post_default_scale = rd.number(v, "post_default_scale", "model.volatility.post_default_scale", 1.0);
        vol.elasticity = rd.number(v, "elasticity", "model.volatility.elasticity", 0.0);
        vol.floor = rd.number(v, "floor", "model.volatility.floor", 0.5);
        vol.cap = rd.number(v, "cap", "model.volatility.cap", 2.0);
        vol.reference = v.contains("reference") ? rd.vector(v.at("reference"), "model.volatility.reference")
                                                : Vec(spec.s0);
    }
    if (m.contains("limits")) {
        const json& l = m.at("limits");
        rd.only_keys(l, "model.limits", {"coefficient_bound", "ellipticity_lower", "ellipticity_upper"});
        spec.limits.coefficient_bound = rd.number(l, "coefficient_bound", "model.limits.coefficient_bound", 10.0);
        spec.limits.ellipticity_lower = rd.number(l, "ellipticity_lower", "model.limits.ellipticity_lower", 1e-6);
        spec.limits.ellipticity_upper = rd.number(l, "ellipticity_upper", "model.limits.ellipticity_upper", 1e2);
    }
    if (regime) {
        const json& r = *regime;
        rd.only_keys(r, "regime", {"q_matrix", "mu_by_regime", "lambda_by_regime", "initial_dist"});
        for (const char* key : {"q_matrix", "mu_by_regime", "lambda_by_regime", "initial_dist"}) {
            if (!r.contains(key)) rd.fail(std::string("regime.") + key, "is required");
        }
        HiddenRegimeSpec h;
        h.q_matrix = rd.matrix(r.at("q_matrix"), "regime.q_matrix");
        h.initial_dist = rd.vector(r.at("initial_dist"), "regime.initial_dist");
        const Mat mu = rd.matrix(r.at("mu_by_regime"), "regime.mu_by_regime");
        const Mat lambda = rd.matrix(r.at("lambda_by_regime"), "regime.lambda_by_regime");
        for (Eigen::Index i = 0; i < mu.rows(); ++i) h.mu_by_regime.push_back(mu.row(i).transpose());
        for (Eigen::Index i = 0; i < lambda.rows(); ++i) h.lambda_by_regime.push_back(lambda.row(i).transpose());
        spec.regime_model = std::move(h);
    }
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        rd.fail(e.field(), message_of(e));
    }
    return spec;
}

ClaimSpec read_claim(const Reader& rd, const json& c, const ModelSpec& spec) {
    rd.only_keys(c, "utility.claim", {"id", "amount", "strike", "asset", "default_index", "cash"});
    ClaimSpec claim;
    try {
        claim.kind = claim_kind_from_string(rd.text(c, "id", "utility.claim.id", "zero"));
    } catch (const ValidationError& e) {
        rd.fail("utility.claim.id", message_of(e));
    }
    claim.amount = rd.number(c, "amount", "utility.claim.amount", 1.0);
    claim.strike = rd.number(c, "strike", "utility.claim.strike", 1.0);
    claim.asset = static_cast<int>(rd.integer(c, "asset", "utility.claim.asset", 0));
    claim.default_index = static_cast<int>(rd.integer(c, "default_index", "utility.claim.default_index", 0));
    claim.cash = rd.number(c, "cash", "utility.claim.cash", 0.0);
    try {
        claim.validate(spec);
    } catch (const ValidationError& e) {
        rd.fail(e.field(), message_of(e));
    }
    return claim;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    int line = 1;
    KeyLines keys(&line);
    const LineCountingIterator first{text.data(), &line};
    const LineCountingIterator last{text.data() + text.size(), &line};
    if (!json::sax_parse(first, last, &keys)) throw ConfigError(source, line, "", "invalid JSON: " + keys.error);

    json root = json::parse(text);
    std::string prefix;
    if (root.is_object() && root.contains("tool") && root.contains("config")) {
        root = root.at("config");
        prefix = "/config";
    }
    const Reader rd(source, keys.lines, prefix);
    rd.only_keys(root, "", {"model", "regime", "numerics", "utility", "bounds", "outputs"});
    if (!root.contains("model")) rd.fail("model", "section is required");

    ExperimentConfig cfg;
    const json* regime = root.contains("regime") ? &root.at("regime") : nullptr;
    cfg.model = read_model(rd, root.at("model"), regime);

    if (root.contains("numerics")) {
        const json& n = root.at("numerics");
        rd.only_keys(n, "numerics", {"paths", "steps", "seed", "basis_degree", "ridge", "batches", "export_paths"});
        auto& num = cfg.numerics;
        num.paths = static_cast<int>(rd.integer(n, "paths", "numerics.paths", num.paths));
        num.steps = static_cast<int>(rd.integer(n, "steps", "numerics.steps", num.steps));
        if (n.contains("seed")) {
            if (!n.at("seed").is_number_unsigned()) rd.fail("numerics.seed", "must be a non-negative integer");
            num.seed = n.at("seed").get<std::uint64_t>();
        }
        num.basis_degree = static_cast<int>(rd.integer(n, "basis_degree", "numerics.basis_degree", num.basis_degree));
        num.ridge = rd.number(n, "ridge", "numerics.ridge", num.ridge);
        num.batches = static_cast<int>(rd.integer(n, "batches", "numerics.batches", num.batches));
        num.export_paths = static_cast<int>(rd.integer(n, "export_paths", "numerics.export_paths", num.export_paths));
        if (num.paths < 1) rd.fail("numerics.paths", "must be >= 1");
        if (num.steps < 2) rd.fail("numerics.steps", "must be >= 2");
        if (num.basis_degree < 0 || num.basis_degree > 2) rd.fail("numerics.basis_degree", "must be 0, 1 or 2");
        if (num.ridge < 0.0) rd.fail("numerics.ridge", "must be >= 0");
        if (num.batches < 1) rd.fail("numerics.batches", "must be >= 1");
        if (num.export_paths < 0) rd.fail("numerics.export_paths", "must be >= 0");
    }

    if (root.contains("utility")) {
        const json& u = root.at("utility");
        rd.only_keys(u, "utility", {"kind", "gamma", "x0", "information", "claim", "strategy"});
        auto& ut = cfg.utility;
        const std::string kind = rd.text(u, "kind", "utility.kind", "power");
        if (kind == "log") {
            ut.kind = UtilityKind::log;
        } else if (kind == "power") {
            ut.kind = UtilityKind::power;
        } else if (kind == "exponential") {
            ut.kind = UtilityKind::exponential;
        } else {
            rd.fail("utility.kind", "must be log, power or exponential");
        }
        ut.gamma = rd.number(u, "gamma", "utility.gamma", ut.kind == UtilityKind::exponential ? 1.0 : 0.5);
        ut.x0 = rd.number(u, "x0", "utility.x0", 1.0);
        const std::string info = rd.text(u, "information", "utility.information", "full");
        if (info == "full") {
            ut.information = Information::full;
        } else if (info == "partial") {
            ut.information = Information::partial;
        } else {
            rd.fail("utility.information", "must be full or partial");
        }
        if (u.contains("claim")) ut.claim = read_claim(rd, u.at("claim"), cfg.model);
        if (u.contains("strategy")) {
            ut.strategy = rd.vector(u.at("strategy"), "utility.strategy");
            if (ut.strategy->size() != cfg.model.n_assets) rd.fail("utility.strategy", "one entry per asset");
        }
        if (ut.kind == UtilityKind::power && !(ut.gamma > 0.0 && ut.gamma < 1.0)) {
            rd.fail("utility.gamma", "power utility needs gamma in (0, 1)");
        }
        if (ut.kind == UtilityKind::exponential && !(ut.gamma > 0.0)) {
            rd.fail("utility.gamma", "exponential utility needs gamma > 0");
        }
        if (!(ut.x0 > 0.0)) rd.fail("utility.x0", "must be positive");
        if (ut.claim && ut.kind == UtilityKind::exponential &&
            !std::isfinite(std::exp(-ut.gamma * ut.claim->lower_bound()))) {
            rd.fail("utility.claim", "gamma times the claim lower bound overflows the terminal value");
        }
    }

    if (root.contains("bounds")) {
        const json& b = root.at("bounds");
        rd.only_keys(b, "bounds", {"k"});
        if (b.contains("k")) {
            const Vec ks = rd.vector(b.at("k"), "bounds.k");
            cfg.ks.assign(ks.data(), ks.data() + ks.size());
        }
        if (cfg.ks.empty()) rd.fail("bounds.k", "needs at least one value");
        for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
            if (!(cfg.ks[i] >= 0.0)) rd.fail("bounds.k", "values must be >= 0");
            if (i > 0 && !(cfg.ks[i] > cfg.ks[i - 1])) rd.fail("bounds.k", "values must be increasing");
        }
    }

    if (root.contains("outputs")) {
        const json& o = root.at("outputs");
        rd.only_keys(o, "outputs", {"directory", "formats"});
        cfg.outputs.directory = rd.text(o, "directory", "outputs.directory", cfg.outputs.directory);
        if (o.contains("formats")) {
            const json& f = o.at("formats");
            if (!f.is_array()) rd.fail("outputs.formats", "must be an array of \"csv\" / \"json\"");
            cfg.outputs.csv = cfg.outputs.json = false;
            for (const auto& e : f) {
                if (e == "csv") {
                    cfg.outputs.csv = true;
                } else if (e == "json") {
                    cfg.outputs.json = true;
                } else {
                    rd.fail("outputs.formats", "entries must be \"csv\" or \"json\"");
                }
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

std::string config_json(const ExperimentConfig& cfg, int indent) {
    using ojson = nlohmann::ordered_json;
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    auto mat = [&](const Mat& m) {
        ojson rows = ojson::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
        return rows;
    };
    const ModelSpec& s = cfg.model;
    ojson model;
    model["n_assets"] = s.n_assets;
    model["n_defaults"] = s.n_defaults;
    model["horizon"] = s.horizon;
    model["s0"] = vec(s.s0);
    if (!s.regime_model) model["mu"] = vec(s.mu);
    model["sigma"] = mat(s.sigma);
    model["beta"] = mat(s.beta);
    if (!s.regime_model) model["lambda"] = vec(s.lambda);
    ojson vol;
    vol["kind"] = volatility_name(s.volatility.kind);
    vol["post_default_scale"] = s.volatility.post_default_scale;
    vol["elasticity"] = s.volatility.elasticity;
    vol["reference"] = vec(s.volatility.reference.size() ? s.volatility.reference : s.s0);
    vol["floor"] = s.volatility.floor;
    vol["cap"] = s.volatility.cap;
    model["volatility"] = vol;
    model["limits"] = ojson{{"coefficient_bound", s.limits.coefficient_bound},
                            {"ellipticity_lower", s.limits.ellipticity_lower},
                            {"ellipticity_upper", s.limits.ellipticity_upper}};
    ojson root;
    root["model"] = model;
    if (s.regime_model) {
        const auto& h = *s.regime_model;
        ojson r;
        r["q_matrix"] = mat(h.q_matrix);
        ojson mu = ojson::array(), lambda = ojson::array();
        for (const auto& v : h.mu_by_regime) mu.push_back(vec(v));
        for (const auto& v : h.lambda_by_regime) lambda.push_back(vec(v));
        r["mu_by_regime"] = mu;
        r["lambda_by_regime"] = lambda;
        r["initial_dist"] = vec(h.initial_dist);
        root["regime"] = r;
    }
    const auto& n = cfg.numerics;
    root["numerics"] = ojson{{"paths", n.paths},         {"steps", n.steps},   {"seed", n.seed},
                             {"basis_degree", n.basis_degree}, {"ridge", n.ridge}, {"batches", n.batches},
                             {"export_paths", n.export_paths}};
    const auto& u = cfg.utility;
    ojson ut;
    ut["kind"] = utility_name(u.kind);
    ut["gamma"] = u.gamma;
    ut["x0"] = u.x0;
    ut["information"] = u.information == Information::full ? "full" : "partial";
    if (u.claim) {
        ut["claim"] = ojson{{"id", u.claim->name()},          {"amount", u.claim->amount},
                            {"strike", u.claim->strike},      {"asset", u.claim->asset},
                            {"default_index", u.claim->default_index}, {"cash", u.claim->cash}};
    }
    if (u.strategy) ut["strategy"] = vec(*u.strategy);
    root["utility"] = ut;
    root["bounds"] = ojson{{"k", cfg.ks}};
    ojson formats = ojson::array();
    if (cfg.outputs.csv) formats.push_back("csv");
    if (cfg.outputs.json) formats.push_back("json");
    root["outputs"] = ojson{{"directory", cfg.outputs.directory}, {"formats", formats}};
    return root.dump(indent);
}

}  // namespace credopt
