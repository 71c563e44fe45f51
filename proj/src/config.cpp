#include "cladapt/config.hpp"

#include <fstream>
#include <set>

#include "cladapt/errors.hpp"

namespace cladapt {

namespace {

using nlohmann::json;

// Strict section reader: every present key must be consumed exactly once.
class SectionReader {
public:
    SectionReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) {
            throw Error("bad_config_value", prefix_ + " must be a JSON object");
        }
    }

    ~SectionReader() = default;

    void number(const char* key, double& out) {
        if (auto* v = get(key)) {
            if (!v->is_number()) bad(key, "a number");
            out = v->get<double>();
        }
    }

    void integer(const char* key, int& out) {
        if (auto* v = get(key)) {
            if (!v->is_number_integer()) bad(key, "an integer");
            out = v->get<int>();
        }
    }

    void u64(const char* key, uint64_t& out) {
        if (auto* v = get(key)) {
            if (!v->is_number_unsigned() && !v->is_number_integer()) bad(key, "an integer");
            out = v->get<uint64_t>();
        }
    }

    void boolean(const char* key, bool& out) {
        if (auto* v = get(key)) {
            if (!v->is_boolean()) bad(key, "a boolean");
            out = v->get<bool>();
        }
    }

    void pair(const char* key, double& lo, double& hi) {
        if (auto* v = get(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
                bad(key, "a [lo, hi] pair");
            }
            lo = (*v)[0].get<double>();
            hi = (*v)[1].get<double>();
        }
    }

    void triple(const char* key, std::array<double, 3>& out) {
        if (auto* v = get(key)) {
            if (!v->is_array() || v->size() != 3) bad(key, "an array of 3 numbers");
            for (int i = 0; i < 3; ++i) {
                if (!(*v)[i].is_number()) bad(key, "an array of 3 numbers");
                out[i] = (*v)[i].get<double>();
            }
        }
    }

    const json* object(const char* key) {
        if (auto* v = get(key)) {
            if (!v->is_object()) bad(key, "an object");
            return v;
        }
        return nullptr;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!consumed_.count(it.key())) {
                throw Error("unknown_key", "unknown config key: " + prefix_ + "." + it.key());
            }
        }
    }

private:
    const json* get(const char* key) {
        consumed_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    [[noreturn]] void bad(const char* key, const char* what) const {
        throw Error("bad_config_value", prefix_ + "." + key + " must be " + what);
    }

    const json& j_;
    std::string prefix_;
    std::set<std::string> consumed_;
};

void parse_stream(const json& j, StreamConfig& s) {
    SectionReader r(j, "stream");
    r.number("sample_rate", s.sample_rate);
    r.number("window_len", s.window_len);
    r.number("cadence", s.cadence);
    r.number("reorder_horizon", s.reorder_horizon);
    r.number("skew_tolerance", s.skew_tolerance);
    r.finish();
}

void parse_features(const json& j, FeatureConfig& f) {
    SectionReader r(j, "features");
    if (const json* b = r.object("bands")) {
        SectionReader rb(*b, "features.bands");
        rb.pair("theta", f.bands.theta.lo, f.bands.theta.hi);
        rb.pair("alpha", f.bands.alpha.lo, f.bands.alpha.hi);
        rb.pair("beta", f.bands.beta.lo, f.bands.beta.hi);
        rb.pair("gamma", f.bands.gamma.lo, f.bands.gamma.hi);
        rb.finish();
    }
    r.pair("entropy_range", f.entropy_lo, f.entropy_hi);
    r.number("subframe_len", f.subframe_len);
    r.number("hop", f.hop);
    r.number("expected_step_secs", f.expected_step_secs);
    r.finish();
}

void parse_model(const json& j, lstm::TrainConfig& m) {
    SectionReader r(j, "model");
    int layers = 2;
    r.integer("hidden", m.hidden);
    r.integer("layers", layers);
    r.number("dropout", m.dropout_rate);
    r.number("lr", m.adam.lr);
    double betas_lo = m.adam.beta1, betas_hi = m.adam.beta2;
    r.pair("betas", betas_lo, betas_hi);
    m.adam.beta1 = betas_lo;
    m.adam.beta2 = betas_hi;
    r.number("eps", m.adam.eps);
    r.integer("epochs", m.epochs);
    r.integer("batch", m.batch_size);
    r.u64("seed", m.seed);
    r.number("val_fraction", m.val_fraction);
    r.integer("patience", m.patience);
    r.integer("min_per_class", m.min_per_class);
    r.finish();
    if (layers != 2) {
        throw Error("bad_config_value", "model.layers: only the 2-layer architecture exists");
    }
}

void parse_engine(const json& j, EngineConfig& e) {
    SectionReader r(j, "engine");
    r.integer("debounce_n", e.debounce_n);
    r.number("cooldown_secs", e.cooldown_secs);
    r.integer("repetition_k", e.repetition_k);
    r.boolean("max_one_challenge_per_step", e.max_one_challenge_per_step);
    r.pair("fallback_thresholds", e.fallback_thresholds.t_low, e.fallback_thresholds.t_high);
    r.finish();
}

void parse_sim(const json& j, SimConfig& s) {
    SectionReader r(j, "sim");
    r.number("skill", s.profile.skill);
    r.number("reactivity", s.profile.reactivity);
    r.number("noise_level", s.profile.noise_level);
    r.number("tau", s.profile.tau);
    if (const json* b = r.object("band_amps")) {
        SectionReader rb(*b, "sim.band_amps");
        rb.number("theta", s.mix.theta_amp);
        rb.number("alpha", s.mix.alpha_amp);
        rb.number("beta", s.mix.beta_amp);
        rb.number("gamma", s.mix.gamma_amp);
        rb.finish();
    }
    if (const json* b = r.object("couplings")) {
        SectionReader rb(*b, "sim.couplings");
        rb.number("k_theta", s.mix.k_theta);
        rb.number("k_alpha", s.mix.k_alpha);
        rb.finish();
    }
    if (const json* b = r.object("latent")) {
        SectionReader rb(*b, "sim.latent");
        rb.number("noise_sigma", s.latent.noise_sigma);
        rb.number("scaffold_offset", s.latent.scaffold_offset);
        rb.number("challenge_offset", s.latent.challenge_offset);
        rb.number("offset_cap", s.latent.offset_cap);
        rb.number("initial_load", s.latent.initial_load);
        rb.finish();
    }
    if (const json* b = r.object("errors")) {
        SectionReader rb(*b, "sim.errors");
        rb.number("p0", s.errors.p0);
        rb.number("overload_slope", s.errors.overload_slope);
        rb.number("lapse_bonus", s.errors.lapse_bonus);
        rb.number("overload_knee", s.errors.overload_knee);
        rb.number("lapse_knee", s.errors.lapse_knee);
        rb.finish();
    }
    r.number("action_period", s.action_period);
    r.number("trial_period", s.trial_period);
    r.integer("difficulty", s.difficulty);
    r.number("intervention_effect_secs", s.intervention_effect_secs);
    r.number("haptic_effect_secs", s.haptic_effect_secs);
    r.triple("class_targets", s.class_targets);
    r.finish();
}

void parse_calibration(const json& j, calibration::CalibrationPlan& c) {
    SectionReader r(j, "calibration");
    r.number("rest_secs", c.rest_secs);
    r.number("oneback_secs", c.oneback_secs);
    r.number("threeback_secs", c.threeback_secs);
    r.number("optimal_secs", c.optimal_secs);
    r.number("window_cadence", c.window_cadence);
    r.finish();
}

}  // namespace

void AppConfig::validate() const {
    stream.validate();
    features.validate();
    engine.validate();
    calibration.validate();
    sim.profile.validate();
    if (model.hidden < 1 || model.batch_size < 1 || model.epochs < 0 || model.patience < 1 ||
        model.val_fraction <= 0.0 || model.val_fraction >= 1.0 || model.dropout_rate < 0.0 ||
        model.dropout_rate >= 1.0 || model.adam.lr <= 0.0) {
        throw Error("bad_config_value", "model config out of range");
    }
    if (sim.difficulty < 1 || sim.difficulty > kMaxDifficulty || sim.action_period <= 0.0 ||
        sim.trial_period <= 0.0 || sim.intervention_effect_secs < 0.0) {
        throw Error("bad_config_value", "sim config out of range");
    }
}

AppConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("bad_config_value", "config root must be an object");
    AppConfig cfg;
    static const std::set<std::string> sections = {"stream", "features", "model",
                                                   "engine", "sim",      "calibration"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!sections.count(it.key())) {
            throw Error("unknown_key", "unknown config section: " + it.key());
        }
    }
    if (j.contains("stream")) parse_stream(j["stream"], cfg.stream);
    if (j.contains("features")) parse_features(j["features"], cfg.features);
    if (j.contains("model")) parse_model(j["model"], cfg.model);
    if (j.contains("engine")) parse_engine(j["engine"], cfg.engine);
    if (j.contains("sim")) parse_sim(j["sim"], cfg.sim);
    if (j.contains("calibration")) parse_calibration(j["calibration"], cfg.calibration);
    cfg.validate();
    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("bad_config_value", "cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_config_value", std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const AppConfig& cfg) {
    using nlohmann::json;
    json j;
    j["stream"] = {{"sample_rate", cfg.stream.sample_rate},
                   {"window_len", cfg.stream.window_len},
                   {"cadence", cfg.stream.cadence},
                   {"reorder_horizon", cfg.stream.reorder_horizon},
                   {"skew_tolerance", cfg.stream.skew_tolerance}};
    j["features"] = {
        {"bands",
         {{"theta", {cfg.features.bands.theta.lo, cfg.features.bands.theta.hi}},
          {"alpha", {cfg.features.bands.alpha.lo, cfg.features.bands.alpha.hi}},
          {"beta", {cfg.features.bands.beta.lo, cfg.features.bands.beta.hi}},
          {"gamma", {cfg.features.bands.gamma.lo, cfg.features.bands.gamma.hi}}}},
        {"entropy_range", {cfg.features.entropy_lo, cfg.features.entropy_hi}},
        {"subframe_len", cfg.features.subframe_len},
        {"hop", cfg.features.hop},
        {"expected_step_secs", cfg.features.expected_step_secs}};
    j["model"] = {{"hidden", cfg.model.hidden},
                  {"layers", 2},
                  {"dropout", cfg.model.dropout_rate},
                  {"lr", cfg.model.adam.lr},
                  {"betas", {cfg.model.adam.beta1, cfg.model.adam.beta2}},
                  {"eps", cfg.model.adam.eps},
                  {"epochs", cfg.model.epochs},
                  {"batch", cfg.model.batch_size},
                  {"seed", cfg.model.seed},
                  {"val_fraction", cfg.model.val_fraction},
                  {"patience", cfg.model.patience},
                  {"min_per_class", cfg.model.min_per_class}};
    j["engine"] = {{"debounce_n", cfg.engine.debounce_n},
                   {"cooldown_secs", cfg.engine.cooldown_secs},
                   {"repetition_k", cfg.engine.repetition_k},
                   {"max_one_challenge_per_step", cfg.engine.max_one_challenge_per_step},
                   {"fallback_thresholds",
                    {cfg.engine.fallback_thresholds.t_low, cfg.engine.fallback_thresholds.t_high}}};
    j["sim"] = {{"skill", cfg.sim.profile.skill},
                {"reactivity", cfg.sim.profile.reactivity},
                {"noise_level", cfg.sim.profile.noise_level},
                {"tau", cfg.sim.profile.tau},
                {"band_amps",
                 {{"theta", cfg.sim.mix.theta_amp},
                  {"alpha", cfg.sim.mix.alpha_amp},
                  {"beta", cfg.sim.mix.beta_amp},
                  {"gamma", cfg.sim.mix.gamma_amp}}},
                {"couplings", {{"k_theta", cfg.sim.mix.k_theta}, {"k_alpha", cfg.sim.mix.k_alpha}}},
                {"latent",
                 {{"noise_sigma", cfg.sim.latent.noise_sigma},
                  {"scaffold_offset", cfg.sim.latent.scaffold_offset},
                  {"challenge_offset", cfg.sim.latent.challenge_offset},
                  {"offset_cap", cfg.sim.latent.offset_cap},
                  {"initial_load", cfg.sim.latent.initial_load}}},
                {"errors",
                 {{"p0", cfg.sim.errors.p0},
                  {"overload_slope", cfg.sim.errors.overload_slope},
                  {"lapse_bonus", cfg.sim.errors.lapse_bonus},
                  {"overload_knee", cfg.sim.errors.overload_knee},
                  {"lapse_knee", cfg.sim.errors.lapse_knee}}},
                {"action_period", cfg.sim.action_period},
                {"trial_period", cfg.sim.trial_period},
                {"difficulty", cfg.sim.difficulty},
                {"intervention_effect_secs", cfg.sim.intervention_effect_secs},
                {"haptic_effect_secs", cfg.sim.haptic_effect_secs},
                {"class_targets",
                 {cfg.sim.class_targets[0], cfg.sim.class_targets[1], cfg.sim.class_targets[2]}}};
    j["calibration"] = {{"rest_secs", cfg.calibration.rest_secs},
                        {"oneback_secs", cfg.calibration.oneback_secs},
                        {"threeback_secs", cfg.calibration.threeback_secs},
                        {"optimal_secs", cfg.calibration.optimal_secs},
                        {"window_cadence", cfg.calibration.window_cadence}};
    return j;
}

}  // namespace cladapt
