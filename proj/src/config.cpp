#include "swreg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "swreg/volume_io.hpp"

namespace swreg {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        if (!keys.contains(k)) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void get_dims(const json& j, const char* key, Dims& out, const std::string& where) {
    if (!j.contains(key)) return;
    std::array<int, 3> a{};
    get(j, key, a, where);
    out = {a[0], a[1], a[2]};
}

void get_range(const json& j, const char* key, Range& out, const std::string& where) {
    if (!j.contains(key)) return;
    std::array<double, 2> a{};
    get(j, key, a, where);
    out = {a[0], a[1]};
}

json dims_json(const Dims& d) { return json::array({d.w, d.h, d.d}); }
json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

}  // namespace

PhantomConfig parse_phantom_config(const std::string& json_text) {
    const json j = parse(json_text);
    const std::string w = "phantom";
    allow_keys(j,
               {"dims", "spacing", "subjects", "train_fraction", "seed", "translation_jitter", "scale_jitter",
                "offset_jitter", "background", "intensity", "noise_sigma", "bias_amplitude"},
               w);
    PhantomConfig c;
    get_dims(j, "dims", c.dims, w);
    if (j.contains("spacing")) {
        std::array<double, 3> s{};
        get(j, "spacing", s, w);
        c.spacing = {s[0], s[1], s[2]};
    }
    get(j, "subjects", c.subjects, w);
    get(j, "train_fraction", c.train_fraction, w);
    get(j, "seed", c.seed, w);
    get(j, "translation_jitter", c.translation_jitter, w);
    get(j, "scale_jitter", c.scale_jitter, w);
    get(j, "offset_jitter", c.offset_jitter, w);
    get(j, "background", c.background, w);
    get(j, "intensity", c.intensity, w);
    get(j, "noise_sigma", c.noise_sigma, w);
    get(j, "bias_amplitude", c.bias_amplitude, w);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("phantom: ") + e.what());
    }
    return c;
}

std::string to_json(const PhantomConfig& c) {
    json j;
    j["dims"] = dims_json(c.dims);
    j["spacing"] = json::array({c.spacing.x, c.spacing.y, c.spacing.z});
    j["subjects"] = c.subjects;
    j["train_fraction"] = c.train_fraction;
    j["seed"] = c.seed;
    j["translation_jitter"] = c.translation_jitter;
    j["scale_jitter"] = c.scale_jitter;
    j["offset_jitter"] = c.offset_jitter;
    j["background"] = c.background;
    j["intensity"] = c.intensity;
    j["noise_sigma"] = c.noise_sigma;
    j["bias_amplitude"] = c.bias_amplitude;
    return j.dump(2);
}

TrainConfig parse_train_config(const std::string& json_text, std::optional<Dims> data_dims) {
    const json j = parse(json_text);
    const std::string w = "train";
    allow_keys(j,
               {"labelled_ratio", "alpha", "gamma", "epochs", "warmup_epochs", "steps_per_epoch", "mode", "seed",
                "optimizer", "augment", "arch"},
               w);
    TrainConfig c;
    get(j, "labelled_ratio", c.labelled_ratio, w);
    get(j, "alpha", c.alpha, w);
    get(j, "gamma", c.gamma, w);
    get(j, "epochs", c.epochs, w);
    get(j, "warmup_epochs", c.warmup_epochs, w);
    get(j, "steps_per_epoch", c.steps_per_epoch, w);
    get(j, "seed", c.seed, w);
    if (j.contains("mode")) {
        std::string m;
        get(j, "mode", m, w);
        try {
            c.mode = parse_train_mode(m);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        allow_keys(o, {"lr", "beta1", "beta2", "eps"}, "train.optimizer");
        get(o, "lr", c.optimizer.lr, "train.optimizer");
        get(o, "beta1", c.optimizer.beta1, "train.optimizer");
        get(o, "beta2", c.optimizer.beta2, "train.optimizer");
        get(o, "eps", c.optimizer.eps, "train.optimizer");
    }
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        const std::string wa = "train.augment";
        allow_keys(a, {"rotation_deg", "scale", "translation_vox", "cuboid_fraction", "seed"}, wa);
        get_range(a, "rotation_deg", c.augment.rotation_deg, wa);
        get_range(a, "scale", c.augment.scale, wa);
        if (a.contains("translation_vox")) {
            Range t;
            get_range(a, "translation_vox", t, wa);
            c.augment.translation_vox = t;
        }
        get_range(a, "cuboid_fraction", c.augment.cuboid_fraction, wa);
        get(a, "seed", c.augment.seed, wa);
    }
    bool input_given = false;
    if (j.contains("arch")) {
        const json& a = j.at("arch");
        const std::string wa = "train.arch";
        allow_keys(a, {"input", "pool", "hidden", "control", "max_displacement"}, wa);
        input_given = a.contains("input");
        get_dims(a, "input", c.arch.input, wa);
        get(a, "pool", c.arch.pool, wa);
        get(a, "hidden", c.arch.hidden, wa);
        if (a.contains("control")) {
            Dims d;
            get_dims(a, "control", d, wa);
            c.arch.control = d;
        }
        if (a.contains("max_displacement")) {
            double m = 0.0;
            get(a, "max_displacement", m, wa);
            c.arch.max_displacement = m;
        }
    }
    if (!input_given && data_dims) c.arch.input = *data_dims;
    if (data_dims && c.arch.input != *data_dims) {
        throw ConfigError("train.arch.input " + c.arch.input.str() + " does not match data dims " + data_dims->str());
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    return c;
}

std::string to_json(const TrainConfig& c) {
    json j;
    j["labelled_ratio"] = c.labelled_ratio;
    j["alpha"] = c.alpha;
    j["gamma"] = c.gamma;
    j["epochs"] = c.epochs;
    j["warmup_epochs"] = c.warmup_epochs;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["optimizer"] = {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2},
                      {"eps", c.optimizer.eps}};
    j["augment"] = {{"rotation_deg", range_json(c.augment.rotation_deg)},
                    {"scale", range_json(c.augment.scale)},
                    {"translation_vox", range_json(c.augment.translation_for(c.arch.input))},
                    {"cuboid_fraction", range_json(c.augment.cuboid_fraction)},
                    {"seed", c.augment.seed}};
    j["arch"] = {{"input", dims_json(c.arch.input)},
                 {"pool", c.arch.pool},
                 {"hidden", c.arch.hidden},
                 {"control", dims_json(c.arch.control_dims())},
                 {"max_displacement", c.arch.displacement_scale()}};
    return j.dump(2);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(IoErrc::open_failed, path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace swreg
