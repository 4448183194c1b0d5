#include "dyad/config_json.hpp"

#include <fstream>
#include <set>

#include "dyad/errors.hpp"
#include "json.hpp"

namespace dyad {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("unknown config key '" + key + "' in " + where);
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    static const std::set<std::string> known = {
        "lr0",        "halve_every", "epochs",       "batch_size",
        "adam_beta1", "adam_beta2",  "adam_eps",     "split",
        "seed",       "kd_on",       "se_on",        "regularize_sequences",
        "swap_kd_se", "normalize_features", "normalize_targets",
        "split_by_session", "window_width", "stride", "model"};
    static const std::set<std::string> known_model = {
        "d_model", "d_lstm", "n_heads", "d_attn", "fc_hidden",
        "dropout_rate", "use_inter", "use_intra", "seed"};
    reject_unknown(j, known, "train config");

    TrainConfig cfg;
    maybe(j, "lr0", cfg.lr0);
    maybe(j, "halve_every", cfg.halve_every);
    maybe(j, "epochs", cfg.epochs);
    maybe(j, "batch_size", cfg.batch_size);
    maybe(j, "adam_beta1", cfg.adam_beta1);
    maybe(j, "adam_beta2", cfg.adam_beta2);
    maybe(j, "adam_eps", cfg.adam_eps);
    maybe(j, "seed", cfg.seed);
    maybe(j, "kd_on", cfg.kd_on);
    maybe(j, "se_on", cfg.se_on);
    maybe(j, "regularize_sequences", cfg.regularize_sequences);
    maybe(j, "swap_kd_se", cfg.swap_kd_se);
    maybe(j, "normalize_features", cfg.normalize_features);
    maybe(j, "normalize_targets", cfg.normalize_targets);
    maybe(j, "split_by_session", cfg.split_by_session);
    maybe(j, "window_width", cfg.window_width);
    maybe(j, "stride", cfg.stride);
    if (j.contains("split")) cfg.split = j.at("split").get<std::array<double, 3>>();
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, known_model, "model config");
        maybe(m, "d_model", cfg.model.d_model);
        maybe(m, "d_lstm", cfg.model.d_lstm);
        maybe(m, "n_heads", cfg.model.n_heads);
        maybe(m, "d_attn", cfg.model.d_attn);
        maybe(m, "fc_hidden", cfg.model.fc_hidden);
        maybe(m, "dropout_rate", cfg.model.dropout_rate);
        maybe(m, "use_inter", cfg.model.use_inter);
        maybe(m, "use_intra", cfg.model.use_intra);
        maybe(m, "seed", cfg.model.seed);
    }
    cfg.validate();
    return cfg;
}

TrainConfig train_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return train_config_from_json_text(text);
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
    nlohmann::json j = {
        {"lr0", cfg.lr0},
        {"halve_every", cfg.halve_every},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"adam_beta1", cfg.adam_beta1},
        {"adam_beta2", cfg.adam_beta2},
        {"adam_eps", cfg.adam_eps},
        {"split", cfg.split},
        {"seed", cfg.seed},
        {"kd_on", cfg.kd_on},
        {"se_on", cfg.se_on},
        {"regularize_sequences", cfg.regularize_sequences},
        {"swap_kd_se", cfg.swap_kd_se},
        {"normalize_features", cfg.normalize_features},
        {"normalize_targets", cfg.normalize_targets},
        {"split_by_session", cfg.split_by_session},
        {"window_width", cfg.window_width},
        {"stride", cfg.stride},
        {"model",
         {{"d_model", cfg.model.d_model},
          {"d_lstm", cfg.model.d_lstm},
          {"n_heads", cfg.model.n_heads},
          {"d_attn", cfg.model.d_attn},
          {"fc_hidden", cfg.model.fc_hidden},
          {"dropout_rate", cfg.model.dropout_rate},
          {"use_inter", cfg.model.use_inter},
          {"use_intra", cfg.model.use_intra},
          {"seed", cfg.model.seed}}},
    };
    return j.dump(2);
}

}  // namespace dyad
