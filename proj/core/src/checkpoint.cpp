#include "dyad/checkpoint.hpp"

#include <fstream>

#include "dyad/errors.hpp"
#include "json.hpp"

namespace dyad {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json model_to_json(const ModelConfig& m) {
    return {{"d_model", m.d_model},       {"d_lstm", m.d_lstm},
            {"n_heads", m.n_heads},       {"d_attn", m.d_attn},
            {"fc_hidden", m.fc_hidden},   {"dropout_rate", m.dropout_rate},
            {"use_inter", m.use_inter},   {"use_intra", m.use_intra},
            {"seed", m.seed}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.d_model = j.at("d_model");
    m.d_lstm = j.at("d_lstm");
    m.n_heads = j.at("n_heads");
    m.d_attn = j.at("d_attn");
    m.fc_hidden = j.at("fc_hidden");
    m.dropout_rate = j.at("dropout_rate");
    m.use_inter = j.at("use_inter");
    m.use_intra = j.at("use_intra");
    m.seed = j.at("seed");
    return m;
}

nlohmann::json stats_to_json(const DataStats& s) {
    return {{"emitter_mean", s.emitter.mean},
            {"emitter_std", s.emitter.std_dev},
            {"receiver_mean", s.receiver.mean},
            {"receiver_std", s.receiver.std_dev},
            {"target_mean", s.target_mean},
            {"target_std", s.target_std},
            {"features_normalized", s.features_normalized},
            {"targets_normalized", s.targets_normalized}};
}

DataStats stats_from_json(const nlohmann::json& j) {
    DataStats s;
    s.emitter.mean = j.at("emitter_mean").get<std::vector<double>>();
    s.emitter.std_dev = j.at("emitter_std").get<std::vector<double>>();
    s.receiver.mean = j.at("receiver_mean").get<std::vector<double>>();
    s.receiver.std_dev = j.at("receiver_std").get<std::vector<double>>();
    s.target_mean = j.at("target_mean").get<std::array<double, 2>>();
    s.target_std = j.at("target_std").get<std::array<double, 2>>();
    s.features_normalized = j.at("features_normalized");
    s.targets_normalized = j.at("targets_normalized");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model,
                     const ParamSet& params, const DataStats& stats) {
    nlohmann::json shapes = nlohmann::json::array();
    for (size_t i = 0; i < params.size(); ++i)
        shapes.push_back({{"name", params.names()[i]},
                          {"shape", params.tensors()[i].shape}});
    nlohmann::json header = {{"format_version", kFormatVersion},
                             {"model", model_to_json(model)},
                             {"shape_table", shapes},
                             {"stats", stats_to_json(stats)}};
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : params.tensors())
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 8));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::uint64_t hlen = 0;
    if (!in.read(reinterpret_cast<char*>(&hlen), 8))
        throw ParseError("truncated checkpoint reading header length", 0);
    std::string hs(hlen, '\0');
    if (!in.read(hs.data(), static_cast<std::streamsize>(hlen)))
        throw ParseError("truncated checkpoint reading header", 8);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint header: ") + e.what(), 8);
    }
    if (header.at("format_version").get<int>() != kFormatVersion)
        throw ParseError("unsupported checkpoint format version", 8);

    Checkpoint ckpt;
    ckpt.model = model_from_json(header.at("model"));
    ckpt.stats = stats_from_json(header.at("stats"));
    std::uint64_t offset = 8 + hlen;
    for (const auto& entry : header.at("shape_table")) {
        auto shape = entry.at("shape").get<std::vector<int>>();
        Tensor t = Tensor::zeros(shape);
        if (!in.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * 8)))
            throw ParseError("truncated checkpoint reading " +
                                 entry.at("name").get<std::string>(),
                             offset);
        offset += t.data.size() * 8;
        ckpt.params.add(entry.at("name").get<std::string>(), std::move(t));
    }
    return ckpt;
}

}  // namespace dyad
