#include "dyad/session_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "dyad/signalprep.hpp"
#include "json.hpp"

namespace dyad {

namespace {

constexpr char kMagic[4] = {'D', 'Y', 'S', 'N'};
constexpr std::uint32_t kVersion = 1;

struct ByteWriter {
    std::vector<unsigned char> buf;
    void raw(const void* p, size_t n) {
        auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64s(const std::vector<double>& v) { raw(v.data(), v.size() * 8); }
};

struct ByteReader {
    const std::vector<unsigned char>& buf;
    size_t pos = 0;
    void need(size_t n, const char* what) {
        if (pos + n > buf.size())
            throw ParseError(std::string("truncated session file reading ") + what, pos);
    }
    void raw(void* p, size_t n, const char* what) {
        need(n, what);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32(const char* what) { std::uint32_t v; raw(&v, 4, what); return v; }
    std::uint64_t u64(const char* what) { std::uint64_t v; raw(&v, 8, what); return v; }
    std::vector<double> f64s(size_t n, const char* what) {
        std::vector<double> v(n);
        raw(v.data(), n * 8, what);
        return v;
    }
};

nlohmann::json stats_to_json(const std::optional<NormStats>& s) {
    if (!s) return nullptr;
    return {{"mean", s->mean}, {"std", s->std_dev}};
}

std::optional<NormStats> stats_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std_dev = j.at("std").get<std::vector<double>>();
    return s;
}

nlohmann::json column_map_to_json(const std::map<std::string, int>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

}  // namespace

std::uint64_t fnv1a(const unsigned char* data, size_t len, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::filesystem::path write_session(const SessionBundle& bundle,
                                    const std::filesystem::path& out_dir) {
    bundle.validate();
    std::filesystem::create_directories(out_dir);
    auto bin_path = out_dir / (bundle.session_id + ".dys");

    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(bundle.session_id.size()));
    w.raw(bundle.session_id.data(), bundle.session_id.size());
    w.u64(static_cast<std::uint64_t>(bundle.timeline_length()));
    w.u32(static_cast<std::uint32_t>(bundle.emitter.dim()));
    w.u32(static_cast<std::uint32_t>(bundle.receiver.dim()));
    w.f64s(bundle.emitter.features.data);
    w.f64s(bundle.receiver.features.data);
    w.f64s(bundle.labels.data);
    w.u64(fnv1a(w.buf.data(), w.buf.size()));

    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw DataError("cannot open " + bin_path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(w.buf.data()),
              static_cast<std::streamsize>(w.buf.size()));
    out.close();

    nlohmann::json sidecar = {
        {"session_id", bundle.session_id},
        {"column_map",
         {{"emitter", column_map_to_json(bundle.emitter.column_map)},
          {"receiver", column_map_to_json(bundle.receiver.column_map)}}},
        {"normalization_stats",
         {{"emitter", stats_to_json(bundle.emitter_stats)},
          {"receiver", stats_to_json(bundle.receiver_stats)}}},
    };
    std::ofstream js(out_dir / (bundle.session_id + ".json"));
    js << sidecar.dump(2) << "\n";
    return bin_path;
}

SessionBundle read_session(const std::filesystem::path& bin_path) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + bin_path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    ByteReader r{buf};

    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad magic", 0);
    auto version = r.u32("version");
    if (version != kVersion)
        throw ParseError("unsupported version " + std::to_string(version), 4);
    auto id_len = r.u32("id length");
    std::string id(id_len, '\0');
    r.raw(id.data(), id_len, "session id");
    auto t = static_cast<int>(r.u64("timeline length"));
    auto de = static_cast<int>(r.u32("emitter dim"));
    auto dr = static_cast<int>(r.u32("receiver dim"));
    if (t < 1 || de < 1 || dr < 1) throw ParseError("bad dimensions", r.pos);

    SessionBundle bundle;
    bundle.session_id = id;
    bundle.emitter.features = Tensor({t, de}, r.f64s(static_cast<size_t>(t) * de, "emitter block"));
    bundle.receiver.features = Tensor({t, dr}, r.f64s(static_cast<size_t>(t) * dr, "receiver block"));
    bundle.labels = Tensor({t, 2}, r.f64s(static_cast<size_t>(t) * 2, "labels"));

    size_t payload_end = r.pos;
    auto stored = r.u64("checksum");
    if (fnv1a(buf.data(), payload_end) != stored)
        throw ParseError("checksum mismatch", payload_end);

    auto json_path = bin_path;
    json_path.replace_extension(".json");
    if (std::filesystem::exists(json_path)) {
        std::ifstream js(json_path);
        nlohmann::json sidecar = nlohmann::json::parse(js);
        for (const auto& [k, v] : sidecar.at("column_map").at("emitter").items())
            bundle.emitter.column_map[k] = v.get<int>();
        for (const auto& [k, v] : sidecar.at("column_map").at("receiver").items())
            bundle.receiver.column_map[k] = v.get<int>();
        const auto& norm = sidecar.at("normalization_stats");
        bundle.emitter_stats = stats_from_json(norm.at("emitter"));
        bundle.receiver_stats = stats_from_json(norm.at("receiver"));
    }
    return bundle;
}

std::vector<SessionBundle> load_sessions(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".dys") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("no .dys session files in " + dir.string());
    std::vector<SessionBundle> sessions;
    for (const auto& p : paths) sessions.push_back(read_session(p));
    return sessions;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
            field.pop_back();
        out.push_back(field);
    }
    return out;
}

std::pair<std::vector<std::string>, Tensor> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    auto header = split_csv_line(line);
    int cols = static_cast<int>(header.size());
    std::vector<double> data;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != cols)
            throw DataError(path.string() + ": row " + std::to_string(rows + 1) +
                            " has " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(cols));
        for (const auto& f : fields) {
            try {
                data.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw DataError(path.string() + ": cannot parse value '" + f + "'");
            }
        }
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no data rows");
    return {header, Tensor({rows, cols}, std::move(data))};
}

}  // namespace

SessionBundle ingest_session_dir(const std::filesystem::path& session_dir) {
    auto labels_path = session_dir / "labels.csv";
    auto [label_header, labels] = read_csv(labels_path);
    if (label_header.size() != 2 || label_header[0] != "competence" ||
        label_header[1] != "warmth")
        throw DataError(labels_path.string() + ": header must be competence,warmth");
    int t = labels.rows();

    std::vector<RawStream> emitter_streams, receiver_streams;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(session_dir))
        if (entry.path().extension() == ".csv" && entry.path().filename() != "labels.csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        auto stem = file.stem().string();
        auto sep = stem.find('_');
        if (sep == std::string::npos)
            throw DataError(file.string() + ": expected <source>_<modality>.csv");
        RawStream stream;
        stream.source = source_from_string(stem.substr(0, sep));
        stream.modality = modality_from_string(stem.substr(sep + 1));
        auto [header, samples] = read_csv(file);
        stream.channel_names = header;
        stream.samples = std::move(samples);
        stream.validate();
        (stream.source == Source::Emitter ? emitter_streams : receiver_streams)
            .push_back(std::move(stream));
    }
    if (emitter_streams.empty() || receiver_streams.empty())
        throw DataError(session_dir.string() + ": need emitter and receiver streams");

    SessionBundle bundle;
    bundle.session_id = session_dir.filename().string();
    bundle.emitter = align_to_labels(emitter_streams, t);
    bundle.receiver = align_to_labels(receiver_streams, t);
    bundle.labels = std::move(labels);
    if (bundle.emitter.dim() != kEmitterDim)
        throw DataError(bundle.session_id + ": emitter features total " +
                        std::to_string(bundle.emitter.dim()) + " columns, expected " +
                        std::to_string(kEmitterDim));
    if (bundle.receiver.dim() != kReceiverDim)
        throw DataError(bundle.session_id + ": receiver features total " +
                        std::to_string(bundle.receiver.dim()) + " columns, expected " +
                        std::to_string(kReceiverDim));
    bundle.validate();
    return bundle;
}

}  // namespace dyad
