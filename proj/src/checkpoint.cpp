#include "lesionseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lesionseg {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<char*>(&v), 8); }

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 8));
}

void read_doubles(std::istream& is, std::vector<double>& v, const std::string& what) {
    std::uint64_t n = read_u64(is);
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * 8));
    if (!is)
        throw format_error("checkpoint truncated while reading " + what);
}

nlohmann::json config_json(const NetConfig& cfg, const TrainerState* state) {
    nlohmann::json j;
    j["format_version"] = kVersion;
    j["in_channels"] = cfg.in_channels;
    j["channels"] = cfg.channels;
    j["levels"] = cfg.levels();
    j["norm"] = norm_mode_name(cfg.norm);
    j["norm_before_act"] = cfg.norm_before_act;
    j["eps"] = cfg.eps;
    j["momentum"] = cfg.momentum;
    j["norm_param_sets"] = cfg.norm == NormMode::CondIN ? kCondInSets : 1;
    j["trained_iters"] = state ? state->trained_iters : 0;
    j["has_trainer_state"] = state != nullptr;
    return j;
}

} // namespace

void save_checkpoint(UNet& net, const std::string& path, const TrainerState* state) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw data_error("cannot open checkpoint for writing: " + path);

    os.write(kMagic, 8);
    write_u32(os, kVersion);

    std::string json = config_json(net.config(), state).dump();
    write_u32(os, std::uint32_t(json.size()));
    os.write(json.data(), std::streamsize(json.size()));

    for (auto& p : net.params())
        write_doubles(os, *p.w);
    for (NormLayer* nl : net.norm_layers()) {
        write_doubles(os, nl->ema_mean);
        write_doubles(os, nl->ema_var);
    }
    if (state) {
        write_doubles(os, state->adam_m);
        write_doubles(os, state->adam_v);
        write_u64(os, std::uint64_t(state->adam_step));
        write_u64(os, std::uint64_t(state->trained_iters));
    }
    if (!os)
        throw data_error("checkpoint write failed: " + path);
}

UNet load_checkpoint(const std::string& path, TrainerState* state) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw data_error("cannot open checkpoint: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw format_error("bad checkpoint magic: " + path);
    std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw unsupported_error("unsupported checkpoint version: " + path);

    std::uint32_t jlen = read_u32(is);
    std::string json(jlen, '\0');
    is.read(json.data(), jlen);
    if (!is)
        throw format_error("checkpoint truncated: " + path);

    nlohmann::json j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded())
        throw format_error("bad checkpoint config json: " + path);

    NetConfig cfg;
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.channels = j.at("channels").get<std::vector<int>>();
    cfg.norm = parse_norm_mode(j.at("norm").get<std::string>());
    cfg.norm_before_act = j.at("norm_before_act").get<bool>();
    cfg.eps = j.at("eps").get<double>();
    cfg.momentum = j.at("momentum").get<double>();

    UNet net(cfg);
    for (auto& p : net.params()) {
        std::vector<double> buf;
        read_doubles(is, buf, p.name);
        if (buf.size() != p.w->size())
            throw format_error("checkpoint tensor size mismatch for " + p.name);
        *p.w = std::move(buf);
    }
    for (NormLayer* nl : net.norm_layers()) {
        read_doubles(is, nl->ema_mean, nl->name() + ".ema_mean");
        read_doubles(is, nl->ema_var, nl->name() + ".ema_var");
        if (int(nl->ema_mean.size()) != nl->channels() ||
            int(nl->ema_var.size()) != nl->channels())
            throw format_error("checkpoint moving-average size mismatch");
    }
    bool has_state = j.value("has_trainer_state", false);
    if (state) {
        if (has_state) {
            read_doubles(is, state->adam_m, "adam_m");
            read_doubles(is, state->adam_v, "adam_v");
            state->adam_step = std::int64_t(read_u64(is));
            state->trained_iters = std::int64_t(read_u64(is));
        } else {
            *state = TrainerState{};
        }
    }
    return net;
}

std::string checkpoint_config_json(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw data_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw format_error("bad checkpoint magic: " + path);
    (void)read_u32(is);
    std::uint32_t jlen = read_u32(is);
    std::string json(jlen, '\0');
    is.read(json.data(), jlen);
    if (!is)
        throw format_error("checkpoint truncated: " + path);
    return json;
}

} // namespace lesionseg
