#include "kgntm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kgntm {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'N', 'T', 'M', 'C', 'K', '\x01'};
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v)
{
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

void put_tensor(std::string& out, const Tensor& t)
{
    const auto vals = t.values();
    out.append(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double));
}

Json shape_json(const Tensor& t)
{
    return Json(t.shape());
}

class Reader {
public:
    Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    Tensor tensor(const Json& shape_j)
    {
        Shape shape = shape_j.get<Shape>();
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        if (pos_ + n * sizeof(double) > bytes_.size()) throw CheckpointError("checkpoint payload truncated");
        std::vector<double> data(n);
        std::memcpy(data.data(), bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return Tensor(std::move(shape), std::move(data));
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_;
};

} // namespace

const MlpNet& Checkpoint::net(const std::string& name) const
{
    auto it = nets.find(name);
    if (it == nets.end()) throw CheckpointError("checkpoint has no network '" + name + "'");
    return it->second;
}

const Tensor& Checkpoint::tensor(const std::string& name) const
{
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
    return it->second;
}

std::string encode_checkpoint(const Checkpoint& ck)
{
    Json manifest;
    manifest["format"] = "kgntm-checkpoint";
    manifest["version"] = kVersion;
    manifest["seed"] = ck.seed;
    manifest["meta"] = ck.meta;
    manifest["nets"] = Json::array();
    manifest["tensors"] = Json::array();

    std::string payload;
    for (const auto& [key, net] : ck.nets) {
        Json jn;
        jn["key"] = key;
        jn["name"] = net.name();
        jn["widths"] = net.widths();
        jn["layers"] = Json::array();
        for (const auto& layer : net.layers()) {
            jn["layers"].push_back({{"activation", std::string(activation_name(layer.activation))},
                                    {"weight", shape_json(layer.weight.value)},
                                    {"bias", shape_json(layer.bias.value)}});
            put_tensor(payload, layer.weight.value);
            put_tensor(payload, layer.bias.value);
        }
        manifest["nets"].push_back(std::move(jn));
    }
    for (const auto& [name, t] : ck.tensors) {
        manifest["tensors"].push_back({{"name", name}, {"shape", shape_json(t)}});
        put_tensor(payload, t);
    }

    const std::string text = manifest.dump();
    std::string out(kMagic, 8);
    put_u64(out, text.size());
    out += text;
    out += payload;
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes)
{
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 8);
    if (16 + len > bytes.size()) throw CheckpointError("checkpoint manifest truncated");

    Json manifest;
    try {
        manifest = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const Json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
    }
    if (manifest.value("format", "") != "kgntm-checkpoint") throw CheckpointError("unknown checkpoint format");
    if (manifest.value("version", 0) != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + manifest.value("version", Json()).dump());
    }

    Checkpoint ck;
    ck.seed = manifest.at("seed").get<std::uint64_t>();
    ck.meta = manifest.at("meta");
    Reader rd(bytes, 16 + len);
    for (const auto& jn : manifest.at("nets")) {
        std::vector<std::size_t> widths = jn.at("widths").get<std::vector<std::size_t>>();
        std::vector<Activation> acts;
        for (const auto& jl : jn.at("layers")) acts.push_back(activation_from_name(jl.at("activation").get<std::string>()));
        Rng dummy(0);
        MlpNet net(jn.at("name").get<std::string>(), widths, acts, dummy);
        std::size_t l = 0;
        for (const auto& jl : jn.at("layers")) {
            auto& layer = net.layers()[l++];
            Tensor w = rd.tensor(jl.at("weight"));
            Tensor b = rd.tensor(jl.at("bias"));
            if (!w.same_shape(layer.weight.value) || !b.same_shape(layer.bias.value)) {
                throw CheckpointError("network '" + net.name() + "' layer shapes inconsistent with widths");
            }
            layer.weight.value = std::move(w);
            layer.bias.value = std::move(b);
        }
        ck.nets.emplace(jn.at("key").get<std::string>(), std::move(net));
    }
    for (const auto& jt : manifest.at("tensors")) {
        ck.tensors.emplace(jt.at("name").get<std::string>(), rd.tensor(jt.at("shape")));
    }
    if (!rd.at_end()) throw CheckpointError("checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
    const std::string bytes = encode_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

} // namespace kgntm
