#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"
#include "kgntm/nn.hpp"

namespace kgntm {

using Json = nlohmann::json;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary container:
//   8 bytes   magic "KGNTMCK\x01"
//   8 bytes   little-endian u64 manifest length
//   manifest  UTF-8 JSON
//   payload   little-endian f64 values, in manifest order
// The manifest lists networks (widths, activations, tensor shapes) and
// free-standing tensors, plus an arbitrary `meta` object and the seed.
struct Checkpoint {
    std::uint64_t seed = 0;
    Json meta = Json::object();
    std::map<std::string, MlpNet> nets;
    std::map<std::string, Tensor> tensors;

    const MlpNet& net(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace kgntm
