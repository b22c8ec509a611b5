#include "memda/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "memda/errors.hpp"

namespace memda {

namespace {

constexpr char kMagic[] = "MEMDA-CKPT";
constexpr std::size_t kMagicLen = 10;
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw IoError("'" + path + "': truncated checkpoint");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(kMagic, kMagicLen);
    write_le<std::uint32_t>(out, kVersion);
    const std::string cfg = model_config_to_json(model.config()).dump();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const auto params = model.parameters();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(p->value.rank()));
        for (int d = 0; d < p->value.rank(); ++d) write_le<std::int32_t>(out, p->value.dim(d));
        for (long long i = 0; i < p->value.size(); ++i) write_le<double>(out, p->value[i]);
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IoError("'" + path + "': not a checkpoint file (bad magic)");
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != kVersion)
        throw IoError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
    const auto cfg_len = read_le<std::uint32_t>(in, path);
    std::string cfg_text(cfg_len, '\0');
    in.read(cfg_text.data(), cfg_len);
    if (!in) throw IoError("'" + path + "': truncated checkpoint");
    nlohmann::json cfg_json;
    try {
        cfg_json = nlohmann::json::parse(cfg_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': bad config header: " + e.what());
    }
    Model model(model_config_from_json(cfg_json));
    const auto params = model.parameters();
    const auto n_params = read_le<std::uint32_t>(in, path);
    if (n_params != params.size())
        throw IoError("'" + path + "': checkpoint has " + std::to_string(n_params) +
                      " parameters, model expects " + std::to_string(params.size()));
    for (Parameter* p : params) {
        const auto name_len = read_le<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IoError("'" + path + "': truncated checkpoint");
        if (name != p->name)
            throw IoError("'" + path + "': parameter '" + name + "' where '" + p->name +
                          "' was expected");
        const int rank = read_le<std::uint8_t>(in, path);
        std::vector<int> shape;
        for (int d = 0; d < rank; ++d) shape.push_back(read_le<std::int32_t>(in, path));
        if (shape != p->value.shape())
            throw IoError("'" + path + "': parameter '" + name + "' has shape " +
                          Tensor(shape).shape_str() + ", expected " + p->value.shape_str());
        for (long long i = 0; i < p->value.size(); ++i) p->value[i] = read_le<double>(in, path);
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw IoError("'" + path + "': trailing bytes after last parameter");
    return model;
}

}  // namespace memda
