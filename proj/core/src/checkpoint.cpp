#include "mcseg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mcseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    unsigned char b[4] = {static_cast<unsigned char>(bits & 0xFF),
                          static_cast<unsigned char>((bits >> 8) & 0xFF),
                          static_cast<unsigned char>((bits >> 16) & 0xFF),
                          static_cast<unsigned char>((bits >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

const char* precision_name(Precision p) {
    return p == Precision::EmulatedHalf ? "half" : "full";
}

Precision precision_from(const std::string& s) {
    if (s == "full") return Precision::Full;
    if (s == "half") return Precision::EmulatedHalf;
    throw CheckpointError("manifest: unknown precision '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::string& dir, const ModelMeta& meta,
                     const ParamStore& params, const Vocabulary& vocab) {
    fs::create_directories(dir);

    ordered_json manifest;
    manifest["format"] = meta.format;
    manifest["model"] = {
        {"domains", meta.domains},
        {"has_shared", meta.has_shared},
        {"encoder",
         {{"num_layers", meta.encoder.num_layers},
          {"num_heads", meta.encoder.num_heads},
          {"d_h", meta.encoder.d_h},
          {"d_ff", meta.encoder.d_ff},
          {"max_seq_len", meta.encoder.max_seq_len},
          {"dropout_p", meta.encoder.dropout_p},
          {"vocab_size", meta.encoder.vocab_size}}},
    };

    std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
    if (!bin) throw CheckpointError("cannot write " + dir + "/params.bin");
    ordered_json entries = ordered_json::array();
    std::size_t offset = 0;
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name);
        entries.push_back({{"name", name},
                           {"shape", t.shape()},
                           {"precision", precision_name(t.precision())},
                           {"offset", offset},
                           {"count", t.size()}});
        for (double v : t.raw()) write_f32_le(bin, static_cast<float>(v));
        offset += t.size() * 4;
    }
    manifest["params"] = std::move(entries);
    bin.close();
    if (!bin) throw CheckpointError("failed writing " + dir + "/params.bin");

    std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!mf) throw CheckpointError("cannot write " + dir + "/manifest.json");
    mf << manifest.dump(2) << '\n';
    mf.close();
    if (!mf) throw CheckpointError("failed writing " + dir + "/manifest.json");

    vocab.save((fs::path(dir) / "vocab.txt").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!mf) throw CheckpointError("cannot read " + dir + "/manifest.json");
    ordered_json manifest;
    try {
        mf >> manifest;
    } catch (const std::exception& e) {
        throw CheckpointError("bad manifest in " + dir + ": " + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.meta.format = manifest.at("format").get<int>();
        if (ckpt.meta.format != kCheckpointFormat)
            throw CheckpointError("unsupported checkpoint format " +
                                  std::to_string(ckpt.meta.format));
        const auto& model = manifest.at("model");
        ckpt.meta.domains = model.at("domains").get<std::vector<std::string>>();
        ckpt.meta.has_shared = model.at("has_shared").get<bool>();
        const auto& enc = model.at("encoder");
        ckpt.meta.encoder.num_layers = enc.at("num_layers").get<int>();
        ckpt.meta.encoder.num_heads = enc.at("num_heads").get<int>();
        ckpt.meta.encoder.d_h = enc.at("d_h").get<int>();
        ckpt.meta.encoder.d_ff = enc.at("d_ff").get<int>();
        ckpt.meta.encoder.max_seq_len = enc.at("max_seq_len").get<int>();
        ckpt.meta.encoder.dropout_p = enc.at("dropout_p").get<double>();
        ckpt.meta.encoder.vocab_size = enc.at("vocab_size").get<int>();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError("bad manifest in " + dir + ": " + e.what());
    }

    std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
    if (!bin) throw CheckpointError("cannot read " + dir + "/params.bin");
    std::vector<unsigned char> payload((std::istreambuf_iterator<char>(bin)),
                                       std::istreambuf_iterator<char>());

    try {
        for (const auto& entry : manifest.at("params")) {
            const std::string name = entry.at("name").get<std::string>();
            const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
            const Precision prec = precision_from(entry.at("precision").get<std::string>());
            const std::size_t offset = entry.at("offset").get<std::size_t>();
            const std::size_t count = entry.at("count").get<std::size_t>();
            if (offset + count * 4 > payload.size())
                throw CheckpointError("params.bin too short for " + name);
            Tensor t(shape);
            if (t.size() != count)
                throw CheckpointError("manifest count mismatch for " + name);
            for (std::size_t i = 0; i < count; ++i)
                t[i] = static_cast<double>(read_f32_le(payload.data() + offset + i * 4));
            t.set_precision(prec);
            ckpt.params.add(name, std::move(t));
        }
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError("bad manifest in " + dir + ": " + e.what());
    }

    try {
        ckpt.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("bad vocabulary: ") + e.what());
    }
    if (ckpt.vocab.size() != ckpt.meta.encoder.vocab_size)
        throw CheckpointError("vocab.txt size does not match encoder vocab_size");
    return ckpt;
}

}  // namespace mcseg
