#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "mcseg/checkpoint.hpp"
#include "mcseg/model.hpp"
#include "support/test_util.hpp"

using namespace mcseg;

namespace {

Vocabulary small_vocab() {
    Vocabulary v;
    v.add(U'你');
    v.add(U'好');
    v.add(U'刘');
    return v;
}

Model small_model(bool with_shared = true) {
    EncoderConfig cfg;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.d_h = 8;
    cfg.d_ff = 16;
    cfg.max_seq_len = 16;
    cfg.dropout_p = 0.1;
    Vocabulary vocab = small_vocab();
    return Model::create(cfg, {"pku", "ctb"}, with_shared, vocab, 42);
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip preserves metadata and parameters at fp32 precision") {
    testutil::TempDir dir("ckpt");
    Model m = small_model();
    m.save(dir.str());
    Model loaded = Model::load(dir.str());

    CHECK(loaded.meta.format == kCheckpointFormat);
    CHECK(loaded.meta.domains == m.meta.domains);
    CHECK(loaded.meta.has_shared == m.meta.has_shared);
    CHECK(loaded.meta.encoder.num_layers == m.meta.encoder.num_layers);
    CHECK(loaded.meta.encoder.vocab_size == m.meta.encoder.vocab_size);
    CHECK(loaded.vocab.size() == m.vocab.size());

    REQUIRE(loaded.params.names() == m.params.names());
    for (const auto& name : m.params.names()) {
        const Tensor& orig = m.params.at(name);
        const Tensor& back = loaded.params.at(name);
        REQUIRE(orig.shape() == back.shape());
        for (std::size_t i = 0; i < orig.size(); ++i)
            CHECK(back[i] == static_cast<double>(static_cast<float>(orig[i])));
    }
}

TEST_CASE("manifest carries format, shapes and precision") {
    testutil::TempDir dir("manifest");
    Model m = small_model();
    m.save(dir.str());

    std::ifstream in(dir.str() + "/manifest.json");
    nlohmann::json manifest;
    in >> manifest;
    CHECK(manifest["format"] == kCheckpointFormat);
    bool saw_crf = false;
    for (const auto& entry : manifest["params"]) {
        CHECK(entry.contains("name"));
        CHECK(entry.contains("shape"));
        CHECK(entry.contains("precision"));
        CHECK(entry.contains("offset"));
        if (entry["name"] == "crf.W_s") {
            saw_crf = true;
            CHECK(entry["shape"] == nlohmann::json({16, 4}));
            CHECK(entry["precision"] == "full");
        }
    }
    CHECK(saw_crf);
}

TEST_CASE("single-criteria checkpoints have no shared projection entries") {
    testutil::TempDir dir("single");
    EncoderConfig cfg;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.d_h = 8;
    cfg.d_ff = 16;
    cfg.max_seq_len = 16;
    Vocabulary vocab = small_vocab();
    Model m = Model::create(cfg, {"solo"}, /*with_shared=*/false, vocab, 1);
    m.save(dir.str());

    std::ifstream in(dir.str() + "/manifest.json");
    nlohmann::json manifest;
    in >> manifest;
    for (const auto& entry : manifest["params"]) {
        const std::string name = entry["name"].get<std::string>();
        CHECK(name.find("proj.shared") == std::string::npos);
    }
}

TEST_CASE("payload is little-endian fp32") {
    testutil::TempDir dir("payload");
    ModelMeta meta;
    meta.encoder.num_layers = 0;
    meta.encoder.num_heads = 1;
    meta.encoder.d_h = 1;
    meta.encoder.d_ff = 1;
    meta.encoder.max_seq_len = 1;
    meta.encoder.vocab_size = 4;
    meta.domains = {"d"};
    ParamStore params;
    params.add("x", Tensor({1}, {1.0}));
    save_checkpoint(dir.str(), meta, params, Vocabulary());

    std::ifstream bin(dir.str() + "/params.bin", std::ios::binary);
    unsigned char bytes[4];
    bin.read(reinterpret_cast<char*>(bytes), 4);
    // 1.0f = 0x3F800000, stored little-endian
    CHECK(bytes[0] == 0x00);
    CHECK(bytes[1] == 0x00);
    CHECK(bytes[2] == 0x80);
    CHECK(bytes[3] == 0x3F);
}

TEST_CASE("missing or corrupt checkpoints raise CheckpointError") {
    CHECK_THROWS_AS(Model::load("/nonexistent/path"), CheckpointError);

    testutil::TempDir dir("corrupt");
    Model m = small_model();
    m.save(dir.str());
    {
        std::ofstream out(dir.str() + "/manifest.json", std::ios::trunc);
        out << "{ not json";
    }
    CHECK_THROWS_AS(Model::load(dir.str()), CheckpointError);
}

TEST_CASE("truncated payload is caught") {
    testutil::TempDir dir("short");
    Model m = small_model();
    m.save(dir.str());
    // chop the payload
    std::filesystem::resize_file(std::filesystem::path(dir.str()) / "params.bin", 8);
    CHECK_THROWS_AS(Model::load(dir.str()), CheckpointError);
}

}  // TEST_SUITE
