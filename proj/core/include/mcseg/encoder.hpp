#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcseg/bound_params.hpp"
#include "mcseg/params.hpp"
#include "mcseg/rng.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg {

struct EncoderConfig {
    int num_layers = 3;
    int num_heads = 4;
    int d_h = 64;
    int d_ff = 256;
    int max_seq_len = 128;
    double dropout_p = 0.1;
    int vocab_size = 0;

    int head_dim() const { return d_h / num_heads; }
    void validate() const;
};

// Checkpoint keys for the encoder stack.
namespace enc_names {
inline const std::string kTokEmb = "enc.tok_emb";
inline const std::string kPosEmb = "enc.pos_emb";
inline const std::string kEmbLnG = "enc.emb_ln.g";
inline const std::string kEmbLnB = "enc.emb_ln.b";
std::string layer(int i, const std::string& field);  // "enc.layer<i>.<field>"
}  // namespace enc_names

// Xavier-uniform weights, zero biases, identity layer norms.
void init_encoder_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

// Softmaxed attention score matrices, [layer][head], each [len, len].
struct AttentionRecord {
    std::vector<std::vector<Tensor>> scores;
    int length() const {
        return scores.empty() || scores[0].empty() ? 0 : scores[0][0].rows();
    }
};

struct EncodeResult {
    Tensor hidden;                            // [len, d_h]
    std::optional<AttentionRecord> attention; // when capture requested
    std::vector<Tensor> layer_outputs;        // when requested; one per block
};

struct EncodeOptions {
    Precision precision = Precision::Full;
    bool capture_attention = false;
    bool keep_layer_outputs = false;
    // Positions at index >= valid_len (when >= 0) are treated as padding:
    // they receive no attention from real positions.
    int valid_len = -1;
};

// Inference path: token + position embedding, layer norm, then num_layers
// post-norm transformer blocks (self-attention -> add&norm -> FFN with GELU
// -> add&norm). With Precision::EmulatedHalf the inputs and outputs of the
// attention and feedforward matmuls are rounded to binary16; embeddings,
// layer norms, softmax and residuals stay full precision. Weights are
// expected pre-rounded by the caller in that mode (Model::half()).
EncodeResult encode(const ParamStore& params, const EncoderConfig& cfg,
                    std::span<const int> char_ids, const EncodeOptions& opts = {});

// Embedding sublayer only (inference).
Tensor embed(const ParamStore& params, const EncoderConfig& cfg,
             std::span<const int> char_ids);

// Training path over a tape; numerically identical to encode() at full
// precision with dropout disabled.
Var embed_train(Tape& tape, BoundParams& params, const EncoderConfig& cfg,
                std::span<const int> char_ids, Rng& dropout_rng, bool training);
Var encode_train(Tape& tape, BoundParams& params, const EncoderConfig& cfg,
                 std::span<const int> char_ids, Rng& dropout_rng, bool training,
                 int valid_len = -1);

// Copies the embedding tables and the bottom k blocks of a teacher into a
// fresh parameter store. k must not exceed the teacher depth.
void truncate_encoder(const ParamStore& teacher, const EncoderConfig& teacher_cfg, int k,
                      ParamStore& out, EncoderConfig& student_cfg);

// Average over records, layers and heads of the attention row at
// query_index. All records must share one sequence length covering the
// query index.
std::vector<double> mean_attention_by_offset(const std::vector<AttentionRecord>& records,
                                             int query_index);

}  // namespace mcseg
