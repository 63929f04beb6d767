#include "mcseg/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "mcseg/half.hpp"
#include "mcseg/tensor_ops.hpp"

namespace mcseg {

void EncoderConfig::validate() const {
    if (num_layers < 0) throw std::invalid_argument("EncoderConfig: num_layers must be >= 0");
    if (num_heads < 1 || d_h < 1 || d_ff < 1 || max_seq_len < 1 || vocab_size < 1)
        throw std::invalid_argument("EncoderConfig: dimensions must be positive");
    if (d_h % num_heads != 0)
        throw std::invalid_argument("EncoderConfig: d_h (" + std::to_string(d_h) +
                                    ") must be divisible by num_heads (" +
                                    std::to_string(num_heads) + ")");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("EncoderConfig: dropout_p must lie in [0,1)");
}

namespace enc_names {
std::string layer(int i, const std::string& field) {
    return "enc.layer" + std::to_string(i) + "." + field;
}
}  // namespace enc_names

namespace {

const char* kAttnFields[] = {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo"};
const char* kAttnBias[] = {"attn.bq", "attn.bk", "attn.bv", "attn.bo"};

void check_ids(const EncoderConfig& cfg, std::span<const int> ids) {
    if (static_cast<int>(ids.size()) > cfg.max_seq_len)
        throw std::invalid_argument("encoder: input length " + std::to_string(ids.size()) +
                                    " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    for (int id : ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::out_of_range("encoder: char id " + std::to_string(id) +
                                    " outside vocabulary of " + std::to_string(cfg.vocab_size));
}

std::vector<int> positions(std::size_t n) {
    std::vector<int> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<int>(i);
    return p;
}

// Rounds activations only in EmulatedHalf mode.
inline Tensor maybe_half(Tensor t, Precision p) {
    return p == Precision::EmulatedHalf ? quantize_half(t) : t;
}

// Flagged kernel: round inputs, multiply at full internal precision, round
// the product. Weights arrive pre-rounded in half mode, and rounding is
// idempotent, so re-rounding them here is exact.
Tensor half_matmul(const Tensor& a, const Tensor& b, Precision p) {
    if (p != Precision::EmulatedHalf) return ops::matmul(a, b);
    return quantize_half(ops::matmul(quantize_half(a), quantize_half(b)));
}

Tensor half_matmul_nt(const Tensor& a, const Tensor& b, Precision p) {
    if (p != Precision::EmulatedHalf) return ops::matmul_nt(a, b);
    return quantize_half(ops::matmul_nt(quantize_half(a), quantize_half(b)));
}

}  // namespace

void init_encoder_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const int d = cfg.d_h;
    store.add(enc_names::kTokEmb, ops::xavier_uniform_init({cfg.vocab_size, d}, rng));
    store.add(enc_names::kPosEmb, ops::xavier_uniform_init({cfg.max_seq_len, d}, rng));
    store.add(enc_names::kEmbLnG, Tensor::full({d}, 1.0));
    store.add(enc_names::kEmbLnB, Tensor({d}));
    for (int i = 0; i < cfg.num_layers; ++i) {
        for (const char* f : kAttnFields)
            store.add(enc_names::layer(i, f), ops::xavier_uniform_init({d, d}, rng));
        for (const char* f : kAttnBias) store.add(enc_names::layer(i, f), Tensor({d}));
        store.add(enc_names::layer(i, "attn_ln.g"), Tensor::full({d}, 1.0));
        store.add(enc_names::layer(i, "attn_ln.b"), Tensor({d}));
        store.add(enc_names::layer(i, "ffn.W1"), ops::xavier_uniform_init({d, cfg.d_ff}, rng));
        store.add(enc_names::layer(i, "ffn.b1"), Tensor({cfg.d_ff}));
        store.add(enc_names::layer(i, "ffn.W2"), ops::xavier_uniform_init({cfg.d_ff, d}, rng));
        store.add(enc_names::layer(i, "ffn.b2"), Tensor({d}));
        store.add(enc_names::layer(i, "ffn_ln.g"), Tensor::full({d}, 1.0));
        store.add(enc_names::layer(i, "ffn_ln.b"), Tensor({d}));
    }
}

Tensor embed(const ParamStore& params, const EncoderConfig& cfg,
             std::span<const int> char_ids) {
    check_ids(cfg, char_ids);
    Tensor tok = ops::gather_rows(params.at(enc_names::kTokEmb), char_ids);
    std::vector<int> pos = positions(char_ids.size());
    Tensor posv = ops::gather_rows(params.at(enc_names::kPosEmb), pos);
    return ops::layer_norm_rows(ops::add(tok, posv), params.at(enc_names::kEmbLnG),
                                params.at(enc_names::kEmbLnB));
}

EncodeResult encode(const ParamStore& params, const EncoderConfig& cfg,
                    std::span<const int> char_ids, const EncodeOptions& opts) {
    cfg.validate();
    const int n = static_cast<int>(char_ids.size());
    const int dk = cfg.head_dim();
    const int valid = opts.valid_len >= 0 ? std::min(opts.valid_len, n) : n;
    const Precision prec = opts.precision;

    EncodeResult result;
    if (opts.capture_attention) result.attention.emplace();

    Tensor x = embed(params, cfg, char_ids);
    for (int l = 0; l < cfg.num_layers; ++l) {
        // self-attention
        Tensor q = ops::add_rowvec(half_matmul(x, params.at(enc_names::layer(l, "attn.Wq")), prec),
                                   params.at(enc_names::layer(l, "attn.bq")));
        Tensor k = ops::add_rowvec(half_matmul(x, params.at(enc_names::layer(l, "attn.Wk")), prec),
                                   params.at(enc_names::layer(l, "attn.bk")));
        Tensor v = ops::add_rowvec(half_matmul(x, params.at(enc_names::layer(l, "attn.Wv")), prec),
                                   params.at(enc_names::layer(l, "attn.bv")));
        Tensor heads({n, cfg.d_h});
        std::vector<Tensor> head_scores;
        for (int h = 0; h < cfg.num_heads; ++h) {
            Tensor qh = ops::slice_cols(q, h * dk, (h + 1) * dk);
            Tensor kh = ops::slice_cols(k, h * dk, (h + 1) * dk);
            Tensor vh = ops::slice_cols(v, h * dk, (h + 1) * dk);
            Tensor logits = ops::scale(half_matmul_nt(qh, kh, prec), 1.0 / std::sqrt(double(dk)));
            Tensor probs = ops::softmax_rows(logits, valid);  // full precision
            if (opts.capture_attention) head_scores.push_back(probs);
            Tensor oh = half_matmul(probs, vh, prec);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < dk; ++j) heads.at(i, h * dk + j) = oh.at(i, j);
        }
        if (opts.capture_attention) result.attention->scores.push_back(std::move(head_scores));
        Tensor attn_out =
            ops::add_rowvec(half_matmul(heads, params.at(enc_names::layer(l, "attn.Wo")), prec),
                            params.at(enc_names::layer(l, "attn.bo")));
        x = ops::layer_norm_rows(ops::add(x, attn_out),
                                 params.at(enc_names::layer(l, "attn_ln.g")),
                                 params.at(enc_names::layer(l, "attn_ln.b")));

        // feedforward
        Tensor f1 = ops::gelu(
            ops::add_rowvec(half_matmul(x, params.at(enc_names::layer(l, "ffn.W1")), prec),
                            params.at(enc_names::layer(l, "ffn.b1"))));
        Tensor f2 =
            ops::add_rowvec(half_matmul(f1, params.at(enc_names::layer(l, "ffn.W2")), prec),
                            params.at(enc_names::layer(l, "ffn.b2")));
        x = ops::layer_norm_rows(ops::add(x, f2), params.at(enc_names::layer(l, "ffn_ln.g")),
                                 params.at(enc_names::layer(l, "ffn_ln.b")));
        if (opts.keep_layer_outputs) result.layer_outputs.push_back(x);
    }
    result.hidden = std::move(x);
    return result;
}

Var embed_train(Tape& tape, BoundParams& params, const EncoderConfig& cfg,
                std::span<const int> char_ids, Rng& dropout_rng, bool training) {
    check_ids(cfg, char_ids);
    std::vector<int> ids(char_ids.begin(), char_ids.end());
    Var tok = tape.gather_rows(params[enc_names::kTokEmb], ids);
    Var pos = tape.gather_rows(params[enc_names::kPosEmb], positions(char_ids.size()));
    Var x = tape.layer_norm(tape.add(tok, pos), params[enc_names::kEmbLnG],
                            params[enc_names::kEmbLnB]);
    return tape.dropout(x, cfg.dropout_p, dropout_rng, training);
}

Var encode_train(Tape& tape, BoundParams& params, const EncoderConfig& cfg,
                 std::span<const int> char_ids, Rng& dropout_rng, bool training,
                 int valid_len) {
    cfg.validate();
    const int n = static_cast<int>(char_ids.size());
    const int dk = cfg.head_dim();
    const int valid = valid_len >= 0 ? std::min(valid_len, n) : n;

    Var x = embed_train(tape, params, cfg, char_ids, dropout_rng, training);
    for (int l = 0; l < cfg.num_layers; ++l) {
        Var q = tape.add_rowvec(tape.matmul(x, params[enc_names::layer(l, "attn.Wq")]),
                                params[enc_names::layer(l, "attn.bq")]);
        Var k = tape.add_rowvec(tape.matmul(x, params[enc_names::layer(l, "attn.Wk")]),
                                params[enc_names::layer(l, "attn.bk")]);
        Var v = tape.add_rowvec(tape.matmul(x, params[enc_names::layer(l, "attn.Wv")]),
                                params[enc_names::layer(l, "attn.bv")]);
        Var heads;
        for (int h = 0; h < cfg.num_heads; ++h) {
            Var qh = tape.slice_cols(q, h * dk, (h + 1) * dk);
            Var kh = tape.slice_cols(k, h * dk, (h + 1) * dk);
            Var vh = tape.slice_cols(v, h * dk, (h + 1) * dk);
            Var logits = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
            Var probs = tape.softmax_rows(logits, valid);
            Var oh = tape.matmul(probs, vh);
            heads = h == 0 ? oh : tape.concat_cols(heads, oh);
        }
        Var attn_out = tape.add_rowvec(tape.matmul(heads, params[enc_names::layer(l, "attn.Wo")]),
                                       params[enc_names::layer(l, "attn.bo")]);
        attn_out = tape.dropout(attn_out, cfg.dropout_p, dropout_rng, training);
        x = tape.layer_norm(tape.add(x, attn_out), params[enc_names::layer(l, "attn_ln.g")],
                            params[enc_names::layer(l, "attn_ln.b")]);

        Var f1 = tape.gelu(tape.add_rowvec(tape.matmul(x, params[enc_names::layer(l, "ffn.W1")]),
                                           params[enc_names::layer(l, "ffn.b1")]));
        Var f2 = tape.add_rowvec(tape.matmul(f1, params[enc_names::layer(l, "ffn.W2")]),
                                 params[enc_names::layer(l, "ffn.b2")]);
        f2 = tape.dropout(f2, cfg.dropout_p, dropout_rng, training);
        x = tape.layer_norm(tape.add(x, f2), params[enc_names::layer(l, "ffn_ln.g")],
                            params[enc_names::layer(l, "ffn_ln.b")]);
    }
    (void)n;
    return x;
}

void truncate_encoder(const ParamStore& teacher, const EncoderConfig& teacher_cfg, int k,
                      ParamStore& out, EncoderConfig& student_cfg) {
    if (k < 0 || k > teacher_cfg.num_layers)
        throw std::invalid_argument("truncate_encoder: k = " + std::to_string(k) +
                                    " exceeds teacher depth " +
                                    std::to_string(teacher_cfg.num_layers));
    student_cfg = teacher_cfg;
    student_cfg.num_layers = k;
    out.add(enc_names::kTokEmb, teacher.at(enc_names::kTokEmb));
    out.add(enc_names::kPosEmb, teacher.at(enc_names::kPosEmb));
    out.add(enc_names::kEmbLnG, teacher.at(enc_names::kEmbLnG));
    out.add(enc_names::kEmbLnB, teacher.at(enc_names::kEmbLnB));
    static const char* kCopied[] = {"attn.Wq", "attn.bq", "attn.Wk", "attn.bk",
                                    "attn.Wv", "attn.bv", "attn.Wo", "attn.bo",
                                    "attn_ln.g", "attn_ln.b", "ffn.W1", "ffn.b1",
                                    "ffn.W2", "ffn.b2", "ffn_ln.g", "ffn_ln.b"};
    for (int i = 0; i < k; ++i)
        for (const char* f : kCopied)
            out.add(enc_names::layer(i, f), teacher.at(enc_names::layer(i, f)));
}

std::vector<double> mean_attention_by_offset(const std::vector<AttentionRecord>& records,
                                             int query_index) {
    if (records.empty())
        throw std::invalid_argument("mean_attention_by_offset: no records");
    const int n = records.front().length();
    if (query_index < 0 || query_index >= n)
        throw std::invalid_argument("mean_attention_by_offset: query index " +
                                    std::to_string(query_index) + " outside length " +
                                    std::to_string(n));
    std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
    std::size_t rows = 0;
    for (const auto& rec : records) {
        if (rec.length() != n)
            throw std::invalid_argument(
                "mean_attention_by_offset: records must share one sequence length");
        for (const auto& layer : rec.scores)
            for (const Tensor& head : layer) {
                for (int j = 0; j < n; ++j)
                    sum[static_cast<std::size_t>(j)] += head.at(query_index, j);
                ++rows;
            }
    }
    if (rows == 0)
        throw std::invalid_argument("mean_attention_by_offset: records carry no score matrices");
    for (auto& x : sum) x /= static_cast<double>(rows);
    return sum;
}

}  // namespace mcseg
