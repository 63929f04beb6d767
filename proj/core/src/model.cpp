#include "mcseg/model.hpp"

#include <algorithm>

#include "mcseg/half.hpp"
#include "mcseg/tensor_ops.hpp"

namespace mcseg {

Model Model::create(const EncoderConfig& encoder, const std::vector<std::string>& domains,
                    bool with_shared, const Vocabulary& vocab, std::uint64_t seed) {
    if (domains.empty()) throw std::invalid_argument("Model::create: need at least one domain");
    for (const auto& d : domains)
        if (d == kSharedDomain || d.empty())
            throw std::invalid_argument("Model::create: '" + d + "' is not a valid domain name");

    Model m;
    m.meta.encoder = encoder;
    m.meta.encoder.vocab_size = vocab.size();
    m.meta.encoder.validate();
    m.meta.domains = domains;
    m.meta.has_shared = with_shared;
    m.vocab = vocab;

    Rng rng(Rng::mix(seed, 0x6d6f64656cULL));  // independent init stream
    init_encoder_params(m.params, m.meta.encoder, rng);
    init_projection_params(m.params, domains, m.meta.encoder.d_h, rng, with_shared);
    const int d2 = 2 * m.meta.encoder.d_h;
    m.params.add(crf_names::kWeight, ops::xavier_uniform_init({d2, kNumLabels}, rng));
    m.params.add(crf_names::kBias, Tensor({kNumLabels}));
    m.params.add(crf_names::kTrans, Tensor({kNumLabels, kNumLabels}));
    return m;
}

int Model::domain_index(const std::string& name) const {
    for (std::size_t i = 0; i < meta.domains.size(); ++i)
        if (meta.domains[i] == name) return static_cast<int>(i);
    throw UnknownDomainError(name, meta.domains);
}

Tensor Model::emission(const std::u32string& chars, const std::string& domain,
                       const SegmentOptions& opts, AttentionRecord* attention_out) const {
    if (domain == kSharedDomain) {
        if (!meta.has_shared)
            throw UnknownDomainError(domain, meta.domains);
    } else {
        domain_index(domain);  // validates
    }

    if (chars.empty()) return Tensor({0, kNumLabels});

    const int max_len = meta.encoder.max_seq_len;
    std::vector<std::vector<double>> rows;
    // Long inputs run through the encoder in consecutive windows so no
    // character is dropped.
    for (std::size_t start = 0; start < chars.size(); start += static_cast<std::size_t>(max_len)) {
        const std::size_t stop = std::min(chars.size(), start + static_cast<std::size_t>(max_len));
        std::u32string window = chars.substr(start, stop - start);
        std::vector<int> ids = vocab.ids_for(window);

        EncodeOptions eopts;
        eopts.precision = opts.precision;
        eopts.capture_attention = opts.capture_attention && start == 0 && attention_out;
        EncodeResult enc = encode(params, meta.encoder, ids, eopts);
        if (eopts.capture_attention && enc.attention) *attention_out = std::move(*enc.attention);

        std::pair<Tensor, Tensor> proj;
        if (domain == kSharedDomain) {
            proj = project_shared_only(params, enc.hidden);
        } else if (meta.has_shared) {
            proj = project(params, enc.hidden, domain, meta.domains);
        } else {
            proj = project_private_only(params, enc.hidden, domain, meta.domains);
        }
        Tensor s = emission_scores(proj.first, proj.second, params.at(crf_names::kWeight),
                                   params.at(crf_names::kBias));
        for (int i = 0; i < s.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(kNumLabels));
            for (int j = 0; j < kNumLabels; ++j) row[static_cast<std::size_t>(j)] = s.at(i, j);
            rows.push_back(std::move(row));
        }
    }

    Tensor out({static_cast<int>(rows.size()), kNumLabels});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < kNumLabels; ++j) out.at(static_cast<int>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return out;
}

SegmentationResult Model::segment(const std::u32string& normalized_chars,
                                  const std::string& domain,
                                  const SegmentOptions& opts) const {
    SegmentationResult result;
    if (normalized_chars.empty()) return result;

    AttentionRecord attn;
    result.label_scores =
        emission(normalized_chars, domain, opts, opts.capture_attention ? &attn : nullptr);
    if (opts.capture_attention) result.attention = std::move(attn);

    // Viterbi per encoder window keeps the transition chain consistent with
    // how scores were produced.
    const int max_len = meta.encoder.max_seq_len;
    const Tensor& trans = params.at(crf_names::kTrans);
    const int n = result.label_scores.rows();
    for (int start = 0; start < n; start += max_len) {
        const int stop = std::min(n, start + max_len);
        Tensor window({stop - start, kNumLabels});
        for (int i = start; i < stop; ++i)
            for (int j = 0; j < kNumLabels; ++j) window.at(i - start, j) = result.label_scores.at(i, j);
        auto [tags, score] = viterbi(window, trans);
        result.tags.insert(result.tags.end(), tags.begin(), tags.end());
    }
    result.words = decode_tags(normalized_chars, result.tags);
    return result;
}

Model Model::half() const {
    Model m = *this;
    auto flag = [&](const std::string& name) {
        m.params.at(name) = quantize_half(m.params.at(name));
    };
    for (int l = 0; l < meta.encoder.num_layers; ++l) {
        for (const char* f : {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo", "ffn.W1", "ffn.W2"})
            flag(enc_names::layer(l, f));
    }
    return m;
}

void Model::save(const std::string& dir) const { save_checkpoint(dir, meta, params, vocab); }

Model Model::load(const std::string& dir) {
    Checkpoint ckpt = load_checkpoint(dir);
    Model m;
    m.meta = std::move(ckpt.meta);
    m.params = std::move(ckpt.params);
    m.vocab = std::move(ckpt.vocab);
    return m;
}

}  // namespace mcseg
