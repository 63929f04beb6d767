#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcseg/checkpoint.hpp"
#include "mcseg/corpus.hpp"
#include "mcseg/crf.hpp"
#include "mcseg/encoder.hpp"
#include "mcseg/projection.hpp"

namespace mcseg {

namespace crf_names {
inline const std::string kWeight = "crf.W_s";
inline const std::string kBias = "crf.b_s";
inline const std::string kTrans = "crf.trans";
}  // namespace crf_names

// Reserved domain flag selecting the shared projection at inference.
inline const std::string kSharedDomain = "shared";

struct SegmentationResult {
    std::vector<std::u32string> words;
    std::vector<Label> tags;
    Tensor label_scores;                       // [len, 4] emission scores
    std::optional<AttentionRecord> attention;  // first window only
};

struct SegmentOptions {
    Precision precision = Precision::Full;
    bool capture_attention = false;
};

// Encoder + projections + CRF head over one vocabulary. Immutable at
// inference; the trainer mutates `params` between forward passes.
class Model {
public:
    ModelMeta meta;
    ParamStore params;
    Vocabulary vocab;

    // Fresh model: xavier-uniform weights everywhere a 2-D shape allows,
    // zero biases/transitions, identity layer norms.
    static Model create(const EncoderConfig& encoder, const std::vector<std::string>& domains,
                        bool with_shared, const Vocabulary& vocab, std::uint64_t seed);

    int domain_index(const std::string& name) const;  // throws UnknownDomainError
    bool is_multi_criteria() const { return meta.has_shared; }

    // Emission scores s(X, i) for already-normalized characters. `domain`
    // may name a registered corpus or kSharedDomain (multi-criteria models
    // only). Inputs longer than max_seq_len are processed in windows.
    Tensor emission(const std::u32string& chars, const std::string& domain,
                    const SegmentOptions& opts = {},
                    AttentionRecord* attention_out = nullptr) const;

    // Full pipeline: encode -> project -> CRF Viterbi -> words.
    SegmentationResult segment(const std::u32string& normalized_chars,
                               const std::string& domain,
                               const SegmentOptions& opts = {}) const;

    // Copy with attention/feedforward weights rounded to binary16 for
    // emulated-half inference.
    Model half() const;

    void save(const std::string& dir) const;
    static Model load(const std::string& dir);
};

}  // namespace mcseg
