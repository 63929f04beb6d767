#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mcseg/model.hpp"

namespace mcseg {

// Word sequences per sentence; each word a UTF-8 string.
using Segmentation = std::vector<std::vector<std::string>>;

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> oov_recall;  // filled by oov_recall()
    long gold_words = 0;
    long sys_words = 0;
    long correct_words = 0;
};

// Span-based scoring on character offsets, micro-averaged over sentences.
// Gold and sys must segment identical character streams; a mismatch throws
// naming the first offending sentence.
MetricsReport prf(const Segmentation& gold, const Segmentation& sys);

// Recall restricted to gold words absent from train_vocab. Returns 1.0
// when the OOV set is empty.
double oov_recall(const Segmentation& gold, const Segmentation& sys,
                  const std::unordered_set<std::string>& train_vocab);

// Row a: which fraction of domain a's OOV test words (test words unseen in
// a's training words) appear in domain b's training words. The final
// column uses the union of every other domain's training words. Entries
// are empty when a domain has no OOV words; diagonals are 0.
struct OverlapMatrix {
    std::vector<std::string> domains;
    std::vector<std::vector<std::optional<double>>> entries;  // [a][b]
    std::vector<std::optional<double>> all_others;            // per row
};

OverlapMatrix oov_overlap(const std::vector<std::string>& domains,
                          const std::vector<std::unordered_set<std::string>>& train_words,
                          const std::vector<std::unordered_set<std::string>>& test_words);

// Wall-clock throughput of the full pipeline (encode -> project -> Viterbi
// -> decode) per batch size: warmup excluded, median of `repeats` runs.
// Single-threaded; the thread count is reported alongside.
struct SpeedRow {
    int batch_size = 0;
    double chars_per_sec = 0.0;
    double sentences_per_sec = 0.0;
    double median_seconds = 0.0;
    int repeats = 0;
};

struct SpeedReport {
    int threads = 1;
    long total_chars = 0;
    long total_sentences = 0;
    std::vector<SpeedRow> rows;
};

SpeedReport speed_bench(const Model& model, const std::vector<std::u32string>& sentences,
                        const std::string& domain, Precision precision,
                        const std::vector<int>& batch_sizes, int repeats = 5);

// Serialization for the CLI: stable key order, no timing jitter beyond the
// measured fields themselves.
std::string metrics_to_json(const MetricsReport& r);
std::string metrics_to_tsv(const MetricsReport& r);
std::string overlap_to_json(const OverlapMatrix& m);
std::string overlap_to_tsv(const OverlapMatrix& m);
std::string speed_to_json(const SpeedReport& r);
std::string speed_to_tsv(const SpeedReport& r);

}  // namespace mcseg
