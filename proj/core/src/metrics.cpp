#include "mcseg/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mcseg {

using nlohmann::ordered_json;

namespace {

struct Span {
    int begin = 0;
    int end = 0;
    auto operator<=>(const Span&) const = default;
};

// Character-offset spans of a segmented sentence.
std::vector<Span> spans_of(const std::vector<std::string>& words) {
    std::vector<Span> spans;
    spans.reserve(words.size());
    int pos = 0;
    for (const auto& w : words) {
        const int len = static_cast<int>(decode_utf8(w).size());
        spans.push_back({pos, pos + len});
        pos += len;
    }
    return spans;
}

std::string joined_chars(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += w;
    return s;
}

void check_same_stream(const Segmentation& gold, const Segmentation& sys) {
    if (gold.size() != sys.size())
        throw std::invalid_argument("prf: gold has " + std::to_string(gold.size()) +
                                    " sentences, sys has " + std::to_string(sys.size()));
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (joined_chars(gold[i]) != joined_chars(sys[i]))
            throw std::invalid_argument(
                "prf: sentence " + std::to_string(i + 1) +
                ": gold and sys segment different character sequences");
}

}  // namespace

MetricsReport prf(const Segmentation& gold, const Segmentation& sys) {
    check_same_stream(gold, sys);
    MetricsReport r;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        std::vector<Span> gs = spans_of(gold[i]);
        std::vector<Span> ss = spans_of(sys[i]);
        r.gold_words += static_cast<long>(gs.size());
        r.sys_words += static_cast<long>(ss.size());
        std::set<Span> gset(gs.begin(), gs.end());
        for (const Span& s : ss)
            if (gset.count(s)) ++r.correct_words;
    }
    r.precision = r.sys_words > 0 ? static_cast<double>(r.correct_words) / r.sys_words : 0.0;
    r.recall = r.gold_words > 0 ? static_cast<double>(r.correct_words) / r.gold_words : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

double oov_recall(const Segmentation& gold, const Segmentation& sys,
                  const std::unordered_set<std::string>& train_vocab) {
    check_same_stream(gold, sys);
    long oov_total = 0, oov_correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        std::vector<Span> gs = spans_of(gold[i]);
        std::vector<Span> ss = spans_of(sys[i]);
        std::set<Span> sset(ss.begin(), ss.end());
        for (std::size_t k = 0; k < gs.size(); ++k) {
            if (train_vocab.count(gold[i][k])) continue;
            ++oov_total;
            if (sset.count(gs[k])) ++oov_correct;
        }
    }
    if (oov_total == 0) return 1.0;  // convention: nothing out of vocabulary
    return static_cast<double>(oov_correct) / static_cast<double>(oov_total);
}

OverlapMatrix oov_overlap(const std::vector<std::string>& domains,
                          const std::vector<std::unordered_set<std::string>>& train_words,
                          const std::vector<std::unordered_set<std::string>>& test_words) {
    const std::size_t n = domains.size();
    if (n < 2) throw std::invalid_argument("oov_overlap: need at least 2 domains");
    if (train_words.size() != n || test_words.size() != n)
        throw std::invalid_argument("oov_overlap: word set counts must match domain count");

    OverlapMatrix m;
    m.domains = domains;
    m.entries.assign(n, std::vector<std::optional<double>>(n));
    m.all_others.assign(n, std::nullopt);

    for (std::size_t a = 0; a < n; ++a) {
        std::vector<std::string> oov;
        for (const auto& w : test_words[a])
            if (!train_words[a].count(w)) oov.push_back(w);
        m.entries[a][a] = 0.0;
        if (oov.empty()) continue;  // undefined row, diagonal stays 0

        long in_union = 0;
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            long hit = 0;
            for (const auto& w : oov)
                if (train_words[b].count(w)) ++hit;
            m.entries[a][b] = static_cast<double>(hit) / static_cast<double>(oov.size());
        }
        for (const auto& w : oov) {
            for (std::size_t b = 0; b < n; ++b) {
                if (b == a) continue;
                if (train_words[b].count(w)) {
                    ++in_union;
                    break;
                }
            }
        }
        m.all_others[a] = static_cast<double>(in_union) / static_cast<double>(oov.size());
    }
    return m;
}

SpeedReport speed_bench(const Model& model, const std::vector<std::u32string>& sentences,
                        const std::string& domain, Precision precision,
                        const std::vector<int>& batch_sizes, int repeats) {
    if (sentences.empty()) throw std::invalid_argument("speed_bench: no sentences");
    if (batch_sizes.empty()) throw std::invalid_argument("speed_bench: no batch sizes");
    if (repeats < 5) repeats = 5;

    SpeedReport report;
    report.total_sentences = static_cast<long>(sentences.size());
    for (const auto& s : sentences) report.total_chars += static_cast<long>(s.size());

    SegmentOptions opts;
    opts.precision = precision;

    auto run_all = [&](int batch_size) {
        // Batches are consecutive chunks; decoding is sentence-wise, so the
        // batch size only controls the work chunking being timed.
        for (std::size_t start = 0; start < sentences.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop =
                std::min(sentences.size(), start + static_cast<std::size_t>(batch_size));
            for (std::size_t i = start; i < stop; ++i) {
                SegmentationResult r = model.segment(sentences[i], domain, opts);
                if (r.words.empty() && !sentences[i].empty())
                    throw std::runtime_error("speed_bench: empty segmentation");
            }
        }
    };

    for (int bs : batch_sizes) {
        if (bs < 1) throw std::invalid_argument("speed_bench: batch size must be >= 1");
        run_all(bs);  // warmup, untimed
        std::vector<double> times;
        times.reserve(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            run_all(bs);
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        const double median = times[times.size() / 2];
        SpeedRow row;
        row.batch_size = bs;
        row.median_seconds = median;
        row.repeats = repeats;
        row.chars_per_sec = static_cast<double>(report.total_chars) / median;
        row.sentences_per_sec = static_cast<double>(report.total_sentences) / median;
        report.rows.push_back(row);
    }
    return report;
}

std::string metrics_to_json(const MetricsReport& r) {
    ordered_json j;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    if (r.oov_recall)
        j["oov_recall"] = *r.oov_recall;
    else
        j["oov_recall"] = nullptr;
    j["gold_words"] = r.gold_words;
    j["sys_words"] = r.sys_words;
    j["correct_words"] = r.correct_words;
    return j.dump(2) + "\n";
}

std::string metrics_to_tsv(const MetricsReport& r) {
    std::ostringstream out;
    out << "precision\trecall\tf1\toov_recall\tgold_words\tsys_words\tcorrect_words\n";
    out << r.precision << '\t' << r.recall << '\t' << r.f1 << '\t';
    if (r.oov_recall)
        out << *r.oov_recall;
    else
        out << "-";
    out << '\t' << r.gold_words << '\t' << r.sys_words << '\t' << r.correct_words << '\n';
    return out.str();
}

std::string overlap_to_json(const OverlapMatrix& m) {
    ordered_json j;
    j["domains"] = m.domains;
    ordered_json rows = ordered_json::array();
    for (std::size_t a = 0; a < m.domains.size(); ++a) {
        ordered_json row;
        row["domain"] = m.domains[a];
        ordered_json entries = ordered_json::array();
        for (const auto& e : m.entries[a]) {
            if (e)
                entries.push_back(*e);
            else
                entries.push_back(nullptr);
        }
        row["entries"] = std::move(entries);
        if (m.all_others[a])
            row["all_others"] = *m.all_others[a];
        else
            row["all_others"] = nullptr;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

std::string overlap_to_tsv(const OverlapMatrix& m) {
    std::ostringstream out;
    out << "domain";
    for (const auto& d : m.domains) out << '\t' << d;
    out << "\tall_others\n";
    for (std::size_t a = 0; a < m.domains.size(); ++a) {
        out << m.domains[a];
        for (const auto& e : m.entries[a]) {
            out << '\t';
            if (e)
                out << *e;
            else
                out << '-';
        }
        out << '\t';
        if (m.all_others[a])
            out << *m.all_others[a];
        else
            out << '-';
        out << '\n';
    }
    return out.str();
}

std::string speed_to_json(const SpeedReport& r) {
    ordered_json j;
    j["threads"] = r.threads;
    j["total_chars"] = r.total_chars;
    j["total_sentences"] = r.total_sentences;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"batch_size", row.batch_size},
                        {"chars_per_sec", row.chars_per_sec},
                        {"sentences_per_sec", row.sentences_per_sec},
                        {"median_seconds", row.median_seconds},
                        {"repeats", row.repeats}});
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

std::string speed_to_tsv(const SpeedReport& r) {
    std::ostringstream out;
    out << "batch_size\tchars_per_sec\tsentences_per_sec\tmedian_seconds\trepeats\n";
    for (const auto& row : r.rows)
        out << row.batch_size << '\t' << row.chars_per_sec << '\t' << row.sentences_per_sec
            << '\t' << row.median_seconds << '\t' << row.repeats << '\n';
    return out.str();
}

}  // namespace mcseg
