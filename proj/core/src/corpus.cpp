#include "mcseg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "mcseg/rng.hpp"

namespace mcseg {

char label_char(Label l) {
    switch (l) {
        case Label::B: return 'B';
        case Label::M: return 'M';
        case Label::E: return 'E';
        case Label::S: return 'S';
    }
    return '?';
}

Label label_from_char(char c) {
    switch (c) {
        case 'B': return Label::B;
        case 'M': return Label::M;
        case 'E': return Label::E;
        case 'S': return Label::S;
    }
    throw std::invalid_argument(std::string("label_from_char: bad label '") + c + "'");
}

std::u32string decode_utf8(const std::string& s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        int extra = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            extra = 1;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            extra = 2;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            extra = 3;
        } else {
            throw std::invalid_argument("decode_utf8: invalid lead byte at offset " +
                                        std::to_string(i));
        }
        if (i + extra >= s.size())
            throw std::invalid_argument("decode_utf8: truncated sequence at offset " +
                                        std::to_string(i));
        for (int k = 1; k <= extra; ++k) {
            const unsigned char b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80)
                throw std::invalid_argument("decode_utf8: invalid continuation at offset " +
                                            std::to_string(i + k));
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMins[4] = {0, 0x80, 0x800, 0x10000};
        if (cp < kMins[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw std::invalid_argument("decode_utf8: invalid scalar at offset " +
                                        std::to_string(i));
        out.push_back(cp);
        i += 1 + extra;
    }
    return out;
}

std::string encode_utf8(char32_t c) {
    std::string out;
    if (c < 0x80) {
        out += static_cast<char>(c);
    } else if (c < 0x800) {
        out += static_cast<char>(0xC0 | (c >> 6));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
        out += static_cast<char>(0xE0 | (c >> 12));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (c >> 18));
        out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    }
    return out;
}

std::string encode_utf8(const std::u32string& s) {
    std::string out;
    out.reserve(s.size() * 3);
    for (char32_t c : s) out += encode_utf8(c);
    return out;
}

static char32_t fold_fullwidth(char32_t c) {
    if (c >= 0xFF01 && c <= 0xFF5E) return c - 0xFEE0;
    if (c == 0x3000) return U' ';  // ideographic space
    return c;
}

static bool is_latin_letter(char32_t c) {
    return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z');
}

static bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

AlignedText normalize_with_alignment(const std::u32string& raw) {
    AlignedText out;
    const int n = static_cast<int>(raw.size());
    int i = 0;
    while (i < n) {
        const char32_t c = fold_fullwidth(raw[static_cast<std::size_t>(i)]);
        if (is_latin_letter(c) || is_ascii_digit(c)) {
            const bool digits = is_ascii_digit(c);
            int j = i + 1;
            while (j < n) {
                const char32_t d = fold_fullwidth(raw[static_cast<std::size_t>(j)]);
                if (digits ? !is_ascii_digit(d) : !is_latin_letter(d)) break;
                ++j;
            }
            out.chars.push_back(digits ? kDigitRunChar : kLatinRunChar);
            out.source_ranges.emplace_back(i, j);
            i = j;
        } else {
            out.chars.push_back(c);
            out.source_ranges.emplace_back(i, i + 1);
            ++i;
        }
    }
    return out;
}

std::u32string normalize_text(const std::u32string& line) {
    return normalize_with_alignment(line).chars;
}

std::string normalize_text(const std::string& line) {
    return encode_utf8(normalize_text(decode_utf8(line)));
}

TaggedSentence encode_tags(const std::vector<std::u32string>& words, const DomainId& domain) {
    TaggedSentence out;
    out.sentence.domain = domain.index;
    for (const auto& w : words) {
        if (w.empty()) throw std::invalid_argument("encode_tags: empty word");
        out.sentence.chars += w;
        const std::size_t k = w.size();
        if (k == 1) {
            out.tags.push_back(Label::S);
        } else {
            out.tags.push_back(Label::B);
            for (std::size_t i = 1; i + 1 < k; ++i) out.tags.push_back(Label::M);
            out.tags.push_back(Label::E);
        }
    }
    return out;
}

std::vector<std::u32string> decode_tags(const std::u32string& chars,
                                        const std::vector<Label>& tags) {
    if (chars.size() != tags.size())
        throw std::invalid_argument("decode_tags: " + std::to_string(chars.size()) +
                                    " chars vs " + std::to_string(tags.size()) + " tags");
    std::vector<std::u32string> words;
    std::u32string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < chars.size(); ++i) {
        const char32_t c = chars[i];
        switch (tags[i]) {
            case Label::B:
                flush();  // B never continues a word
                cur.push_back(c);
                break;
            case Label::M:
                cur.push_back(c);  // a leading M opens a word
                break;
            case Label::E:
                cur.push_back(c);
                flush();
                break;
            case Label::S:
                flush();
                words.push_back(std::u32string(1, c));
                break;
        }
    }
    flush();  // unterminated B/M run at the end still forms a word
    return words;
}

Vocabulary::Vocabulary() {
    chars_ = {kPadChar, kUnkChar, kLatinRunChar, kDigitRunChar};
    reindex();
}

void Vocabulary::reindex() {
    index_.clear();
    index_.reserve(chars_.size());
    for (std::size_t i = 0; i < chars_.size(); ++i) index_.emplace(chars_[i], static_cast<int>(i));
}

int Vocabulary::add(char32_t c) {
    auto it = index_.find(c);
    if (it != index_.end()) return it->second;
    chars_.push_back(c);
    const int id = static_cast<int>(chars_.size()) - 1;
    index_.emplace(c, id);
    return id;
}

int Vocabulary::lookup(char32_t c) const {
    auto it = index_.find(c);
    return it != index_.end() ? it->second : kUnkId;
}

bool Vocabulary::contains(char32_t c) const { return index_.count(c) != 0; }

char32_t Vocabulary::char_at(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary: bad id");
    return chars_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::ids_for(const std::u32string& chars) const {
    std::vector<int> ids;
    ids.reserve(chars.size());
    for (char32_t c : chars) ids.push_back(lookup(c));
    return ids;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("Vocabulary::save: cannot open " + path);
    for (char32_t c : chars_) out << encode_utf8(c) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("Vocabulary::load: cannot open " + path);
    Vocabulary v;
    v.chars_.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::u32string cs = decode_utf8(line);
        if (cs.size() != 1)
            throw std::runtime_error("Vocabulary::load: line " + std::to_string(lineno) +
                                     " of " + path + " must hold exactly one character");
        v.chars_.push_back(cs[0]);
    }
    if (v.chars_.size() < 4 || v.chars_[0] != kPadChar)
        throw std::runtime_error("Vocabulary::load: " + path + " missing reserved entries");
    v.reindex();
    return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<TaggedSentence>>& corpora) {
    Vocabulary v;
    for (const auto& corpus : corpora)
        for (const auto& ts : corpus)
            for (char32_t c : ts.sentence.chars) v.add(c);
    return v;
}

std::pair<std::vector<TaggedSentence>, std::vector<TaggedSentence>> split_dev(
    const std::vector<TaggedSentence>& corpus, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("split_dev: ratio must lie in (0,1)");
    if (corpus.size() < 2)
        throw std::invalid_argument("split_dev: corpus must hold at least 2 sentences");
    const std::size_t n = corpus.size();
    const std::size_t k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(Rng::mix(seed, 0x5eedULL));
    rng.shuffle(order);
    std::vector<std::size_t> dev_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(dev_idx.begin(), dev_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<TaggedSentence> train, dev;
    train.reserve(train_idx.size());
    dev.reserve(dev_idx.size());
    for (std::size_t i : train_idx) train.push_back(corpus[i]);
    for (std::size_t i : dev_idx) dev.push_back(corpus[i]);
    return {std::move(train), std::move(dev)};
}

std::vector<Batch> make_batches(const std::vector<std::vector<TaggedSentence>>& corpora,
                                const Vocabulary& vocab, int batch_size, int max_seq_len,
                                std::uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
    if (corpora.empty()) throw std::invalid_argument("make_batches: need at least one corpus");
    if (max_seq_len < 1) throw std::invalid_argument("make_batches: max_seq_len must be >= 1");

    std::vector<Batch> batches;
    for (std::size_t d = 0; d < corpora.size(); ++d) {
        const auto& corpus = corpora[d];
        std::vector<std::size_t> order(corpus.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(Rng::mix(seed, d + 1));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            Batch b;
            b.domain = static_cast<int>(d);
            for (std::size_t k = start; k < stop; ++k) {
                const TaggedSentence& ts = corpus[order[k]];
                int len = static_cast<int>(ts.sentence.chars.size());
                if (len > max_seq_len) len = max_seq_len;  // tags truncate in lockstep
                std::vector<int> ids;
                std::vector<Label> tags;
                ids.reserve(static_cast<std::size_t>(len));
                tags.reserve(static_cast<std::size_t>(len));
                for (int i = 0; i < len; ++i) {
                    ids.push_back(vocab.lookup(ts.sentence.chars[static_cast<std::size_t>(i)]));
                    tags.push_back(ts.tags[static_cast<std::size_t>(i)]);
                }
                b.lengths.push_back(len);
                b.width = std::max(b.width, len);
                b.ids.push_back(std::move(ids));
                b.tags.push_back(std::move(tags));
            }
            if (b.size() == 0) continue;
            for (int r = 0; r < b.size(); ++r) {
                b.ids[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(b.width), kPadId);
                b.tags[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(b.width), Label::B);
            }
            batches.push_back(std::move(b));
        }
    }
    Rng rng(Rng::mix(seed, 0));
    rng.shuffle(batches);
    return batches;
}

std::vector<std::u32string> split_words(const std::u32string& line) {
    std::vector<std::u32string> words;
    std::u32string cur;
    for (char32_t c : line) {
        if (c == U' ' || c == U'\t') {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::vector<TaggedSentence> read_corpus_file(const std::string& path, const DomainId& domain) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_corpus_file: cannot open " + path);
    std::vector<TaggedSentence> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::u32string> words = split_words(decode_utf8(line));
        std::vector<std::u32string> normalized;
        normalized.reserve(words.size());
        for (const auto& w : words) normalized.push_back(normalize_text(w));
        if (normalized.empty()) continue;
        out.push_back(encode_tags(normalized, domain));
    }
    return out;
}

std::vector<std::string> word_list(const std::vector<std::vector<std::string>>& sentences) {
    std::set<std::string> seen;
    for (const auto& sent : sentences)
        for (const auto& w : sent) seen.insert(w);
    return {seen.begin(), seen.end()};
}

}  // namespace mcseg
