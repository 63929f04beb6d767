#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "mcseg/corpus.hpp"
#include "support/test_util.hpp"

using namespace mcseg;

namespace {

DomainId test_domain(int index = 0) { return {"pku", index}; }

std::vector<std::u32string> u32words(std::initializer_list<const char*> words) {
    std::vector<std::u32string> out;
    for (const char* w : words) out.push_back(decode_utf8(w));
    return out;
}

std::string tags_string(const TaggedSentence& ts) {
    std::string s;
    for (Label l : ts.tags) s += label_char(l);
    return s;
}

// Random word list over a small alphabet of normalized chars.
std::vector<std::u32string> random_words(Rng& rng) {
    static const std::u32string alphabet = U"你好世界天地人中国文字语言学习";
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<std::u32string> words;
    for (int i = 0; i < n; ++i) {
        const int len = 1 + static_cast<int>(rng.below(4));
        std::u32string w;
        for (int k = 0; k < len; ++k)
            w += alphabet[static_cast<std::size_t>(rng.below(alphabet.size()))];
        words.push_back(w);
    }
    return words;
}

bool well_formed(const std::vector<Label>& tags) {
    // B -> M|E ; M -> M|E ; E,S -> B|S|end ; must not end inside a word
    Label prev = Label::S;
    bool open = false;
    for (Label t : tags) {
        switch (t) {
            case Label::B:
                if (open) return false;
                open = true;
                break;
            case Label::M:
            case Label::E:
                if (!open) return false;
                if (t == Label::E) open = false;
                break;
            case Label::S:
                if (open) return false;
                break;
        }
        prev = t;
    }
    (void)prev;
    return !open;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("normalization passes plain CJK through") {
    CHECK(normalize_text(std::string("你好")) == "你好");
}

TEST_CASE("normalization folds full-width digits into one placeholder") {
    // full-width 2020 then a CJK char
    const std::string in = "２０２０年";
    const std::u32string out = decode_utf8(normalize_text(in));
    REQUIRE(out.size() == 2);
    CHECK(out[0] == kDigitRunChar);
    CHECK(out[1] == U'年');
}

TEST_CASE("normalization collapses letter and digit runs separately") {
    // hand-traced: i P h o n e -> letter run; full-width 1 1 -> digit run;
    // two CJK chars pass through
    const std::string in = "iPhone１１真好";
    const std::u32string out = decode_utf8(normalize_text(in));
    REQUIRE(out.size() == 4);
    CHECK(out[0] == kLatinRunChar);
    CHECK(out[1] == kDigitRunChar);
    CHECK(out[2] == U'真');
    CHECK(out[3] == U'好');
}

TEST_CASE("normalization maps every full-width ASCII form to half-width") {
    CHECK(normalize_text(std::string("，？")) == ",?");  // punctuation folds
    CHECK(normalize_text(std::string("Ａ")) == encode_utf8(std::u32string(1, kLatinRunChar)));
}

TEST_CASE("normalization is idempotent") {
    Rng rng(3);
    const std::string pool = "abcXYZ019Ａｂ０你好真 　,";
    std::vector<std::u32string> chars;
    std::u32string poolc = decode_utf8(pool);
    for (int rep = 0; rep < 200; ++rep) {
        std::u32string s;
        const int len = static_cast<int>(rng.below(12));
        for (int i = 0; i < len; ++i) s += poolc[static_cast<std::size_t>(rng.below(poolc.size()))];
        const std::u32string once = normalize_text(s);
        CHECK(normalize_text(once) == once);
    }
}

TEST_CASE("alignment maps placeholders back to their source runs") {
    AlignedText at = normalize_with_alignment(decode_utf8("abc你12"));
    REQUIRE(at.chars.size() == 3);
    CHECK(at.source_ranges[0] == std::make_pair(0, 3));
    CHECK(at.source_ranges[1] == std::make_pair(3, 4));
    CHECK(at.source_ranges[2] == std::make_pair(4, 6));
}

TEST_CASE("encode_tags reproduces the five-word sample tagging") {
    // [Liu][Guoliang][wins][world][championship] -> S BE BE BE BE
    auto ts = encode_tags(u32words({"刘", "国梁", "赢得",
                                    "世界", "冠军"}),
                          test_domain());
    CHECK(tags_string(ts) == "SBEBEBEBE");
    CHECK(encode_utf8(ts.sentence.chars) ==
          "刘国梁赢得世界冠军");
}

TEST_CASE("encode_tags basic word shapes") {
    CHECK(tags_string(encode_tags(u32words({"冠军"}), test_domain())) == "BE");
    CHECK(tags_string(encode_tags(u32words({"世界冠军"}), test_domain())) ==
          "BMME");
    CHECK(encode_tags({}, test_domain()).tags.empty());
    CHECK_THROWS_AS(encode_tags({std::u32string()}, test_domain()), std::invalid_argument);
}

TEST_CASE("decode_tags inverts encode_tags") {
    auto words = u32words({"刘", "国梁"});
    auto ts = encode_tags(words, test_domain());
    CHECK(decode_tags(ts.sentence.chars, ts.tags) == words);
}

TEST_CASE("decode_tags repairs a leading M run") {
    std::u32string chars = decode_utf8("刘国梁");
    std::vector<Label> tags = {Label::M, Label::M, Label::E};
    auto words = decode_tags(chars, tags);
    REQUIRE(words.size() == 1);
    CHECK(words[0] == chars);
}

TEST_CASE("decode_tags on empty input gives no words") {
    CHECK(decode_tags(std::u32string(), {}).empty());
}

TEST_CASE("decode_tags closes a word when B follows B") {
    std::u32string chars = decode_utf8("一二三");
    std::vector<Label> tags = {Label::B, Label::B, Label::E};
    auto words = decode_tags(chars, tags);
    REQUIRE(words.size() == 2);
    CHECK(words[0] == chars.substr(0, 1));
    CHECK(words[1] == chars.substr(1));
}

TEST_CASE("round trip holds for random word lists") {
    Rng rng(11);
    for (int rep = 0; rep < 300; ++rep) {
        auto words = random_words(rng);
        auto ts = encode_tags(words, test_domain());
        CHECK(decode_tags(ts.sentence.chars, ts.tags) == words);
        CHECK(well_formed(ts.tags));
        CHECK(ts.tags.size() == ts.sentence.chars.size());
    }
}

TEST_CASE("vocabulary reserves PAD, UNK and the placeholders") {
    Vocabulary v;
    CHECK(v.size() == 4);
    CHECK(v.lookup(kPadChar) == kPadId);
    CHECK(v.lookup(kUnkChar) == kUnkId);
    CHECK(v.lookup(kLatinRunChar) == 2);
    CHECK(v.lookup(kDigitRunChar) == 3);
    CHECK(v.lookup(U'你') == kUnkId);  // unseen falls back to UNK
    const int id = v.add(U'你');
    CHECK(id == 4);
    CHECK(v.lookup(U'你') == 4);
    CHECK(v.add(U'你') == 4);
}

TEST_CASE("vocabulary saves and loads by line number") {
    Vocabulary v;
    v.add(U'你');
    v.add(U'好');
    testutil::TempDir dir("vocab");
    const std::string path = dir.str() + "/vocab.txt";
    v.save(path);
    Vocabulary loaded = Vocabulary::load(path);
    CHECK(loaded.size() == v.size());
    CHECK(loaded.lookup(U'好') == v.lookup(U'好'));
    CHECK(loaded.char_at(4) == U'你');
}

TEST_CASE("split_dev produces a 90/10 partition") {
    std::vector<TaggedSentence> corpus(100);
    for (int i = 0; i < 100; ++i)
        corpus[static_cast<std::size_t>(i)] =
            encode_tags(u32words({"你"}), test_domain());
    auto [train, dev] = split_dev(corpus, 0.1, 7);
    CHECK(train.size() == 90);
    CHECK(dev.size() == 10);
}

TEST_CASE("split_dev is deterministic per seed and varies across seeds") {
    std::vector<TaggedSentence> corpus;
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) corpus.push_back(encode_tags(random_words(rng), test_domain()));

    auto key = [](const std::vector<TaggedSentence>& part) {
        std::vector<std::u32string> k;
        for (const auto& ts : part) k.push_back(ts.sentence.chars);
        return k;
    };
    auto [t1, d1] = split_dev(corpus, 0.1, 42);
    auto [t2, d2] = split_dev(corpus, 0.1, 42);
    CHECK(key(d1) == key(d2));
    CHECK(key(t1) == key(t2));
    auto [t3, d3] = split_dev(corpus, 0.1, 43);
    CHECK(key(d1) != key(d3));
}

TEST_CASE("split_dev partitions without overlap or loss") {
    std::vector<TaggedSentence> corpus;
    for (int i = 0; i < 37; ++i) {
        std::u32string w;
        w += static_cast<char32_t>(U'一' + i);
        corpus.push_back(encode_tags({w}, test_domain()));
    }
    auto [train, dev] = split_dev(corpus, 0.25, 3);
    std::multiset<char32_t> all;
    for (const auto& ts : train) all.insert(ts.sentence.chars[0]);
    for (const auto& ts : dev) all.insert(ts.sentence.chars[0]);
    CHECK(all.size() == 37);
    std::set<char32_t> unique(all.begin(), all.end());
    CHECK(unique.size() == 37);  // disjoint
    CHECK(dev.size() == static_cast<std::size_t>(std::llround(0.25 * 37)));
}

TEST_CASE("split_dev rejects tiny corpora and silly ratios") {
    std::vector<TaggedSentence> one(1);
    CHECK_THROWS_AS(split_dev(one, 0.1, 1), std::invalid_argument);
    std::vector<TaggedSentence> two(2);
    CHECK_THROWS_AS(split_dev(two, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dev(two, 1.0, 1), std::invalid_argument);
}

TEST_CASE("one corpus of 8 sentences in batches of 4 covers all once") {
    Rng rng(9);
    std::vector<TaggedSentence> corpus;
    for (int i = 0; i < 8; ++i) {
        std::u32string w;
        w += static_cast<char32_t>(U'一' + i);
        corpus.push_back(encode_tags({w}, test_domain()));
    }
    Vocabulary vocab = Vocabulary::build({corpus});
    auto batches = make_batches({corpus}, vocab, 4, 128, 1);
    REQUIRE(batches.size() == 2);
    std::multiset<int> seen;
    for (const auto& b : batches) {
        CHECK(b.size() == 4);
        CHECK(b.domain == 0);
        for (int r = 0; r < b.size(); ++r) seen.insert(b.ids[static_cast<std::size_t>(r)][0]);
    }
    CHECK(seen.size() == 8);
    CHECK(std::set<int>(seen.begin(), seen.end()).size() == 8);
}

TEST_CASE("batch stream interleaves domains in proportion") {
    // 90 and 10 sentences, batch size 2: 45 vs 5 batches per epoch. Over
    // 100 epochs the first domain supplies exactly 90% of batches; the
    // binomial check below allows +-3% around that.
    Rng rng(13);
    std::vector<TaggedSentence> big, small;
    for (int i = 0; i < 90; ++i) big.push_back(encode_tags(random_words(rng), {"a", 0}));
    for (int i = 0; i < 10; ++i) small.push_back(encode_tags(random_words(rng), {"b", 1}));
    Vocabulary vocab = Vocabulary::build({big, small});

    long from_big = 0, total = 0;
    bool saw_mixed_order = false;
    for (int epoch = 0; epoch < 100; ++epoch) {
        auto batches = make_batches({big, small}, vocab, 2, 128, static_cast<std::uint64_t>(epoch));
        int first_domain = batches.front().domain;
        for (const auto& b : batches) {
            ++total;
            if (b.domain == 0) ++from_big;
            if (b.domain != first_domain) saw_mixed_order = true;
        }
    }
    const double frac = static_cast<double>(from_big) / static_cast<double>(total);
    CHECK(frac > 0.87);
    CHECK(frac < 0.93);
    CHECK(saw_mixed_order);
}

TEST_CASE("every batch is single-domain and one epoch is exactly one pass") {
    Rng rng(14);
    std::vector<TaggedSentence> a, b;
    for (int i = 0; i < 23; ++i) a.push_back(encode_tags(random_words(rng), {"a", 0}));
    for (int i = 0; i < 17; ++i) b.push_back(encode_tags(random_words(rng), {"b", 1}));
    Vocabulary vocab = Vocabulary::build({a, b});
    auto batches = make_batches({a, b}, vocab, 4, 128, 77);
    long count_a = 0, count_b = 0;
    for (const auto& batch : batches) {
        CHECK((batch.domain == 0 || batch.domain == 1));
        for (int len : batch.lengths) CHECK(len >= 1);
        if (batch.domain == 0)
            count_a += batch.size();
        else
            count_b += batch.size();
    }
    CHECK(count_a == 23);
    CHECK(count_b == 17);
}

TEST_CASE("overlong sentences truncate with tags in lockstep") {
    Rng rng(15);
    std::u32string longword;
    for (int i = 0; i < 200; ++i) longword += static_cast<char32_t>(U'一' + (i % 40));
    std::vector<TaggedSentence> corpus = {encode_tags({longword}, {"a", 0})};
    corpus.push_back(corpus[0]);  // split_dev-free direct batch
    Vocabulary vocab = Vocabulary::build({corpus});
    auto batches = make_batches({corpus}, vocab, 2, 128, 1);
    REQUIRE(batches.size() == 1);
    for (int r = 0; r < batches[0].size(); ++r) {
        CHECK(batches[0].lengths[static_cast<std::size_t>(r)] == 128);
        CHECK(batches[0].ids[static_cast<std::size_t>(r)].size() == 128);
        CHECK(batches[0].tags[static_cast<std::size_t>(r)].size() == 128);
        // truncated mid-word: position 127 keeps its original M tag
        CHECK(batches[0].tags[static_cast<std::size_t>(r)][127] == Label::M);
    }
}

TEST_CASE("make_batches rejects bad arguments") {
    std::vector<TaggedSentence> corpus(3);
    Vocabulary vocab;
    CHECK_THROWS_AS(make_batches({corpus}, vocab, 0, 128, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_batches({}, vocab, 4, 128, 1), std::invalid_argument);
}

TEST_CASE("batches are deterministic per seed") {
    Rng rng(16);
    std::vector<TaggedSentence> a;
    for (int i = 0; i < 31; ++i) a.push_back(encode_tags(random_words(rng), {"a", 0}));
    Vocabulary vocab = Vocabulary::build({a});
    auto b1 = make_batches({a}, vocab, 4, 128, 5);
    auto b2 = make_batches({a}, vocab, 4, 128, 5);
    REQUIRE(b1.size() == b2.size());
    for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1[i].ids == b2[i].ids);
}

TEST_CASE("corpus files read, normalize and skip empty lines") {
    testutil::TempDir dir("corpus");
    const std::string path = dir.str() + "/pku.train.txt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "刘 国梁\n";
        out << "\n";
        out << "iPhone１１ 真好\n";
    }
    auto sentences = read_corpus_file(path, test_domain());
    REQUIRE(sentences.size() == 2);
    CHECK(tags_string(sentences[0]) == "SBE");
    // "iPhone11" collapses to two placeholder chars -> B E
    CHECK(tags_string(sentences[1]) == "BEBE");
    CHECK(sentences[1].sentence.chars[0] == kLatinRunChar);
}

}  // TEST_SUITE
