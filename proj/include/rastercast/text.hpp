#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rastercast/error.hpp"
#include "rastercast/fmt.hpp"
#include "rastercast/porter.hpp"
#include "rastercast/sparse.hpp"

namespace rastercast {

// ---------------------------------------------------------------------------
// Stop words
// ---------------------------------------------------------------------------

// Fixed English list (~150 words), matched after lowercasing and punctuation
// stripping — hence the apostrophe-less contraction forms. data/stopwords.txt
// ships the same list for external tooling.
inline const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "amp",
        "an", "and", "any", "are", "arent", "as", "at", "be", "because", "been",
        "before", "being", "below", "between", "both", "but", "by", "cannot",
        "cant", "could", "couldnt", "did", "didnt", "do", "does", "doesnt",
        "doing", "dont", "down", "during", "each", "few", "for", "from",
        "further", "had", "hadnt", "has", "hasnt", "have", "havent", "having",
        "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
        "i", "id", "if", "ill", "im", "in", "into", "is", "isnt", "it", "its",
        "itself", "ive", "just", "me", "more", "most", "my", "myself", "no",
        "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other",
        "our", "ours", "ourselves", "out", "over", "own", "rt", "same", "she",
        "should", "shouldnt", "so", "some", "such", "than", "that", "thats",
        "the", "their", "theirs", "them", "themselves", "then", "there",
        "theres", "these", "they", "theyre", "this", "those", "through", "to",
        "too", "under", "until", "up", "very", "via", "was", "wasnt", "we",
        "were", "werent", "weve", "what", "when", "where", "which", "while",
        "who", "whom", "why", "will", "with", "wont", "would", "wouldnt", "you",
        "your", "youre", "yours", "yourself", "yourselves",
    };
    return words;
}

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopword_set() {
    static const StopwordSet set(default_stopwords().begin(),
                                 default_stopwords().end());
    return set;
}

// One word per line, UTF-8; blank lines ignored.
inline StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stop-word file: " + path);
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) set.insert(line);
    }
    return set;
}

// ---------------------------------------------------------------------------
// Preprocessing pipeline
// ---------------------------------------------------------------------------

namespace text_detail {

inline bool is_ascii_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_word_char(char c) {
    return is_ascii_alpha(c) || is_ascii_digit(c) || c == '_';
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = s[i], b = prefix[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (a != b) return false;
    }
    return true;
}

// Remove http(s) URLs (to next whitespace) and @mentions, leaving spaces so
// neighbours do not fuse.
inline std::string strip_urls_mentions(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        std::string_view rest = text.substr(i);
        if (starts_with_icase(rest, "http://") || starts_with_icase(rest, "https://")) {
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            out += ' ';
            continue;
        }
        if (text[i] == '@' && i + 1 < text.size() && is_word_char(text[i + 1]) &&
            (i == 0 || !is_word_char(text[i - 1]))) {
            ++i;
            while (i < text.size() && is_word_char(text[i])) ++i;
            out += ' ';
            continue;
        }
        out += text[i];
        ++i;
    }
    return out;
}

// Split interior lowercase→uppercase transitions and letter→digit boundaries;
// runs of capitals (acronyms) stay together.
inline std::string camel_split(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 8);
    for (std::size_t i = 0; i < text.size(); ++i) {
        out += text[i];
        if (i + 1 < text.size()) {
            char a = text[i], b = text[i + 1];
            if ((is_ascii_lower(a) && is_ascii_upper(b)) ||
                (is_ascii_alpha(a) && is_ascii_digit(b)))
                out += ' ';
        }
    }
    return out;
}

inline void ascii_lower_inplace(std::string& s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
}

// ASCII emoticons, stored lowercase because extraction runs after the
// lowercasing step. Only symbol-bearing entries: bare-letter smileys would
// collide with ordinary words.
inline const std::vector<std::string>& emoticon_lexicon() {
    static const std::vector<std::string> lex = {
        ":-)", ":)", ":-(", ":(", ":-d", ":d", ":-p", ":p", ";-)", ";)",
        ":-/", ":/", ":-|", ":|", ":-o", ":o", ":-*", ":*", ":'(", ":')",
        "=)", "=(", "=d", "=p", "<3", "</3", "^_^", "-_-", ";_;",
    };
    return lex;
}

// Longest lexicon entry starting at s[pos]; 0 when none.
inline std::size_t match_emoticon(std::string_view s, std::size_t pos) {
    std::size_t best = 0;
    for (const std::string& e : emoticon_lexicon()) {
        if (e.size() > best && s.compare(pos, e.size(), e) == 0) best = e.size();
    }
    return best;
}

// Keep ASCII letters/digits and any non-ASCII bytes; drop ASCII punctuation
// (this is what lets "#flood" keep its word part).
inline std::string strip_punct(std::string_view token) {
    std::string out;
    out.reserve(token.size());
    for (char c : token) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u >= 0x80 || is_ascii_lower(c) || is_ascii_digit(c)) out += c;
    }
    return out;
}

}  // namespace text_detail

// Full pipeline: (1) strip URLs/@mentions, (2) camel-case split,
// (3) lowercase, (4) whitespace tokenize, (5) extract emoticons,
// (6) strip punctuation, (7) drop stop words, (8) Porter-stem.
// Emoticon tokens skip steps 6-8.
inline std::vector<std::string> preprocess(std::string_view text,
                                           const StopwordSet& stopwords) {
    using namespace text_detail;
    std::string s = strip_urls_mentions(text);
    s = camel_split(s);
    ascii_lower_inplace(s);

    std::vector<std::string> out;
    std::size_t i = 0;
    auto handle_fragment = [&](std::string_view frag) {
        std::string w = strip_punct(frag);
        if (w.empty()) return;
        if (stopwords.count(w)) return;
        out.push_back(porter_stem(w));
    };
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) {
            std::string_view tok(s.data() + i, j - i);
            std::size_t frag_start = 0;
            for (std::size_t k = 0; k < tok.size();) {
                std::size_t len = match_emoticon(tok, k);
                if (len > 0) {
                    if (k > frag_start) handle_fragment(tok.substr(frag_start, k - frag_start));
                    out.emplace_back(tok.substr(k, len));
                    k += len;
                    frag_start = k;
                } else {
                    ++k;
                }
            }
            if (frag_start < tok.size()) handle_fragment(tok.substr(frag_start));
        }
        i = j;
    }
    return out;
}

inline std::vector<std::string> preprocess(std::string_view text) {
    return preprocess(text, default_stopword_set());
}

// All unigrams in order, then all contiguous bigrams joined by one space.
inline std::vector<std::string> ngrams(const std::vector<std::string>& tokens,
                                       int max_n) {
    if (max_n != 1 && max_n != 2)
        throw ContractError("ngrams supports max_n of 1 or 2");
    std::vector<std::string> out = tokens;
    if (max_n == 2) {
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
            out.push_back(tokens[i] + ' ' + tokens[i + 1]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vocabulary and TFIDF
// ---------------------------------------------------------------------------

struct Vocabulary {
    std::vector<std::string> phrases;      // index = feature dimension v
    std::vector<std::uint32_t> doc_freq;   // N_v
    std::vector<double> idf;               // ln(1+N) - ln(1+N_v) + 1
    std::uint64_t n_docs = 0;              // N
    std::unordered_map<std::string, std::uint32_t> index;

    std::uint32_t size() const { return static_cast<std::uint32_t>(phrases.size()); }

    void rebuild_index() {
        index.clear();
        index.reserve(phrases.size());
        for (std::uint32_t v = 0; v < phrases.size(); ++v) index.emplace(phrases[v], v);
    }
};

inline double idf_value(std::uint64_t n_docs, std::uint64_t doc_freq) {
    return std::log1p(static_cast<double>(n_docs)) -
           std::log1p(static_cast<double>(doc_freq)) + 1.0;
}

// N_v counts documents containing the phrase at least once; phrases are kept
// iff N_v > prune_threshold (strict), ordered by first appearance.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   std::uint32_t prune_threshold) {
    if (docs.empty()) throw ContractError("cannot build a vocabulary from zero documents");

    std::vector<std::string> order;
    std::unordered_map<std::string, std::uint32_t> freq_of;  // phrase → N_v
    std::unordered_set<std::string> in_doc;
    for (const auto& doc : docs) {
        in_doc.clear();
        for (const std::string& phrase : doc) {
            if (!in_doc.insert(phrase).second) continue;
            auto [it, fresh] = freq_of.emplace(phrase, 0u);
            if (fresh) order.push_back(phrase);
            ++it->second;
        }
    }

    Vocabulary vocab;
    vocab.n_docs = docs.size();
    for (const std::string& phrase : order) {
        std::uint32_t nv = freq_of[phrase];
        if (nv > prune_threshold) {
            vocab.phrases.push_back(phrase);
            vocab.doc_freq.push_back(nv);
            vocab.idf.push_back(idf_value(vocab.n_docs, nv));
        }
    }
    if (vocab.phrases.empty())
        throw ContractError("all phrases pruned: vocabulary is empty");
    vocab.rebuild_index();
    return vocab;
}

// tf_v * idf_v over the vocabulary, L2-normalized; unknown phrases are
// ignored and an all-out-of-vocab doc stays the zero vector.
inline SparseVector tfidf_vector(const std::vector<std::string>& doc,
                                 const Vocabulary& vocab) {
    std::vector<std::pair<std::uint32_t, double>> counts;
    for (const std::string& phrase : doc) {
        auto it = vocab.index.find(phrase);
        if (it != vocab.index.end()) counts.emplace_back(it->second, 1.0);
    }
    std::sort(counts.begin(), counts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    SparseVector out;
    out.dim = vocab.size();
    for (std::size_t k = 0; k < counts.size();) {
        std::size_t j = k;
        double tf = 0.0;
        while (j < counts.size() && counts[j].first == counts[k].first) {
            tf += counts[j].second;
            ++j;
        }
        out.push(counts[k].first, tf * vocab.idf[counts[k].first]);
        k = j;
    }
    out.normalize();
    return out;
}

// z_n: 1 iff any query phrase occurs in the message's token sequence; a
// bigram query phrase matches a contiguous token pair.
inline int query_match(const std::vector<std::string>& doc,
                       const std::vector<std::string>& query) {
    if (query.empty()) throw ContractError("query must contain at least one phrase");
    for (const std::string& q : query) {
        std::size_t sp = q.find(' ');
        if (sp == std::string::npos) {
            if (std::find(doc.begin(), doc.end(), q) != doc.end()) return 1;
        } else {
            std::string_view first(q.data(), sp);
            std::string_view second(q.data() + sp + 1, q.size() - sp - 1);
            for (std::size_t i = 0; i + 1 < doc.size(); ++i)
                if (doc[i] == first && doc[i + 1] == second) return 1;
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Vocabulary file I/O: one line per phrase, `index \t phrase \t N_v \t idf`
// ---------------------------------------------------------------------------

inline void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
    for (std::uint32_t v = 0; v < vocab.size(); ++v) {
        out << v << '\t' << vocab.phrases[v] << '\t' << vocab.doc_freq[v] << '\t'
            << format_g9(vocab.idf[v]) << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) -> void {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
        };
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        std::size_t t3 = t2 == std::string::npos ? t2 : line.find('\t', t2 + 1);
        if (t3 == std::string::npos) fail("expected 4 tab-separated fields");
        long long idx_val, nv;
        double idf;
        if (!parse_long(std::string_view(line).substr(0, t1), idx_val) ||
            idx_val != static_cast<long long>(vocab.phrases.size()))
            fail("phrase index out of order");
        std::string phrase = line.substr(t1 + 1, t2 - t1 - 1);
        if (phrase.empty()) fail("empty phrase");
        if (!parse_long(std::string_view(line).substr(t2 + 1, t3 - t2 - 1), nv) || nv < 1)
            fail("bad document frequency");
        if (!parse_double(std::string_view(line).substr(t3 + 1), idf))
            fail("bad idf value");
        vocab.phrases.push_back(std::move(phrase));
        vocab.doc_freq.push_back(static_cast<std::uint32_t>(nv));
        vocab.idf.push_back(idf);
    }
    if (vocab.phrases.empty()) throw ParseError(path + ": empty vocabulary file");
    // N is not stored; recover it from the idf identity on the first line.
    double n_est =
        std::exp(vocab.idf[0] - 1.0 + std::log1p(static_cast<double>(vocab.doc_freq[0]))) - 1.0;
    vocab.n_docs = static_cast<std::uint64_t>(std::llround(std::max(n_est, 0.0)));
    vocab.rebuild_index();
    return vocab;
}

}  // namespace rastercast
