#pragma once

#include <array>
#include <string>
#include <string_view>

namespace rastercast {

// Porter stemmer, coded from the 1980 rule tables. Within each step the
// longest matching suffix wins; if that rule's condition fails, the step
// leaves the word unchanged. Applies to lowercase ASCII words.
namespace porter_detail {

inline bool is_cons(std::string_view w, std::size_t i) {
    char c = w[i];
    switch (c) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return false;
        case 'y': return i == 0 ? true : !is_cons(w, i - 1);
        default: return true;
    }
}

// m in [C](VC)^m[V]
inline int measure(std::string_view stem) {
    std::size_t i = 0, n = stem.size();
    int m = 0;
    while (i < n && is_cons(stem, i)) ++i;
    while (i < n) {
        while (i < n && !is_cons(stem, i)) ++i;
        if (i >= n) break;
        while (i < n && is_cons(stem, i)) ++i;
        ++m;
    }
    return m;
}

inline bool has_vowel(std::string_view stem) {
    for (std::size_t i = 0; i < stem.size(); ++i)
        if (!is_cons(stem, i)) return true;
    return false;
}

inline bool ends_double_cons(std::string_view stem) {
    std::size_t n = stem.size();
    return n >= 2 && stem[n - 1] == stem[n - 2] && is_cons(stem, n - 1);
}

// *o: cvc at the end, final c not w, x or y
inline bool ends_cvc(std::string_view stem) {
    std::size_t n = stem.size();
    if (n < 3) return false;
    char last = stem[n - 1];
    return is_cons(stem, n - 3) && !is_cons(stem, n - 2) && is_cons(stem, n - 1) &&
           last != 'w' && last != 'x' && last != 'y';
}

inline bool ends_with(std::string_view w, std::string_view suf) {
    return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf;
}

inline void replace_suffix(std::string& w, std::size_t suf_len, std::string_view rep) {
    w.resize(w.size() - suf_len);
    w += rep;
}

struct Rule {
    std::string_view suffix;
    std::string_view replacement;
};

// Longest matching suffix; fire only if measure(stem) > min_m.
inline void apply_table(std::string& w, const Rule* rules, std::size_t n_rules,
                        int min_m) {
    const Rule* best = nullptr;
    for (std::size_t k = 0; k < n_rules; ++k) {
        if (ends_with(w, rules[k].suffix) &&
            (!best || rules[k].suffix.size() > best->suffix.size()))
            best = &rules[k];
    }
    if (!best) return;
    std::string_view stem(w.data(), w.size() - best->suffix.size());
    if (measure(stem) > min_m) replace_suffix(w, best->suffix.size(), best->replacement);
}

inline void step1a(std::string& w) {
    if (ends_with(w, "sses")) {
        replace_suffix(w, 4, "ss");
    } else if (ends_with(w, "ies")) {
        replace_suffix(w, 3, "i");
    } else if (ends_with(w, "ss")) {
        // keep
    } else if (ends_with(w, "s")) {
        w.pop_back();
    }
}

inline void step1b(std::string& w) {
    if (ends_with(w, "eed")) {
        std::string_view stem(w.data(), w.size() - 3);
        if (measure(stem) > 0) w.pop_back();
        return;
    }
    bool fired = false;
    if (ends_with(w, "ed")) {
        std::string_view stem(w.data(), w.size() - 2);
        if (has_vowel(stem)) {
            w.resize(w.size() - 2);
            fired = true;
        }
    } else if (ends_with(w, "ing")) {
        std::string_view stem(w.data(), w.size() - 3);
        if (has_vowel(stem)) {
            w.resize(w.size() - 3);
            fired = true;
        }
    }
    if (!fired) return;
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
        w += 'e';
    } else if (ends_double_cons(w) && w.back() != 'l' && w.back() != 's' &&
               w.back() != 'z') {
        w.pop_back();
    } else if (measure(w) == 1 && ends_cvc(w)) {
        w += 'e';
    }
}

inline void step1c(std::string& w) {
    if (ends_with(w, "y") && has_vowel(std::string_view(w.data(), w.size() - 1)))
        w.back() = 'i';
}

inline constexpr std::array<Rule, 20> kStep2{{
    {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
    {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
    {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
    {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
    {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
}};

inline constexpr std::array<Rule, 7> kStep3{{
    {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
    {"ical", "ic"},  {"ful", ""},   {"ness", ""},
}};

inline constexpr std::array<std::string_view, 19> kStep4{{
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
}};

inline void step4(std::string& w) {
    std::string_view best;
    for (std::string_view suf : kStep4) {
        if (ends_with(w, suf) && suf.size() > best.size()) best = suf;
    }
    if (best.empty()) return;
    std::string_view stem(w.data(), w.size() - best.size());
    if (measure(stem) <= 1) return;
    if (best == "ion" && !(ends_with(stem, "s") || ends_with(stem, "t"))) return;
    w.resize(stem.size());
}

inline void step5a(std::string& w) {
    if (!ends_with(w, "e")) return;
    std::string_view stem(w.data(), w.size() - 1);
    int m = measure(stem);
    if (m > 1 || (m == 1 && !ends_cvc(stem))) w.pop_back();
}

inline void step5b(std::string& w) {
    if (measure(w) > 1 && ends_double_cons(w) && w.back() == 'l') w.pop_back();
}

}  // namespace porter_detail

inline std::string porter_stem(std::string_view word) {
    std::string w(word);
    porter_detail::step1a(w);
    porter_detail::step1b(w);
    porter_detail::step1c(w);
    porter_detail::apply_table(w, porter_detail::kStep2.data(),
                               porter_detail::kStep2.size(), 0);
    porter_detail::apply_table(w, porter_detail::kStep3.data(),
                               porter_detail::kStep3.size(), 0);
    porter_detail::step4(w);
    porter_detail::step5a(w);
    porter_detail::step5b(w);
    return w;
}

}  // namespace rastercast
