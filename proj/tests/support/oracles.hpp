#pragma once

// Reference implementations the tests trust instead of the library under
// test. Deliberately written the slow, obvious way and kept free of any
// include from include/chatagri/.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

// Straight from the textbook definition: cost of the last column plus the
// best of delete/insert/substitute. Exponential, only usable on tiny inputs.
template <class Seq>
size_t naive_levenshtein(const Seq& a, const Seq& b, size_t i, size_t j) {
    if (i == 0) return j;
    if (j == 0) return i;
    const size_t del = naive_levenshtein(a, b, i - 1, j) + 1;
    const size_t ins = naive_levenshtein(a, b, i, j - 1) + 1;
    const size_t sub = naive_levenshtein(a, b, i - 1, j - 1) +
                       (a[i - 1] == b[j - 1] ? 0 : 1);
    return std::min({del, ins, sub});
}

template <class Seq>
size_t naive_levenshtein(const Seq& a, const Seq& b) {
    return naive_levenshtein(a, b, a.size(), b.size());
}

// Same recursion with a memo table, so it stays recursive in shape but can
// cover every pair of short strings in reasonable time.
template <class Seq>
size_t memo_levenshtein_at(const Seq& a, const Seq& b, size_t i, size_t j,
                           std::vector<size_t>& memo, size_t stride) {
    constexpr size_t unset = static_cast<size_t>(-1);
    size_t& slot = memo[i * stride + j];
    if (slot != unset) return slot;
    if (i == 0) return slot = j;
    if (j == 0) return slot = i;
    const size_t del = memo_levenshtein_at(a, b, i - 1, j, memo, stride) + 1;
    const size_t ins = memo_levenshtein_at(a, b, i, j - 1, memo, stride) + 1;
    const size_t sub = memo_levenshtein_at(a, b, i - 1, j - 1, memo, stride) +
                       (a[i - 1] == b[j - 1] ? 0 : 1);
    return slot = std::min({del, ins, sub});
}

template <class Seq>
size_t memo_levenshtein(const Seq& a, const Seq& b) {
    const size_t stride = b.size() + 1;
    std::vector<size_t> memo((a.size() + 1) * stride, static_cast<size_t>(-1));
    return memo_levenshtein_at(a, b, a.size(), b.size(), memo, stride);
}

// Minimal UTF-8 encoder so property tests can build strings from codepoint
// lists without borrowing the library's codec.
inline void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode_utf8(const std::vector<uint32_t>& cps) {
    std::string out;
    for (uint32_t cp : cps) encode_utf8(cp, out);
    return out;
}

// Brute-force classification metrics over integer label ids. Every count
// comes from a fresh scan of the example list; no confusion matrix, no
// shared intermediate state with the library code.
struct BruteMetrics {
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1;
    std::vector<size_t> support;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
};

inline BruteMetrics brute_metrics(const std::vector<int>& gold,
                                  const std::vector<int>& pred,
                                  int label_count) {
    BruteMetrics m;
    const size_t n = gold.size();
    size_t correct = 0;
    for (size_t i = 0; i < n; ++i)
        if (gold[i] == pred[i]) ++correct;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    size_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    for (int c = 0; c < label_count; ++c) {
        size_t tp = 0, fp = 0, fn = 0, sup = 0;
        for (size_t i = 0; i < n; ++i) {
            if (pred[i] == c && gold[i] == c) ++tp;
            if (pred[i] == c && gold[i] != c) ++fp;
            if (gold[i] == c && pred[i] != c) ++fn;
            if (gold[i] == c) ++sup;
        }
        const double p =
            (tp + fp) == 0 ? 0.0
                           : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double r =
            (tp + fn) == 0 ? 0.0
                           : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        m.precision.push_back(p);
        m.recall.push_back(r);
        m.f1.push_back(f);
        m.support.push_back(sup);
        m.weighted_f1 +=
            (static_cast<double>(sup) / static_cast<double>(n)) * f;
        m.macro_f1 += f;
        pooled_tp += tp;
        pooled_fp += fp;
        pooled_fn += fn;
    }
    m.macro_f1 /= static_cast<double>(label_count);
    const double pp =
        (pooled_tp + pooled_fp) == 0
            ? 0.0
            : static_cast<double>(pooled_tp) /
                  static_cast<double>(pooled_tp + pooled_fp);
    const double pr =
        (pooled_tp + pooled_fn) == 0
            ? 0.0
            : static_cast<double>(pooled_tp) /
                  static_cast<double>(pooled_tp + pooled_fn);
    m.micro_f1 = (pp + pr) == 0.0 ? 0.0 : 2.0 * pp * pr / (pp + pr);
    return m;
}

}  // namespace oracle
