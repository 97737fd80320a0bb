#pragma once

// Brute-force reference for adjusted mutual information: the expected mutual
// information is the plain average over every permutation of one labeling.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

namespace ctour::testing {

inline double plain_mi(const std::vector<int>& a, const std::vector<int>& b) {
    const double n = static_cast<double>(a.size());
    std::map<int, double> ca, cb;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1;
        cb[b[i]] += 1;
        joint[{a[i], b[i]}] += 1;
    }
    double mi = 0;
    for (const auto& [key, nij] : joint) mi += nij / n * std::log(n * nij / (ca[key.first] * cb[key.second]));
    return mi;
}

inline double plain_entropy(const std::vector<int>& a) {
    const double n = static_cast<double>(a.size());
    std::map<int, double> c;
    for (int x : a) c[x] += 1;
    double h = 0;
    for (const auto& [k, v] : c) h -= v / n * std::log(v / n);
    return h;
}

inline double bruteforce_emi(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::size_t> perm(b.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> shuffled(b.size());
    double total = 0;
    std::size_t count = 0;
    do {
        for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = b[perm[i]];
        total += plain_mi(a, shuffled);
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total / static_cast<double>(count);
}

// Class sizes in descending order; E[MI] depends on nothing else.
inline std::vector<int> sorted_sizes(const std::vector<int>& a) {
    std::map<int, int> c;
    for (int x : a) ++c[x];
    std::vector<int> s;
    for (const auto& [k, v] : c) s.push_back(v);
    std::sort(s.rbegin(), s.rend());
    return s;
}

// Every labeling of n points with at most k classes, one per partition
// (restricted growth strings).
inline std::vector<std::vector<int>> canonical_labelings(std::size_t n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(n, 0);
    auto rec = [&](auto&& self, std::size_t i, int used) -> void {
        if (i == n) {
            out.push_back(cur);
            return;
        }
        for (int c = 0; c <= std::min(used, k - 1); ++c) {
            cur[i] = c;
            self(self, i + 1, std::max(used, c + 1));
        }
    };
    if (n > 0) rec(rec, 0, 0);
    return out;
}

}  // namespace ctour::testing
