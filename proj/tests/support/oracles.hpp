#pragma once

// Brute-force oracles for the generators.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "int2int/generators.hpp"

namespace int2int::testing {

inline std::int64_t divisor_gcd(std::int64_t a, std::int64_t b) {
    a = std::llabs(a);
    b = std::llabs(b);
    if (a == 0) return b;
    if (b == 0) return a;
    for (std::int64_t d = std::min(a, b); d >= 1; --d)
        if (a % d == 0 && b % d == 0) return d;
    return 1;
}

// Exact determinant by cofactor expansion.
inline __int128 minor_det(const IntMatrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    const auto n = rows.size();
    if (n == 1) return m(rows[0], cols[0]);
    __int128 det = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<int> sub_rows(rows.begin() + 1, rows.end());
        std::vector<int> sub_cols;
        for (std::size_t k = 0; k < n; ++k)
            if (k != j) sub_cols.push_back(cols[k]);
        const __int128 term = m(rows[0], cols[j]) * minor_det(m, sub_rows, sub_cols);
        det += (j % 2 == 0) ? term : -term;
    }
    return det;
}

inline void subsets(int n, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int i = start; i < n; ++i) {
        cur.push_back(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

inline int minor_rank(const IntMatrix& m) {
    for (int k = std::min(m.rows, m.cols); k >= 1; --k) {
        std::vector<std::vector<int>> rs, cs;
        std::vector<int> cur;
        subsets(m.rows, k, 0, cur, rs);
        subsets(m.cols, k, 0, cur, cs);
        for (const auto& r : rs)
            for (const auto& c : cs)
                if (minor_det(m, r, c) != 0) return k;
    }
    return 0;
}

}  // namespace int2int::testing
