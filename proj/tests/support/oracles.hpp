#pragma once

// Reference implementations the optimized code is checked against. Written
// for clarity only; shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "corast/nn/tensor.hpp"

namespace corast::testing {

using Nested = std::vector<std::vector<std::vector<double>>>;  // [N][O][d]

// Straight enumeration of every softmax term, written independently of the
// optimized loss: explicit exp/sum, explicit pooling, no shared helpers.
inline double brute_force_loss(Nested a, Nested b) {
    const std::size_t n = a.size();
    double total = 0.0;
    int levels = 0;
    auto dotp = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0;
        for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
        return s;
    };
    while (true) {
        const std::size_t o = a[0].size();
        double level = 0.0;
        bool any = false;
        if (n >= 2) {
            double sum = 0.0;
            for (std::size_t t = 0; t < o; ++t)
                for (std::size_t i = 0; i < n; ++i) {
                    double den_ab = 0.0, den_ba = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        den_ab += std::exp(dotp(a[i][t], b[j][t]));
                        den_ba += std::exp(dotp(b[i][t], a[j][t]));
                    }
                    sum += -std::log(std::exp(dotp(a[i][t], b[i][t])) / den_ab);
                    sum += -std::log(std::exp(dotp(b[i][t], a[i][t])) / den_ba);
                }
            level += sum / (2.0 * static_cast<double>(n * o));
            any = true;
        }
        if (o >= 2) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t t = 0; t < o; ++t) {
                    double den_ab = 0.0, den_ba = 0.0;
                    for (std::size_t s = 0; s < o; ++s) {
                        den_ab += std::exp(dotp(a[i][t], b[i][s]));
                        den_ba += std::exp(dotp(b[i][t], a[i][s]));
                    }
                    sum += -std::log(std::exp(dotp(a[i][t], b[i][t])) / den_ab);
                    sum += -std::log(std::exp(dotp(b[i][t], a[i][t])) / den_ba);
                }
            level += sum / (2.0 * static_cast<double>(n * o));
            any = true;
        }
        if (any) {
            total += level;
            ++levels;
        }
        if (o == 1) break;
        auto halve = [](const Nested& z) {
            Nested out(z.size());
            for (std::size_t i = 0; i < z.size(); ++i)
                for (std::size_t t = 0; t + 1 < z[i].size(); t += 2) {
                    std::vector<double> m(z[i][t].size());
                    for (std::size_t k = 0; k < m.size(); ++k) m[k] = std::max(z[i][t][k], z[i][t + 1][k]);
                    out[i].push_back(m);
                }
            return out;
        };
        a = halve(a);
        b = halve(b);
    }
    return total / levels;
}

inline Nested to_nested(const nn::Tensor& t) {
    Nested z(static_cast<std::size_t>(t.dim(0)),
             std::vector<std::vector<double>>(static_cast<std::size_t>(t.dim(1)),
                                              std::vector<double>(static_cast<std::size_t>(t.dim(2)))));
    for (std::int64_t i = 0; i < t.dim(0); ++i)
        for (std::int64_t j = 0; j < t.dim(1); ++j)
            for (std::int64_t k = 0; k < t.dim(2); ++k)
                z[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = t.at(i, j, k);
    return z;
}

// Halt epoch and best epoch implied by a validation sequence under the
// patience rule, computed without the class under test.
inline std::pair<int, int> expected_stop(const std::vector<double>& seq, int patience) {
    double best = std::numeric_limits<double>::infinity();
    int best_at = 0, bad = 0;
    for (int i = 0; i < static_cast<int>(seq.size()); ++i) {
        if (seq[static_cast<std::size_t>(i)] < best) {
            best = seq[static_cast<std::size_t>(i)];
            best_at = i + 1;
            bad = 0;
        } else if (++bad == patience) {
            return {i + 1, best_at};
        }
    }
    return {static_cast<int>(seq.size()), best_at};
}

}  // namespace corast::testing
