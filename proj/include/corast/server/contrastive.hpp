#pragma once

#include <cstdint>
#include <random>

#include "corast/nn/graph.hpp"

namespace corast::server {

/// Two overlapping crops [a1, b1) and [a2, b2) of one window, a1 <= a2 <= b1 <= b2.
/// The shared part is [a2, b1).
struct CropPair {
    std::int64_t a1 = 0, b1 = 0;
    std::int64_t a2 = 0, b2 = 0;

    std::int64_t overlap_begin() const { return a2; }
    std::int64_t overlap_end() const { return b1; }
    std::int64_t overlap() const { return b1 - a2; }
};

/// Overlap length is drawn from [min(min_overlap, L), L]; its position and the
/// two extensions (left of crop 1, right of crop 2) are uniform.
CropPair random_crop_pair(std::int64_t length, std::mt19937_64& rng, std::int64_t min_overlap = 1);

/// z1, z2: [N x O x d] encodings of the overlap seen through each crop.
///
/// At every level, each anchor z1[i,t] is scored by dot product against the
/// other view: against z2[j,t] for all instances j (instance term) and against
/// z2[i,s] for all timestamps s (temporal term). A term is the mean negative
/// log-softmax of the matching candidate, averaged over both anchor directions.
/// Levels come from max-pooling time by 2 (floor) until length 1; a level's
/// loss is the sum of its defined terms and the result is the mean over levels
/// with at least one term.
nn::Var hierarchical_contrastive_loss(nn::Graph& g, nn::Var z1, nn::Var z2);

/// Value-only form of the same loss.
double hierarchical_contrastive_loss(const nn::Tensor& z1, const nn::Tensor& z2);

}  // namespace corast::server
