#pragma once

#include "hicov/covariance.hpp"

#include <vector>

namespace hicov {

enum class Linkage { Single, Average };

/// One agglomeration step. Leaves are 0..p-1; merge k creates cluster p+k.
struct Merge {
    int left;
    int right;
    double height;
    int size;
};

struct Dendrogram {
    int leaf_count = 0;
    std::vector<Merge> merges;  // exactly leaf_count - 1, heights non-decreasing

    /// Leaves under cluster `id`, ascending.
    std::vector<int> leaves_of(int id) const;
    int root() const { return leaf_count == 1 ? 0 : leaf_count + static_cast<int>(merges.size()) - 1; }
};

/// Agglomerative clustering with Lance-Williams updates. Among equal
/// distances the pair whose lowest leaf index is smallest merges first.
/// The left child of each merge is the cluster holding the lower leaf index.
Dendrogram agglomerate(const Matrix& dissimilarity, Linkage linkage);

inline Dendrogram alca_dendrogram(const Matrix& dissimilarity) {
    return agglomerate(dissimilarity, Linkage::Average);
}

/// Matrix of merge heights at which each pair first shares a cluster; zero diagonal.
Matrix cophenetic_matrix(const Dendrogram& dendrogram);

/// Left-to-right leaf order; at each node the smaller child comes first,
/// ties broken by lowest leaf index.
std::vector<int> quasi_diagonal_order(const Dendrogram& dendrogram);

}  // namespace hicov
