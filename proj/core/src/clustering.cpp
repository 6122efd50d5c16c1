#include "hicov/clustering.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hicov {

std::vector<int> Dendrogram::leaves_of(int id) const {
    std::vector<int> out;
    std::vector<int> stack{id};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (node < leaf_count) {
            out.push_back(node);
        } else {
            const Merge& m = merges.at(static_cast<std::size_t>(node - leaf_count));
            stack.push_back(m.left);
            stack.push_back(m.right);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Dendrogram agglomerate(const Matrix& dissimilarity, Linkage linkage) {
    const Eigen::Index p = dissimilarity.rows();
    if (p < 1 || dissimilarity.cols() != p) {
        throw std::invalid_argument("agglomerate: dissimilarity must be square and non-empty");
    }
    if (!dissimilarity.allFinite()) {
        throw std::invalid_argument("agglomerate: dissimilarity has non-finite entries");
    }
    if ((dissimilarity - dissimilarity.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("agglomerate: dissimilarity must be symmetric");
    }

    // Slot i holds the active cluster whose lowest leaf index is i, so scanning
    // slot pairs in lexicographic order implements the tie-break directly.
    Matrix dist = dissimilarity;
    std::vector<int> cluster_id(static_cast<std::size_t>(p));
    std::vector<int> size(static_cast<std::size_t>(p), 1);
    std::vector<char> active(static_cast<std::size_t>(p), 1);
    for (Eigen::Index i = 0; i < p; ++i) cluster_id[static_cast<std::size_t>(i)] = static_cast<int>(i);

    Dendrogram out;
    out.leaf_count = static_cast<int>(p);
    out.merges.reserve(static_cast<std::size_t>(p > 0 ? p - 1 : 0));

    for (Eigen::Index step = 0; step + 1 < p; ++step) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index a = -1;
        Eigen::Index b = -1;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = i + 1; j < p; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    a = i;
                    b = j;
                }
            }
        }

        const auto ua = static_cast<std::size_t>(a);
        const auto ub = static_cast<std::size_t>(b);
        const int merged_size = size[ua] + size[ub];
        out.merges.push_back({cluster_id[ua], cluster_id[ub], best, merged_size});

        const double wa = static_cast<double>(size[ua]) / merged_size;
        const double wb = static_cast<double>(size[ub]) / merged_size;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a || k == b) continue;
            const double updated = linkage == Linkage::Average
                                       ? wa * dist(k, a) + wb * dist(k, b)
                                       : std::min(dist(k, a), dist(k, b));
            dist(k, a) = updated;
            dist(a, k) = updated;
        }
        active[ub] = 0;
        size[ua] = merged_size;
        cluster_id[ua] = static_cast<int>(p + step);
    }
    return out;
}

Matrix cophenetic_matrix(const Dendrogram& dendrogram) {
    const int p = dendrogram.leaf_count;
    Matrix out = Matrix::Zero(p, p);
    // members[c] lists the leaves of cluster c (leaves and merged clusters).
    std::vector<std::vector<int>> members(static_cast<std::size_t>(p) + dendrogram.merges.size());
    for (int i = 0; i < p; ++i) members[static_cast<std::size_t>(i)] = {i};
    for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
        const Merge& m = dendrogram.merges[k];
        auto& left = members[static_cast<std::size_t>(m.left)];
        auto& right = members[static_cast<std::size_t>(m.right)];
        for (int i : left) {
            for (int j : right) {
                out(i, j) = m.height;
                out(j, i) = m.height;
            }
        }
        auto& merged = members[static_cast<std::size_t>(p) + k];
        merged.reserve(left.size() + right.size());
        merged.insert(merged.end(), left.begin(), left.end());
        merged.insert(merged.end(), right.begin(), right.end());
        left.clear();
        left.shrink_to_fit();
        right.clear();
        right.shrink_to_fit();
    }
    return out;
}

std::vector<int> quasi_diagonal_order(const Dendrogram& dendrogram) {
    const int p = dendrogram.leaf_count;
    std::vector<int> min_leaf(static_cast<std::size_t>(p) + dendrogram.merges.size());
    std::vector<int> sizes(min_leaf.size(), 1);
    for (int i = 0; i < p; ++i) min_leaf[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
        const Merge& m = dendrogram.merges[k];
        const auto id = static_cast<std::size_t>(p) + k;
        min_leaf[id] = std::min(min_leaf[static_cast<std::size_t>(m.left)],
                                min_leaf[static_cast<std::size_t>(m.right)]);
        sizes[id] = m.size;
    }

    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(p));
    std::vector<int> stack{dendrogram.root()};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (node < p) {
            order.push_back(node);
            continue;
        }
        const Merge& m = dendrogram.merges[static_cast<std::size_t>(node - p)];
        int first = m.left;
        int second = m.right;
        const auto key = [&](int c) {
            return std::pair{sizes[static_cast<std::size_t>(c)], min_leaf[static_cast<std::size_t>(c)]};
        };
        if (key(second) < key(first)) std::swap(first, second);
        stack.push_back(second);
        stack.push_back(first);
    }
    return order;
}

}  // namespace hicov
