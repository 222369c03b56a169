#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sdrem {

using NodeId = std::uint32_t;

/// An ordered pair (src -> dst).
struct Dyad {
    NodeId src = 0;
    NodeId dst = 0;
    friend auto operator<=>(const Dyad&, const Dyad&) = default;
};

/// Binary relation over n nodes stored as sorted edge list plus CSR (out) and
/// CSC (in) adjacency. Self-loops are never stored. An undirected graph is
/// kept in symmetrized form, so every algorithm sees a directed edge set.
///
/// `test_mask` holds dyads that are unobserved (held out). They never appear in
/// the edge set.
class SparseGraph {
public:
    SparseGraph() = default;

    /// Throws std::invalid_argument on out-of-range endpoints, self-loops, or a
    /// mask that intersects the edge set. Duplicates are collapsed. When
    /// `directed` is false both the edges and the mask are symmetrized.
    SparseGraph(std::size_t n_nodes, std::vector<Dyad> edges, bool directed, std::vector<Dyad> test_mask = {});

    std::size_t n_nodes() const noexcept { return n_nodes_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }
    bool directed() const noexcept { return directed_; }

    std::span<const Dyad> edges() const noexcept { return edges_; }
    std::span<const Dyad> test_mask() const noexcept { return mask_; }

    std::span<const NodeId> out_neighbors(NodeId i) const noexcept
    {
        return {out_dst_.data() + out_ptr_[i], out_ptr_[i + 1] - out_ptr_[i]};
    }
    std::span<const NodeId> in_neighbors(NodeId i) const noexcept
    {
        return {in_src_.data() + in_ptr_[i], in_ptr_[i + 1] - in_ptr_[i]};
    }
    /// Edge ids aligned with in_neighbors(i).
    std::span<const std::size_t> in_edge_ids(NodeId i) const noexcept
    {
        return {in_eid_.data() + in_ptr_[i], in_ptr_[i + 1] - in_ptr_[i]};
    }

    std::span<const NodeId> masked_out(NodeId i) const noexcept
    {
        return {mask_out_.data() + mask_out_ptr_[i], mask_out_ptr_[i + 1] - mask_out_ptr_[i]};
    }
    std::span<const NodeId> masked_in(NodeId i) const noexcept
    {
        return {mask_in_.data() + mask_in_ptr_[i], mask_in_ptr_[i + 1] - mask_in_ptr_[i]};
    }

    /// Index of edge (src, dst) in edges(), if present.
    std::optional<std::size_t> edge_index(NodeId src, NodeId dst) const noexcept;
    bool has_edge(NodeId src, NodeId dst) const noexcept { return edge_index(src, dst).has_value(); }
    bool is_masked(NodeId src, NodeId dst) const noexcept;

    /// Same edges, new mask.
    SparseGraph with_mask(std::vector<Dyad> test_mask) const;

    friend bool operator==(const SparseGraph& a, const SparseGraph& b) noexcept
    {
        return a.n_nodes_ == b.n_nodes_ && a.directed_ == b.directed_ && a.edges_ == b.edges_ && a.mask_ == b.mask_;
    }

private:
    std::size_t n_nodes_ = 0;
    bool directed_ = true;
    std::vector<Dyad> edges_;
    std::vector<std::size_t> out_ptr_{0};
    std::vector<NodeId> out_dst_;
    std::vector<std::size_t> in_ptr_{0};
    std::vector<NodeId> in_src_;
    std::vector<std::size_t> in_eid_;
    std::vector<Dyad> mask_;
    std::vector<std::size_t> mask_out_ptr_{0};
    std::vector<NodeId> mask_out_;
    std::vector<std::size_t> mask_in_ptr_{0};
    std::vector<NodeId> mask_in_;
};

/// One non-zero feature value.
struct FeatureEntry {
    std::uint32_t feature = 0;
    double value = 0.0;
    friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

/// A node's feature triplet (node, feature, value).
struct FeatureTriplet {
    NodeId node = 0;
    std::uint32_t feature = 0;
    double value = 0.0;
};

/// Sparse non-negative N x D matrix, stored by node (CSR). Zero values are
/// dropped on construction.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(std::size_t n_nodes) : n_nodes_(n_nodes), row_ptr_(n_nodes + 1, 0) {}

    /// Throws std::invalid_argument on negative or non-finite values,
    /// out-of-range indices, or repeated (node, feature) pairs.
    FeatureMatrix(std::size_t n_nodes, std::size_t n_features, std::vector<FeatureTriplet> triplets);

    static FeatureMatrix identity(std::size_t n);

    std::size_t n_nodes() const noexcept { return n_nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t nnz() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    std::span<const FeatureEntry> row(NodeId i) const noexcept
    {
        return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }

    /// nonzeros / (N * D); 0 when either dimension is 0.
    double density() const noexcept;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t n_nodes_ = 0;
    std::size_t n_features_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<FeatureEntry> entries_;
};

} // namespace sdrem
