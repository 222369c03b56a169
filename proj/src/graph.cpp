#include "sdrem/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sdrem {

namespace {

void sort_unique(std::vector<Dyad>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

void symmetrize(std::vector<Dyad>& v)
{
    const std::size_t n = v.size();
    v.reserve(2 * n);
    for (std::size_t e = 0; e < n; ++e) v.push_back({v[e].dst, v[e].src});
    sort_unique(v);
}

// CSR over `by` (src or dst) with the other endpoint as payload.
template <bool BySource>
void build_index(std::size_t n, const std::vector<Dyad>& dyads, std::vector<std::size_t>& ptr,
                 std::vector<NodeId>& other, std::vector<std::size_t>* ids)
{
    ptr.assign(n + 1, 0);
    for (const Dyad& d : dyads) ++ptr[(BySource ? d.src : d.dst) + 1];
    for (std::size_t i = 0; i < n; ++i) ptr[i + 1] += ptr[i];
    other.assign(dyads.size(), 0);
    if (ids) ids->assign(dyads.size(), 0);
    std::vector<std::size_t> cursor(ptr.begin(), ptr.end() - 1);
    for (std::size_t e = 0; e < dyads.size(); ++e) {
        const Dyad& d = dyads[e];
        const std::size_t slot = cursor[BySource ? d.src : d.dst]++;
        other[slot] = BySource ? d.dst : d.src;
        if (ids) (*ids)[slot] = e;
    }
}

} // namespace

SparseGraph::SparseGraph(std::size_t n_nodes, std::vector<Dyad> edges, bool directed, std::vector<Dyad> test_mask)
    : n_nodes_(n_nodes), directed_(directed), edges_(std::move(edges)), mask_(std::move(test_mask))
{
    auto check = [n_nodes](const Dyad& d, const char* what) {
        if (d.src >= n_nodes || d.dst >= n_nodes)
            throw std::invalid_argument(std::string(what) + " endpoint out of range: (" + std::to_string(d.src) +
                                        "," + std::to_string(d.dst) + ") with n_nodes=" + std::to_string(n_nodes));
        if (d.src == d.dst)
            throw std::invalid_argument(std::string(what) + " self-loop at node " + std::to_string(d.src));
    };
    for (const Dyad& d : edges_) check(d, "edge");
    for (const Dyad& d : mask_) check(d, "masked dyad");

    if (directed_) {
        sort_unique(edges_);
        sort_unique(mask_);
    } else {
        symmetrize(edges_);
        symmetrize(mask_);
    }
    for (const Dyad& d : mask_)
        if (std::binary_search(edges_.begin(), edges_.end(), d))
            throw std::invalid_argument("masked dyad (" + std::to_string(d.src) + "," + std::to_string(d.dst) +
                                        ") is also a training edge");

    // edges_ is sorted by (src, dst), so the out-index is already ordered.
    build_index<true>(n_nodes_, edges_, out_ptr_, out_dst_, nullptr);
    build_index<false>(n_nodes_, edges_, in_ptr_, in_src_, &in_eid_);
    build_index<true>(n_nodes_, mask_, mask_out_ptr_, mask_out_, nullptr);
    build_index<false>(n_nodes_, mask_, mask_in_ptr_, mask_in_, nullptr);
}

std::optional<std::size_t> SparseGraph::edge_index(NodeId src, NodeId dst) const noexcept
{
    if (src >= n_nodes_ || dst >= n_nodes_) return std::nullopt;
    const auto first = edges_.begin() + static_cast<std::ptrdiff_t>(out_ptr_[src]);
    const auto last = edges_.begin() + static_cast<std::ptrdiff_t>(out_ptr_[src + 1]);
    const auto it = std::lower_bound(first, last, Dyad{src, dst});
    if (it == last || it->dst != dst) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
}

bool SparseGraph::is_masked(NodeId src, NodeId dst) const noexcept
{
    return std::binary_search(mask_.begin(), mask_.end(), Dyad{src, dst});
}

SparseGraph SparseGraph::with_mask(std::vector<Dyad> test_mask) const
{
    return SparseGraph(n_nodes_, edges_, directed_, std::move(test_mask));
}

FeatureMatrix::FeatureMatrix(std::size_t n_nodes, std::size_t n_features, std::vector<FeatureTriplet> triplets)
    : n_nodes_(n_nodes), n_features_(n_features)
{
    for (const auto& t : triplets) {
        if (t.node >= n_nodes)
            throw std::invalid_argument("feature node " + std::to_string(t.node) + " >= n_nodes " +
                                        std::to_string(n_nodes));
        if (t.feature >= n_features)
            throw std::invalid_argument("feature index " + std::to_string(t.feature) + " >= n_features " +
                                        std::to_string(n_features));
        if (!(t.value >= 0.0) || !std::isfinite(t.value))
            throw std::invalid_argument("feature value must be finite and non-negative (node " +
                                        std::to_string(t.node) + ", feature " + std::to_string(t.feature) + ")");
    }
    std::sort(triplets.begin(), triplets.end(), [](const FeatureTriplet& a, const FeatureTriplet& b) {
        return a.node != b.node ? a.node < b.node : a.feature < b.feature;
    });
    for (std::size_t e = 1; e < triplets.size(); ++e)
        if (triplets[e].node == triplets[e - 1].node && triplets[e].feature == triplets[e - 1].feature)
            throw std::invalid_argument("repeated feature entry (node " + std::to_string(triplets[e].node) +
                                        ", feature " + std::to_string(triplets[e].feature) + ")");

    row_ptr_.assign(n_nodes + 1, 0);
    for (const auto& t : triplets) {
        if (t.value == 0.0) continue;
        ++row_ptr_[t.node + 1];
        entries_.push_back({t.feature, t.value});
    }
    for (std::size_t i = 0; i < n_nodes; ++i) row_ptr_[i + 1] += row_ptr_[i];
}

FeatureMatrix FeatureMatrix::identity(std::size_t n)
{
    std::vector<FeatureTriplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({static_cast<NodeId>(i), static_cast<std::uint32_t>(i), 1.0});
    return FeatureMatrix(n, n, std::move(t));
}

double FeatureMatrix::density() const noexcept
{
    if (n_nodes_ == 0 || n_features_ == 0) return 0.0;
    return static_cast<double>(entries_.size()) / (static_cast<double>(n_nodes_) * static_cast<double>(n_features_));
}

} // namespace sdrem
