#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "difflab/types.hpp"

namespace difflab {

using Edge = std::pair<NodeId, NodeId>;

// Undirected connected graph. Self-loops are never stored; every node is an
// implicit member of its own neighborhood.
class NetworkGraph {
public:
    // Throws InvalidArgument on out-of-range endpoints, self-loops, or a
    // disconnected edge set. Duplicate edges are merged.
    NetworkGraph(std::size_t n_nodes, const std::vector<Edge>& edges);

    std::size_t size() const noexcept { return n_; }
    bool adjacent(NodeId a, NodeId b) const;
    // Neighbor count, excluding the node itself.
    std::size_t degree(NodeId k) const { return neighborhoods_.at(k).size() - 1; }
    // Sorted neighbors of k, including k.
    const std::vector<NodeId>& neighborhood(NodeId k) const { return neighborhoods_.at(k); }
    bool in_neighborhood(NodeId l, NodeId k) const { return l == k || adjacent(l, k); }

    // Each undirected edge once, as (min, max), sorted.
    std::vector<Edge> edges() const;
    std::size_t edge_count() const;
    double mean_degree() const;

    friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
        return a.n_ == b.n_ && a.adj_ == b.adj_;
    }

private:
    std::size_t n_;
    std::vector<char> adj_;  // row-major n x n
    std::vector<std::vector<NodeId>> neighborhoods_;
};

// Breadth-first connectivity check over an adjacency given as edge pairs.
bool is_connected(std::size_t n_nodes, const std::vector<Edge>& edges);

// Erdos-Renyi graph with edge probability avg_degree / (n - 1), resampled
// until connected.
inline constexpr int kGraphRetryBudget = 1000;
NetworkGraph generate_random_graph(std::size_t n_nodes, double avg_degree, std::uint64_t seed);

NetworkGraph path_graph(std::size_t n_nodes);

enum class MatrixRole { Adaptation, Combination };

// N x N nonnegative weights; entry(l, k) is the weight node k assigns to l.
class CombinationMatrix {
public:
    CombinationMatrix(Matrix entries, MatrixRole role = MatrixRole::Combination)
        : entries_(std::move(entries)), role_(role) {}

    static CombinationMatrix identity(std::size_t n, MatrixRole role = MatrixRole::Combination) {
        return CombinationMatrix(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), role);
    }

    double operator()(NodeId l, NodeId k) const {
        return entries_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
    }
    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    const Matrix& matrix() const noexcept { return entries_; }
    MatrixRole role() const noexcept { return role_; }

    CombinationMatrix with_role(MatrixRole role) const { return CombinationMatrix(entries_, role); }

private:
    Matrix entries_;
    MatrixRole role_;
};

// Metropolis rule: 1 / max(deg_l, deg_k) off the diagonal, remainder on it.
CombinationMatrix metropolis_weights(const NetworkGraph& graph);

struct Violation {
    std::string constraint;  // "sparsity", "range", "convexity"
    NodeId l = 0;
    NodeId k = 0;
    std::string message;
};

inline constexpr double kStochasticTolerance = 1e-12;

// nullopt when the matrix respects graph sparsity, lies in [0, 1], and every
// column over N_k sums to one. Throws InvalidArgument on size mismatch.
std::optional<Violation> validate_combination_matrix(const CombinationMatrix& matrix,
                                                     const NetworkGraph& graph);

// Plain-text edge list: "N <n>" then one "<u> <v>" pair per line, 0-indexed.
void write_edge_list(std::ostream& out, const NetworkGraph& graph);
NetworkGraph read_edge_list(std::istream& in);
NetworkGraph load_edge_list(const std::string& path);

}  // namespace difflab
