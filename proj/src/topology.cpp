#include "difflab/topology.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include "difflab/errors.hpp"

namespace difflab {

bool is_connected(std::size_t n_nodes, const std::vector<Edge>& edges) {
    if (n_nodes == 0) return false;
    std::vector<std::vector<NodeId>> adj(n_nodes);
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(n_nodes, 0);
    std::queue<NodeId> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (NodeId v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push(v);
            }
        }
    }
    return reached == n_nodes;
}

NetworkGraph::NetworkGraph(std::size_t n_nodes, const std::vector<Edge>& edges)
    : n_(n_nodes), adj_(n_nodes * n_nodes, 0), neighborhoods_(n_nodes) {
    if (n_nodes == 0) throw InvalidArgument("graph must have at least one node");
    for (const auto& [a, b] : edges) {
        if (a >= n_ || b >= n_) {
            throw InvalidArgument("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                  ") references a node outside [0, " + std::to_string(n_) + ")");
        }
        if (a == b) throw InvalidArgument("self-loop on node " + std::to_string(a));
        adj_[a * n_ + b] = 1;
        adj_[b * n_ + a] = 1;
    }
    if (!is_connected(n_, edges)) throw InvalidArgument("graph is not connected");
    for (NodeId k = 0; k < n_; ++k) {
        for (NodeId l = 0; l < n_; ++l) {
            if (l == k || adj_[l * n_ + k]) neighborhoods_[k].push_back(l);
        }
    }
}

bool NetworkGraph::adjacent(NodeId a, NodeId b) const {
    if (a >= n_ || b >= n_) throw InvalidArgument("node index out of range");
    return adj_[a * n_ + b] != 0;
}

std::vector<Edge> NetworkGraph::edges() const {
    std::vector<Edge> out;
    for (NodeId a = 0; a < n_; ++a)
        for (NodeId b = a + 1; b < n_; ++b)
            if (adj_[a * n_ + b]) out.emplace_back(a, b);
    return out;
}

std::size_t NetworkGraph::edge_count() const { return edges().size(); }

double NetworkGraph::mean_degree() const {
    return 2.0 * static_cast<double>(edge_count()) / static_cast<double>(n_);
}

NetworkGraph generate_random_graph(std::size_t n_nodes, double avg_degree, std::uint64_t seed) {
    if (n_nodes < 2) throw InvalidArgument("generate_random_graph: n_nodes must be >= 2");
    if (!(avg_degree > 0.0) || avg_degree > static_cast<double>(n_nodes - 1)) {
        throw InvalidArgument("generate_random_graph: avg_degree must lie in (0, n_nodes - 1]");
    }
    const double p = avg_degree / static_cast<double>(n_nodes - 1);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Edge> edges;
    for (int attempt = 0; attempt < kGraphRetryBudget; ++attempt) {
        edges.clear();
        for (NodeId a = 0; a < n_nodes; ++a)
            for (NodeId b = a + 1; b < n_nodes; ++b)
                if (unit(rng) < p) edges.emplace_back(a, b);
        if (is_connected(n_nodes, edges)) return NetworkGraph(n_nodes, edges);
    }
    throw GenerationFailure("no connected graph after " + std::to_string(kGraphRetryBudget) + " attempts");
}

NetworkGraph path_graph(std::size_t n_nodes) {
    std::vector<Edge> edges;
    for (NodeId k = 0; k + 1 < n_nodes; ++k) edges.emplace_back(k, k + 1);
    return NetworkGraph(n_nodes, edges);
}

CombinationMatrix metropolis_weights(const NetworkGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.size());
    Matrix w = Matrix::Zero(n, n);
    for (NodeId k = 0; k < graph.size(); ++k) {
        double off = 0.0;
        for (NodeId l : graph.neighborhood(k)) {
            if (l == k) continue;
            const double v = 1.0 / static_cast<double>(std::max(graph.degree(l), graph.degree(k)));
            w(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = v;
            off += v;
        }
        // Self weight is exactly zero when the neighbors' weights already sum to
        // one; don't let rounding push it below.
        const double self = 1.0 - off;
        w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = std::abs(self) < 1e-14 ? 0.0 : self;
    }
    return CombinationMatrix(std::move(w));
}

std::optional<Violation> validate_combination_matrix(const CombinationMatrix& matrix,
                                                     const NetworkGraph& graph) {
    const std::size_t n = graph.size();
    if (matrix.size() != n || static_cast<std::size_t>(matrix.matrix().cols()) != n) {
        throw InvalidArgument("combination matrix is " + std::to_string(matrix.matrix().rows()) + "x" +
                              std::to_string(matrix.matrix().cols()) + " but graph has " +
                              std::to_string(n) + " nodes");
    }
    for (NodeId k = 0; k < n; ++k) {
        for (NodeId l = 0; l < n; ++l) {
            const double v = matrix(l, k);
            if (v != 0.0 && !graph.in_neighborhood(l, k)) {
                return Violation{"sparsity", l, k,
                                 "nonzero weight on non-edge (" + std::to_string(l) + ", " + std::to_string(k) + ")"};
            }
            if (!(v >= 0.0 && v <= 1.0)) {
                return Violation{"range", l, k,
                                 "entry (" + std::to_string(l) + ", " + std::to_string(k) + ") outside [0, 1]"};
            }
        }
    }
    for (NodeId k = 0; k < n; ++k) {
        double sum = 0.0;
        for (NodeId l : graph.neighborhood(k)) sum += matrix(l, k);
        if (std::abs(sum - 1.0) > kStochasticTolerance) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "weights received by node " << k << " sum to " << sum;
            return Violation{"convexity", k, k, msg.str()};
        }
    }
    return std::nullopt;
}

void write_edge_list(std::ostream& out, const NetworkGraph& graph) {
    out << "N " << graph.size() << '\n';
    for (const auto& [a, b] : graph.edges()) out << a << ' ' << b << '\n';
}

NetworkGraph read_edge_list(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> n;
    std::vector<Edge> edges;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string first;
        if (!(fields >> first)) continue;
        if (!n) {
            std::size_t count = 0;
            if (first != "N" || !(fields >> count)) {
                throw ParseError("edge list must start with 'N <n_nodes>'", line_no, 1);
            }
            n = count;
            continue;
        }
        std::size_t a = 0;
        std::size_t b = 0;
        std::istringstream pair(line);
        if (!(pair >> a >> b)) throw ParseError("expected '<u> <v>'", line_no, 1);
        std::string trailing;
        if (pair >> trailing) throw ParseError("unexpected trailing field '" + trailing + "'", line_no, 1);
        edges.emplace_back(a, b);
    }
    if (!n) throw ParseError("empty edge list", line_no, 1);
    return NetworkGraph(*n, edges);
}

NetworkGraph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open edge list '" + path + "'");
    return read_edge_list(in);
}

}  // namespace difflab
