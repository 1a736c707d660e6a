#ifndef FILLMIN_ORDERINGS_HPP
#define FILLMIN_ORDERINGS_HPP

#include <string>

#include <Eigen/Dense>

#include "fillmin/sparse.hpp"

namespace fillmin {

enum class OrderingMethod { Natural, ReverseCuthillMcKee, MinimumDegree, Fiedler, Pfm };

OrderingMethod ordering_method_from_string(const std::string& name);
std::string to_string(OrderingMethod m);

Permutation natural_ordering(int n);

// Cuthill-McKee per component (BFS from a pseudo-peripheral node, neighbors
// by ascending degree then index), components in ascending order of their
// smallest node index, then the whole order reversed.
Permutation reverse_cuthill_mckee(const GraphView& g);

// Exact greedy minimum external degree on the evolving elimination graph;
// eliminating a node cliques its neighbors. Ties by smallest node index.
Permutation minimum_degree(const GraphView& g);

// Fiedler vector of the weighted combinatorial Laplacian D - W of one
// connected component (node set `comp`), computed by restarted Lanczos with
// full reorthogonalization on the constant-deflated operator. max_iter counts
// Lanczos steps across restarts. Sign pinned so the largest-magnitude entry
// is positive. Residual contract: ||L x - lambda x|| <= tol for unit x.
Eigen::VectorXd fiedler_vector(const GraphView& g, const std::vector<int>& comp,
                               double tol, int max_iter);

// Nodes sorted ascending by Fiedler value (ties by index), per component,
// components concatenated in ascending order of smallest node index.
Permutation fiedler_ordering(const GraphView& g, double tol = 1e-8,
                             int max_iter = 1000);

std::vector<std::vector<int>> connected_components(const GraphView& g);

}  // namespace fillmin

#endif  // FILLMIN_ORDERINGS_HPP
