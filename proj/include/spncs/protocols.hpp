#pragma once

#include "spncs/numerics.hpp"

#include <cstdint>
#include <vector>

namespace spncs {

enum class ProtocolKind { TOD, RoundRobin, ResetAll };

/// Contiguous partition of the error vector into network nodes.
struct NodePartition {
    std::vector<Eigen::Index> node_sizes;

    Eigen::Index node_count() const { return static_cast<Eigen::Index>(node_sizes.size()); }
    Eigen::Index total_dim() const;
    Eigen::Index node_offset(Eigen::Index node) const;

    static NodePartition scalar_nodes(Eigen::Index count);
    void validate() const;
};

struct ProtocolSpec {
    ProtocolKind kind = ProtocolKind::ResetAll;
    NodePartition partition;

    void validate() const;
};

struct ProtocolConstants {
    double lambda = 0.0;      // contraction factor in [0,1)
    double a_w_lower = 1.0;   // lower sandwich slope
    double a_w_upper = 1.0;   // upper sandwich slope
};

namespace protocols {

/// Error vector after the transmission counted by kappa.
/// TOD zeroes the node of largest Euclidean norm (ties to the lowest
/// index), RoundRobin zeroes node (kappa mod l), ResetAll zeroes all.
Vector protocol_jump(const ProtocolSpec& p, std::uint64_t kappa, const Vector& e);

/// Protocol Lyapunov function W(kappa, e).
/// TOD/ResetAll: |e|. RoundRobin: sqrt(sum_i w_i(kappa) |e_i|^2) with
/// integer node weights w_i(kappa) = 1 + ((i - kappa) mod l); the node
/// about to be served carries weight 1, so zeroing it and shifting kappa
/// drops every surviving weight by one.
double protocol_lyapunov(const ProtocolSpec& p, std::uint64_t kappa, const Vector& e);

/// (lambda, a_W lower, a_W upper) certifying the contraction and
/// sandwich bounds of W for the given protocol.
ProtocolConstants protocol_constants(const ProtocolSpec& p);

}  // namespace protocols
}  // namespace spncs
