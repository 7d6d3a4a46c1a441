#include "spncs/protocols.hpp"

#include <cmath>
#include <numeric>

namespace spncs {

Eigen::Index NodePartition::total_dim() const {
    return std::accumulate(node_sizes.begin(), node_sizes.end(), Eigen::Index{0});
}

Eigen::Index NodePartition::node_offset(Eigen::Index node) const {
    Eigen::Index off = 0;
    for (Eigen::Index i = 0; i < node; ++i) off += node_sizes[i];
    return off;
}

NodePartition NodePartition::scalar_nodes(Eigen::Index count) {
    NodePartition p;
    p.node_sizes.assign(static_cast<std::size_t>(count), 1);
    return p;
}

void NodePartition::validate() const {
    if (node_sizes.empty()) {
        throw DimensionError("partition: at least one node required");
    }
    for (const auto s : node_sizes) {
        if (s <= 0) throw DimensionError("partition: node sizes must be positive");
    }
}

void ProtocolSpec::validate() const {
    partition.validate();
}

namespace protocols {
namespace {

void check_dims(const ProtocolSpec& p, const Vector& e) {
    p.validate();
    if (e.size() != p.partition.total_dim()) {
        throw DimensionError("protocol: error vector dimension does not match partition");
    }
}

Eigen::Index served_node(const ProtocolSpec& p, std::uint64_t kappa, const Vector& e) {
    const auto l = p.partition.node_count();
    if (p.kind == ProtocolKind::RoundRobin) {
        return static_cast<Eigen::Index>(kappa % static_cast<std::uint64_t>(l));
    }
    // TOD: node of largest Euclidean norm, lowest index on ties.
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < l; ++i) {
        const double n = e.segment(p.partition.node_offset(i), p.partition.node_sizes[i]).norm();
        if (n > best_norm) {
            best_norm = n;
            best = i;
        }
    }
    return best;
}

}  // namespace

Vector protocol_jump(const ProtocolSpec& p, std::uint64_t kappa, const Vector& e) {
    check_dims(p, e);
    if (p.kind == ProtocolKind::ResetAll) {
        return Vector::Zero(e.size());
    }
    Vector out = e;
    const Eigen::Index node = served_node(p, kappa, e);
    out.segment(p.partition.node_offset(node), p.partition.node_sizes[node]).setZero();
    return out;
}

double protocol_lyapunov(const ProtocolSpec& p, std::uint64_t kappa, const Vector& e) {
    check_dims(p, e);
    if (p.kind != ProtocolKind::RoundRobin) {
        return e.norm();
    }
    const auto l = static_cast<std::uint64_t>(p.partition.node_count());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.partition.node_count(); ++i) {
        const std::uint64_t ahead = (static_cast<std::uint64_t>(i) + l - kappa % l) % l;
        const double w = 1.0 + static_cast<double>(ahead);
        sum += w * e.segment(p.partition.node_offset(i), p.partition.node_sizes[i]).squaredNorm();
    }
    return std::sqrt(sum);
}

ProtocolConstants protocol_constants(const ProtocolSpec& p) {
    p.validate();
    const double l = static_cast<double>(p.partition.node_count());
    ProtocolConstants c;
    switch (p.kind) {
        case ProtocolKind::ResetAll:
            c = {0.0, 1.0, 1.0};
            break;
        case ProtocolKind::TOD:
            c = {std::sqrt((l - 1.0) / l), 1.0, 1.0};
            break;
        case ProtocolKind::RoundRobin:
            c = {std::sqrt((l - 1.0) / l), 1.0, std::sqrt(l)};
            break;
    }
    return c;
}

}  // namespace protocols
}  // namespace spncs
