#pragma once

#include <memory>
#include <span>
#include <vector>

#include "koopctl/linalg.hpp"
#include "koopctl/mat.hpp"

namespace koopctl {

// Handle to a node on a Tape. Only valid for the tape that created it and
// until the next reset().
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Reverse-mode differentiation tape over matrix-level primitives. Nodes are
// recorded eagerly in topological order; backward() walks them once in
// reverse. Single-threaded by design; parallel rollouts own private tapes.
class Tape {
public:
    enum class Op {
        Leaf,
        MatMul,
        Add,
        Sub,
        Neg,
        Scale,
        Transpose,
        Relu,
        HStack,
        Solve,
        Trace,
        SqNorm,
        GaussLogp,
        WeightedSum,
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf with gradient tracking (a trainable parameter or input).
    Var leaf(Mat value);
    // Leaf without gradient tracking (data, fixed coefficients).
    Var constant(Mat value);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var neg(Var a);
    Var scale(Var a, double c);
    Var transpose(Var a);
    Var relu(Var a); // subgradient at 0 is 0
    Var hstack(std::span<const Var> parts);
    Var solve(Var a, Var b); // throws SingularMatrixError before recording
    Var trace(Var a);
    Var sq_norm(Var a); // 1x1 sum of squares

    // Log-density of N(mean, sigma2) at the fixed sample u_raw; mean is a 1x1
    // node. Gradient flows into the mean only.
    Var gaussian_logp(Var mean, double u_raw, double sigma2);

    // Weighted sum of 1x1 nodes; the surrogate objective aggregator.
    Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

    const Mat& value(Var v) const;
    // Gradient of the last backward() output with respect to v. Empty Mat if
    // the node was never reached.
    const Mat& grad(Var v) const;

    // Reverse pass from a scalar (1x1) output node.
    void backward(Var output);

    std::size_t size() const { return nodes_.size(); }
    void reset();

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        std::vector<int> extra; // HStack / WeightedSum inputs
        Mat value;
        Mat adjoint;
        bool requires_grad = false;
        double c0 = 0.0; // Scale factor / GaussLogp u_raw
        double c1 = 0.0; // GaussLogp sigma2
        std::vector<double> weights;
        std::shared_ptr<LuFactors> lu;
    };

    Var push(Node node);
    const Node& node(Var v) const;
    void accumulate(int idx, const Mat& contribution);

    std::vector<Node> nodes_;
    Mat empty_;
};

} // namespace koopctl
