#include "koopctl/tape.hpp"

#include <cmath>
#include <numbers>

#include "koopctl/errors.hpp"

namespace koopctl {

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.idx >= static_cast<int>(nodes_.size()))
        throw UsageError("tape: invalid node handle");
    return nodes_[v.idx];
}

Var Tape::leaf(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::constant(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = false;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a.idx;
    n.b = b.idx;
    n.value = koopctl::matmul(node(a).value, node(b).value);
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::Add;
    n.a = a.idx;
    n.b = b.idx;
    n.value = node(a).value + node(b).value;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.a = a.idx;
    n.b = b.idx;
    n.value = node(a).value - node(b).value;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

Var Tape::neg(Var a) {
    Node n;
    n.op = Op::Neg;
    n.a = a.idx;
    n.value = -node(a).value;
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a.idx;
    n.c0 = c;
    n.value = c * node(a).value;
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a.idx;
    n.value = koopctl::transpose(node(a).value);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Node n;
    n.op = Op::Relu;
    n.a = a.idx;
    n.value = node(a).value;
    for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::hstack(std::span<const Var> parts) {
    if (parts.empty()) throw UsageError("tape hstack: no parts");
    Node n;
    n.op = Op::HStack;
    std::vector<Mat> values;
    values.reserve(parts.size());
    for (Var p : parts) {
        n.extra.push_back(p.idx);
        values.push_back(node(p).value);
        n.requires_grad = n.requires_grad || node(p).requires_grad;
    }
    n.value = koopctl::hstack(values);
    return push(std::move(n));
}

Var Tape::solve(Var a, Var b) {
    auto lu = std::make_shared<LuFactors>(LuFactors::factor(node(a).value));
    Node n;
    n.op = Op::Solve;
    n.a = a.idx;
    n.b = b.idx;
    n.lu = std::move(lu);
    n.value = n.lu->solve(node(b).value);
    check_finite(n.value, "tape solve");
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

Var Tape::trace(Var a) {
    Node n;
    n.op = Op::Trace;
    n.a = a.idx;
    n.value = Mat::scalar(koopctl::trace(node(a).value));
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::sq_norm(Var a) {
    Node n;
    n.op = Op::SqNorm;
    n.a = a.idx;
    n.value = Mat::scalar(koopctl::sq_norm(node(a).value));
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

Var Tape::gaussian_logp(Var mean, double u_raw, double sigma2) {
    if (node(mean).value.size() != 1) throw UsageError("gaussian_logp: mean must be 1x1");
    if (!(sigma2 > 0.0)) throw ConfigError("gaussian_logp: sigma2 must be positive");
    Node n;
    n.op = Op::GaussLogp;
    n.a = mean.idx;
    n.c0 = u_raw;
    n.c1 = sigma2;
    const double diff = u_raw - node(mean).value(0, 0);
    n.value = Mat::scalar(-diff * diff / (2.0 * sigma2) - 0.5 * std::log(2.0 * std::numbers::pi * sigma2));
    n.requires_grad = node(mean).requires_grad;
    return push(std::move(n));
}

Var Tape::weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
    if (terms.size() != weights.size()) throw UsageError("weighted_sum: terms/weights length mismatch");
    Node n;
    n.op = Op::WeightedSum;
    double s = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Node& t = node(terms[i]);
        if (t.value.size() != 1) throw UsageError("weighted_sum: inputs must be 1x1");
        n.extra.push_back(terms[i].idx);
        n.weights.push_back(weights[i]);
        n.requires_grad = n.requires_grad || t.requires_grad;
        s += weights[i] * t.value(0, 0);
    }
    n.value = Mat::scalar(s);
    return push(std::move(n));
}

const Mat& Tape::value(Var v) const { return node(v).value; }

const Mat& Tape::grad(Var v) const {
    const Node& n = node(v);
    return n.adjoint.empty() ? empty_ : n.adjoint;
}

void Tape::accumulate(int idx, const Mat& contribution) {
    Node& n = nodes_[idx];
    if (!n.requires_grad) return;
    if (n.adjoint.empty())
        n.adjoint = contribution;
    else
        n.adjoint = n.adjoint + contribution;
}

void Tape::backward(Var output) {
    const Node& out = node(output);
    if (out.value.rows() != 1 || out.value.cols() != 1)
        throw UsageError("backward: output node is not scalar");
    for (Node& n : nodes_) n.adjoint = Mat();
    nodes_[output.idx].adjoint = Mat::scalar(1.0);
    for (int i = output.idx; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.adjoint.empty() || !n.requires_grad) continue;
        const Mat& g = n.adjoint;
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatMul:
            accumulate(n.a, koopctl::matmul(g, koopctl::transpose(nodes_[n.b].value)));
            accumulate(n.b, koopctl::matmul(koopctl::transpose(nodes_[n.a].value), g));
            break;
        case Op::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case Op::Sub:
            accumulate(n.a, g);
            accumulate(n.b, -g);
            break;
        case Op::Neg:
            accumulate(n.a, -g);
            break;
        case Op::Scale:
            accumulate(n.a, n.c0 * g);
            break;
        case Op::Transpose:
            accumulate(n.a, koopctl::transpose(g));
            break;
        case Op::Relu: {
            Mat gated = g;
            const Mat& x = nodes_[n.a].value;
            for (int k = 0; k < gated.size(); ++k)
                if (!(x.data()[k] > 0.0)) gated.data()[k] = 0.0;
            accumulate(n.a, gated);
            break;
        }
        case Op::HStack: {
            int off = 0;
            for (int src : n.extra) {
                const Mat& part = nodes_[src].value;
                Mat slice(part.rows(), part.cols());
                for (int r = 0; r < part.rows(); ++r)
                    for (int c = 0; c < part.cols(); ++c) slice(r, c) = g(r, off + c);
                accumulate(src, slice);
                off += part.cols();
            }
            break;
        }
        case Op::Solve: {
            // X = A^{-1} B:  B_bar = A^{-T} G,  A_bar = -B_bar X^T
            const Mat w = n.lu->solve_transposed(g);
            accumulate(n.b, w);
            accumulate(n.a, -koopctl::matmul(w, koopctl::transpose(n.value)));
            break;
        }
        case Op::Trace: {
            const Mat& x = nodes_[n.a].value;
            accumulate(n.a, g(0, 0) * Mat::identity(x.rows()));
            break;
        }
        case Op::SqNorm:
            accumulate(n.a, 2.0 * g(0, 0) * nodes_[n.a].value);
            break;
        case Op::GaussLogp: {
            const double mean = nodes_[n.a].value(0, 0);
            accumulate(n.a, Mat::scalar(g(0, 0) * (n.c0 - mean) / n.c1));
            break;
        }
        case Op::WeightedSum:
            for (std::size_t k = 0; k < n.extra.size(); ++k)
                accumulate(n.extra[k], Mat::scalar(g(0, 0) * n.weights[k]));
            break;
        }
    }
}

void Tape::reset() { nodes_.clear(); }

} // namespace koopctl
