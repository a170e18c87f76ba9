#include "hopfcole/characteristics.hpp"

#include <algorithm>
#include <cmath>

namespace hopfcole::characteristics {

Drift Drift::zero(Eigen::Index d)
{
    require(d >= 1, "Drift: d must be positive");
    return Drift(Kind::zero, d);
}

Drift Drift::linear(Matrix a)
{
    require(a.rows() == a.cols() && a.rows() >= 1, "Drift::linear: A must be square");
    Drift f(Kind::linear, a.rows());
    f.a_ = std::move(a);
    return f;
}

Drift Drift::tanh_layer(Matrix w, Matrix v)
{
    require(w.cols() == v.rows() && w.rows() == v.cols() && w.rows() >= 1, "Drift::tanh_layer: shapes d x m and m x d");
    Drift f(Kind::tanh_layer, w.rows());
    f.w_ = std::move(w);
    f.v_ = std::move(v);
    return f;
}

Drift Drift::quadratic(Matrix a, std::vector<Matrix> b)
{
    require(a.rows() == a.cols() && a.rows() >= 1, "Drift::quadratic: A must be square");
    require(static_cast<Eigen::Index>(b.size()) == a.rows(), "Drift::quadratic: one B_i per coordinate");
    for (auto& bi : b) {
        require(bi.rows() == a.rows() && bi.cols() == a.rows(), "Drift::quadratic: B_i must be d x d");
        bi = 0.5 * (bi + bi.transpose()).eval();
    }
    Drift f(Kind::quadratic, a.rows());
    f.a_ = std::move(a);
    f.b_ = std::move(b);
    return f;
}

std::string Drift::name() const
{
    switch (kind_) {
    case Kind::zero: return "zero";
    case Kind::linear: return "linear";
    case Kind::tanh_layer: return "tanh";
    case Kind::quadratic: return "quadratic";
    }
    return "unknown";
}

Vector Drift::operator()(const Vector& x) const
{
    require(x.size() == d_, "Drift: dimension mismatch");
    switch (kind_) {
    case Kind::zero: return Vector::Zero(d_);
    case Kind::linear: return a_ * x;
    case Kind::tanh_layer: return w_ * (v_ * x).array().tanh().matrix();
    case Kind::quadratic: {
        Vector out = a_ * x;
        for (Eigen::Index i = 0; i < d_; ++i) out[i] += 0.5 * x.dot(b_[static_cast<std::size_t>(i)] * x);
        return out;
    }
    }
    return Vector::Zero(d_);
}

Matrix Drift::jacobian(const Vector& x) const
{
    require(x.size() == d_, "Drift: dimension mismatch");
    switch (kind_) {
    case Kind::zero: return Matrix::Zero(d_, d_);
    case Kind::linear: return a_;
    case Kind::tanh_layer: {
        const Vector s = (v_ * x).array().tanh();
        return w_ * (1.0 - s.array().square()).matrix().asDiagonal() * v_;
    }
    case Kind::quadratic: {
        Matrix j = a_;
        for (Eigen::Index i = 0; i < d_; ++i) j.row(i) += (b_[static_cast<std::size_t>(i)] * x).transpose();
        return j;
    }
    }
    return Matrix::Zero(d_, d_);
}

Trajectory resnet_forward(const Drift& f, const Vector& x0, double h, int layers)
{
    require(h > 0.0, "resnet_forward: h must be positive");
    require(layers >= 0, "resnet_forward: L must be nonnegative");
    require(x0.size() == f.dim(), "resnet_forward: x0 dimension mismatch");
    Trajectory traj{{x0}, h, layers, h * layers, f};
    traj.states.reserve(static_cast<std::size_t>(layers) + 1);
    for (int l = 0; l < layers; ++l) {
        const Vector& x = traj.states.back();
        Vector next = x + h * f(x);
        require(next.allFinite(), "resnet_forward: non-finite state at layer " + std::to_string(l + 1));
        traj.states.push_back(std::move(next));
    }
    return traj;
}

CostateTrajectory costate_backward(const Trajectory& traj, const Vector& terminal_grad)
{
    require(terminal_grad.size() == traj.drift.dim(), "costate_backward: gradient dimension mismatch");
    const auto n = traj.states.size();
    CostateTrajectory c{std::vector<Vector>(n), terminal_grad};
    c.costates[n - 1] = terminal_grad;
    for (std::size_t l = n - 1; l > 0; --l) {
        const Vector& p = c.costates[l];
        c.costates[l - 1] = p + traj.h * traj.drift.jacobian(traj.states[l - 1]).transpose() * p;
    }
    return c;
}

std::vector<double> hamiltonian_trace(const Trajectory& traj, const CostateTrajectory& costates)
{
    require(costates.costates.size() == traj.states.size(), "hamiltonian_trace: length mismatch");
    std::vector<double> out;
    for (std::size_t l = 0; l < traj.states.size(); ++l)
        out.push_back(costates.costates[l].dot(traj.drift(traj.states[l])));
    return out;
}

double hamiltonian_variation(const std::vector<double>& trace)
{
    double worst = 0.0;
    for (double v : trace) worst = std::max(worst, std::abs(v - trace.front()));
    return worst;
}

Vector feedforward_adjoint(const core::HJNetwork& net, const Vector& x, double loss_grad)
{
    require(net.provenance() != nullptr, "feedforward_adjoint: network has no support provenance");
    return -loss_grad * softmax(net.logits(x), net.eps());
}

} // namespace hopfcole::characteristics
