#pragma once

// Residual networks as forward Euler on characteristics x' = F(x), and
// backpropagation as the matching reverse Euler sweep of the co-state
// p' = -(dF/dx)^T p. The discrete recurrences are exact chain rules.

#include "hopfcole/core.hpp"

#include <string>
#include <vector>

namespace hopfcole::characteristics {

/// Closed family of autonomous drifts with analytic Jacobians.
class Drift {
public:
    enum class Kind { zero, linear, tanh_layer, quadratic };

    static Drift zero(Eigen::Index d);
    /// F(x) = A x
    static Drift linear(Matrix a);
    /// F(x) = W tanh(V x); W is d x m, V is m x d.
    static Drift tanh_layer(Matrix w, Matrix v);
    /// F_i(x) = (A x)_i + x^T B_i x / 2 with each B_i symmetric.
    static Drift quadratic(Matrix a, std::vector<Matrix> b);

    Kind kind() const { return kind_; }
    std::string name() const;
    Eigen::Index dim() const { return d_; }

    Vector operator()(const Vector& x) const;
    Matrix jacobian(const Vector& x) const;

private:
    Drift(Kind kind, Eigen::Index d) : kind_(kind), d_(d) {}

    Kind kind_;
    Eigen::Index d_;
    Matrix a_;
    Matrix w_;
    Matrix v_;
    std::vector<Matrix> b_;
};

struct Trajectory {
    std::vector<Vector> states; ///< x_0 .. x_L
    double h;
    int layers;
    double total_time;          ///< h * L
    Drift drift;
};

/// x_{l+1} = x_l + h F(x_l), L times.
Trajectory resnet_forward(const Drift& f, const Vector& x0, double h, int layers);

struct CostateTrajectory {
    std::vector<Vector> costates; ///< p_0 .. p_L
    Vector terminal_grad;
};

/// p_L = terminal_grad, p_{l-1} = p_l + h J(x_{l-1})^T p_l.
CostateTrajectory costate_backward(const Trajectory& traj, const Vector& terminal_grad);

/// H_l = p_l . F(x_l)
std::vector<double> hamiltonian_trace(const Trajectory& traj, const CostateTrajectory& costates);

/// max_l |H_l - H_0|
double hamiltonian_variation(const std::vector<double>& trace);

/// d loss / d g_j = -pi_j(x) loss'. Requires a network built from a SupportSet.
Vector feedforward_adjoint(const core::HJNetwork& net, const Vector& x, double loss_grad);

} // namespace hopfcole::characteristics
