#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace hopfcole {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for every contract violation on public entry points.
class Error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw Error(what);
}

/// eps * log(sum_j exp(z_j / eps)), stabilized by subtracting max_j z_j.
double log_sum_exp(std::span<const double> z, double eps);

inline double log_sum_exp(const Vector& z, double eps)
{
    return log_sum_exp(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), eps);
}

/// softmax(z / eps), max-shifted.
Vector softmax(const Vector& z, double eps);

/// eps * log(1 + exp(u / eps)) without overflow for large |u| / eps.
double softplus(double u, double eps);

/// Index of the largest entry; ties resolve to the lowest index.
Eigen::Index argmax(const Vector& v);

/// Index of the smallest entry; ties resolve to the lowest index.
Eigen::Index argmin(const Vector& v);

/// Counter-based generator: the k-th draw for a given seed is a pure function
/// of (seed, k), so any stream can be replayed or split without shared state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// Vector of i.i.d. standard normal draws.
Vector normal_vector(CounterRng& rng, Eigen::Index n);

/// Matrix of i.i.d. standard normal draws.
Matrix normal_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols);

/// Unit vector with uniformly distributed direction.
Vector random_direction(CounterRng& rng, Eigen::Index n);

} // namespace hopfcole
