#include "hopfcole/common.hpp"

#include <algorithm>
#include <numbers>

namespace hopfcole {

double log_sum_exp(std::span<const double> z, double eps)
{
    require(!z.empty(), "log_sum_exp: empty input");
    require(eps > 0.0, "log_sum_exp: eps must be positive");
    const double m = *std::max_element(z.begin(), z.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : z) s += std::exp((v - m) / eps);
    return m + eps * std::log(s);
}

Vector softmax(const Vector& z, double eps)
{
    require(z.size() > 0, "softmax: empty input");
    require(eps > 0.0, "softmax: eps must be positive");
    const double m = z.maxCoeff();
    Vector p = ((z.array() - m) / eps).exp().matrix();
    p /= p.sum();
    return p;
}

double softplus(double u, double eps)
{
    const double r = u / eps;
    if (r > 0.0) return u + eps * std::log1p(std::exp(-r));
    return eps * std::log1p(std::exp(r));
}

Eigen::Index argmax(const Vector& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Eigen::Index argmin(const Vector& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t CounterRng::next_u64()
{
    return mix(mix(seed_) ^ (counter_++ * 0xd1b54a32d192ed03ULL));
}

double CounterRng::uniform()
{
    // 53 random bits, shifted off zero
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal()
{
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector normal_vector(CounterRng& rng, Eigen::Index n)
{
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

Matrix normal_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

Vector random_direction(CounterRng& rng, Eigen::Index n)
{
    Vector v = normal_vector(rng, n);
    const double nv = v.norm();
    if (nv == 0.0) {
        v.setZero();
        v[0] = 1.0;
        return v;
    }
    return v / nv;
}

} // namespace hopfcole
