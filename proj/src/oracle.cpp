#include "bffg/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bffg/errors.hpp"

namespace bffg {

EnumerationResult enumerate_likelihood(const TreeModel& model, std::size_t max_configurations)
{
    if (!model.all_finite())
        throw UnsupportedError("enumeration: non-finite kernels present");
    const auto& vertices = model.vertices();
    const std::size_t n = vertices.size();
    std::size_t total = 1;
    for (const Vertex& v : vertices) {
        if (total > max_configurations / v.dim)
            throw ValidationError("enumeration: more than " + std::to_string(max_configurations) +
                                  " latent configurations");
        total *= v.dim;
    }

    EnumerationResult out;
    out.configurations = total;
    out.marginals.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.marginals[i] = Vector::Zero(static_cast<Eigen::Index>(vertices[i].dim));
    const Vector& prior = std::get<FinitePrior>(model.prior()).weights;

    std::vector<std::size_t> state(n, 0);
    for (std::size_t count = 0; count < total; ++count) {
        double p = prior(static_cast<Eigen::Index>(state[model.root()]));
        for (const Edge& e : model.edges()) {
            if (p == 0.0)
                break;
            p *= std::get<FiniteKernel>(e.kernel).matrix()(static_cast<Eigen::Index>(state[e.parent]),
                                                           static_cast<Eigen::Index>(state[e.child]));
        }
        for (const Observation& o : model.observations()) {
            if (p == 0.0)
                break;
            p *= std::get<FiniteObservation>(o.kernel).lambda()(static_cast<Eigen::Index>(state[o.vertex]),
                                                                static_cast<Eigen::Index>(std::get<std::size_t>(o.value)));
        }
        out.likelihood += p;
        for (std::size_t i = 0; i < n; ++i)
            out.marginals[i](static_cast<Eigen::Index>(state[i])) += p;

        for (std::size_t i = 0; i < n; ++i) {
            if (++state[i] < vertices[i].dim)
                break;
            state[i] = 0;
        }
    }
    if (out.likelihood > 0.0) {
        for (Vector& m : out.marginals)
            m /= out.likelihood;
    }
    return out;
}

KernelDensity1d linear_gaussian_density_1d(double B, double beta, double gamma)
{
    if (!(gamma > 0.0))
        throw ValidationError("linear Gaussian density: variance must be positive");
    const double sd = std::sqrt(gamma);
    KernelDensity1d k;
    k.mean = [B, beta](double x) { return B * x + beta; };
    k.density = [B, beta, gamma](double x, double y) {
        const double r = y - B * x - beta;
        return std::exp(-0.5 * r * r / gamma) / std::sqrt(2.0 * M_PI * gamma);
    };
    k.sigma = sd;
    return k;
}

namespace {

struct Simpson {
    const std::function<double(double)>& f;
    int depth_exceeded = 0;

    double run(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth)
    {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (std::abs(delta) <= 15.0 * tol)
            return left + right + delta / 15.0;
        if (depth <= 0) {
            ++depth_exceeded;
            return left + right + delta / 15.0;
        }
        return run(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + run(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol)
{
    // Start from several panels so narrow peaks are not missed.
    constexpr int panels = 64;
    const double width = (b - a) / panels;
    Simpson s{f};
    double sum = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + i * width;
        const double hi = lo + width;
        const double fa = f(lo);
        const double fb = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = width / 6.0 * (fa + 4.0 * fm + fb);
        sum += s.run(lo, hi, fa, fm, fb, whole, tol / panels, 40);
    }
    if (s.depth_exceeded > 0 || !std::isfinite(sum))
        throw NumericalError("quadrature: adaptive Simpson did not converge");
    return sum;
}

} // namespace

std::vector<double> quadrature_pullback_1d(const KernelDensity1d& kernel, const std::function<double(double)>& h,
                                           const std::vector<double>& xs, double tolerance)
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) {
        const double centre = kernel.mean(x);
        const std::function<double(double)> integrand = [&](double y) { return kernel.density(x, y) * h(y); };
        out.push_back(adaptive_simpson(integrand, centre - 10.0 * kernel.sigma, centre + 10.0 * kernel.sigma,
                                       tolerance));
    }
    return out;
}

double generator_fd(const std::function<double(const Vector&)>& g, const GeneratorCoefficients& c, const Vector& x,
                    double step)
{
    if (!(step > 0.0))
        throw ValidationError("generator_fd: step must be positive");
    const auto d = x.size();
    const double g0 = g(x);
    Vector grad(d);
    Matrix hess(d, d);
    Vector xp = x;
    for (Eigen::Index i = 0; i < d; ++i) {
        xp(i) = x(i) + step;
        const double gp = g(xp);
        xp(i) = x(i) - step;
        const double gm = g(xp);
        xp(i) = x(i);
        grad(i) = (gp - gm) / (2.0 * step);
        hess(i, i) = (gp - 2.0 * g0 + gm) / (step * step);
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            double acc = 0.0;
            for (int si : {1, -1}) {
                for (int sj : {1, -1}) {
                    xp(i) = x(i) + si * step;
                    xp(j) = x(j) + sj * step;
                    acc += si * sj * g(xp);
                }
            }
            xp(i) = x(i);
            xp(j) = x(j);
            hess(i, j) = hess(j, i) = acc / (4.0 * step * step);
        }
    }
    const Matrix D = c.a - c.a_tilde;
    return ((c.b - c.b_tilde).dot(grad) + 0.5 * D.cwiseProduct(hess).sum()) / g0;
}

} // namespace bffg
