#include "eventcorr/truncnorm.hpp"

#include "eventcorr/errors.hpp"

#include <cmath>
#include <limits>

namespace ecc {

double normal_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

// AS241 rational approximations, |error| < 1e-15 over (0,1).
double normal_ppf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DegenerateConditioningError("normal_ppf requires p in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                   1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                   1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                   2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                   7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

TruncatedMoments truncated_normal_moments(double mu, double sigma, double lo, double hi) {
    if (!(sigma > 0.0)) throw DegenerateConditioningError("truncated moments need sigma > 0");
    if (!(lo < hi)) throw DegenerateConditioningError("truncated moments need lo < hi");
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double Fa = std::isinf(a) ? 0.0 : normal_cdf(a);
    const double Fb = std::isinf(b) ? 1.0 : normal_cdf(b);
    const double mass = Fb - Fa;
    if (!(mass > 0.0)) throw DegenerateConditioningError("event has no mass under the normal model");
    const double pa = std::isinf(a) ? 0.0 : normal_pdf(a);
    const double pb = std::isinf(b) ? 0.0 : normal_pdf(b);
    const double apa = std::isinf(a) ? 0.0 : a * pa;
    const double bpb = std::isinf(b) ? 0.0 : b * pb;
    const double r1 = (pa - pb) / mass;
    const double r2 = (apa - bpb) / mass;
    TruncatedMoments out;
    out.mean = mu + sigma * r1;
    out.var = sigma * sigma * (1.0 + r2 - r1 * r1);
    out.mass = mass;
    return out;
}

namespace {

// Nodes/weights for Gauss-Legendre on [-1,1], computed by Newton iteration on
// Legendre polynomials. Order is small and fixed, cost is negligible.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p0 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

} // namespace

TruncatedMoments truncated_normal_moments_quadrature(double mu, double sigma, double lo, double hi,
                                                     int points) {
    // Map infinite bounds to +-12 sigma; the density mass beyond is ~1e-32.
    if (std::isinf(lo)) lo = mu - 12.0 * sigma;
    if (std::isinf(hi)) hi = mu + 12.0 * sigma;
    std::vector<double> x, w;
    gauss_legendre(points, x, w);
    const double c = 0.5 * (hi - lo), d = 0.5 * (hi + lo);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < points; ++i) {
        const double t = c * x[i] + d;
        const double f = normal_pdf((t - mu) / sigma) / sigma * c * w[i];
        m0 += f;
        m1 += t * f;
        m2 += t * t * f;
    }
    TruncatedMoments out;
    out.mass = m0;
    out.mean = m1 / m0;
    out.var = m2 / m0 - out.mean * out.mean;
    return out;
}

namespace {

struct NegLogLik {
    const Eigen::VectorXd& z;
    double lo, hi;

    // Value, gradient, and optionally the exact Hessian in (mu, s = log sigma).
    double operator()(const Eigen::Vector2d& p, Eigen::Vector2d& grad, Eigen::Matrix2d* hess = nullptr) const {
        const double mu = p(0);
        const double sigma = std::exp(p(1));
        const auto n = static_cast<double>(z.size());
        const double a = std::isinf(lo) ? -std::numeric_limits<double>::infinity() : (lo - mu) / sigma;
        const double b = std::isinf(hi) ? std::numeric_limits<double>::infinity() : (hi - mu) / sigma;
        const double Fa = std::isinf(a) ? 0.0 : normal_cdf(a);
        const double Fb = std::isinf(b) ? 1.0 : normal_cdf(b);
        const double mass = Fb - Fa;
        if (!(mass > 1e-300)) {
            grad.setZero();
            if (hess) hess->setIdentity();
            return 1e300;
        }
        const double pa = std::isinf(a) ? 0.0 : normal_pdf(a);
        const double pb = std::isinf(b) ? 0.0 : normal_pdf(b);
        double sum = 0.0, sum2 = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double t = (z(i) - mu) / sigma;
            sum += t;
            sum2 += t * t;
        }
        const double nll = 0.5 * sum2 + n * p(1) + n * std::log(mass);
        // d/dmu: sum(t)/sigma ... careful with truncation terms
        const double apa = std::isinf(a) ? 0.0 : a * pa;
        const double bpb = std::isinf(b) ? 0.0 : b * pb;
        grad(0) = -sum / sigma + n * (pa - pb) / (mass * sigma);
        grad(1) = -sum2 + n + n * (apa - bpb) / mass;
        if (hess) {
            const double a2pa = std::isinf(a) ? 0.0 : a * apa;
            const double b2pb = std::isinf(b) ? 0.0 : b * bpb;
            const double a3pa = std::isinf(a) ? 0.0 : a * a2pa;
            const double b3pb = std::isinf(b) ? 0.0 : b * b2pb;
            const double im = 1.0 / mass;
            const double dm = (pa - pb) * im;      // d(log mass)/d(mu) times sigma
            const double dv = (apa - bpb) * im;    // d(log mass)/d(s)
            (*hess)(0, 0) = n / (sigma * sigma) * (1.0 + dv - dm * dm);
            (*hess)(0, 1) = -grad(0) + (sum + n * (a2pa - b2pb) * im - n * dm * dv) / sigma;
            (*hess)(1, 0) = (*hess)(0, 1);
            (*hess)(1, 1) = 2.0 * sum2 + n * (a3pa - apa - b3pb + bpb) * im - n * dv * dv;
        }
        return nll;
    }
};

} // namespace

TruncatedNormalFit fit_truncated_normal(const Eigen::VectorXd& z, double lo, double hi,
                                        double grad_tol, int max_iter) {
    if (z.size() < 3) throw InsufficientEventSampleError("truncated fit needs at least 3 observations", z.size());
    const double m = z.mean();
    const double sd = std::sqrt((z.array() - m).square().sum() / (static_cast<double>(z.size()) - 1.0));
    if (!(sd > 0.0)) throw DegenerateConditioningError("truncated fit: constant column");

    NegLogLik f{z, lo, hi};
    Eigen::Vector2d p(m, std::log(sd));
    Eigen::Vector2d g;
    Eigen::Matrix2d H;
    double fx = f(p, g, &H);
    int it = 0;
    for (; it < max_iter; ++it) {
        if (g.norm() < grad_tol) break;
        // Newton direction where the curvature is positive definite, steepest
        // descent otherwise; descent is guaranteed before the line search.
        Eigen::Vector2d dir;
        const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
        if (H(0, 0) > 0.0 && det > 0.0) {
            dir(0) = (-H(1, 1) * g(0) + H(0, 1) * g(1)) / det;
            dir(1) = (H(1, 0) * g(0) - H(0, 0) * g(1)) / det;
        } else {
            dir = -g;
        }
        if (dir.dot(g) >= 0.0) dir = -g;
        const double slope = g.dot(dir);
        double step = 1.0;
        Eigen::Vector2d pn, gn;
        Eigen::Matrix2d Hn;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            pn = p + step * dir;
            const double fn = f(pn, gn, &Hn);
            // Near the optimum the objective difference sinks below rounding
            // noise; a strict gradient-norm decrease still certifies progress.
            if (fn <= fx + 1e-4 * step * slope || gn.norm() <= 0.9 * g.norm()) {
                p = pn;
                g = gn;
                H = Hn;
                fx = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    if (g.norm() >= grad_tol)
        throw OptimizationFailureError("truncated normal fit did not converge: gradient norm " +
                                           std::to_string(g.norm()) + " after " + std::to_string(it) +
                                           " iterations",
                                       it, g.norm());
    return TruncatedNormalFit{p(0), std::exp(p(1)), it, g.norm()};
}

} // namespace ecc
