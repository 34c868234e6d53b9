#pragma once

// Gaussian-process regression over 2-D positions with a squared-exponential
// kernel k(a, b) = sf^2 exp(-|a - b|^2 / (2 l^2)) and i.i.d. noise sn^2.
// The prior mean is a constant `mean` (0 unless the caller centres).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <functional>
#include <iostream>
#include <map>
#include <vector>

#include "auf/core.hpp"

namespace auf {

struct GpHyper {
    double sigma_f = 6.0;       // dB
    double length_scale = 2.0;  // m
    double sigma_n = 3.0;       // dB

    bool operator==(const GpHyper&) const = default;
};

inline constexpr GpHyper kDefaultHyper{};

inline double se_kernel(Vec2 a, Vec2 b, const GpHyper& h) {
    const Vec2 d = a - b;
    return h.sigma_f * h.sigma_f * std::exp(-d.dot(d) / (2.0 * h.length_scale * h.length_scale));
}

inline Eigen::MatrixXd kernel_matrix(const std::vector<Vec2>& a, const std::vector<Vec2>& b, const GpHyper& h) {
    Eigen::MatrixXd K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = se_kernel(a[i], b[j], h);
    return K;
}

/// Hook for Cholesky jitter events; defaults to a line on std::clog.
inline std::function<void(double jitter, std::size_t n)>& gp_jitter_logger() {
    static std::function<void(double, std::size_t)> log = [](double jitter, std::size_t n) {
        std::clog << "gp: added jitter " << jitter << " to a " << n << "x" << n << " kernel matrix\n";
    };
    return log;
}

struct GpModel {
    GpHyper hyper;
    double mean = 0.0;
    std::vector<Vec2> train_x;
    Eigen::VectorXd train_y;
    Eigen::LLT<Eigen::MatrixXd> factor;  // of K(X, X) + sn^2 I (+ jitter)
    Eigen::VectorXd alpha;               // (K + sn^2 I)^-1 (y - mean)
    double jitter = 0.0;

    [[nodiscard]] std::size_t size() const { return train_x.size(); }
};

/// Factorize with escalating diagonal jitter if K + sn^2 I is not numerically
/// positive definite. Every jitter event goes through gp_jitter_logger().
inline GpModel gp_fit(const std::vector<Vec2>& x, const std::vector<double>& y, const GpHyper& hyper,
                      double mean = 0.0) {
    if (x.size() != y.size()) throw Error("gp_fit: size mismatch");
    if (x.empty()) throw Error("gp_fit: no training data");
    if (!(hyper.sigma_f > 0 && hyper.length_scale > 0 && hyper.sigma_n > 0))
        throw ConfigError("GP hyperparameters must be > 0");
    GpModel m;
    m.hyper = hyper;
    m.mean = mean;
    m.train_x = x;
    m.train_y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::MatrixXd K = kernel_matrix(x, x, hyper);
    K.diagonal().array() += hyper.sigma_n * hyper.sigma_n;
    m.factor.compute(K);
    double jitter = 1e-10 * K.diagonal().mean();
    while (m.factor.info() != Eigen::Success) {
        Eigen::MatrixXd Kj = K;
        Kj.diagonal().array() += jitter;
        m.factor.compute(Kj);
        m.jitter = jitter;
        gp_jitter_logger()(jitter, x.size());
        jitter *= 10.0;
        if (jitter > K.diagonal().mean()) throw Error("gp_fit: kernel matrix not positive definite");
    }
    m.alpha = m.factor.solve((m.train_y.array() - mean).matrix());
    return m;
}

struct GpPrediction {
    std::vector<double> mean;
    std::vector<double> var;  // predictive variance of an observation (includes sn^2)
};

inline GpPrediction gp_predict(const GpModel& m, const std::vector<Vec2>& x_star) {
    GpPrediction out;
    if (x_star.empty()) return out;
    const Eigen::MatrixXd Ks = kernel_matrix(x_star, m.train_x, m.hyper);
    const Eigen::VectorXd mu = (Ks * m.alpha).array() + m.mean;
    const Eigen::MatrixXd v = m.factor.matrixL().solve(Ks.transpose());
    const double prior = m.hyper.sigma_f * m.hyper.sigma_f + m.hyper.sigma_n * m.hyper.sigma_n;
    const double floor = 1e-12 * prior;
    out.mean.resize(x_star.size());
    out.var.resize(x_star.size());
    for (std::size_t i = 0; i < x_star.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.mean[i] = mu(ii);
        out.var[i] = std::max(prior - v.col(ii).squaredNorm(), floor);
    }
    return out;
}

inline double log_marginal_likelihood(const GpModel& m) {
    const double n = static_cast<double>(m.size());
    const Eigen::VectorXd yc = m.train_y.array() - m.mean;
    const double logdet = 2.0 * m.factor.matrixLLT().diagonal().array().log().sum();
    return -0.5 * yc.dot(m.alpha) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

inline double log_marginal_likelihood(const std::vector<Vec2>& x, const std::vector<double>& y, const GpHyper& h,
                                      double mean = 0.0) {
    return log_marginal_likelihood(gp_fit(x, y, h, mean));
}

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

struct HyperSearch {
    double sigma_f_min = 2.0, sigma_f_max = 12.0;
    double length_min = 0.8, length_max = 8.0;
    double sigma_n_min = 0.3, sigma_n_max = 6.0;
    int grid_points = 4;          // per parameter, log-spaced
    double refine_min_step = 0.02;  // natural-log units
    std::size_t max_points = 80;  // larger sets are subsampled (evenly by index)
    std::size_t min_points = 5;   // below this the defaults are returned
};

struct HyperFit {
    GpHyper hyper = kDefaultHyper;
    double lml = -std::numeric_limits<double>::infinity();
    bool defaulted = false;
    std::vector<std::pair<GpHyper, double>> grid;  // every grid point and its LML
};

namespace detail {

/// LML for all (sf, sn) at a fixed length scale via one eigen-decomposition
/// of the unit-amplitude kernel: K = Q (sf^2 L + sn^2) Q'.
class LmlAtLength {
public:
    LmlAtLength(const std::vector<Vec2>& x, const Eigen::VectorXd& yc, double length) {
        GpHyper unit{1.0, length, 1.0};
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel_matrix(x, x, unit));
        lambda_ = es.eigenvalues().cwiseMax(0.0);
        proj2_ = (es.eigenvectors().transpose() * yc).array().square();
    }

    [[nodiscard]] double operator()(double sf, double sn) const {
        const Eigen::ArrayXd d = sf * sf * lambda_.array() + sn * sn;
        const double n = static_cast<double>(d.size());
        return -0.5 * (proj2_.array() / d).sum() - 0.5 * d.log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

private:
    Eigen::VectorXd lambda_;
    Eigen::VectorXd proj2_;
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i)
        g.push_back(n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
    return g;
}

}  // namespace detail

/// Maximize the log marginal likelihood over a log-spaced grid, then refine
/// by coordinate search in log space inside the grid bounds. The result is
/// never worse than the best grid point.
inline HyperFit fit_hyperparameters(const std::vector<Vec2>& x, const std::vector<double>& y, double mean = 0.0,
                                    const HyperSearch& s = {}) {
    HyperFit fit;
    if (x.size() < s.min_points) {
        fit.defaulted = true;
        return fit;
    }
    std::vector<Vec2> xs;
    std::vector<double> ys;
    if (x.size() > s.max_points) {
        for (std::size_t k = 0; k < s.max_points; ++k) {
            const std::size_t i = k * x.size() / s.max_points;
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    } else {
        xs = x;
        ys = y;
    }
    Eigen::VectorXd yc(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < ys.size(); ++i) yc(static_cast<Eigen::Index>(i)) = ys[i] - mean;

    std::map<double, detail::LmlAtLength> cache;
    auto eval = [&](double sf, double l, double sn) {
        auto it = cache.find(l);
        if (it == cache.end()) it = cache.emplace(l, detail::LmlAtLength(xs, yc, l)).first;
        return it->second(sf, sn);
    };

    for (double l : detail::log_grid(s.length_min, s.length_max, s.grid_points))
        for (double sf : detail::log_grid(s.sigma_f_min, s.sigma_f_max, s.grid_points))
            for (double sn : detail::log_grid(s.sigma_n_min, s.sigma_n_max, s.grid_points)) {
                const double v = eval(sf, l, sn);
                fit.grid.push_back({{sf, l, sn}, v});
                if (v > fit.lml) {
                    fit.lml = v;
                    fit.hyper = {sf, l, sn};
                }
            }

    // Coordinate refinement in log space.
    const double lo[3] = {std::log(s.sigma_f_min), std::log(s.length_min), std::log(s.sigma_n_min)};
    const double hi[3] = {std::log(s.sigma_f_max), std::log(s.length_max), std::log(s.sigma_n_max)};
    double p[3] = {std::log(fit.hyper.sigma_f), std::log(fit.hyper.length_scale), std::log(fit.hyper.sigma_n)};
    double step = s.grid_points > 1 ? 0.5 * (hi[1] - lo[1]) / (s.grid_points - 1) : 0.5;
    bool refined = false;
    while (step >= s.refine_min_step) {
        bool moved = false;
        for (int k = 0; k < 3; ++k)
            for (double dir : {1.0, -1.0}) {
                double q[3] = {p[0], p[1], p[2]};
                q[k] = std::clamp(p[k] + dir * step, lo[k], hi[k]);
                if (q[k] == p[k]) continue;
                const double v = eval(std::exp(q[0]), std::exp(q[1]), std::exp(q[2]));
                if (v > fit.lml) {
                    fit.lml = v;
                    std::copy(q, q + 3, p);
                    moved = refined = true;
                    break;
                }
            }
        if (!moved) step *= 0.5;
    }
    if (refined) fit.hyper = {std::exp(p[0]), std::exp(p[1]), std::exp(p[2])};
    return fit;
}

}  // namespace auf
