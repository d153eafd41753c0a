#include "dlab/error.hpp"
#include "dlab/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace dlab {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// continuous extension
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, const IntegratorOptions& o) {
    if (o.norm_scaled) {
        const double sk = o.atol + o.rtol * std::max(y0.lpNorm<Eigen::Infinity>(), y1.lpNorm<Eigen::Infinity>());
        return err.lpNorm<Eigen::Infinity>() / sk;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sk = o.atol + o.rtol * std::max(std::fabs(y0(i)), std::fabs(y1(i)));
        const double r = err(i) / sk;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(err.size()));
}

double rms_scaled(const Vec& v, const Vec& y, const IntegratorOptions& o) {
    if (o.norm_scaled) return v.lpNorm<Eigen::Infinity>() / (o.atol + o.rtol * y.lpNorm<Eigen::Infinity>());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double sk = o.atol + o.rtol * std::fabs(y(i));
        sum += (v(i) / sk) * (v(i) / sk);
    }
    return std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

Vec Trajectory::at(double t) const {
    const double lo = std::min(t0(), t1());
    const double hi = std::max(t0(), t1());
    const double slack = 1e-12 * std::max(1.0, std::max(std::fabs(lo), std::fabs(hi)));
    if (t < lo - slack || t > hi + slack) {
        throw Error(ErrorKind::DomainError, "dense output requested at t = " + std::to_string(t) +
                                                " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (times_.size() == 1) return states_.front();
    // index of the step [times_[k], times_[k+1]] containing t
    std::size_t k = 0;
    if (!backward_) {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - times_.begin()) - 1));
    } else {
        auto it = std::upper_bound(times_.begin(), times_.end(), t, [](double v, double e) { return v > e; });
        k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - times_.begin()) - 1));
    }
    k = std::min(k, dense_.size() - 1);
    if (times_[k + 1] == times_[k]) return states_[k];
    const double theta = (t - times_[k]) / (times_[k + 1] - times_[k]);
    const double theta1 = 1.0 - theta;
    const auto& r = dense_[k];
    return r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
}

Mat Trajectory::matrix_at(double t, Eigen::Index rows) const {
    const Vec v = at(t);
    return Eigen::Map<const Mat>(v.data(), rows, v.size() / rows);
}

Mat Trajectory::final_matrix(Eigen::Index rows) const {
    const Vec& v = states_.back();
    return Eigen::Map<const Mat>(v.data(), rows, v.size() / rows);
}

Trajectory integrate_ivp(const Rhs& f, double t0, const Vec& x0, double t1, const IntegratorOptions& opts) {
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw Error(ErrorKind::InvalidInput, "tolerance must be positive");
    if (!std::isfinite(t0) || !std::isfinite(t1)) throw Error(ErrorKind::InvalidInput, "non-finite time bound");
    if (!x0.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite initial state");

    Trajectory traj;
    traj.backward_ = t1 < t0;
    traj.times_.push_back(t0);
    traj.states_.push_back(x0);
    if (t1 == t0) {
        traj.dense_.push_back({x0, Vec::Zero(x0.size()), Vec::Zero(x0.size()), Vec::Zero(x0.size()),
                               Vec::Zero(x0.size())});
        traj.times_.push_back(t1);
        traj.states_.push_back(x0);
        return traj;
    }

    const double dir = traj.backward_ ? -1.0 : 1.0;
    const double span = std::fabs(t1 - t0);
    // reversed-time field: dx/dtau = dir * f(t0 + dir * tau, x)
    auto field = [&](double tau, const Vec& x, Vec& dx) {
        f(t0 + dir * tau, x, dx);
        if (dir < 0) dx = -dx;
    };

    const Eigen::Index n = x0.size();
    Vec y = x0;
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    double tau = 0.0;
    field(tau, y, k1);

    double h = opts.initial_step;
    if (h <= 0.0) {
        const double d0 = rms_scaled(y, y, opts);
        const double dd1 = rms_scaled(k1, y, opts);
        double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
        h0 = std::min(h0, span);
        ytmp = y + h0 * k1;
        field(h0, ytmp, k2);
        const double dd2 = rms_scaled(Vec(k2 - k1), y, opts) / h0;
        const double m = std::max(dd1, dd2);
        const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
        h = std::min(100.0 * h0, h1);
    }
    if (opts.max_step > 0.0) h = std::min(h, opts.max_step);
    h = std::min(h, span);

    const double beta = 0.04;
    const double expo1 = 0.2 - beta * 0.75;
    const double safe = 0.9;
    double facold = 1e-4;
    bool last_reject = false;
    bool nonfinite_trial = false;
    std::size_t accepted = 0;

    for (;;) {
        if (accepted + traj.rejected_ >= opts.max_steps) {
            throw IntegrationError(ErrorKind::StiffnessFailure, "step limit reached", t0 + dir * tau);
        }
        const double remaining = span - tau;
        bool final_step = false;
        if (h >= remaining * (1.0 - 1e-12)) {
            h = remaining;
            final_step = true;
        }
        if (h < 1e-14 * std::max(1.0, std::fabs(t0 + dir * tau)) && !final_step) {
            if (nonfinite_trial) {
                throw IntegrationError(ErrorKind::Blowup, "state became non-finite", t0 + dir * tau);
            }
            throw IntegrationError(ErrorKind::StiffnessFailure, "step size underflow", t0 + dir * tau);
        }

        ytmp = y + h * a21 * k1;
        field(tau + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        field(tau + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        field(tau + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        field(tau + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        field(tau + h, ytmp, k6);
        ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        field(tau + h, ynew, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double en = error_norm(err, y, ynew, opts);
        if (!std::isfinite(en) || !ynew.allFinite() || !k7.allFinite()) {
            nonfinite_trial = true;
            h *= 0.1;
            ++traj.rejected_;
            last_reject = true;
            continue;
        }
        nonfinite_trial = false;

        const double fac11 = std::pow(std::max(en, 1e-300), expo1);
        if (en <= 1.0) {
            // accept
            std::array<Vec, 5> dense;
            dense[0] = y;
            dense[1] = ynew - y;
            dense[2] = h * k1 - dense[1];
            dense[3] = dense[1] - h * k7 - dense[2];
            dense[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

            facold = std::max(en, 1e-4);
            tau = final_step ? span : tau + h;
            y = ynew;
            k1 = k7;
            ++accepted;
            traj.error_sum_ += err.cwiseAbs().maxCoeff();
            traj.times_.push_back(final_step ? t1 : t0 + dir * tau);
            traj.states_.push_back(y);
            traj.dense_.push_back(std::move(dense));

            if (y.lpNorm<Eigen::Infinity>() > opts.overflow_norm) {
                throw IntegrationError(ErrorKind::Blowup, "state norm exceeds overflow threshold", t0 + dir * tau);
            }
            if (final_step) break;

            double fac = fac11 / std::pow(facold, beta);
            fac = std::clamp(fac / safe, 0.1, 5.0);
            double hnew = h / fac;
            if (last_reject) hnew = std::min(hnew, h);
            if (opts.max_step > 0.0) hnew = std::min(hnew, opts.max_step);
            h = hnew;
            last_reject = false;
        } else {
            h /= std::min(5.0, fac11 / safe);
            ++traj.rejected_;
            last_reject = true;
        }
    }
    return traj;
}

Trajectory integrate_ivp(const LinearSystem& sys, double t0, const Vec& x0, double t1, double tol) {
    if (!sys.contains(t0) || !sys.contains(t1)) {
        throw Error(ErrorKind::DomainError, "integration interval leaves the domain of " + sys.name());
    }
    if (x0.size() != sys.dim()) throw Error(ErrorKind::InvalidInput, "initial state has wrong dimension");
    Rhs f = [&sys](double t, const Vec& x, Vec& dx) { dx.noalias() = sys.coeff_unchecked(t) * x; };
    return integrate_ivp(f, t0, x0, t1, IntegratorOptions::with_tol(tol));
}

Trajectory integrate_matrix_ivp(const LinearSystem& sys, double t0, const Mat& x0, double t1, double tol) {
    if (!sys.contains(t0) || !sys.contains(t1)) {
        throw Error(ErrorKind::DomainError, "integration interval leaves the domain of " + sys.name());
    }
    const Eigen::Index n = sys.dim();
    if (x0.rows() != n) throw Error(ErrorKind::InvalidInput, "initial matrix has wrong row count");
    const Eigen::Index m = x0.cols();
    Rhs f = [&sys, n, m](double t, const Vec& x, Vec& dx) {
        Eigen::Map<const Mat> xm(x.data(), n, m);
        Eigen::Map<Mat> dm(dx.data(), n, m);
        dm.noalias() = sys.coeff_unchecked(t) * xm;
    };
    const Vec v = Eigen::Map<const Vec>(x0.data(), x0.size());
    return integrate_ivp(f, t0, v, t1, IntegratorOptions::with_tol(tol));
}

Trajectory integrate_forced(const LinearSystem& sys, const std::function<Vec(double)>& g, double t0, const Vec& x0,
                            double t1, double tol) {
    if (!sys.contains(t0) || !sys.contains(t1)) {
        throw Error(ErrorKind::DomainError, "integration interval leaves the domain of " + sys.name());
    }
    Rhs f = [&sys, &g](double t, const Vec& x, Vec& dx) { dx.noalias() = sys.coeff_unchecked(t) * x + g(t); };
    return integrate_ivp(f, t0, x0, t1, IntegratorOptions::with_tol(tol));
}

Trajectory integrate_quasilinear(const QuasilinearSystem& q, double t0, const Vec& y0, double t1, double tol) {
    const LinearSystem& sys = q.linear();
    if (!sys.contains(t0) || !sys.contains(t1)) {
        throw Error(ErrorKind::DomainError, "integration interval leaves the domain of " + sys.name());
    }
    Rhs f = [&q, &sys](double t, const Vec& y, Vec& dy) { dy.noalias() = sys.coeff_unchecked(t) * y + q.f(t, y); };
    return integrate_ivp(f, t0, y0, t1, IntegratorOptions::with_tol(tol));
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, Eigen::Index matrix_rows) {
    const Eigen::Index d = traj.state_dim();
    out << "t";
    if (matrix_rows > 0) {
        const Eigen::Index cols = d / matrix_rows;
        for (Eigen::Index i = 0; i < matrix_rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) out << ",X_" << i + 1 << j + 1;
        }
    } else {
        for (Eigen::Index i = 0; i < d; ++i) out << ",x" << i + 1;
    }
    out << "\n";
    char buf[40];
    for (std::size_t k = 0; k < traj.times().size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times()[k]);
        out << buf;
        const Vec& v = traj.states()[k];
        if (matrix_rows > 0) {
            const Eigen::Index cols = d / matrix_rows;
            for (Eigen::Index i = 0; i < matrix_rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) {
                    std::snprintf(buf, sizeof buf, "%.17g", v(j * matrix_rows + i));
                    out << "," << buf;
                }
            }
        } else {
            for (Eigen::Index i = 0; i < d; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", v(i));
                out << "," << buf;
            }
        }
        out << "\n";
    }
}

}  // namespace dlab
