// Acceptance run: one PASS/FAIL line per criterion, with the measured
// quantities next to their limits. Exit status 0 iff every line passes.

#include "dlab/dichotomy.hpp"
#include "dlab/error.hpp"
#include "dlab/floquet.hpp"
#include "dlab/linearize.hpp"
#include "dlab/propagate.hpp"
#include "dlab/reduce.hpp"
#include "dlab/spectrum.hpp"
#include "dlab/system.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace dlab;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const char* title, const std::function<void(Outcome&)>& body) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failures;
    std::printf("%s %2d %s:%s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.str().c_str(), secs);
    std::fflush(stdout);
}

LinearSystem lin(const char* name) { return linear_part(builtin(name)); }

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double ls_slope(const std::vector<double>& t, const std::vector<double>& y) {
    double mt = 0, my = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mt += t[i];
        my += y[i];
    }
    mt /= static_cast<double>(t.size());
    my /= static_cast<double>(t.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sxy += (t[i] - mt) * (y[i] - my);
        sxx += (t[i] - mt) * (t[i] - mt);
    }
    return sxy / sxx;
}

Mat rotation(double th) {
    Mat r(2, 2);
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return r;
}

}  // namespace

int main() {
    criterion(1, "Markus-Yamabe dichotomy", [](Outcome& o) {
        auto my = lin("markus_yamabe");
        Mat p(2, 2);
        p << 0, 0, 0, 1;
        auto cert = certify(my, make_projection(p), -6, 6);
        o.detail << " alpha=" << g6(cert.alpha) << " K=" << g6(cert.k);
        o.require(cert.verified(), "certificate verified");
        o.require(cert.alpha >= 0.45 && cert.alpha <= 0.5, "alpha in [0.45, 0.5]");
        o.require(cert.k >= 1.0 && cert.k <= 1.2, "K in [1, 1.2]");
        double worst_re = 0.0;
        for (double t : linspace(-10, 10, 50)) {
            Eigen::EigenSolver<Mat> es(my.coeff(t));
            for (int i = 0; i < 2; ++i) worst_re = std::max(worst_re, std::fabs(es.eigenvalues()(i).real() + 0.25));
        }
        o.detail << " max|Re(lambda)+1/4|=" << g6(worst_re);
        o.require(worst_re <= 1e-9, "Re(lambda) = -1/4 +- 1e-9");
        std::vector<double> ts, logs;
        Vec e1 = Vec::Unit(2, 0);
        for (double t : linspace(0, 10, 41)) {
            ts.push_back(t);
            logs.push_back(std::log(integrate_ivp(my, 0.0, e1, t, 1e-10).final_state().norm() + 1e-300));
        }
        const double rate = ls_slope(ts, logs);
        o.detail << " rate(X e1)=" << g6(rate);
        o.require(std::fabs(rate - 0.5) <= 0.02, "growth rate 0.5 +- 0.02");
    });

    criterion(2, "Liouville", [](Outcome& o) {
        for (const char* name : {"markus_yamabe", "antisym_exp"}) {
            auto lv = liouville_check(lin(name), 0.0, 5.0);
            o.detail << " " << name << "=" << g6(lv.rel_err);
            o.require(lv.rel_err <= 1e-6, std::string(name) + " rel_err <= 1e-6");
        }
    });

    criterion(3, "Orthogonality of antisym_exp", [](Outcome& o) {
        auto anti = lin("antisym_exp");
        double worst = 0.0, worst_det = 0.0;
        for (double t : linspace(-3, 3, 100)) {
            Mat x = transition_matrix(anti, t, 0.0).x;
            worst = std::max(worst, operator_norm_2(Mat(x.transpose() * x - Mat::Identity(2, 2))));
            worst_det = std::max(worst_det, std::fabs(x.determinant() - 1.0));
        }
        o.detail << " max||X^T X - I||=" << g6(worst) << " max|det-1|=" << g6(worst_det);
        o.require(worst <= 1e-8, "orthogonality 1e-8");
        o.require(worst_det <= 1e-8, "det 1 +- 1e-8");
    });

    criterion(4, "Floquet", [](Outcome& o) {
        auto ps = lin("periodic_scalar(0.3)");
        auto fd = monodromy(ps);
        const double mult = fd.multipliers.at(0).real();
        const double rel = std::fabs(mult / std::exp(0.6 * std::numbers::pi) - 1.0);
        const double d_err = std::abs(fd.d(0, 0) - cplx(0.3));
        double q_err = 0.0;
        for (double t : linspace(0, 2 * std::numbers::pi, 20)) {
            q_err = std::max(q_err, std::fabs(floquet_factor(ps, fd, t).q(0, 0) - std::exp(std::sin(t))));
        }
        o.detail << " multiplier rel=" << g6(rel) << " |D-0.3|=" << g6(d_err) << " max|Q-e^sin|=" << g6(q_err);
        o.require(rel <= 1e-6, "multiplier e^{0.6 pi} rel 1e-6");
        o.require(d_err <= 1e-8, "D = 0.3 +- 1e-8");
        o.require(q_err <= 1e-6, "Q(t) = e^{sin t} +- 1e-6");
        auto m1 = constant_system("minus_one", Mat::Constant(1, 1, -1.0), 2 * std::numbers::pi);
        auto sol = periodic_solution(m1, [](double t) { return Vec::Constant(1, std::cos(t)); });
        o.detail << " x*(0)=" << g6(sol.x0(0)) << " closure=" << g6(sol.closure_defect);
        o.require(std::fabs(sol.x0(0) - 0.5) <= 1e-8, "x*(0) = 0.5 +- 1e-8");
        o.require(sol.closure_defect <= 1e-8, "x*(2 pi) - x*(0) <= 1e-8");
    });

    criterion(5, "Spectrum examples (T = 40, L = 8)", [](Outcome& o) {
        auto timed = [&](const char* name) {
            const auto start = std::chrono::steady_clock::now();
            auto rep = halfline_spectrum(lin(name), 40, 8);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            o.require(secs <= 30.0, std::string(name) + " within 30 s");
            return rep;
        };
        auto ad = timed("auto_diag_113");
        bool ok = ad.intervals.size() == 2;
        if (ok) {
            ok = std::fabs(ad.intervals[0].lo + 1) <= 0.05 && std::fabs(ad.intervals[0].hi + 1) <= 0.05 &&
                 std::fabs(ad.intervals[1].lo - 1) <= 0.05 && std::fabs(ad.intervals[1].hi - 1) <= 0.05;
        }
        o.detail << " auto_diag_113 intervals=" << ad.intervals.size();
        o.require(ok, "auto_diag_113 intervals within 0.05 of {-1}, {1}");
        std::vector<int> ranks;
        bool rank_two = false;
        for (const auto& g : ad.gaps) {
            ranks.push_back(g.rank);
            rank_two = rank_two || g.rank == 2;
        }
        o.require(ranks == std::vector<int>{0, 1, 3}, "gap ranks (0, 1, 3)");
        o.require(!rank_two, "no gap of rank 2");
        auto ar = timed("scalar_arctan");
        o.require(ar.intervals.size() == 1 && ar.intervals[0].lo >= -0.05 && ar.intervals[0].hi <= 0.05,
                  "scalar_arctan interval inside [-0.05, 0.05]");
        if (!ar.intervals.empty()) o.detail << " arctan=[" << g6(ar.intervals[0].lo) << ", " << g6(ar.intervals[0].hi) << "]";
        auto lt = timed("scalar_linear_t");
        o.detail << " linear_t unbounded=" << (lt.unbounded ? "yes" : "no");
        o.require(lt.unbounded, "scalar_linear_t unbounded");
    });

    criterion(6, "Spectrum invariances", [](Outcome& o) {
        double worst_shift = 0.0;
        for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan"}) {
            auto sys = lin(name);
            auto base = halfline_spectrum(sys, 40, 8);
            auto sh = halfline_spectrum(sys.shifted(0.7), 40, 8);
            o.require(sh.intervals.size() == base.intervals.size(), std::string(name) + " interval count under shift");
            for (std::size_t i = 0; i < std::min(sh.intervals.size(), base.intervals.size()); ++i) {
                worst_shift = std::max(worst_shift, std::fabs(sh.intervals[i].lo - base.intervals[i].lo + 0.7));
                worst_shift = std::max(worst_shift, std::fabs(sh.intervals[i].hi - base.intervals[i].hi + 0.7));
            }
        }
        o.detail << " shift error=" << g6(worst_shift);
        o.require(worst_shift <= 0.1, "endpoints move by -0.7 +- 0.1");
        auto my = lin("markus_yamabe");
        StepFlow flow = [&](double t1, double t0) {
            return Mat(rotation(-(std::exp(t1) - 1)).transpose() * transition_matrix(my, t1, t0).x *
                       rotation(-(std::exp(t0) - 1)));
        };
        auto base = halfline_spectrum(my, 40, 8);
        auto conj = halfline_spectrum(2, flow, 40, 8);
        double worst_conj = 0.0;
        o.require(conj.intervals.size() == base.intervals.size(), "interval count under conjugation");
        for (std::size_t i = 0; i < std::min(conj.intervals.size(), base.intervals.size()); ++i) {
            worst_conj = std::max(worst_conj, std::fabs(conj.intervals[i].lo - base.intervals[i].lo));
            worst_conj = std::max(worst_conj, std::fabs(conj.intervals[i].hi - base.intervals[i].hi));
        }
        o.detail << " conjugation error=" << g6(worst_conj);
        o.require(worst_conj <= 0.1, "conjugation moves endpoints <= 0.1");
    });

    criterion(7, "Coppel reduction of markus_yamabe", [](Outcome& o) {
        auto my = lin("markus_yamabe");
        Mat p(2, 2);
        p << 0, 0, 0, 1;
        auto proj = make_projection(p);
        auto coarse = coppel_similarity(my, proj, linspace(0, 5, 501));
        auto fine = coppel_similarity(my, proj, linspace(0, 5, 1001));
        const double ratio = coarse.similarity_residual / fine.similarity_residual;
        o.detail << " ||S||max=" << g6(std::max(coarse.s_norm_bound, fine.s_norm_bound))
                 << " residual(h=0.01)=" << g6(coarse.similarity_residual)
                 << " residual(h=0.005)=" << g6(fine.similarity_residual) << " ratio=" << g6(ratio);
        o.require(std::max(coarse.s_norm_bound, fine.s_norm_bound) <= std::sqrt(2.0) + 1e-6, "||S|| <= sqrt 2 + 1e-6");
        o.require(coarse.similarity_residual <= 0.05, "residual <= 0.05 at h = 0.01");
        o.require(ratio >= 1.6 && ratio <= 2.4, "residual halves (+-20%)");
        auto [c, e] = subsystem_dichotomies(coarse);
        o.require(c && c->verified() && c->rank() == 1, "contraction block certifies with P = I");
        o.require(e && e->verified() && e->rank() == 0, "expansion block certifies with P = 0");
    });

    criterion(8, "Index and full-line criterion (T = 10)", [](Outcome& o) {
        auto tanh = lin("palmer_tanh");
        const int it = dichotomy_index(tanh, 10);
        const bool pt = full_line_criterion(tanh, 10).passes;
        o.detail << " palmer_tanh index=" << it << " passes=" << pt;
        o.require(it == 1, "palmer_tanh index 1");
        o.require(!pt, "palmer_tanh fails");
        for (const char* name : {"markus_yamabe", "auto_diag_113"}) {
            const int i = dichotomy_index(lin(name), 10);
            const bool p = full_line_criterion(lin(name), 10).passes;
            o.detail << " " << name << " index=" << i << " passes=" << p;
            o.require(i == 0 && p, std::string(name) + " index 0 and passes");
        }
    });

    criterion(9, "Linearization of palmer_demo", [](Outcome& o) {
        auto q = *quasilinear_part(builtin("palmer_demo"));
        auto cert = certify(q.linear(), canonical_projection(1, 1), 0, 10);
        auto ctx = make_context(q, cert, 1e-6, LinearizationMode::HalfLinePlus);
        std::mt19937 rng(2024);
        std::uniform_real_distribution<double> ut(0, 10), up(-1, 1);
        double inv = 0, conj = 0, disp = 0, jac_err = 0, min_det = 1e300;
        int iters = 0;
        for (int i = 0; i < 100; ++i) {
            const double t = ut(rng);
            const Vec p = Vec::Constant(1, up(rng));
            auto h = eval_h(ctx, t, p);
            iters = std::max(iters, h.iterations);
            disp = std::max(disp, (h.output - p).norm());
            inv = std::max(inv, inverse_residual(ctx, t, p));
            conj = std::max(conj, conjugacy_residual(ctx, t, p, 5.0));
            auto jac = g_jacobian(ctx, t, p);
            min_det = std::min(min_det, jac.determinant);
            const double d = 1e-4;
            const double fd = (eval_g(ctx, t, Vec(p.array() + d)).output(0) -
                               eval_g(ctx, t, Vec(p.array() - d)).output(0)) / (2 * d);
            jac_err = std::max(jac_err, std::fabs(fd - jac.jacobian(0, 0)));
        }
        o.detail << " q=" << g6(ctx.gap_factor) << " inverse=" << g6(inv) << " conjugacy=" << g6(conj)
                 << " |H-xi|=" << g6(disp) << " iterations<=" << iters << " min det=" << g6(min_det)
                 << " jacobian fd err=" << g6(jac_err);
        o.require(inv <= 1e-5, "inverse residual <= 1e-5");
        o.require(conj <= 5e-5, "conjugacy residual <= 5e-5");
        o.require(disp <= 0.2 + 1e-5, "|H - xi| <= 0.2 + 1e-5");
        o.require(iters <= 10, "Picard iterations <= 10");
        o.require(min_det > 0, "det dG/deta > 0");
        o.require(jac_err <= 1e-4, "Jacobian matches finite differences to 1e-4");
        bool gap = false;
        try {
            make_context(q.with_constants(0.1, 0.6), cert, 1e-6, LinearizationMode::HalfLinePlus);
        } catch (const Error& e) {
            gap = e.kind() == ErrorKind::GapViolation;
        }
        o.require(gap, "GapViolation for gamma = 0.6");
    });

    criterion(10, "Property suites", [](Outcome& o) {
        const double tol = 1e-10;
        std::mt19937 rng(10);
        std::uniform_real_distribution<double> ud(-2.0, 2.0);
        double cocycle = 0.0, adjoint = 0.0;
        bool sandwich = true;
        for (const auto& entry : catalog()) {
            auto sys = linear_part(builtin(entry.name));
            const double span = entry.name == "scalar_linear_t" ? 0.5 : 1.0;
            for (int k = 0; k < 5; ++k) {
                const double t = span * ud(rng), r = span * ud(rng), s = span * ud(rng);
                Mat xtr = transition_matrix(sys, t, r, tol).x, xrs = transition_matrix(sys, r, s, tol).x;
                Mat xts = transition_matrix(sys, t, s, tol).x, xst = transition_matrix(sys, s, t, tol).x;
                const double scale = std::max(1.0, operator_norm_2(xtr)) * std::max(1.0, operator_norm_2(xrs)) *
                                     std::max(1.0, operator_norm_2(xts)) * std::max(1.0, operator_norm_2(xst));
                cocycle = std::max(cocycle, operator_norm_2(Mat(xtr * xrs - xts)) / scale);
                cocycle = std::max(cocycle, operator_norm_2(Mat(xts * xst - Mat::Identity(sys.dim(), sys.dim()))) / scale);
                const double integral =
                    std::fabs(adaptive_simpson([&](double u) { return operator_norm_2(sys.coeff(u)); }, s, t, 1e-11));
                const double nx = operator_norm_2(xts);
                const double ninv = 1.0 / operator_norm_2(xst);
                sandwich = sandwich && nx <= std::exp(integral) * (1 + 1e-8) && nx >= std::exp(-integral) * (1 - 1e-8) &&
                           ninv <= std::exp(integral) * (1 + 1e-8) && ninv >= std::exp(-integral) * (1 - 1e-8);
            }
            adjoint = std::max(adjoint, adjoint_check(sys, linspace(-span, span, 16), tol));
        }
        o.detail << " cocycle=" << g6(cocycle) << " adjoint=" << g6(adjoint);
        o.require(cocycle <= 10 * tol, "cocycle and inverse identities within 10 tol");
        o.require(adjoint <= 1e-6, "adjoint constancy 1e-6");
        o.require(sandwich, "bounded-growth norm sandwich");
        bool monotone = true;
        for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan"}) {
            std::vector<double> lambdas;
            for (double l = -2.0; l <= 2.0 + 1e-9; l += 0.5) lambdas.push_back(l);
            monotone = monotone && rank_step_function(lin(name), lambdas, 40).monotone;
        }
        o.require(monotone, "rank monotone across resolvent grids");
        int compared = 0;
        bool consistent = true;
        for (const auto& entry : catalog()) {
            if (entry.name == "scalar_linear_t" || entry.name == "coppel_counterexample") continue;
            auto sys = linear_part(builtin(entry.name));
            SubspaceSplit split;
            try {
                split = estimate_splitting(sys, 8.0);
            } catch (const Error&) {
                continue;
            }
            if (split.forward_inconclusive + split.backward_inconclusive > 0) continue;
            auto cert = certify(sys, orthogonal_projection(split.stable_basis, sys.dim()), -20, 20);
            if (!cert.verified()) continue;
            const double window = std::ceil(std::log(4 * cert.k / 0.9) / cert.alpha);
            if (window > 18) continue;
            ++compared;
            consistent = consistent && noncriticality_test(sys, window, 0.9, linspace(-2, 2, 9)).noncritical;
        }
        o.detail << " noncriticality compared on " << compared << " certified systems";
        o.require(consistent && compared >= 2, "certified systems are noncritical");
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
