#include "dlab/report.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>

namespace dlab {

std::string format_number(double v) {
    if (!std::isfinite(v)) return "null";
    if (v == 0.0) return std::signbit(v) ? "-0.0" : "0.0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void write(std::string& out, const Json& j, int indent, int depth) {
    const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
    const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{";
            out += nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) {
                    out += ",";
                    out += nl;
                }
                first = false;
                out += pad;
                out += Json(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                write(out, it.value(), indent, depth + 1);
            }
            out += nl;
            out += close;
            out += "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // numeric rows stay on one line
            bool flat = true;
            for (const auto& e : j) flat = flat && !e.is_structured();
            out += "[";
            if (!flat) out += nl;
            bool first = true;
            for (const auto& e : j) {
                if (!first) {
                    out += ",";
                    out += flat ? (indent > 0 ? " " : "") : nl;
                }
                first = false;
                if (!flat) out += pad;
                write(out, e, indent, depth + 1);
            }
            if (!flat) {
                out += nl;
                out += close;
            }
            out += "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_number(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

}  // namespace

std::string format_json(const Json& j, int indent) {
    std::string out;
    write(out, j, indent, 0);
    out += "\n";
    return out;
}

Json to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json to_json(const CMat& m) {
    return Json{{"re", to_json(Mat(m.real()))}, {"im", to_json(Mat(m.imag()))}};
}

Json to_json(const DichotomyCertificate& c) {
    return Json{{"flag", std::string(to_string(c.flag))},
                {"k", c.k},
                {"alpha", c.alpha},
                {"a", c.a},
                {"b", c.b},
                {"anchor", c.anchor},
                {"domain", std::string(to_string(c.domain))},
                {"rank", c.rank()},
                {"projector", to_json(c.projector.base)},
                {"residual", c.residual},
                {"sup_norm_a", c.sup_norm_a},
                {"grid_size", c.grid.size()}};
}

Json to_json(const FloquetData& f) {
    Json mult = Json::array();
    for (const cplx& z : f.multipliers) mult.push_back(Json{{"re", z.real()}, {"im", z.imag()}, {"abs", std::abs(z)}});
    return Json{{"omega", f.omega},
                {"monodromy", to_json(f.monodromy)},
                {"multipliers", mult},
                {"d", to_json(f.d)},
                {"d_is_real", f.d_is_real},
                {"negative_axis_branch", f.negative_axis_branch},
                {"unit_circle_margin", f.unit_circle_margin},
                {"log_residual", f.log_residual}};
}

Json to_json(const SpectrumReport& s) {
    Json intervals = Json::array();
    for (const auto& iv : s.intervals) {
        intervals.push_back(Json{{"lo", iv.lo},
                                 {"hi", iv.hi},
                                 {"unbounded_left", iv.unbounded_left},
                                 {"unbounded_right", iv.unbounded_right}});
    }
    Json gaps = Json::array();
    for (const auto& g : s.gaps) gaps.push_back(Json{{"lo", g.lo}, {"hi", g.hi}, {"rank", g.rank}});
    Json diag = Json::array();
    for (const auto& b : s.diagonal) {
        diag.push_back(Json{{"beta_minus", b.beta_minus},
                            {"beta_plus", b.beta_plus},
                            {"unbounded_below", b.unbounded_below},
                            {"unbounded_above", b.unbounded_above}});
    }
    return Json{{"method", s.method},   {"horizon", s.horizon},     {"window", s.window},
                {"merge_eps", s.merge_eps}, {"full_line", s.full_line}, {"unbounded", s.unbounded},
                {"intervals", intervals}, {"gaps", gaps},           {"diagonal", diag},
                {"warnings", s.warnings}};
}

Json to_json(const ReductionResult& r) {
    return Json{{"block_sizes", r.block_sizes},
                {"rank", r.rank},
                {"grid_size", r.grid.size()},
                {"t0", r.grid.front()},
                {"t1", r.grid.back()},
                {"anchor", r.grid[r.anchor_index]},
                {"s_norm_bound", r.s_norm_bound},
                {"s_inv_norm_bound", r.s_inv_norm_bound},
                {"s_inv_predicted", r.s_inv_predicted},
                {"similarity_residual", r.similarity_residual},
                {"commutation_defect", r.commutation_defect},
                {"projector_defect", r.projector_defect},
                {"offblock_max", r.offblock_max},
                {"basis", to_json(r.basis)}};
}

Json to_json(const LinearizationContext& c) {
    return Json{{"mode", std::string(to_string(c.mode))},
                {"eps", c.eps},
                {"k", c.k},
                {"alpha", c.alpha},
                {"mu", c.mu},
                {"gamma", c.gamma},
                {"m_bound", c.m_bound},
                {"gap_factor", c.gap_factor},
                {"window", c.window},
                {"displacement_bound", c.displacement_bound},
                {"theta", c.theta},
                {"cond_cap", c.opts.cond_cap},
                {"cond_plus", c.cond_plus},
                {"cond_minus", c.cond_minus},
                {"cond_limited", c.cond_limited}};
}

Json to_json(const MapEvaluation& e) {
    return Json{{"t", e.t},
                {"input", to_json(e.input)},
                {"output", to_json(e.output)},
                {"iterations", e.iterations},
                {"residual", e.residual},
                {"window", Json::array({e.window_lo, e.window_hi})},
                {"window_capped", e.window_capped}};
}

std::string text_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace dlab
