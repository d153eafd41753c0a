#include "dlab/system.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace dlab {

std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::FullLine: return "full-line";
        case Domain::HalfLinePlus: return "half-line-plus";
        case Domain::HalfLineMinus: return "half-line-minus";
    }
    return "?";
}

Domain parse_domain(std::string_view text) {
    if (text == "full-line") return Domain::FullLine;
    if (text == "half-line-plus") return Domain::HalfLinePlus;
    if (text == "half-line-minus") return Domain::HalfLineMinus;
    throw Error(ErrorKind::InvalidInput, "unknown domain '" + std::string(text) + "'");
}

LinearSystem::LinearSystem(std::string name, int dim, CoeffFn coeff, Domain domain, std::optional<double> period)
    : name_(std::move(name)), dim_(dim), coeff_(std::move(coeff)), domain_(domain), period_(period) {
    if (dim_ <= 0) throw Error(ErrorKind::InvalidInput, "system dimension must be positive");
    if (period_) {
        if (!(*period_ > 0.0) || !std::isfinite(*period_)) {
            throw Error(ErrorKind::InvalidInput, "period must be positive and finite");
        }
        const double defect = periodicity_defect(*this, *period_);
        if (defect > 1e-10) {
            throw Error(ErrorKind::InvalidInput,
                        "declared period does not match coefficients (defect " + std::to_string(defect) + ")");
        }
    }
}

bool LinearSystem::contains(double t) const {
    switch (domain_) {
        case Domain::FullLine: return std::isfinite(t);
        case Domain::HalfLinePlus: return t >= 0.0 && std::isfinite(t);
        case Domain::HalfLineMinus: return t <= 0.0 && std::isfinite(t);
    }
    return false;
}

Mat LinearSystem::coeff(double t) const {
    if (!contains(t)) {
        throw Error(ErrorKind::DomainError,
                    "t = " + std::to_string(t) + " outside " + std::string(to_string(domain_)) + " domain of " + name_);
    }
    return coeff_(t);
}

LinearSystem LinearSystem::shifted(double lambda) const {
    auto base = coeff_;
    const int n = dim_;
    LinearSystem out(name_ + "-shifted", n, [base, lambda, n](double t) {
        return Mat(base(t) - lambda * Mat::Identity(n, n));
    }, domain_, period_);
    return out;
}

LinearSystem LinearSystem::time_reversed() const {
    auto base = coeff_;
    Domain d = domain_;
    if (d == Domain::HalfLinePlus) {
        d = Domain::HalfLineMinus;
    } else if (d == Domain::HalfLineMinus) {
        d = Domain::HalfLinePlus;
    }
    return LinearSystem(name_ + "-reversed", dim_, [base](double s) { return Mat(-base(-s)); }, d, period_);
}

LinearSystem LinearSystem::with_domain(Domain d) const {
    LinearSystem out = *this;
    out.domain_ = d;
    return out;
}

LinearSystem LinearSystem::with_period(std::optional<double> period) const {
    LinearSystem out(name_, dim_, coeff_, domain_, period);
    out.entries_ = entries_;
    return out;
}

double periodicity_defect(const LinearSystem& sys, double period, int samples) {
    double worst = 0.0;
    const double sign = sys.domain() == Domain::HalfLineMinus ? -1.0 : 1.0;
    for (int k = 0; k < samples; ++k) {
        // irrational offsets avoid sampling only the symmetric points of the period
        const double t = sign * period * (k + 0.318309886) / samples;
        const double t2 = t + sign * period;
        const Mat a = sys.coeff_unchecked(t);
        const Mat b = sys.coeff_unchecked(t2);
        const double scale = std::max(1.0, operator_norm_2(a));
        worst = std::max(worst, operator_norm_2(Mat(b - a)) / scale);
    }
    return worst;
}

QuasilinearSystem::QuasilinearSystem(LinearSystem linear, PerturbFn f, double mu, double gamma)
    : linear_(std::move(linear)), f_(std::move(f)), mu_(mu), gamma_(gamma) {
    if (!(mu_ >= 0.0) || !(gamma_ >= 0.0)) {
        throw Error(ErrorKind::InvalidInput, "mu and gamma must be nonnegative");
    }
}

Mat QuasilinearSystem::f_jacobian(double t, const Vec& y) const {
    const int n = dim();
    Mat j(n, n);
    for (int k = 0; k < n; ++k) {
        const double h = 1e-6 * std::max(1.0, std::fabs(y(k)));
        Vec yp = y;
        Vec ym = y;
        yp(k) += h;
        ym(k) -= h;
        j.col(k) = (f_(t, yp) - f_(t, ym)) / (2.0 * h);
    }
    return j;
}

QuasilinearSystem QuasilinearSystem::with_constants(double mu, double gamma) const {
    QuasilinearSystem out(linear_, f_, mu, gamma);
    out.f_entries_ = f_entries_;
    return out;
}

AssumptionCheck check_assumptions(const QuasilinearSystem& q, std::uint64_t seed, int samples, double lipschitz_slack) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = q.dim();
    auto random_direction = [&] {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = normal(rng);
        const double nv = v.norm();
        return nv > 0 ? Vec(v / nv) : Vec(Vec::Unit(n, 0));
    };
    auto sample_t = [&] {
        double t = -20.0 + 40.0 * unit(rng);
        if (q.linear().domain() == Domain::HalfLinePlus) t = std::fabs(t);
        if (q.linear().domain() == Domain::HalfLineMinus) t = -std::fabs(t);
        return t;
    };

    AssumptionCheck out;
    for (int k = 0; k < samples; ++k) {
        const double t = sample_t();
        const Vec y = std::pow(10.0, -2.0 + 4.0 * unit(rng)) * random_direction();
        const Vec fy = q.f(t, y);
        out.max_norm = std::max(out.max_norm, fy.norm());
        const Vec dy = std::pow(10.0, -6.0 + 6.0 * unit(rng)) * random_direction();
        const double quotient = (q.f(t, y + dy) - fy).norm() / dy.norm();
        out.max_quotient = std::max(out.max_quotient, quotient);
    }
    out.bound_ok = out.max_norm <= q.mu() * (1.0 + 1e-12);
    out.lipschitz_ok = out.max_quotient <= q.gamma() * (1.0 + lipschitz_slack);
    return out;
}

const LinearSystem& linear_part(const AnySystem& s) {
    if (const auto* q = std::get_if<QuasilinearSystem>(&s)) return q->linear();
    return std::get<LinearSystem>(s);
}

const QuasilinearSystem* quasilinear_part(const AnySystem& s) { return std::get_if<QuasilinearSystem>(&s); }

LinearSystem constant_system(std::string name, const Mat& a, std::optional<double> period) {
    const Mat copy = a;
    return LinearSystem(std::move(name), static_cast<int>(a.rows()), [copy](double) { return copy; },
                        Domain::FullLine, period);
}

// ---------------------------------------------------------------------------
// configuration text

namespace {

struct Located {
    std::string text;
    int line = 1;
    int column = 1;
};

std::string trim(std::string_view s, std::size_t* lead = nullptr) {
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    std::size_t e = s.size();
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    if (lead) *lead = b;
    return std::string(s.substr(b, e - b));
}

/// Splits at top-level occurrences of `sep`, keeping source columns.
std::vector<Located> split_top(const Located& in, char sep) {
    std::vector<Located> parts;
    int depth = 0;
    std::size_t start = 0;
    auto push = [&](std::size_t end) {
        std::size_t lead = 0;
        Located part;
        part.text = trim(std::string_view(in.text).substr(start, end - start), &lead);
        part.line = in.line;
        part.column = in.column + static_cast<int>(start + lead);
        parts.push_back(std::move(part));
    };
    for (std::size_t i = 0; i < in.text.size(); ++i) {
        const char c = in.text[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) {
            push(i);
            start = i + 1;
        }
    }
    push(in.text.size());
    return parts;
}

double parse_constant(const Located& v) {
    const ExprPtr e = parse_expression(v.text, 0, v.line, v.column);
    if (e->uses_t()) throw ParseError("constant expected, found an expression in t", v.line, v.column);
    return e->eval(0.0);
}

std::vector<ExprPtr> parse_row_entries(const Located& row, int max_state) {
    std::vector<ExprPtr> out;
    for (const Located& entry : split_top(row, ',')) {
        if (entry.text.empty()) throw ParseError("empty matrix entry", entry.line, entry.column);
        out.push_back(parse_expression(entry.text, max_state, entry.line, entry.column));
    }
    return out;
}

}  // namespace

AnySystem parse_system(std::string_view config_text) {
    // logical lines with continuation
    std::vector<Located> lines;
    {
        std::istringstream in{std::string(config_text)};
        std::string raw;
        int lineno = 0;
        Located pending;
        bool continuing = false;
        while (std::getline(in, raw)) {
            ++lineno;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            bool cont = false;
            {
                std::string t = raw;
                while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
                if (!t.empty() && t.back() == '\\') {
                    t.pop_back();
                    cont = true;
                    raw = t;
                }
            }
            if (continuing) {
                pending.text += " " + raw;
            } else {
                pending = Located{raw, lineno, 1};
            }
            continuing = cont;
            if (!cont) lines.push_back(pending);
        }
        if (continuing) lines.push_back(pending);
    }

    std::string section = "system";
    std::map<std::string, Located> system_keys;
    std::map<std::string, Located> perturbation_keys;
    bool has_perturbation = false;

    for (const Located& l : lines) {
        std::size_t lead = 0;
        const std::string body = trim(l.text, &lead);
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError("unterminated section header", l.line, static_cast<int>(lead) + 1);
            section = trim(std::string_view(body).substr(1, body.size() - 2));
            if (section != "system" && section != "perturbation") {
                throw ParseError("unknown section '" + section + "'", l.line, static_cast<int>(lead) + 1);
            }
            if (section == "perturbation") has_perturbation = true;
            continue;
        }
        const auto eq = l.text.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", l.line, static_cast<int>(lead) + 1);
        const std::string key = trim(std::string_view(l.text).substr(0, eq));
        std::size_t vlead = 0;
        Located value;
        value.text = trim(std::string_view(l.text).substr(eq + 1), &vlead);
        value.line = l.line;
        value.column = static_cast<int>(eq + 1 + vlead) + 1;

        static const std::vector<std::string> kSystemKeys{"name", "dim", "domain", "period", "A"};
        static const std::vector<std::string> kPerturbationKeys{"f", "mu", "gamma"};
        const auto& allowed = section == "system" ? kSystemKeys : kPerturbationKeys;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError("unknown key '" + key + "' in section [" + section + "]", l.line,
                             static_cast<int>(lead) + 1);
        }
        auto& target = section == "system" ? system_keys : perturbation_keys;
        if (target.count(key)) throw ParseError("duplicate key '" + key + "'", l.line, static_cast<int>(lead) + 1);
        target[key] = value;
    }

    if (!system_keys.count("A")) throw ParseError("missing coefficient matrix 'A'", 1, 1);
    const Located& a_text = system_keys["A"];
    const auto rows = split_top(a_text, ';');
    std::vector<std::vector<ExprPtr>> grid;
    for (const Located& row : rows) grid.push_back(parse_row_entries(row, 0));

    int dim = static_cast<int>(grid.size());
    if (system_keys.count("dim")) {
        const Located& d = system_keys["dim"];
        const double dv = parse_constant(d);
        if (dv < 1 || dv != std::floor(dv)) throw ParseError("dim must be a positive integer", d.line, d.column);
        dim = static_cast<int>(dv);
    }
    if (static_cast<int>(grid.size()) != dim) {
        throw Error(ErrorKind::ShapeError, "A has " + std::to_string(grid.size()) + " rows but dim = " +
                                               std::to_string(dim));
    }
    std::vector<ExprPtr> entries;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (static_cast<int>(grid[i].size()) != dim) {
            throw Error(ErrorKind::ShapeError, "row " + std::to_string(i + 1) + " of A has " +
                                                   std::to_string(grid[i].size()) + " entries but dim = " +
                                                   std::to_string(dim));
        }
        entries.insert(entries.end(), grid[i].begin(), grid[i].end());
    }

    const std::string name = system_keys.count("name") ? system_keys["name"].text : std::string("unnamed");
    Domain domain = Domain::FullLine;
    if (system_keys.count("domain")) {
        const Located& d = system_keys["domain"];
        try {
            domain = parse_domain(d.text);
        } catch (const Error&) {
            throw ParseError("unknown domain '" + d.text + "'", d.line, d.column);
        }
    }
    std::optional<double> period;
    if (system_keys.count("period")) period = parse_constant(system_keys["period"]);

    auto coeff = [entries, dim](double t) {
        Mat a(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) a(i, j) = entries[static_cast<std::size_t>(i * dim + j)]->eval(t);
        }
        return a;
    };
    LinearSystem linear(name, dim, coeff, domain, period);
    linear.set_entries(entries);

    if (!has_perturbation) return linear;

    if (!perturbation_keys.count("f")) throw ParseError("[perturbation] needs 'f'", 1, 1);
    if (!perturbation_keys.count("mu") || !perturbation_keys.count("gamma")) {
        throw ParseError("[perturbation] needs declared 'mu' and 'gamma'", 1, 1);
    }
    const Located& f_text = perturbation_keys["f"];
    std::vector<ExprPtr> f_entries;
    for (const Located& part : split_top(f_text, ';')) {
        auto row = parse_row_entries(part, dim);
        f_entries.insert(f_entries.end(), row.begin(), row.end());
    }
    if (static_cast<int>(f_entries.size()) != dim) {
        throw Error(ErrorKind::ShapeError, "f has " + std::to_string(f_entries.size()) +
                                               " components but dim = " + std::to_string(dim));
    }
    auto f = [f_entries, dim](double t, const Vec& y) {
        Vec out(dim);
        for (int i = 0; i < dim; ++i) out(i) = f_entries[static_cast<std::size_t>(i)]->eval(t, y.data());
        return out;
    };
    QuasilinearSystem quasi(linear, f, parse_constant(perturbation_keys["mu"]),
                            parse_constant(perturbation_keys["gamma"]));
    quasi.set_f_entries(f_entries);
    return quasi;
}

// ---------------------------------------------------------------------------
// catalog

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries{
        {"markus_yamabe",
         "Markus-Yamabe system: eigenvalues of A(t) have real part -1/4, yet the first fundamental "
         "column grows like e^(t/2). Dichotomy on R with P = diag(0,1), K = 1, alpha = 1/2.",
         "name = markus_yamabe\ndim = 2\n"
         "A = -1 + 1.5*cos(t)^2, 1 - 1.5*cos(t)*sin(t); -1 - 1.5*cos(t)*sin(t), -1 + 1.5*sin(t)^2\n"},
        {"antisym_exp",
         "Antisymmetric A(t) = [[0, e^t], [-e^t, 0]]; orthogonal fundamental matrix, rotation by e^t.",
         "name = antisym_exp\ndim = 2\nA = 0, exp(t); -exp(t), 0\n"},
        {"scalar_arctan",
         "Scalar a(t) = 1/(1+t^2) with X(t) = e^(arctan t); dichotomy spectrum {0}.",
         "name = scalar_arctan\ndim = 1\nA = 1/(1+t^2)\n"},
        {"scalar_linear_t",
         "Scalar a(t) = t; no bounded growth, dichotomy spectrum is the whole line.",
         "name = scalar_linear_t\ndim = 1\nA = t\n"},
        {"auto_diag_113",
         "Autonomous diag(1, 1, -1); spectrum {-1, 1}, rank function 0 / 1 / 3.",
         "name = auto_diag_113\ndim = 3\nA = 1, 0, 0; 0, 1, 0; 0, 0, -1\n"},
        {"coppel_counterexample",
         "x1' = -x1 + e^(2t) x2, x2' = x2: projected bounds hold for P = diag(1,0) without bounded growth.",
         "name = coppel_counterexample\ndim = 2\nA = -1, exp(2*t); 0, 1\n"},
        {"periodic_scalar",
         "Scalar x' = (c + cos t) x with period 2 pi; use periodic_scalar(c), default c = 0.3.",
         "name = periodic_scalar\ndim = 1\nperiod = 2*pi\nA = 0.3 + cos(t)\n"},
        {"palmer_demo",
         "Quasilinear scalar y' = -y + 0.1 sin(y), mu = 0.1, gamma = 0.1 (gap factor 0.2).",
         "name = palmer_demo\ndim = 1\nA = -1\n[perturbation]\nf = 0.1*sin(y1)\nmu = 0.1\ngamma = 0.1\n"},
        {"palmer_tanh",
         "Scalar a(t) = -tanh(t): dichotomies on both half-lines, index 1, bounded solution 1/cosh(t).",
         "name = palmer_tanh\ndim = 1\nA = -tanh(t)\n"},
        {"harmonic_oscillator",
         "Constant rotation generator [[0,1],[-1,0]] with period 2 pi; monodromy I.",
         "name = harmonic_oscillator\ndim = 2\nperiod = 2*pi\nA = 0, 1; -1, 0\n"},
    };
    return entries;
}

AnySystem builtin(std::string_view name) {
    std::string base(name);
    std::optional<std::string> argument;
    if (const auto open = base.find('('); open != std::string::npos) {
        if (base.back() != ')') throw Error(ErrorKind::NotInCatalog, "malformed catalog name '" + base + "'");
        argument = base.substr(open + 1, base.size() - open - 2);
        base = base.substr(0, open);
    }
    for (const auto& entry : catalog()) {
        if (entry.name != base) continue;
        if (!argument) return parse_system(entry.config);
        if (base != "periodic_scalar") {
            throw Error(ErrorKind::NotInCatalog, "catalog entry '" + base + "' takes no parameter");
        }
        const double c = parse_expression(*argument)->eval(0.0);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", c);
        return parse_system("name = periodic_scalar(" + std::string(buf) + ")\ndim = 1\nperiod = 2*pi\nA = " +
                            std::string(buf) + " + cos(t)\n");
    }
    throw Error(ErrorKind::NotInCatalog, "no catalog entry named '" + std::string(name) + "'");
}

}  // namespace dlab
