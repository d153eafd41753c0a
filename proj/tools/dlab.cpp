// dlab: command-line front end for the dichotomy toolkit.
//
//   dlab <transition|floquet|dichotomy|spectrum|reduce|linearize|catalog> [options]
//
// Every command writes <out-dir>/<command>.json (report with its manifest)
// and <out-dir>/<command>.csv. Exit codes: 0 ok, 2 usage or parse error,
// 3 numerical failure.

#include "dlab/dichotomy.hpp"
#include "dlab/error.hpp"
#include "dlab/floquet.hpp"
#include "dlab/linearize.hpp"
#include "dlab/propagate.hpp"
#include "dlab/reduce.hpp"
#include "dlab/report.hpp"
#include "dlab/spectrum.hpp"
#include "dlab/system.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace dlab;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
    std::string system;
    double tol = 1e-10;
    std::string out_dir = "dlab_out";
    std::uint64_t seed = 0;
    bool json_only = false;
    bool csv_only = false;
    bool timing = false;
};

struct Loaded {
    AnySystem sys;
    std::string name;
    std::string source;
    std::string hash;
};

Loaded load_system(const std::string& spec) {
    if (spec.empty()) throw Error(ErrorKind::InvalidInput, "--system is required");
    if (fs::is_regular_file(spec)) {
        std::ifstream in(spec);
        std::stringstream buf;
        buf << in.rdbuf();
        AnySystem sys = parse_system(buf.str());
        const std::string name = linear_part(sys).name();
        return {std::move(sys), name, "file", text_hash(buf.str())};
    }
    AnySystem sys = builtin(spec);
    std::string config;
    for (const auto& e : catalog()) {
        if (spec.rfind(e.name, 0) == 0) config = e.config;
    }
    return {std::move(sys), spec, "builtin", text_hash(spec + "\n" + config)};
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Mat diag_projector(const std::vector<double>& d) {
    Mat p = Mat::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
    return p;
}

// projector from --projector (diagonal entries) or from the splitting estimate
ProjectionMatrix choose_projector(const LinearSystem& sys, const std::vector<double>& diag, double horizon,
                                  double tol) {
    if (!diag.empty()) {
        if (static_cast<int>(diag.size()) != sys.dim()) {
            throw Error(ErrorKind::ShapeError, "--projector needs one diagonal entry per dimension");
        }
        return make_projection(diag_projector(diag));
    }
    SplitOptions so;
    so.tol = tol;
    const SubspaceSplit split = estimate_splitting(sys, horizon, so);
    return orthogonal_projection(split.stable_basis, sys.dim());
}

class Emitter {
public:
    Emitter(const Common& c, std::string command, const Loaded* sys)
        : common_(c), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
        const char* env = std::getenv("DLAB_OUT");
        dir_ = env && *env ? env : common_.out_dir;
        manifest_["command"] = command_;
        if (sys) {
            manifest_["system"] = Json{{"name", sys->name}, {"source", sys->source}, {"hash", sys->hash}};
        } else {
            manifest_["system"] = nullptr;
        }
        manifest_["parameters"] = Json::object();
        manifest_["parameters"]["tol"] = common_.tol;
        manifest_["seed"] = common_.seed;
        manifest_["versions"] = Json{{"dlab", kVersion},
                                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                   std::to_string(EIGEN_MINOR_VERSION)}};
    }

    Json& parameters() { return manifest_["parameters"]; }

    void write(Json report, const std::string& csv) {
        fs::create_directories(dir_);
        Json outputs = Json::array();
        const fs::path json_path = fs::path(dir_) / (command_ + ".json");
        const fs::path csv_path = fs::path(dir_) / (command_ + ".csv");
        const bool want_json = !common_.csv_only || common_.json_only;
        const bool want_csv = !common_.json_only || common_.csv_only;
        if (want_json) outputs.push_back(json_path.string());
        if (want_csv) outputs.push_back(csv_path.string());
        manifest_["outputs"] = outputs;
        if (common_.timing) {
            manifest_["wall_clock_seconds"] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        } else {
            manifest_["wall_clock_seconds"] = nullptr;
        }
        Json doc;
        doc["manifest"] = manifest_;
        for (auto it = report.begin(); it != report.end(); ++it) doc[it.key()] = it.value();
        if (want_json) std::ofstream(json_path) << format_json(doc);
        if (want_csv) std::ofstream(csv_path) << csv;
        for (const auto& p : outputs) std::cout << "wrote " << p.get<std::string>() << "\n";
    }

private:
    const Common& common_;
    std::string command_;
    std::string dir_;
    Json manifest_;
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------

struct TransitionArgs {
    std::optional<double> t;
    double s = 0.0;
    std::string grid;
};

int cmd_transition(const Common& c, const TransitionArgs& a) {
    const Loaded sys = load_system(c.system);
    const LinearSystem& lin = linear_part(sys.sys);
    std::vector<double> times;
    if (!a.grid.empty()) {
        double lo = 0, hi = 0;
        int count = 0;
        if (std::sscanf(a.grid.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2) {
            throw Error(ErrorKind::InvalidInput, "--grid expects a:b:count with count >= 2");
        }
        times = linspace(lo, hi, count);
    } else if (a.t) {
        times = {*a.t};
    } else {
        throw Error(ErrorKind::InvalidInput, "transition needs --t or --grid");
    }
    Emitter out(c, "transition", &sys);
    out.parameters()["s"] = a.s;
    out.parameters()["times"] = times;

    const int n = lin.dim();
    std::ostringstream csv;
    csv << "t,s";
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) csv << ",X_" << i << j;
    }
    csv << "\n";
    Json samples = Json::array();
    double worst_liouville = 0.0;
    for (double t : times) {
        const TransitionSample x = transition_matrix(lin, t, a.s, c.tol);
        const LiouvilleCheck lv = liouville_check(lin, a.s, t, c.tol);
        worst_liouville = std::max(worst_liouville, lv.rel_err);
        csv << num(t) << ',' << num(a.s);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) csv << ',' << num(x.x(i, j));
        }
        csv << "\n";
        samples.push_back(Json{{"t", t}, {"s", a.s}, {"x", to_json(x.x)}, {"liouville_rel_err", lv.rel_err}});
    }
    // adjoint constancy over the increasing grid through s and the times
    std::vector<double> adj_grid = times;
    adj_grid.push_back(a.s);
    std::sort(adj_grid.begin(), adj_grid.end());
    adj_grid.erase(std::unique(adj_grid.begin(), adj_grid.end()), adj_grid.end());
    const double adjoint = adj_grid.size() > 1 ? adjoint_check(lin, adj_grid, c.tol) : 0.0;
    out.write(Json{{"samples", samples},
                   {"checks", Json{{"liouville_rel_err", worst_liouville}, {"adjoint_defect", adjoint}}}},
              csv.str());
    std::cout << "liouville rel_err " << num(worst_liouville) << "\n";
    return 0;
}

int cmd_floquet(const Common& c, int samples) {
    const Loaded sys = load_system(c.system);
    const LinearSystem& lin = linear_part(sys.sys);
    Emitter out(c, "floquet", &sys);
    out.parameters()["samples"] = samples;
    const FloquetData data = monodromy(lin, c.tol);
    const Hyperbolicity hyp = periodic_hyperbolic(data);
    const int n = lin.dim();
    std::ostringstream csv;
    csv << "t";
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) csv << ",Q_" << i << j;
    }
    csv << "\n";
    for (double t : linspace(0.0, data.omega, std::max(2, samples))) {
        const FloquetFactor f = floquet_factor(lin, data, t, c.tol);
        csv << num(t);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) csv << ',' << num(f.q(i, j));
        }
        csv << "\n";
    }
    out.write(Json{{"floquet", to_json(data)},
                   {"hyperbolic", Json{{"hyperbolic", hyp.hyperbolic}, {"margin", hyp.margin}}}},
              csv.str());
    return 0;
}

struct DichotomyArgs {
    std::vector<double> interval{-6, 6};
    std::vector<double> projector;
    std::optional<double> full_line;
};

int cmd_dichotomy(const Common& c, const DichotomyArgs& a) {
    const Loaded sys = load_system(c.system);
    const LinearSystem& lin = linear_part(sys.sys);
    if (a.interval.size() != 2 || !(a.interval[1] > a.interval[0])) {
        throw Error(ErrorKind::InvalidInput, "--interval expects a < b");
    }
    Emitter out(c, "dichotomy", &sys);
    out.parameters()["interval"] = a.interval;
    out.parameters()["projector"] = a.projector;
    const double horizon = std::max(std::fabs(a.interval[0]), std::fabs(a.interval[1]));
    const ProjectionMatrix p = choose_projector(lin, a.projector, horizon, c.tol);
    CertifyOptions co;
    co.integration_tol = c.tol;
    const DichotomyCertificate cert = certify(lin, p, a.interval[0], a.interval[1], {}, co);
    Json report{{"certificate", to_json(cert)}};
    std::ostringstream csv;
    csv << "a,b,rank,k,alpha,flag,residual\n";
    csv << num(cert.a) << ',' << num(cert.b) << ',' << cert.rank() << ',' << num(cert.k) << ',' << num(cert.alpha)
        << ',' << to_string(cert.flag) << ',' << num(cert.residual) << "\n";
    if (a.full_line) {
        out.parameters()["full_line_horizon"] = *a.full_line;
        const FullLineReport fl = full_line_criterion(lin, *a.full_line, c.tol);
        report["full_line"] = Json{{"passes", fl.passes},
                                   {"index", fl.index},
                                   {"index_determined", fl.index_determined},
                                   {"angle", fl.angle}};
    }
    out.write(report, csv.str());
    std::cout << "flag " << to_string(cert.flag) << " K " << num(cert.k) << " alpha " << num(cert.alpha) << "\n";
    return 0;
}

struct SpectrumArgs {
    double horizon = 40.0;
    double window = 8.0;
    bool full_line = false;
    std::vector<double> lambdas;
};

int cmd_spectrum(const Common& c, const SpectrumArgs& a) {
    if (!(a.window > 0)) throw Error(ErrorKind::InvalidInput, "--L must be positive");
    if (!(a.horizon > 0)) throw Error(ErrorKind::InvalidInput, "--T must be positive");
    const Loaded sys = load_system(c.system);
    const LinearSystem& lin = linear_part(sys.sys);
    Emitter out(c, "spectrum", &sys);
    out.parameters()["T"] = a.horizon;
    out.parameters()["L"] = a.window;
    out.parameters()["full_line"] = a.full_line;
    out.parameters()["lambdas"] = a.lambdas;
    SpectrumOptions so;
    so.tol = c.tol;
    const SpectrumReport rep = a.full_line ? fullline_spectrum(lin, a.horizon, a.window, so)
                                           : halfline_spectrum(lin, a.horizon, a.window, so);
    std::ostringstream csv;
    csv << "lambda,rank,source\n";
    for (const ResolventGap& g : rep.gaps) {
        double lambda = 0.5 * (g.lo + g.hi);
        if (std::isinf(g.lo) && std::isinf(g.hi)) {
            lambda = 0.0;
        } else if (std::isinf(g.lo)) {
            lambda = g.hi - 1.0;
        } else if (std::isinf(g.hi)) {
            lambda = g.lo + 1.0;
        }
        csv << num(lambda) << ',' << g.rank << ",report\n";
    }
    Json report{{"spectrum", to_json(rep)}};
    if (!a.lambdas.empty()) {
        const RankSweep sweep = rank_step_function(lin, a.lambdas, a.horizon, c.tol);
        Json pts = Json::array();
        for (const ShiftResult& r : sweep.points) {
            csv << num(r.lambda) << ',' << (r.rank ? std::to_string(*r.rank) : "") << ",shifted\n";
            pts.push_back(Json{{"lambda", r.lambda},
                               {"verdict", std::string(to_string(r.verdict))},
                               {"rank", r.rank ? Json(*r.rank) : Json(nullptr)},
                               {"alpha", r.alpha},
                               {"k", r.k}});
        }
        report["shifted"] = Json{{"points", pts}, {"monotone", sweep.monotone}, {"inconsistencies", sweep.inconsistencies}};
    }
    out.write(report, csv.str());
    for (const auto& iv : rep.intervals) std::cout << "interval [" << num(iv.lo) << ", " << num(iv.hi) << "]\n";
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

struct ReduceArgs {
    std::vector<double> interval{0, 5};
    double h = 0.01;
    std::vector<double> projector;
    bool spectral = false;
    double window = 8.0;
};

int cmd_reduce(const Common& c, const ReduceArgs& a) {
    const Loaded sys = load_system(c.system);
    const LinearSystem& lin = linear_part(sys.sys);
    if (a.interval.size() != 2 || !(a.interval[1] > a.interval[0])) {
        throw Error(ErrorKind::InvalidInput, "--interval expects a < b");
    }
    if (!(a.h > 0)) throw Error(ErrorKind::InvalidInput, "--step must be positive");
    Emitter out(c, "reduce", &sys);
    out.parameters()["interval"] = a.interval;
    out.parameters()["h"] = a.h;
    out.parameters()["spectral"] = a.spectral;
    const int count = static_cast<int>(std::llround((a.interval[1] - a.interval[0]) / a.h)) + 1;
    const std::vector<double> grid = linspace(a.interval[0], a.interval[1], count);
    Json report;
    ReductionResult res;
    if (a.spectral) {
        out.parameters()["L"] = a.window;
        SpectrumOptions so;
        so.tol = c.tol;
        const SpectrumReport spec = halfline_spectrum(lin, a.interval[1], a.window, so);
        res = spectral_block_diagonalize(lin, spec, grid, c.tol);
        report["reduction"] = to_json(res);
        Json blocks = Json::array();
        for (int i = 0; i < res.blocks(); ++i) blocks.push_back(to_json(block_spectrum(res, i, a.window)));
        report["block_spectra"] = blocks;
    } else {
        out.parameters()["projector"] = a.projector;
        const ProjectionMatrix p =
            choose_projector(lin, a.projector, std::max(std::fabs(a.interval[0]), std::fabs(a.interval[1])), c.tol);
        res = coppel_similarity(lin, p, grid, c.tol);
        report["reduction"] = to_json(res);
        CertifyOptions co;
        co.integration_tol = c.tol;
        const auto [first, second] = subsystem_dichotomies(res, std::nullopt, co);
        report["subsystems"] = Json{{"contraction", first ? to_json(*first) : Json(nullptr)},
                                    {"expansion", second ? to_json(*second) : Json(nullptr)}};
    }
    const int n = lin.dim();
    std::ostringstream csv;
    csv << "t,s_norm,s_inv_norm";
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) csv << ",B_" << i << j;
    }
    csv << "\n";
    for (std::size_t k = 0; k < res.grid.size(); ++k) {
        csv << num(res.grid[k]) << ',' << num(operator_norm_2(res.s[k])) << ',' << num(operator_norm_2(res.s_inv[k]));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) csv << ',' << num(res.b[k](i, j));
        }
        csv << "\n";
    }
    out.write(report, csv.str());
    std::cout << "||S|| <= " << num(res.s_norm_bound) << ", residual " << num(res.similarity_residual) << "\n";
    return 0;
}

struct LinearizeArgs {
    std::string mode = "half-line-plus";
    double eps = 1e-6;
    std::vector<std::string> probes;
    int random_probes = 0;
    double horizon = 10.0;
    std::optional<double> conjugacy;
};

std::pair<double, Vec> parse_probe(const std::string& text, int n) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidInput, "--probe expects t:p1,p2,...");
    std::vector<double> comps;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    try {
        const double t = std::stod(text.substr(0, colon));
        while (std::getline(ss, item, ',')) comps.push_back(std::stod(item));
        if (static_cast<int>(comps.size()) != n) throw Error(ErrorKind::ShapeError, "probe dimension mismatch");
        return {t, Eigen::Map<Vec>(comps.data(), n)};
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidInput, "--probe expects numbers: '" + text + "'");
    }
}

int cmd_linearize(const Common& c, const LinearizeArgs& a) {
    const Loaded sys = load_system(c.system);
    const QuasilinearSystem* q = quasilinear_part(sys.sys);
    if (!q) throw Error(ErrorKind::InvalidInput, "linearize needs a system with a [perturbation] section");
    const LinearizationMode mode = parse_linearization_mode(a.mode);
    Emitter out(c, "linearize", &sys);
    out.parameters()["mode"] = std::string(to_string(mode));
    out.parameters()["eps"] = a.eps;
    out.parameters()["T"] = a.horizon;
    out.parameters()["probes"] = a.probes;
    out.parameters()["random_probes"] = a.random_probes;
    const LinearSystem& lin = q->linear();
    const int n = lin.dim();
    CertifyOptions co;
    co.integration_tol = c.tol;
    DichotomyCertificate cert;
    if (mode == LinearizationMode::HalfLinePlus) {
        cert = certify(lin, canonical_projection(n, n), 0.0, a.horizon, {}, co);
    } else {
        cert = certify(lin, choose_projector(lin, {}, a.horizon, c.tol), -a.horizon, a.horizon, {}, co);
    }
    LinearizationOptions lo;
    lo.integration_tol = c.tol;
    const LinearizationContext ctx = make_context(*q, cert, a.eps, mode, lo);

    std::vector<std::pair<double, Vec>> points;
    for (const auto& p : a.probes) points.push_back(parse_probe(p, n));
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> ut(0.0, a.horizon), up(-1.0, 1.0);
    for (int i = 0; i < a.random_probes; ++i) {
        const double t = ut(rng);
        Vec p(n);
        for (int j = 0; j < n; ++j) p(j) = up(rng);
        points.emplace_back(t, p);
    }
    std::vector<MapEvaluation> evals;
    Json probes = Json::array();
    double worst = 0.0;
    for (const auto& [t, p] : points) {
        MapEvaluation h = eval_h(ctx, t, p);
        const MapEvaluation g = eval_g(ctx, t, p);
        const double inv = inverse_residual(ctx, t, p);
        worst = std::max(worst, inv);
        Json entry{{"t", t},
                   {"point", to_json(p)},
                   {"h", to_json(h.output)},
                   {"g", to_json(g.output)},
                   {"iterations", h.iterations},
                   {"inverse_residual", inv}};
        if (a.conjugacy) entry["conjugacy_residual"] = conjugacy_residual(ctx, t, p, *a.conjugacy);
        probes.push_back(entry);
        h.residual = inv;
        evals.push_back(h);
    }
    std::ostringstream csv;
    write_map_csv(csv, evals);
    out.write(Json{{"context", to_json(ctx)}, {"certificate", to_json(cert)}, {"probes", probes},
                   {"max_inverse_residual", worst}},
              csv.str());
    std::cout << "q " << num(ctx.gap_factor) << ", max inverse residual " << num(worst) << "\n";
    return 0;
}

int cmd_catalog(const Common& c) {
    Emitter out(c, "catalog", nullptr);
    Json entries = Json::array();
    std::ostringstream csv;
    csv << "name,dim,description\n";
    for (const auto& e : catalog()) {
        const AnySystem sys = builtin(e.name);
        const int dim = linear_part(sys).dim();
        entries.push_back(Json{{"name", e.name},
                               {"dim", dim},
                               {"quasilinear", quasilinear_part(sys) != nullptr},
                               {"description", e.description}});
        csv << e.name << ',' << dim << ",\"" << e.description << "\"\n";
        std::cout << e.name << "  " << e.description << "\n";
    }
    out.write(Json{{"entries", entries}}, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exponential dichotomy toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Common c;
    auto add_common = [&](CLI::App* sub, bool needs_system) {
        auto* opt = sub->add_option("--system", c.system, "catalog name or system file");
        if (needs_system) opt->required();
        sub->add_option("--tol", c.tol, "integration tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--out-dir", c.out_dir, "output directory (DLAB_OUT overrides)");
        sub->add_option("--seed", c.seed, "seed for random probes");
        sub->add_flag("--json", c.json_only, "write only the JSON report");
        sub->add_flag("--csv", c.csv_only, "write only the CSV table");
        sub->add_flag("--timing", c.timing, "record wall-clock time in the manifest");
    };

    TransitionArgs ta;
    auto* tr = app.add_subcommand("transition", "transition matrices X(t,s) with Liouville and adjoint checks");
    add_common(tr, true);
    tr->add_option("--t", ta.t, "final time");
    tr->add_option("--s", ta.s, "initial time");
    tr->add_option("--grid", ta.grid, "a:b:count grid of final times");

    int floquet_samples = 21;
    auto* fl = app.add_subcommand("floquet", "monodromy, multipliers and the Floquet factor Q(t)");
    add_common(fl, true);
    fl->add_option("--samples", floquet_samples, "Q(t) samples over one period");

    DichotomyArgs da;
    auto* di = app.add_subcommand("dichotomy", "(K, alpha) certificate on an interval");
    add_common(di, true);
    di->add_option("--interval", da.interval, "a b")->expected(2);
    di->add_option("--projector", da.projector, "diagonal of P at the anchor")->delimiter(',');
    di->add_option("--full-line", da.full_line, "also run the full-line criterion with this horizon");

    SpectrumArgs sa;
    auto* sp = app.add_subcommand("spectrum", "dichotomy spectrum on [0, T]");
    add_common(sp, true);
    sp->add_option("--T", sa.horizon, "horizon");
    sp->add_option("--L", sa.window, "Bohl window");
    sp->add_flag("--full-line", sa.full_line, "unite forward and backward half-lines");
    sp->add_option("--lambda", sa.lambdas, "shifts for the shifted-system test")->delimiter(',');

    ReduceArgs ra;
    auto* re = app.add_subcommand("reduce", "Coppel or spectral block diagonalization");
    add_common(re, true);
    re->add_option("--interval", ra.interval, "a b")->expected(2);
    re->add_option("--step", ra.h, "grid spacing");
    re->add_option("--projector", ra.projector, "diagonal of P at the anchor")->delimiter(',');
    re->add_flag("--spectral", ra.spectral, "one block per spectral interval (grid [0, T])");
    re->add_option("--L", ra.window, "Bohl window for --spectral");

    LinearizeArgs la;
    auto* li = app.add_subcommand("linearize", "topological equivalence maps H and G");
    add_common(li, true);
    li->add_option("--mode", la.mode, "half-line-plus or full-line");
    li->add_option("--eps", la.eps, "evaluation tolerance")->check(CLI::PositiveNumber);
    li->add_option("--probe", la.probes, "t:p1,p2,... (repeatable)");
    li->add_option("--probes", la.random_probes, "number of seeded random probes");
    li->add_option("--T", la.horizon, "certificate horizon and probe time range");
    li->add_option("--conjugacy", la.conjugacy, "conjugacy residual horizon per probe");

    auto* ca = app.add_subcommand("catalog", "list built-in systems");
    add_common(ca, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*tr) return cmd_transition(c, ta);
        if (*fl) return cmd_floquet(c, floquet_samples);
        if (*di) return cmd_dichotomy(c, da);
        if (*sp) return cmd_spectrum(c, sa);
        if (*re) return cmd_reduce(c, ra);
        if (*li) return cmd_linearize(c, la);
        if (*ca) return cmd_catalog(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_usage_error(e.kind()) ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
