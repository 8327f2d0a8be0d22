// Command-line driver: seed, continue, and diagnose ground-state branches of
// the stationary NLS equation, and export plot-ready diagram data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlsbif/diagnostics.hpp"
#include "nlsbif/io.hpp"

using namespace nlsbif;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIdentity = 2;
constexpr int kExitSolver = 3;
constexpr int kExitConfig = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::config:
        case ErrorKind::structural:
        case ErrorKind::io:
            return kExitConfig;
        default:
            return kExitSolver;
    }
}

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "run-config file (key = value tree)");
    cmd->add_option("--set", c.sets,
                    "override a config key, e.g. --set problem.p=1.0")
        ->take_all();
}

KeyTree resolve_tree(const CommonOpts& c) {
    KeyTree tree;
    if (!c.config_path.empty()) tree = load_key_tree(c.config_path);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::config,
                "--set needs key=value: " + kv);
        tree[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return tree;
}

ProfileTemplate template_from(const RunConfig& cfg) {
    ProfileTemplate t;
    t.centers = cfg.seed_centers;
    for (int s : cfg.seed_signs) t.signs.push_back(s);
    t.E = cfg.seed_E;
    t.renormalized_frame = true;
    require(!t.centers.empty(), ErrorKind::config,
            "seed.template must list at least one profile");
    return t;
}

int cmd_limiting(const CommonOpts& copts) {
    KeyTree tree = resolve_tree(copts);
    RunConfig cfg = config_from_tree(tree);
    GridPtr grid = cfg.make_grid();
    LimitingProfile prof = solve_uinfinity(cfg.problem, grid);

    fs::create_directories(cfg.output_dir);
    const std::string csv = (fs::path(cfg.output_dir) / "uinf.csv").string();
    write_profile_csv(csv, prof.u_inf);

    json meta;
    meta["mass"] = prof.mass;
    meta["q_norm"] = prof.q_norm;
    meta["residual"] = prof.residual;
    meta["log_derivative_ratio"] = log_derivative_ratio(prof);
    meta["peak"] = lp_norm(prof.u_inf, std::numeric_limits<double>::infinity());
    meta["p"] = cfg.problem.p;
    meta["sigma"] = cfg.problem.sigma;
    meta["n"] = cfg.problem.n;
    const std::string jpath = (fs::path(cfg.output_dir) / "limiting.json").string();
    std::ofstream out(jpath);
    out << meta.dump(1) << "\n";
    std::cout << "limiting profile written to " << csv << " and " << jpath << "\n";
    return kExitOk;
}

int cmd_seed(const CommonOpts& copts, const std::string& out_stem) {
    KeyTree tree = resolve_tree(copts);
    RunConfig cfg = config_from_tree(tree);
    fs::create_directories(cfg.output_dir);
    const std::string stem =
        out_stem.empty() ? (fs::path(cfg.output_dir) / "branch").string() : out_stem;

    Branch br;
    br.id = 0;
    ProblemSpec used_prob = cfg.problem;
    SeedOptions sopts;
    sopts.tol = std::min(1e-12, cfg.continuation.tol_newton);
    sopts.E_switch = cfg.E_switch;
    if (cfg.seed_kind == "from_zero") {
        GridPtr grid = cfg.make_grid();
        LinearGroundState lin = linear_ground_state(cfg.problem.potential, grid);
        BranchPoint pt = seed_from_zero(cfg.problem, lin, cfg.seed_amplitude, sopts,
                                        cfg.continuation);
        br.seed_kind = SeedKind::from_zero;
        br.frame = PFrame::physical;
        br.grid = grid;
        br.points.push_back(std::move(pt));
    } else if (cfg.seed_kind == "switched") {
        ProblemSpec parent_prob;
        Branch parent = load_branch(cfg.seed_parent, &parent_prob);
        require(cfg.seed_event >= 0 &&
                    cfg.seed_event < static_cast<int>(parent.events.size()),
                ErrorKind::config, "seed.event out of range for the parent branch");
        ContinuationConfig ccfg = cfg.continuation;
        ccfg.enforce_reflection = false;
        br = switch_branch(parent_prob, parent.events[static_cast<size_t>(cfg.seed_event)],
                           parent, cfg.seed_delta, ccfg);
        br.id = parent.id + 1;
        br.parent_event = cfg.seed_event;
        used_prob = parent_prob;
    } else {
        GridPtr rgrid = cfg.make_renorm_grid();
        ProfileTemplate t = template_from(cfg);
        double cmax = 0.0;
        for (double c : t.centers) cmax = std::max(cmax, std::abs(c));
        require(cmax * std::sqrt(cfg.seed_E) + 15.0 <= cfg.renorm_L,
                ErrorKind::config,
                "renorm.L too small for the template centers at seed.E");
        LimitingProfile prof = solve_uinfinity(cfg.problem, cfg.make_grid());
        BranchPoint pt = seed_from_infinity(cfg.problem, t, prof, cfg.seed_E, rgrid,
                                            sopts, cfg.continuation);
        br.seed_kind = SeedKind::from_infinity;
        br.frame = PFrame::renormalized;
        br.grid = rgrid;
        br.points.push_back(std::move(pt));
    }
    save_branch(stem, br, used_prob, config_hash(tree));
    std::printf("seeded branch at E = %.10g (N = %.10g), written to %s.json\n",
                br.points[0].E, br.points[0].N, stem.c_str());
    return kExitOk;
}

int cmd_continue(const CommonOpts& copts, const std::string& stem,
                 const std::string& direction) {
    KeyTree tree = resolve_tree(copts);
    RunConfig cfg = config_from_tree(tree);
    ProblemSpec prob;
    std::string stored_hash;
    Branch br = load_branch(stem, &prob, &stored_hash);
    require(stored_hash == config_hash(tree), ErrorKind::config,
            "config hash does not match the branch file (pass the producing config)");
    require(direction == "up" || direction == "down", ErrorKind::config,
            "--direction must be up or down");
    ContinuationConfig ccfg = cfg.continuation;
    continue_branch(prob, br, direction == "up" ? 1 : -1, ccfg);
    save_branch(stem, br, prob, stored_hash);
    std::printf("branch now has %zu points, %zu events%s; tail E = %.10g\n",
                br.points.size(), br.events.size(),
                br.stalled ? " (stalled)" : "", br.points.back().E);
    return kExitOk;
}

int cmd_diagnose(const CommonOpts& copts, const std::string& stem,
                 const std::string& out_path) {
    KeyTree tree = resolve_tree(copts);
    RunConfig cfg = config_from_tree(tree);
    ProblemSpec prob;
    Branch br = load_branch(stem, &prob);

    json out;
    bool all_pass = true;
    if (cfg.diag_stationarity) {
        IdentityReport r = stationarity_report(br, cfg.tol_stationarity);
        out["stationarity"] = {{"max_residual", r.max_residual},
                               {"tolerance", r.tolerance},
                               {"pass", r.pass}};
        all_pass = all_pass && r.pass;
    }
    if (cfg.diag_pohozaev && prob.potential.has_closed_form()) {
        IdentityReport r = pohozaev_report(prob, br, cfg.tol_pohozaev);
        out["pohozaev"] = {{"max_residual", r.max_residual},
                           {"tolerance", r.tolerance},
                           {"pass", r.pass}};
        all_pass = all_pass && r.pass;
    }
    if (cfg.diag_energy_mass && br.points.size() >= 3) {
        IdentityReport r = energy_mass_relation(br, cfg.tol_fd_laws);
        out["energy_mass"] = {{"max_residual", r.max_residual},
                              {"tolerance", r.tolerance},
                              {"pass", r.pass}};
        all_pass = all_pass && r.pass;
    }
    if (cfg.diag_dq && br.points.size() >= 3) {
        IdentityReport r = dq_law(prob, br, cfg.tol_fd_laws);
        out["dq_law"] = {{"max_residual", r.max_residual},
                         {"tolerance", r.tolerance},
                         {"pass", r.pass}};
        all_pass = all_pass && r.pass;
    }
    out["points"] = br.points.size();
    out["events"] = br.events.size();
    out["all_pass"] = all_pass;

    const std::string text = out.dump(1) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out_path);
        f << text;
    }
    return all_pass ? kExitOk : kExitIdentity;
}

int cmd_diagram(const std::vector<std::string>& stems, const std::string& out_path) {
    require(!stems.empty(), ErrorKind::config, "diagram needs branch files");
    std::vector<Branch> branches;
    for (const auto& s : stems) branches.push_back(load_branch(s));
    write_diagram_csv(out_path, branches);
    std::printf("diagram with %zu branches written to %s\n", branches.size(),
                out_path.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlsbif: ground-state branches of the stationary NLS equation"};
    app.require_subcommand(1);

    CommonOpts c_lim, c_seed, c_cont, c_diag;
    std::string seed_out, cont_stem, cont_dir = "up", diag_stem, diag_out;
    std::string diagram_out = "diagram.csv";
    std::vector<std::string> diagram_stems;

    CLI::App* lim = app.add_subcommand("limiting", "solve and export u_infinity");
    add_common(lim, c_lim);

    CLI::App* seed = app.add_subcommand("seed", "seed a branch (from zero or infinity)");
    add_common(seed, c_seed);
    seed->add_option("--out", seed_out, "output branch stem (default <output.dir>/branch)");

    CLI::App* cont = app.add_subcommand("continue", "extend a branch file");
    add_common(cont, c_cont);
    cont->add_option("--branch", cont_stem, "branch file stem")->required();
    cont->add_option("--direction", cont_dir, "up or down");

    CLI::App* diag = app.add_subcommand("diagnose", "run identity reports on a branch");
    add_common(diag, c_diag);
    diag->add_option("--branch", diag_stem, "branch file stem")->required();
    diag->add_option("--out", diag_out, "write the JSON report here (default stdout)");

    CLI::App* dgr = app.add_subcommand("diagram", "merge branches into a CSV diagram");
    dgr->add_option("--out", diagram_out, "output CSV path");
    dgr->add_option("branches", diagram_stems, "branch file stems")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (lim->parsed()) return cmd_limiting(c_lim);
        if (seed->parsed()) return cmd_seed(c_seed, seed_out);
        if (cont->parsed()) return cmd_continue(c_cont, cont_stem, cont_dir);
        if (diag->parsed()) return cmd_diagnose(c_diag, diag_stem, diag_out);
        if (dgr->parsed()) return cmd_diagram(diagram_stems, diagram_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitOk;
}
