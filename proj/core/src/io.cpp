#include "nlsbif/io.hpp"

#include "nlsbif/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nlsbif {

namespace fs = std::filesystem;
using nlohmann::json;

GridPtr RunConfig::make_grid() const {
    if (problem.frame == Frame::line) return Grid::line(grid_L, grid_npoints);
    return Grid::radial(problem.n, grid_L, grid_npoints);
}

GridPtr RunConfig::make_renorm_grid() const {
    if (problem.frame == Frame::line) return Grid::line(renorm_L, renorm_npoints);
    return Grid::radial(problem.n, renorm_L, renorm_npoints);
}

void RunConfig::validate() const {
    try {
        problem.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, std::string("invalid problem: ") + e.what());
    }
    require(grid_npoints >= 8 && renorm_npoints >= 8, ErrorKind::config,
            "grids need npoints >= 8");
    require(grid_L > 0 && renorm_L > 0, ErrorKind::config, "grids need L > 0");
    require(continuation.E_min < continuation.E_max, ErrorKind::config,
            "need E_min < E_max");
    require(continuation.tol_newton > 0 && tol_stationarity > 0 &&
                tol_pohozaev > 0 && tol_fd_laws > 0,
            ErrorKind::config, "tolerances must be positive");
    require(continuation.ds_min > 0 && continuation.ds0 >= continuation.ds_min &&
                continuation.ds_max >= continuation.ds0,
            ErrorKind::config, "need ds_min <= ds0 <= ds_max");
    require(E_switch > 0, ErrorKind::config, "E_switch must be positive");
    require(seed_kind == "from_zero" || seed_kind == "from_infinity" ||
                seed_kind == "switched",
            ErrorKind::config,
            "seed.kind must be from_zero, from_infinity or switched");
    if (seed_kind == "switched") {
        require(!seed_parent.empty(), ErrorKind::config,
                "switched seeds need seed.parent");
        require(seed_delta != 0.0, ErrorKind::config,
                "switched seeds need a nonzero seed.delta");
    }
}

KeyTree parse_key_tree(const std::string& text) {
    KeyTree tree;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::config,
                "config line " + std::to_string(lineno) + " has no '='");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        require(!key.empty(), ErrorKind::config,
                "config line " + std::to_string(lineno) + " has an empty key");
        tree[key] = val;
    }
    return tree;
}

KeyTree load_key_tree(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::config, "cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_tree(ss.str());
}

namespace {

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        require(pos == v.size(), ErrorKind::config, "bad number");
        return x;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(ErrorKind::config, "config key '" + key + "' has a bad number: " + v);
    }
}

int to_int(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    require(x == static_cast<int>(x), ErrorKind::config,
            "config key '" + key + "' must be an integer");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorKind::config, "config key '" + key + "' must be a boolean: " + v);
}

// "+1@4.0,-1@0.0" -> signs/centers
void parse_template(const std::string& v, std::vector<int>& signs,
                    std::vector<double>& centers) {
    signs.clear();
    centers.clear();
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        const auto at = tok.find('@');
        require(at != std::string::npos, ErrorKind::config,
                "seed.template item needs sign@center: " + tok);
        std::string s = tok.substr(0, at);
        int sign = 0;
        if (s == "+" || s == "+1" || s == "1")
            sign = 1;
        else if (s == "-" || s == "-1")
            sign = -1;
        require(sign != 0, ErrorKind::config, "bad template sign: " + s);
        signs.push_back(sign);
        centers.push_back(to_double("seed.template", tok.substr(at + 1)));
    }
    require(!signs.empty(), ErrorKind::config, "seed.template is empty");
}

bool starts_with(const std::string& s, const std::string& pre) {
    return s.rfind(pre, 0) == 0;
}

} // namespace

RunConfig config_from_tree(const KeyTree& tree) {
    RunConfig cfg;
    std::set<std::string> known = {
        "problem.p", "problem.sigma", "problem.n", "problem.frame",
        "grid.L", "grid.npoints", "renorm.L", "renorm.npoints",
        "potential.family", "potential.reflection",
        "continuation.E_min", "continuation.E_max", "continuation.ds0",
        "continuation.ds_min", "continuation.ds_max", "continuation.grow",
        "continuation.tol_newton", "continuation.max_newton_iter",
        "continuation.enforce_reflection", "continuation.detect_events",
        "continuation.record_fields", "continuation.track_eigs",
        "continuation.n_eigs", "continuation.event_bracket_rel",
        "continuation.fold_tangent_threshold",
        "run.E_switch",
        "seed.kind", "seed.amplitude", "seed.E", "seed.template",
        "seed.parent", "seed.event", "seed.delta",
        "diagnostics.stationarity", "diagnostics.pohozaev",
        "diagnostics.energy_mass", "diagnostics.dq",
        "diagnostics.tol_stationarity", "diagnostics.tol_pohozaev",
        "diagnostics.tol_fd_laws",
        "output.dir",
    };
    // wells are indexed keys
    for (const auto& [k, v] : tree) {
        if (starts_with(k, "potential.well.")) {
            const std::string rest = k.substr(15);
            const auto dot = rest.find('.');
            require(dot != std::string::npos, ErrorKind::config,
                    "well keys look like potential.well.<i>.depth: " + k);
            const std::string fieldname = rest.substr(dot + 1);
            require(fieldname == "depth" || fieldname == "center" ||
                        fieldname == "width",
                    ErrorKind::config, "unknown well field: " + k);
            continue;
        }
        require(known.count(k) > 0, ErrorKind::config, "unknown config key: " + k);
        (void)v;
    }

    auto get = [&](const std::string& k) -> const std::string* {
        auto it = tree.find(k);
        return it == tree.end() ? nullptr : &it->second;
    };

    if (auto v = get("problem.p")) cfg.problem.p = to_double("problem.p", *v);
    if (auto v = get("problem.sigma")) cfg.problem.sigma = to_double("problem.sigma", *v);
    if (auto v = get("problem.n")) cfg.problem.n = to_int("problem.n", *v);
    if (auto v = get("problem.frame")) {
        if (*v == "line")
            cfg.problem.frame = Frame::line;
        else if (*v == "radial")
            cfg.problem.frame = Frame::radial;
        else
            fail(ErrorKind::config, "problem.frame must be line or radial");
    }
    if (auto v = get("grid.L")) cfg.grid_L = to_double("grid.L", *v);
    if (auto v = get("grid.npoints")) cfg.grid_npoints = to_int("grid.npoints", *v);
    if (auto v = get("renorm.L")) cfg.renorm_L = to_double("renorm.L", *v);
    if (auto v = get("renorm.npoints")) cfg.renorm_npoints = to_int("renorm.npoints", *v);

    if (auto v = get("potential.family")) {
        if (*v == "poschl_teller")
            cfg.problem.potential.family = PotentialSpec::Family::poschl_teller;
        else if (*v == "gaussian")
            cfg.problem.potential.family = PotentialSpec::Family::gaussian;
        else
            fail(ErrorKind::config,
                 "potential.family must be poschl_teller or gaussian in configs");
    }
    if (auto v = get("potential.reflection"))
        cfg.problem.potential.reflection_center = to_double("potential.reflection", *v);
    // wells: contiguous indices from 0
    for (int i = 0;; ++i) {
        const std::string base = "potential.well." + std::to_string(i) + ".";
        auto d = get(base + "depth");
        auto c = get(base + "center");
        auto w = get(base + "width");
        if (!d && !c && !w) break;
        PotentialSpec::Well well;
        if (d) well.depth = to_double(base + "depth", *d);
        if (c) well.center = to_double(base + "center", *c);
        if (w) well.width = to_double(base + "width", *w);
        require(well.depth > 0.0, ErrorKind::config, "well depth must be positive");
        cfg.problem.potential.wells.push_back(well);
    }

    if (auto v = get("continuation.E_min")) cfg.continuation.E_min = to_double("continuation.E_min", *v);
    if (auto v = get("continuation.E_max")) cfg.continuation.E_max = to_double("continuation.E_max", *v);
    if (auto v = get("continuation.ds0")) cfg.continuation.ds0 = to_double("continuation.ds0", *v);
    if (auto v = get("continuation.ds_min")) cfg.continuation.ds_min = to_double("continuation.ds_min", *v);
    if (auto v = get("continuation.ds_max")) cfg.continuation.ds_max = to_double("continuation.ds_max", *v);
    if (auto v = get("continuation.grow")) cfg.continuation.grow = to_double("continuation.grow", *v);
    if (auto v = get("continuation.tol_newton")) cfg.continuation.tol_newton = to_double("continuation.tol_newton", *v);
    if (auto v = get("continuation.max_newton_iter")) cfg.continuation.max_newton_iter = to_int("continuation.max_newton_iter", *v);
    if (auto v = get("continuation.enforce_reflection")) cfg.continuation.enforce_reflection = to_bool("continuation.enforce_reflection", *v);
    if (auto v = get("continuation.detect_events")) cfg.continuation.detect_events = to_bool("continuation.detect_events", *v);
    if (auto v = get("continuation.record_fields")) cfg.continuation.record_fields = to_bool("continuation.record_fields", *v);
    if (auto v = get("continuation.track_eigs")) cfg.continuation.track_eigs = to_bool("continuation.track_eigs", *v);
    if (auto v = get("continuation.n_eigs")) cfg.continuation.n_eigs = to_int("continuation.n_eigs", *v);
    if (auto v = get("continuation.event_bracket_rel")) cfg.continuation.event_bracket_rel = to_double("continuation.event_bracket_rel", *v);
    if (auto v = get("continuation.fold_tangent_threshold")) cfg.continuation.fold_tangent_threshold = to_double("continuation.fold_tangent_threshold", *v);

    if (auto v = get("run.E_switch")) cfg.E_switch = to_double("run.E_switch", *v);

    if (auto v = get("seed.kind")) cfg.seed_kind = *v;
    if (auto v = get("seed.amplitude")) cfg.seed_amplitude = to_double("seed.amplitude", *v);
    if (auto v = get("seed.E")) cfg.seed_E = to_double("seed.E", *v);
    if (auto v = get("seed.template")) parse_template(*v, cfg.seed_signs, cfg.seed_centers);
    if (auto v = get("seed.parent")) cfg.seed_parent = *v;
    if (auto v = get("seed.event")) cfg.seed_event = to_int("seed.event", *v);
    if (auto v = get("seed.delta")) cfg.seed_delta = to_double("seed.delta", *v);

    if (auto v = get("diagnostics.stationarity")) cfg.diag_stationarity = to_bool("diagnostics.stationarity", *v);
    if (auto v = get("diagnostics.pohozaev")) cfg.diag_pohozaev = to_bool("diagnostics.pohozaev", *v);
    if (auto v = get("diagnostics.energy_mass")) cfg.diag_energy_mass = to_bool("diagnostics.energy_mass", *v);
    if (auto v = get("diagnostics.dq")) cfg.diag_dq = to_bool("diagnostics.dq", *v);
    if (auto v = get("diagnostics.tol_stationarity")) cfg.tol_stationarity = to_double("diagnostics.tol_stationarity", *v);
    if (auto v = get("diagnostics.tol_pohozaev")) cfg.tol_pohozaev = to_double("diagnostics.tol_pohozaev", *v);
    if (auto v = get("diagnostics.tol_fd_laws")) cfg.tol_fd_laws = to_double("diagnostics.tol_fd_laws", *v);

    if (auto v = get("output.dir")) cfg.output_dir = *v;

    cfg.validate();
    return cfg;
}

std::string canonical_config_text(const KeyTree& tree) {
    std::ostringstream out;
    for (const auto& [k, v] : tree) out << k << " = " << v << "\n";
    return out.str();
}

std::string config_hash(const KeyTree& tree) {
    const std::string text = canonical_config_text(tree);
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {

const char* frame_name(Frame f) { return f == Frame::line ? "line" : "radial"; }
const char* pframe_name(PFrame f) {
    return f == PFrame::physical ? "physical" : "renormalized";
}
const char* seed_name(SeedKind k) {
    switch (k) {
        case SeedKind::from_zero: return "from_zero";
        case SeedKind::from_infinity: return "from_infinity";
        case SeedKind::switched: return "switched";
    }
    return "?";
}
const char* kind_name(BifurcationEvent::Kind k) {
    switch (k) {
        case BifurcationEvent::Kind::fold: return "fold";
        case BifurcationEvent::Kind::simple_crossing: return "simple_crossing";
        case BifurcationEvent::Kind::degenerate: return "degenerate";
    }
    return "?";
}
const char* sym_name(BifurcationEvent::KernelSym s) {
    switch (s) {
        case BifurcationEvent::KernelSym::even: return "even";
        case BifurcationEvent::KernelSym::odd: return "odd";
        case BifurcationEvent::KernelSym::none: return "none";
        case BifurcationEvent::KernelSym::na: return "n/a";
    }
    return "?";
}

json potential_to_json(const PotentialSpec& p) {
    json out;
    switch (p.family) {
        case PotentialSpec::Family::poschl_teller: out["family"] = "poschl_teller"; break;
        case PotentialSpec::Family::gaussian: out["family"] = "gaussian"; break;
        case PotentialSpec::Family::tabulated: out["family"] = "tabulated"; break;
    }
    json wells = json::array();
    for (const auto& w : p.wells)
        wells.push_back({{"depth", w.depth}, {"center", w.center}, {"width", w.width}});
    out["wells"] = wells;
    if (p.reflection_center) out["reflection"] = *p.reflection_center;
    return out;
}

PotentialSpec potential_from_json(const json& j) {
    PotentialSpec p;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "poschl_teller")
        p.family = PotentialSpec::Family::poschl_teller;
    else if (fam == "gaussian")
        p.family = PotentialSpec::Family::gaussian;
    else
        p.family = PotentialSpec::Family::tabulated;
    for (const auto& w : j.at("wells")) {
        PotentialSpec::Well well;
        well.depth = w.at("depth").get<double>();
        well.center = w.at("center").get<double>();
        well.width = w.at("width").get<double>();
        p.wells.push_back(well);
    }
    if (j.contains("reflection")) p.reflection_center = j["reflection"].get<double>();
    return p;
}

void append_doubles(std::ofstream& bin, const std::vector<double>& v,
                    int64_t& offset, int64_t& out_offset) {
    out_offset = offset;
    bin.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    offset += static_cast<int64_t>(v.size());
}

} // namespace

void save_branch(const std::string& stem, const Branch& branch,
                 const ProblemSpec& prob, const std::string& cfg_hash) {
    const std::string json_path = stem + ".json";
    const std::string bin_path = stem + ".bin";
    const std::string json_tmp = json_path + ".tmp";
    const std::string bin_tmp = bin_path + ".tmp";

    std::ofstream bin(bin_tmp, std::ios::binary);
    require(static_cast<bool>(bin), ErrorKind::io, "cannot write " + bin_tmp);
    int64_t offset = 0; // counted in doubles

    json root;
    root["schema_version"] = 1;
    root["config_hash"] = cfg_hash;
    root["psi_file"] = fs::path(bin_path).filename().string();

    json jb;
    jb["id"] = branch.id;
    jb["seed_kind"] = seed_name(branch.seed_kind);
    jb["parent_id"] = branch.parent_id;
    jb["parent_event"] = branch.parent_event;
    jb["frame"] = pframe_name(branch.frame);
    jb["stalled"] = branch.stalled;
    jb["closed_loop"] = branch.closed_loop;
    jb["grid"] = {{"frame", frame_name(branch.grid->frame())},
                  {"L", branch.grid->L()},
                  {"npoints", branch.grid->npoints()},
                  {"dim", branch.grid->dim()}};
    jb["problem"] = {{"p", prob.p},
                     {"sigma", prob.sigma},
                     {"n", prob.n},
                     {"frame", frame_name(prob.frame)},
                     {"potential", potential_to_json(prob.potential)}};
    root["branch"] = jb;

    json jevents = json::array();
    for (const auto& ev : branch.events) {
        json je;
        je["kind"] = kind_name(ev.kind);
        je["E_star"] = ev.E_star;
        je["bracket_width"] = ev.bracket_width;
        je["kernel_symmetry"] = sym_name(ev.kernel_symmetry);
        je["n_neg_before"] = ev.inertia_before.n_neg;
        je["n_zero_before"] = ev.inertia_before.n_zero;
        je["n_neg_after"] = ev.inertia_after.n_neg;
        je["n_zero_after"] = ev.inertia_after.n_zero;
        int64_t koff = -1, poff = -1;
        if (!ev.kernel_vector.empty())
            append_doubles(bin, ev.kernel_vector.values(), offset, koff);
        if (!ev.psi_star.empty())
            append_doubles(bin, ev.psi_star.values(), offset, poff);
        je["kernel_offset"] = koff;
        je["psi_star_offset"] = poff;
        jevents.push_back(std::move(je));
    }
    root["events"] = jevents;

    json jpoints = json::array();
    for (const auto& pt : branch.points) {
        json jp;
        jp["E"] = pt.E;
        jp["N"] = pt.N;
        jp["Q"] = pt.Q;
        jp["energy"] = pt.energy;
        jp["grad2"] = pt.grad2;
        jp["intV"] = pt.intV;
        jp["n_neg"] = pt.lplus_inertia.n_neg;
        jp["n_zero"] = pt.lplus_inertia.n_zero;
        jp["tol_zero"] = pt.lplus_inertia.tol_zero;
        jp["lplus_min_eigs"] = pt.lplus_min_eigs;
        jp["lminus_min_eig"] = pt.lminus_min_eig;
        jp["newton_residual"] = pt.newton_residual;
        jp["stationarity_res"] = pt.stationarity_res;
        int64_t poff = -1;
        if (!pt.psi.empty()) append_doubles(bin, pt.psi.values(), offset, poff);
        jp["psi_offset"] = poff;
        jpoints.push_back(std::move(jp));
    }
    root["points"] = jpoints;

    bin.close();
    require(static_cast<bool>(bin), ErrorKind::io, "write failed: " + bin_tmp);
    {
        std::ofstream out(json_tmp);
        require(static_cast<bool>(out), ErrorKind::io, "cannot write " + json_tmp);
        out << root.dump(1) << "\n";
        out.close();
        require(static_cast<bool>(out), ErrorKind::io, "write failed: " + json_tmp);
    }
    fs::rename(bin_tmp, bin_path);
    fs::rename(json_tmp, json_path);
}

Branch load_branch(const std::string& stem, ProblemSpec* prob_out,
                   std::string* cfg_hash_out) {
    const std::string json_path = stem + ".json";
    std::ifstream in(json_path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + json_path);
    json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        fail(ErrorKind::io, "bad branch file: " + std::string(e.what()));
    }
    require(root.at("schema_version").get<int>() == 1, ErrorKind::io,
            "unsupported branch schema version");
    if (cfg_hash_out) *cfg_hash_out = root.at("config_hash").get<std::string>();

    const json& jb = root.at("branch");
    Branch br;
    br.id = jb.at("id").get<int>();
    const std::string sk = jb.at("seed_kind").get<std::string>();
    br.seed_kind = sk == "from_zero" ? SeedKind::from_zero
                   : sk == "from_infinity" ? SeedKind::from_infinity
                                           : SeedKind::switched;
    br.parent_id = jb.value("parent_id", -1);
    br.parent_event = jb.value("parent_event", -1);
    br.frame = jb.at("frame").get<std::string>() == "physical"
                   ? PFrame::physical
                   : PFrame::renormalized;
    br.stalled = jb.at("stalled").get<bool>();
    br.closed_loop = jb.at("closed_loop").get<bool>();
    const json& jg = jb.at("grid");
    if (jg.at("frame").get<std::string>() == "line")
        br.grid = Grid::line(jg.at("L").get<double>(), jg.at("npoints").get<int>());
    else
        br.grid = Grid::radial(jg.at("dim").get<int>(), jg.at("L").get<double>(),
                               jg.at("npoints").get<int>());

    if (prob_out) {
        const json& jpr = jb.at("problem");
        prob_out->p = jpr.at("p").get<double>();
        prob_out->sigma = jpr.at("sigma").get<double>();
        prob_out->n = jpr.at("n").get<int>();
        prob_out->frame =
            jpr.at("frame").get<std::string>() == "line" ? Frame::line : Frame::radial;
        prob_out->potential = potential_from_json(jpr.at("potential"));
    }

    const std::string bin_path =
        (fs::path(json_path).parent_path() / root.at("psi_file").get<std::string>())
            .string();
    std::ifstream bin(bin_path, std::ios::binary);
    require(static_cast<bool>(bin), ErrorKind::io, "cannot open " + bin_path);
    auto read_field = [&](int64_t off) {
        Field f(br.grid);
        bin.seekg(off * static_cast<int64_t>(sizeof(double)));
        bin.read(reinterpret_cast<char*>(f.values().data()),
                 static_cast<std::streamsize>(f.values().size() * sizeof(double)));
        require(static_cast<bool>(bin), ErrorKind::io, "truncated " + bin_path);
        return f;
    };

    for (const auto& je : root.at("events")) {
        BifurcationEvent ev;
        const std::string kd = je.at("kind").get<std::string>();
        ev.kind = kd == "fold" ? BifurcationEvent::Kind::fold
                  : kd == "simple_crossing" ? BifurcationEvent::Kind::simple_crossing
                                            : BifurcationEvent::Kind::degenerate;
        ev.E_star = je.at("E_star").get<double>();
        ev.bracket_width = je.at("bracket_width").get<double>();
        const std::string sy = je.at("kernel_symmetry").get<std::string>();
        ev.kernel_symmetry = sy == "even" ? BifurcationEvent::KernelSym::even
                             : sy == "odd" ? BifurcationEvent::KernelSym::odd
                             : sy == "none" ? BifurcationEvent::KernelSym::none
                                            : BifurcationEvent::KernelSym::na;
        ev.inertia_before.n_neg = je.at("n_neg_before").get<int>();
        ev.inertia_before.n_zero = je.at("n_zero_before").get<int>();
        ev.inertia_after.n_neg = je.at("n_neg_after").get<int>();
        ev.inertia_after.n_zero = je.at("n_zero_after").get<int>();
        if (je.at("kernel_offset").get<int64_t>() >= 0)
            ev.kernel_vector = read_field(je.at("kernel_offset").get<int64_t>());
        if (je.at("psi_star_offset").get<int64_t>() >= 0)
            ev.psi_star = read_field(je.at("psi_star_offset").get<int64_t>());
        br.events.push_back(std::move(ev));
    }

    for (const auto& jp : root.at("points")) {
        BranchPoint pt;
        pt.E = jp.at("E").get<double>();
        pt.N = jp.at("N").get<double>();
        pt.Q = jp.at("Q").get<double>();
        pt.energy = jp.at("energy").get<double>();
        pt.grad2 = jp.at("grad2").get<double>();
        pt.intV = jp.at("intV").get<double>();
        pt.frame = br.frame;
        pt.lplus_inertia.n_neg = jp.at("n_neg").get<int>();
        pt.lplus_inertia.n_zero = jp.at("n_zero").get<int>();
        pt.lplus_inertia.tol_zero = jp.at("tol_zero").get<double>();
        pt.lplus_min_eigs = jp.at("lplus_min_eigs").get<std::vector<double>>();
        pt.lminus_min_eig = jp.at("lminus_min_eig").get<double>();
        pt.newton_residual = jp.at("newton_residual").get<double>();
        pt.stationarity_res = jp.at("stationarity_res").get<double>();
        if (jp.at("psi_offset").get<int64_t>() >= 0)
            pt.psi = read_field(jp.at("psi_offset").get<int64_t>());
        br.points.push_back(std::move(pt));
    }
    return br;
}

void write_diagram_csv(const std::string& path,
                       const std::vector<Branch>& branches) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
    out << "branch_id,E,N,n_neg,stability,event\r\n";
    char buf[512];
    for (const auto& br : branches) {
        // nearest point index per event
        std::vector<std::string> marks(br.points.size());
        for (const auto& ev : br.events) {
            size_t best = 0;
            double bd = std::numeric_limits<double>::max();
            for (size_t i = 0; i < br.points.size(); ++i) {
                const double d = std::abs(br.points[i].E - ev.E_star);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            if (!marks.empty()) marks[best] = kind_name(ev.kind);
        }
        for (size_t i = 0; i < br.points.size(); ++i) {
            const auto& pt = br.points[i];
            StabilityLabel lab = stability_label(br, i);
            const char* st = lab.stability == Stability::stable ? "stable"
                             : lab.stability == Stability::unstable ? "unstable"
                                                                    : "undetermined";
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%s,%s\r\n", br.id,
                          pt.E, pt.N, pt.lplus_inertia.n_neg, st, marks[i].c_str());
            out << buf;
        }
    }
}

void write_profile_csv(const std::string& path, const Field& f) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
    out << "x,u\r\n";
    char buf[128];
    for (int i = 0; i < f.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\r\n", f.grid()->node(i), f[i]);
        out << buf;
    }
}

} // namespace nlsbif
