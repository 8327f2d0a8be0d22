#pragma once

#include <map>
#include <string>
#include <vector>

#include "nlsbif/continuation.hpp"
#include "nlsbif/problem.hpp"

namespace nlsbif {

// Run configuration. Persisted as a flat key-tree text file
// ("section.key = value", '#' comments), schema-checked before any compute.
struct RunConfig {
    ProblemSpec problem;
    double grid_L = 30.0;
    int grid_npoints = 6001;
    // renormalized-frame working grid
    double renorm_L = 70.0;
    int renorm_npoints = 7001;

    ContinuationConfig continuation;
    double E_switch = 25.0;

    // seed
    std::string seed_kind = "from_zero"; // from_zero | from_infinity | switched
    double seed_amplitude = 0.1;
    double seed_E = 100.0;
    std::vector<double> seed_centers;
    std::vector<int> seed_signs;
    std::string seed_parent;   // switched: producing branch stem
    int seed_event = 0;        // switched: event index in the parent
    double seed_delta = 0.05;  // switched: kernel displacement

    // diagnostics toggles and tolerances
    bool diag_stationarity = true;
    bool diag_pohozaev = true;
    bool diag_energy_mass = true;
    bool diag_dq = true;
    double tol_stationarity = 1e-6;
    double tol_pohozaev = 1e-5;
    double tol_fd_laws = 1e-2;

    std::string output_dir = ".";

    GridPtr make_grid() const;
    GridPtr make_renorm_grid() const;
    void validate() const;
};

// key=value map with layered overrides (flag > file > default)
using KeyTree = std::map<std::string, std::string>;

KeyTree parse_key_tree(const std::string& text);
KeyTree load_key_tree(const std::string& path);
RunConfig config_from_tree(const KeyTree& tree); // schema-checked
std::string canonical_config_text(const KeyTree& tree);

// FNV-1a hash of the canonical config text, hex-encoded.
std::string config_hash(const KeyTree& tree);

// Branch persistence: <stem>.json metadata plus <stem>.bin sidecar holding
// the psi arrays as little-endian doubles referenced by offset. Writes are
// atomic (temp file + rename); no timestamps, so identical runs produce
// byte-identical files.
void save_branch(const std::string& stem, const Branch& branch,
                 const ProblemSpec& prob, const std::string& cfg_hash);
Branch load_branch(const std::string& stem, ProblemSpec* prob_out = nullptr,
                   std::string* cfg_hash_out = nullptr);

// RFC-4180 CSV with a header row; one row per branch point, event markers on
// the nearest row.
void write_diagram_csv(const std::string& path,
                       const std::vector<Branch>& branches);

// (x, u(x)) profile export
void write_profile_csv(const std::string& path, const Field& f);

} // namespace nlsbif
