#pragma once

#include <stdexcept>
#include <string>

namespace nlsbif {

// Error taxonomy shared by the whole toolkit. The CLI maps kinds to exit
// codes (config -> 4, solver/eigen/decomposition -> 3).
enum class ErrorKind {
    structural,     // mismatched grids, bad arguments
    config,         // invalid run configuration / schema violation
    solver,         // Newton divergence, singular Jacobian, stalled branch
    eigen,          // eigensolver non-convergence
    decomposition,  // degenerate profile decomposition
    resolution,     // grid too coarse for the requested scaling
    io,             // file format / filesystem problems
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) fail(kind, msg);
}

} // namespace nlsbif
