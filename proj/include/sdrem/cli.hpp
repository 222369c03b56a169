#pragma once

// The fit pipeline and the command-line front end.

#include "sdrem/dataio.hpp"
#include "sdrem/gibbs.hpp"

#include <functional>
#include <iosfwd>

namespace sdrem {

struct FitOptions {
    std::ostream* log = nullptr;     // progress and diagnostics; null = silent
    int progress_every = 100;
    /// Called after every sweep with the current state.
    std::function<void(const ModelState&, const SweepReport&)> on_sweep;
};

struct FitResult {
    Snapshot snapshot;
    Split split;
    EvalResult eval;
    std::size_t audit_violations = 0; // test dyads found in the propagation support
    double seconds = 0.0;
};

/// Features as the mode sees them: identity for plain, none for mmsb.
FeatureMatrix features_for_mode(Mode mode, const FeatureMatrix& given, std::size_t n_nodes);

/// Test dyads whose source appears in the receiving node's propagation support.
std::size_t audit_test_support(const PropagationSupport& support, const std::vector<LabeledDyad>& test,
                               bool undirected);

/// split -> init -> sweeps -> trace -> evaluation. Does not write files.
FitResult fit_model(const RunConfig& config, const SparseGraph& graph, const FeatureMatrix& features,
                    const FitOptions& options = {});

/// Entry point of the `sdrem` executable. Returns the process exit code:
/// 0 success, 1 configuration or input errors, 2 runtime failures.
int run_cli(int argc, const char* const* argv);

} // namespace sdrem
