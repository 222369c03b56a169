#pragma once

// File formats.
//
// edges:    one "src<TAB>dst" per line, 0-based ids; '#' lines and blank lines
//           ignored; any run of spaces/tabs separates the two fields.
// features: one "node<TAB>feature<TAB>value" per line, same comment rules.
// config:   one JSON object with the RunConfig keys below; unknown keys are
//           rejected.
// CSV numbers are written with 17 significant digits.

#include "sdrem/graph.hpp"
#include "sdrem/model.hpp"
#include "sdrem/predictor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdrem {

struct EdgeFile {
    std::size_t n_nodes = 0;     // max id + 1
    std::vector<Dyad> edges;     // in file order, self-loops removed
    std::size_t self_loops = 0;  // dropped
};

/// Throws ParseError with the 1-based line of the first malformed line.
EdgeFile read_edge_file(const std::filesystem::path& path);

/// read_edge_file plus graph construction. `n_nodes` of 0 means "infer".
SparseGraph load_edges(const std::filesystem::path& path, bool undirected = false, std::size_t n_nodes = 0,
                       std::size_t* self_loops = nullptr);
void save_edges(const std::filesystem::path& path, const SparseGraph& graph);

/// D is the largest feature index + 1. An empty file gives a matrix with no
/// features. Throws ParseError for malformed lines, negative values and node
/// ids >= n_nodes.
FeatureMatrix load_features(const std::filesystem::path& path, std::size_t n_nodes);
void save_features(const std::filesystem::path& path, const FeatureMatrix& features);

struct Split {
    SparseGraph train;              // held-out dyads live in train.test_mask()
    std::vector<LabeledDyad> test;  // positives then negatives per row, row order
};

/// Per row i: ceil((1 - train_ratio) * out-degree) positives go to the test
/// set; for each one, `negatives_per_positive` non-edges of the same row are
/// drawn without replacement (fewer if the row runs out). For undirected
/// graphs each unordered pair is owned by its smaller endpoint and both
/// directions are masked.
Split make_split(const SparseGraph& graph, double train_ratio, int negatives_per_positive, Rng& rng);

struct RunConfig {
    std::string edges;
    std::string features;
    std::string out;
    HyperParams hp;
    std::optional<std::uint64_t> split_seed; // defaults to hp.seed
    int threads = 1;
    double train_ratio = 0.9;
    int negatives_per_positive = 1;
    bool undirected = false;
    bool keep_draws = false;

    std::uint64_t effective_split_seed() const noexcept { return split_seed.value_or(hp.seed); }
    /// Field ranges only; paths are checked when opened. Throws ConfigError.
    void validate() const;
};

/// Throws ConfigError naming the key for unknown keys or wrong types.
RunConfig parse_config(const std::string& json_text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON of every field (sorted keys).
std::string dump_config(const RunConfig& config);

/// Everything needed to resume a chain or re-evaluate it.
struct Snapshot {
    ModelState state;
    PosteriorTrace trace;
    RunConfig config;
};

void save_state(const std::filesystem::path& path, const Snapshot& snapshot);
/// Throws ParseError on a bad magic number, unknown version or truncation.
Snapshot load_state(const std::filesystem::path& path);

/// metrics.json: auc (null with a note when the test set lacks a class),
/// mean_nll, counts, the clamp, seeds, mean latent counts and the config.
std::string metrics_json(const EvalResult& eval, const PosteriorTrace& trace, const RunConfig& config);

void write_matrix_csv(const std::filesystem::path& path, const Matrix<double>& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix<Count>& m);

/// metrics.json, predictions.csv, pi_layer_<l>.csv, lambda.csv,
/// latent_counts.csv and state.bin in `out_dir` (created if needed).
void save_outputs(const std::filesystem::path& out_dir, const Snapshot& snapshot, const EvalResult& eval,
                  const std::vector<LabeledDyad>& test);

/// Writes `text` to `path`, throwing std::runtime_error on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// %.17g
std::string format_number(double v);

} // namespace sdrem
