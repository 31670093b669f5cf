#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "embstats/analysis.hpp"
#include "embstats/ln_sim.hpp"

namespace embstats::cli {

struct AccumulateOptions {
  std::vector<std::string> inputs;  // "-" reads stdin
  std::optional<std::string> vocab;
  std::filesystem::path out;
  bool retain_mu = false;
  unsigned threads = 1;
};

// Writes stats.tsv, mu.emb (with retain_mu) and manifest.json.
void cmd_accumulate(const AccumulateOptions& opt);

struct ReportOptions {
  std::vector<std::string> stats;
  std::vector<std::string> mu;  // empty, or one per stats file
  double lo = analysis::kDefaultLoLog10;
  double hi = analysis::kDefaultHiLog10;
  std::size_t bins = 50;
  std::filesystem::path out;
};

// Writes layer_report.tsv/.json, one CSV per figure panel, manifest.json.
void cmd_report(const ReportOptions& opt);

struct SamplePcaOptions {
  std::string stats;
  std::string vocab;
  std::string stream;
  std::uint64_t seed = 0;
  double lo = analysis::kDefaultLoLog10;
  double hi = analysis::kDefaultHiLog10;
  std::uint32_t min_chars = 3;
  std::size_t max_per_token = 1000;
  std::filesystem::path out;
};

// Writes sampled_tokens.tsv, pca_coords.csv, pca.json, manifest.json.
void cmd_sample_pca(const SamplePcaOptions& opt);

struct LnVectorSpec {
  std::optional<std::string> file;
  std::string preset;  // "ones" or "zeros"
};

struct SimulateLnOptions {
  std::size_t d = 128;
  LnVectorSpec gamma{std::nullopt, "ones"};
  LnVectorSpec beta{std::nullopt, "zeros"};
  std::vector<std::uint64_t> n0_grid{100, 400, 1600, 6400};
  std::size_t tokens = 200;
  std::string distribution = "normal";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out;
};

// Writes cv_study.tsv, cv_study.json, manifest.json.
void cmd_simulate_ln(const SimulateLnOptions& opt);

struct GenerateLnOptions {
  std::size_t d = 16;
  LnVectorSpec gamma{std::nullopt, "ones"};
  LnVectorSpec beta{std::nullopt, "zeros"};
  std::vector<std::uint64_t> frequencies;
  std::string distribution = "normal";
  std::uint64_t seed = 0;
  std::uint32_t layer = 0;
  std::filesystem::path out;
};

// Writes ln.emb, vocab.tsv, manifest.json.
void cmd_generate_ln(const GenerateLnOptions& opt);

// Resolves a gamma/beta spec to a vector of length d.
std::vector<double> resolve_vector(const LnVectorSpec& spec, std::size_t d,
                                   const std::string& name);

// Parses argv and dispatches. Returns the process exit status; errors are
// reported on stderr as one line: "error: kind=<kind> message=<text>".
int run(int argc, const char* const* argv);

}  // namespace embstats::cli
