#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "embstats/error.hpp"
#include "manifest.hpp"

namespace embstats::cli {
namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << "error: kind=" << kind << " message=" << one_line(message) << '\n';
}

void add_vector_options(CLI::App* sub, LnVectorSpec& gamma, LnVectorSpec& beta) {
  sub->add_option("--gamma-file", gamma.file, "whitespace-separated gamma values");
  sub->add_option("--gamma-preset", gamma.preset, "ones | zeros")
      ->check(CLI::IsMember({"ones", "zeros"}));
  sub->add_option("--beta-file", beta.file, "whitespace-separated beta values");
  sub->add_option("--beta-preset", beta.preset, "ones | zeros")
      ->check(CLI::IsMember({"ones", "zeros"}));
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Streaming moment statistics of contextual embeddings"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  AccumulateOptions acc;
  auto* acc_cmd = app.add_subcommand("accumulate", "per-token Q/M/V from stream files");
  acc_cmd->add_option("--input", acc.inputs, "stream file(s); '-' for stdin")
      ->required()
      ->expected(1, -1);
  acc_cmd->add_option("--vocab", acc.vocab, "vocabulary sidecar TSV");
  acc_cmd->add_option("--out", acc.out, "output directory")->required();
  acc_cmd->add_flag("--retain-mu", acc.retain_mu, "also write per-token mean vectors");
  acc_cmd->add_option("--threads", acc.threads, "worker threads")->capture_default_str();

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "layer report and figure data");
  rep_cmd->add_option("--stats", rep.stats, "stats TSV, one per layer")
      ->required()
      ->expected(1, -1);
  rep_cmd->add_option("--mu", rep.mu, "mu matrices, one per stats file")->expected(1, -1);
  rep_cmd->add_option("--lo", rep.lo, "lower log10 frequency bound")->capture_default_str();
  rep_cmd->add_option("--hi", rep.hi, "upper log10 frequency bound")->capture_default_str();
  rep_cmd->add_option("--bins", rep.bins, "histogram bins")->capture_default_str();
  rep_cmd->add_option("--out", rep.out, "output directory")->required();

  SamplePcaOptions pca;
  auto* pca_cmd = app.add_subcommand("sample-pca", "sample tokens and project to 2-D");
  pca_cmd->add_option("--stats", pca.stats, "stats TSV")->required();
  pca_cmd->add_option("--vocab", pca.vocab, "vocabulary sidecar TSV")->required();
  pca_cmd->add_option("--stream", pca.stream, "stream file for the second pass")->required();
  pca_cmd->add_option("--seed", pca.seed, "sampling seed")->capture_default_str();
  pca_cmd->add_option("--lo", pca.lo, "lower log10 frequency bound")->capture_default_str();
  pca_cmd->add_option("--hi", pca.hi, "upper log10 frequency bound")->capture_default_str();
  pca_cmd->add_option("--min-chars", pca.min_chars, "minimum token length")
      ->capture_default_str();
  pca_cmd->add_option("--max-per-token", pca.max_per_token,
                      "occurrences kept per token (reservoir)")
      ->capture_default_str();
  pca_cmd->add_option("--out", pca.out, "output directory")->required();

  SimulateLnOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate-ln", "C.V.(Q) scaling under the LN model");
  sim_cmd->add_option("--d", sim.d, "dimension")->capture_default_str();
  add_vector_options(sim_cmd, sim.gamma, sim.beta);
  sim_cmd->add_option("--n0-grid", sim.n0_grid, "comma-separated n0 values")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--tokens", sim.tokens, "tokens per grid point")->capture_default_str();
  sim_cmd->add_option("--distribution", sim.distribution, "normal | uniform")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "seed")->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "worker threads")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  GenerateLnOptions gen;
  auto* gen_cmd = app.add_subcommand("generate-ln", "write a synthetic LN-model stream");
  gen_cmd->add_option("--d", gen.d, "dimension")->capture_default_str();
  add_vector_options(gen_cmd, gen.gamma, gen.beta);
  gen_cmd->add_option("--frequencies", gen.frequencies, "comma-separated n_t per token")
      ->delimiter(',')
      ->required();
  gen_cmd->add_option("--distribution", gen.distribution, "normal | uniform")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "seed")->capture_default_str();
  gen_cmd->add_option("--layer", gen.layer, "layer index in the header")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (acc_cmd->parsed()) cmd_accumulate(acc);
    if (rep_cmd->parsed()) cmd_report(rep);
    if (pca_cmd->parsed()) cmd_sample_pca(pca);
    if (sim_cmd->parsed()) cmd_simulate_ln(sim);
    if (gen_cmd->parsed()) cmd_generate_ln(gen);
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace embstats::cli
