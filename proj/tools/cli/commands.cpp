#include "commands.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "embstats/error.hpp"
#include "embstats/moments.hpp"
#include "embstats/pca.hpp"
#include "embstats/stats_io.hpp"
#include "embstats/stream_format.hpp"
#include "embstats/vocab.hpp"
#include "manifest.hpp"

namespace embstats::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Owns a file stream, or borrows std::cin for "-".
class Input {
 public:
  explicit Input(const std::string& path) : path_(path) {
    if (path == "-") {
      in_ = &std::cin;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw InputError(fmt::format("cannot open '{}'", path));
      in_ = &file_;
    }
  }
  std::istream& get() { return *in_; }
  bool is_stdin() const { return in_ == &std::cin; }

 private:
  std::string path_;
  std::ifstream file_;
  std::istream* in_ = nullptr;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void prepare_out_dir(const fs::path& dir) {
  if (dir.empty()) throw InputError("--out is required");
  fs::create_directories(dir);
}

// Re-raises a library error with the file it concerns prepended.
template <typename F>
auto in_context(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", path, e.what()));
  }
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json regression_json(const analysis::RegressionResult& r) {
  return {{"slope", r.slope}, {"intercept", r.intercept},
          {"r2", std::isnan(r.r2) ? json(nullptr) : json(r.r2)},
          {"n_points", r.n_points}};
}

// ---------------------------------------------------------------- accumulate

struct InputInfo {
  std::string path;
  stream::StreamHeader header;
  std::uint64_t records = 0;  // including a trailing partial record, if any
};

void check_compatible(const stream::StreamHeader& first, const stream::StreamHeader& h,
                      const std::string& path) {
  if (h.dim != first.dim) {
    throw DimensionError(fmt::format("{}: dimension {} differs from first input's {}",
                                     path, h.dim, first.dim));
  }
  if (h.layer != first.layer) {
    throw InputError(fmt::format("{}: layer {} differs from first input's {}", path,
                                 h.layer, first.layer));
  }
}

InputInfo probe(const std::string& path) {
  Input in(path);
  InputInfo info;
  info.path = path;
  info.header = in_context(path, [&] { return stream::read_header(in.get()); });
  const auto size = fs::file_size(path);
  const auto body = size - std::min<std::uintmax_t>(size, info.header.encoded_size());
  const auto rs = info.header.record_size();
  info.records = (body + rs - 1) / rs;
  return info;
}

// Accumulates the global record range [first, last) spanning the inputs.
moments::TokenTable accumulate_range(const std::vector<InputInfo>& inputs,
                                     std::uint64_t first, std::uint64_t last) {
  moments::TokenTable table;
  std::uint64_t base = 0;
  for (const auto& info : inputs) {
    const std::uint64_t lo = std::max(first, base);
    const std::uint64_t hi = std::min(last, base + info.records);
    if (lo < hi) {
      in_context(info.path, [&] {
        Input in(info.path);
        stream::StreamReader reader(in.get());
        reader.seek_record(lo - base);
        moments::merge_into(table, moments::accumulate_stream(reader, hi - lo));
        return 0;
      });
    }
    base += info.records;
  }
  return table;
}

moments::TokenTable accumulate_sequential(const std::vector<std::string>& paths,
                                          stream::StreamHeader& first) {
  moments::TokenTable table;
  bool have_first = false;
  for (const auto& path : paths) {
    in_context(path, [&] {
      Input in(path);
      stream::StreamReader reader(in.get());
      if (!have_first) {
        first = reader.header();
        have_first = true;
      }
      check_compatible(first, reader.header(), path);
      stream::EmbeddingRecord r;
      while (reader.next(r)) moments::accumulate(table, r.token_id, r.vector);
      return 0;
    });
  }
  return table;
}

moments::TokenTable accumulate_parallel(const std::vector<std::string>& paths,
                                        unsigned threads, stream::StreamHeader& first) {
  std::vector<InputInfo> inputs;
  std::uint64_t total = 0;
  for (const auto& path : paths) {
    inputs.push_back(probe(path));
    check_compatible(inputs.front().header, inputs.back().header, path);
    total += inputs.back().records;
  }
  first = inputs.front().header;

  std::vector<moments::TokenTable> parts(threads);
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      const std::uint64_t lo = total * w / threads;
      const std::uint64_t hi = total * (w + 1) / threads;
      pool.emplace_back([&, w, lo, hi] {
        try {
          parts[w] = accumulate_range(inputs, lo, hi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (unsigned w = 1; w < threads; ++w) moments::merge_into(parts[0], parts[w]);
  return std::move(parts[0]);
}

// -------------------------------------------------------------------- report

struct LoadedLayer {
  std::string stats_path;
  io::StatsTable table;
  analysis::LayerInput input;
  std::unordered_map<std::uint32_t, std::string> tokens;
};

void write_layer_figures(const fs::path& out, const LoadedLayer& layer,
                         const ReportOptions& opt, RunManifest& manifest) {
  const auto k = layer.input.layer;
  const auto filtered = analysis::frequency_filter(layer.input.stats, opt.lo, opt.hi);
  const auto token_of = [&](std::uint32_t id) -> const std::string& {
    return layer.tokens.at(id);
  };

  {
    const auto name = fmt::format("fig_mv_scatter_layer{}.csv", k);
    auto f = open_output(out / name);
    f << "token_id,token,n_t,M,V,Q\n";
    for (const auto& s : filtered) {
      f << fmt::format("{},{},{},{},{},{}\n", s.token_id, csv_field(token_of(s.token_id)),
                       s.n, num(s.M), num(s.V), num(s.Q));
    }
    manifest.output(name);
  }
  {
    const auto name = fmt::format("fig_freq_scatter_layer{}.csv", k);
    auto f = open_output(out / name);
    f << "token_id,token,log10_n,Q,M,V\n";
    for (const auto& s : filtered) {
      f << fmt::format("{},{},{},{},{},{}\n", s.token_id, csv_field(token_of(s.token_id)),
                       num(std::log10(static_cast<double>(s.n))), num(s.Q), num(s.M),
                       num(s.V));
    }
    manifest.output(name);
  }
  {
    const auto name = fmt::format("fig_freq_regression_layer{}.csv", k);
    auto f = open_output(out / name);
    f << "scale,stat,slope,intercept,r2,n_points\n";
    for (auto scale : {analysis::FreqScale::Log1p, analysis::FreqScale::Raw}) {
      const char* label = scale == analysis::FreqScale::Log1p ? "log10_1p" : "raw";
      try {
        const auto fr = analysis::freq_regressions(filtered, scale);
        const std::pair<const char*, const analysis::RegressionResult*> rows[] = {
            {"Q", &fr.Q}, {"M", &fr.M}, {"V", &fr.V}};
        for (const auto& [stat, r] : rows) {
          f << fmt::format("{},{},{},{},{},{}\n", label, stat, num(r->slope),
                           num(r->intercept), num(r->r2), r->n_points);
        }
      } catch (const NumericError&) {
        for (const char* stat : {"Q", "M", "V"}) {
          f << fmt::format("{},{},NA,NA,NA,{}\n", label, stat, filtered.size());
        }
      }
    }
    manifest.output(name);
  }
  {
    const auto name = fmt::format("fig_hist_layer{}.csv", k);
    auto f = open_output(out / name);
    f << "quantity,bin,bin_lo,bin_hi,count\n";
    std::vector<std::pair<std::string, std::vector<double>>> series(4);
    series[0].first = "log10_n";
    series[1].first = "log10_1p_Q";
    series[2].first = "log10_1p_M";
    series[3].first = "log10_1p_V";
    for (const auto& s : layer.input.stats) {
      series[0].second.push_back(std::log10(static_cast<double>(s.n)));
    }
    for (const auto& s : filtered) {
      series[1].second.push_back(std::log10(1.0 + s.Q));
      series[2].second.push_back(std::log10(1.0 + s.M));
      series[3].second.push_back(std::log10(1.0 + s.V));
    }
    for (const auto& [label, values] : series) {
      if (values.empty()) continue;
      const auto h = analysis::histogram(values, opt.bins);
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double lo = h.lo + h.bin_width() * static_cast<double>(b);
        const double hi = b + 1 == h.counts.size() ? h.hi : lo + h.bin_width();
        f << fmt::format("{},{},{},{},{}\n", label, b, num(lo), num(hi), h.counts[b]);
      }
    }
    manifest.output(name);
  }
}

json row_json(const analysis::LayerReportRow& r) {
  json j;
  j["layer"] = r.layer;
  j["n_tokens"] = r.n_tokens;
  j["n_filtered"] = r.n_filtered;
  if (r.global) {
    const auto& g = *r.global;
    j["n"] = g.n;
    j["Q_X"] = g.Q_X;
    j["M_X"] = g.M_X;
    j["V_X"] = g.V_X;
    j["V_W"] = g.V_W;
    j["V_B"] = g.V_B;
  } else {
    for (const char* key : {"n", "Q_X", "M_X", "V_X", "V_W", "V_B"}) j[key] = nullptr;
  }
  j["M_over_Q"] = opt_json(r.m_over_q);
  j["VW_over_Q"] = opt_json(r.vw_over_q);
  j["VB_over_Q"] = opt_json(r.vb_over_q);
  j["VW_over_V"] = opt_json(r.vw_over_v);
  j["cv_Q"] = opt_json(r.cv_q);
  j["mv_regression"] = r.mv ? regression_json(*r.mv) : json(nullptr);
  j["flags"] = r.flags;
  return j;
}

// ------------------------------------------------------------------ ln-sim

std::vector<double> read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError(fmt::format("{}: '{}' is not a number", path, tok));
    }
  }
  return v;
}

json vector_spec_json(const LnVectorSpec& spec) {
  return spec.file ? json{{"file", *spec.file}} : json{{"preset", spec.preset}};
}

}  // namespace

std::vector<double> resolve_vector(const LnVectorSpec& spec, std::size_t d,
                                   const std::string& name) {
  if (d == 0) throw InputError("--d must be >= 1");
  if (spec.file) {
    auto v = read_vector_file(*spec.file);
    if (v.size() != d) {
      throw DimensionError(fmt::format("{} file '{}' has {} values, expected {}", name,
                                       *spec.file, v.size(), d));
    }
    return v;
  }
  if (spec.preset == "ones") return std::vector<double>(d, 1.0);
  if (spec.preset == "zeros") return std::vector<double>(d, 0.0);
  throw InputError(fmt::format("unknown {} preset '{}'", name, spec.preset));
}

void cmd_accumulate(const AccumulateOptions& opt) {
  if (opt.inputs.empty()) throw InputError("at least one --input is required");
  if (opt.threads == 0) throw InputError("--threads must be >= 1");
  prepare_out_dir(opt.out);

  RunManifest manifest("accumulate");
  manifest.param("inputs", opt.inputs);
  manifest.param("vocab", opt.vocab ? json(*opt.vocab) : json(nullptr));
  manifest.param("retain_mu", opt.retain_mu);
  manifest.param("threads", opt.threads);
  for (const auto& p : opt.inputs) manifest.input(p);

  std::optional<stream::Vocab> vocab;
  if (opt.vocab) {
    manifest.input(*opt.vocab);
    Input in(*opt.vocab);
    vocab = in_context(*opt.vocab, [&] { return stream::Vocab::read(in.get()); });
  }

  const bool any_stdin = std::any_of(opt.inputs.begin(), opt.inputs.end(),
                                     [](const std::string& p) { return p == "-"; });
  stream::StreamHeader first;
  moments::TokenTable table = opt.threads > 1 && !any_stdin
                                  ? accumulate_parallel(opt.inputs, opt.threads, first)
                                  : accumulate_sequential(opt.inputs, first);
  manifest.param("layer", first.layer);
  manifest.param("dim", first.dim);
  manifest.param("model_tag", first.model_tag);

  const auto stats = moments::finalize_all(table, opt.retain_mu);
  {
    auto f = open_output(opt.out / "stats.tsv");
    io::write_stats_tsv(f, stats, vocab ? &*vocab : nullptr);
    manifest.output("stats.tsv");
  }
  if (opt.retain_mu && !stats.empty()) {
    auto f = open_output(opt.out / "mu.emb");
    io::write_mu_matrix(f, first, stats);
    manifest.output("mu.emb");
  }
  manifest.write(opt.out);
}

void cmd_report(const ReportOptions& opt) {
  if (opt.stats.empty()) throw InputError("at least one --stats is required");
  if (!opt.mu.empty() && opt.mu.size() != opt.stats.size()) {
    throw InputError(fmt::format("decomposition needs one --mu per --stats ({} vs {})",
                                 opt.mu.size(), opt.stats.size()));
  }
  if (opt.lo > opt.hi) throw InputError("--lo must not exceed --hi");
  prepare_out_dir(opt.out);

  RunManifest manifest("report");
  manifest.param("stats", opt.stats);
  manifest.param("mu", opt.mu);
  manifest.param("lo", opt.lo);
  manifest.param("hi", opt.hi);
  manifest.param("bins", opt.bins);
  for (const auto& p : opt.stats) manifest.input(p);
  for (const auto& p : opt.mu) manifest.input(p);

  std::vector<LoadedLayer> layers;
  std::set<std::uint32_t> seen;
  for (std::size_t i = 0; i < opt.stats.size(); ++i) {
    LoadedLayer L;
    L.stats_path = opt.stats[i];
    {
      Input in(opt.stats[i]);
      L.table = in_context(opt.stats[i], [&] { return io::read_stats_tsv(in.get()); });
    }
    L.input.layer = static_cast<std::uint32_t>(i);
    if (!opt.mu.empty()) {
      Input in(opt.mu[i]);
      const auto header =
          in_context(opt.mu[i], [&] { return io::attach_mu(L.table, in.get()); });
      L.input.layer = header.layer;
      std::vector<moments::TokenStats> reconciled;
      reconciled.reserve(L.table.stats.size());
      for (const auto& s : L.table.stats) reconciled.push_back(io::reconcile_with_mu(s));
      L.input.global =
          in_context(opt.mu[i], [&] { return moments::aggregate_global(reconciled); });
    }
    if (!seen.insert(L.input.layer).second) {
      throw InputError(fmt::format("layer {} given more than once", L.input.layer));
    }
    for (std::size_t r = 0; r < L.table.stats.size(); ++r) {
      L.tokens.emplace(L.table.stats[r].token_id, L.table.tokens[r]);
      L.table.stats[r].mu.reset();
    }
    L.input.stats = L.table.stats;
    layers.push_back(std::move(L));
  }
  std::sort(layers.begin(), layers.end(), [](const auto& a, const auto& b) {
    return a.input.layer < b.input.layer;
  });

  std::vector<analysis::LayerInput> inputs;
  for (const auto& L : layers) inputs.push_back(L.input);
  const auto rows = analysis::layer_report(inputs, opt.lo, opt.hi);

  {
    auto f = open_output(opt.out / "layer_report.tsv");
    f << "layer\tn_tokens\tn_filtered\tQ_X\tM_X\tV_X\tV_W\tV_B\tM_over_Q\tVW_over_Q"
         "\tVB_over_Q\tVW_over_V\tcv_Q\tmv_slope\tmv_intercept\tmv_r2\tflags\n";
    for (const auto& r : rows) {
      const auto g = [&](double moments::GlobalStats::*field) {
        return r.global ? num((*r.global).*field) : std::string("NA");
      };
      f << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                       r.layer, r.n_tokens, r.n_filtered, g(&moments::GlobalStats::Q_X),
                       g(&moments::GlobalStats::M_X), g(&moments::GlobalStats::V_X),
                       g(&moments::GlobalStats::V_W), g(&moments::GlobalStats::V_B),
                       opt_num(r.m_over_q), opt_num(r.vw_over_q), opt_num(r.vb_over_q),
                       opt_num(r.vw_over_v), opt_num(r.cv_q),
                       r.mv ? num(r.mv->slope) : "NA", r.mv ? num(r.mv->intercept) : "NA",
                       r.mv ? num(r.mv->r2) : "NA", fmt::join(r.flags, "; "));
    }
    manifest.output("layer_report.tsv");
  }
  {
    json j;
    j["filter"] = {{"lo_log10", opt.lo},
                   {"hi_log10", opt.hi},
                   {"applies_to", {"cv_Q", "mv_regression", "freq_regressions",
                                   "histograms of Q/M/V"}},
                   {"note", "global decomposition uses all tokens; cv_Q and "
                            "regressions use the frequency-filtered tokens"}};
    j["layers"] = json::array();
    for (const auto& r : rows) j["layers"].push_back(row_json(r));
    auto f = open_output(opt.out / "layer_report.json");
    f << j.dump(2) << '\n';
    manifest.output("layer_report.json");
  }
  {
    auto f = open_output(opt.out / "fig_cv_slope_r2.csv");
    f << "layer,cv_Q,mv_slope,mv_r2\n";
    for (const auto& r : rows) {
      f << fmt::format("{},{},{},{}\n", r.layer, opt_num(r.cv_q),
                       r.mv ? num(r.mv->slope) : "NA", r.mv ? num(r.mv->r2) : "NA");
    }
    manifest.output("fig_cv_slope_r2.csv");
  }
  if (!opt.mu.empty()) {
    auto f = open_output(opt.out / "fig_ratios.csv");
    f << "layer,M_over_Q,VW_over_Q,VB_over_Q,VW_over_V\n";
    for (const auto& r : rows) {
      f << fmt::format("{},{},{},{},{}\n", r.layer, opt_num(r.m_over_q),
                       opt_num(r.vw_over_q), opt_num(r.vb_over_q), opt_num(r.vw_over_v));
    }
    manifest.output("fig_ratios.csv");
    auto g = open_output(opt.out / "fig_global_qmv.csv");
    g << "layer,Q_X,M_X,V_X,V_W,V_B\n";
    for (const auto& r : rows) {
      const auto& s = *r.global;
      g << fmt::format("{},{},{},{},{},{}\n", r.layer, num(s.Q_X), num(s.M_X), num(s.V_X),
                       num(s.V_W), num(s.V_B));
    }
    manifest.output("fig_global_qmv.csv");
  }
  for (const auto& L : layers) write_layer_figures(opt.out, L, opt, manifest);
  manifest.write(opt.out);
}

void cmd_sample_pca(const SamplePcaOptions& opt) {
  if (opt.max_per_token == 0) throw InputError("--max-per-token must be >= 1");
  prepare_out_dir(opt.out);
  RunManifest manifest("sample-pca");
  manifest.param("stats", opt.stats);
  manifest.param("vocab", opt.vocab);
  manifest.param("stream", opt.stream);
  manifest.param("lo", opt.lo);
  manifest.param("hi", opt.hi);
  manifest.param("min_chars", opt.min_chars);
  manifest.param("max_per_token", opt.max_per_token);
  manifest.seed(opt.seed);
  manifest.input(opt.stats);
  manifest.input(opt.vocab);
  manifest.input(opt.stream);

  io::StatsTable table;
  {
    Input in(opt.stats);
    table = in_context(opt.stats, [&] { return io::read_stats_tsv(in.get()); });
  }
  stream::Vocab vocab;
  {
    Input in(opt.vocab);
    vocab = in_context(opt.vocab, [&] { return stream::Vocab::read(in.get()); });
  }

  std::unordered_map<std::uint32_t, const moments::TokenStats*> by_id;
  std::vector<analysis::SampleCandidate> candidates;
  for (const auto& s : table.stats) {
    const auto* e = vocab.find(s.token_id);
    if (!e) throw InputError(fmt::format("vocab does not cover token_id {}", s.token_id));
    candidates.push_back({s.token_id, s.n, e->char_count});
    by_id.emplace(s.token_id, &s);
  }
  const auto eligible = analysis::eligible_candidates(candidates, opt.lo, opt.hi,
                                                     opt.min_chars);
  const auto picked = analysis::sample_tokens(eligible, opt.seed);

  // Per-token reservoir of at most max_per_token occurrences, in stream order.
  std::unordered_map<std::uint32_t, std::size_t> slot;
  for (std::size_t i = 0; i < picked.size(); ++i) slot.emplace(picked[i], i);
  std::vector<std::vector<std::vector<float>>> reservoir(picked.size());
  std::vector<std::uint64_t> seen(picked.size(), 0);
  std::size_t dim = 0;
  in_context(opt.stream, [&] {
    Input in(opt.stream);
    stream::StreamReader reader(in.get());
    dim = reader.header().dim;
    std::mt19937_64 rng(lnsim::token_seed(opt.seed, 0x5eed));
    stream::EmbeddingRecord r;
    while (reader.next(r)) {
      auto it = slot.find(r.token_id);
      if (it == slot.end()) continue;
      auto& res = reservoir[it->second];
      const std::uint64_t i = seen[it->second]++;
      if (res.size() < opt.max_per_token) {
        res.push_back(r.vector);
      } else {
        std::uniform_int_distribution<std::uint64_t> pick(0, i);
        const auto j = pick(rng);
        if (j < opt.max_per_token) res[j] = r.vector;
      }
    }
    return 0;
  });
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (seen[i] == 0) {
      throw InputError(fmt::format("sampled token {} absent from stream '{}'", picked[i],
                                   opt.stream));
    }
  }

  std::size_t rows = 0;
  for (const auto& res : reservoir) rows += res.size();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  Eigen::Index row = 0;
  for (const auto& res : reservoir) {
    for (const auto& v : res) {
      for (std::size_t c = 0; c < dim; ++c) data(row, static_cast<Eigen::Index>(c)) = v[c];
      ++row;
    }
  }
  const auto pca = analysis::pca_project(data);

  {
    auto f = open_output(opt.out / "sampled_tokens.tsv");
    f << "token_id\ttoken\tn_t\tQ\tM\tV\tpoints\n";
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const auto& s = *by_id.at(picked[i]);
      f << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.token_id,
                       vocab.find(s.token_id)->token, s.n, num(s.Q), num(s.M), num(s.V),
                       reservoir[i].size());
    }
    manifest.output("sampled_tokens.tsv");
  }
  {
    auto f = open_output(opt.out / "pca_coords.csv");
    f << "token,x,y,n_t,Q,M,V\n";
    row = 0;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const auto& s = *by_id.at(picked[i]);
      const auto token = csv_field(vocab.find(s.token_id)->token);
      for (std::size_t p = 0; p < reservoir[i].size(); ++p, ++row) {
        f << fmt::format("{},{},{},{},{},{},{}\n", token, num(pca.coords(row, 0)),
                         num(pca.coords(row, 1)), s.n, num(s.Q), num(s.M), num(s.V));
      }
    }
    f << fmt::format("<origin>,{},{},,,,\n", num(pca.origin(0)), num(pca.origin(1)));
    manifest.output("pca_coords.csv");
  }
  {
    json j;
    j["n_points"] = rows;
    j["dim"] = dim;
    j["explained_variance"] = {pca.explained_variance[0], pca.explained_variance[1]};
    j["origin_before_translation"] = {pca.origin_offset(0), pca.origin_offset(1)};
    j["sampled_tokens"] = picked;
    auto f = open_output(opt.out / "pca.json");
    f << j.dump(2) << '\n';
    manifest.output("pca.json");
  }
  manifest.write(opt.out);
}

void cmd_simulate_ln(const SimulateLnOptions& opt) {
  prepare_out_dir(opt.out);
  RunManifest manifest("simulate-ln");
  manifest.param("d", opt.d);
  manifest.param("gamma", vector_spec_json(opt.gamma));
  manifest.param("beta", vector_spec_json(opt.beta));
  manifest.param("n0_grid", opt.n0_grid);
  manifest.param("tokens", opt.tokens);
  manifest.param("distribution", opt.distribution);
  manifest.param("threads", opt.threads);
  manifest.seed(opt.seed);
  if (opt.gamma.file) manifest.input(*opt.gamma.file);
  if (opt.beta.file) manifest.input(*opt.beta.file);

  lnsim::CvStudyParams params;
  params.gamma = resolve_vector(opt.gamma, opt.d, "gamma");
  params.beta = resolve_vector(opt.beta, opt.d, "beta");
  params.n0_grid = opt.n0_grid;
  params.tokens_per_point = opt.tokens;
  params.base = lnsim::parse_distribution(opt.distribution);
  params.seed = opt.seed;
  params.threads = std::max(1u, opt.threads);
  const auto study = lnsim::cv_scaling_study(params);

  {
    auto f = open_output(opt.out / "cv_study.tsv");
    f << "n0\tcv_Q\tmean_Q\n";
    for (const auto& p : study.points) {
      f << fmt::format("{}\t{}\t{}\n", p.n0, num(p.cv_q), num(p.mean_q));
    }
    manifest.output("cv_study.tsv");
  }
  {
    json j;
    j["loglog_slope"] = std::isnan(study.loglog_slope) ? json(nullptr) : json(study.loglog_slope);
    j["loglog_r2"] = std::isnan(study.loglog_r2) ? json(nullptr) : json(study.loglog_r2);
    j["mean_Q"] = study.mean_q;
    j["predicted_Q"] = study.predicted_q;
    j["theoretical_slope"] = -0.5;
    auto f = open_output(opt.out / "cv_study.json");
    f << j.dump(2) << '\n';
    manifest.output("cv_study.json");
  }
  manifest.write(opt.out);
}

void cmd_generate_ln(const GenerateLnOptions& opt) {
  if (opt.frequencies.empty()) throw InputError("--frequencies must list at least one n_t");
  prepare_out_dir(opt.out);
  RunManifest manifest("generate-ln");
  manifest.param("d", opt.d);
  manifest.param("gamma", vector_spec_json(opt.gamma));
  manifest.param("beta", vector_spec_json(opt.beta));
  manifest.param("frequencies", opt.frequencies);
  manifest.param("distribution", opt.distribution);
  manifest.param("layer", opt.layer);
  manifest.seed(opt.seed);
  if (opt.gamma.file) manifest.input(*opt.gamma.file);
  if (opt.beta.file) manifest.input(*opt.beta.file);

  lnsim::LnSimConfig config;
  config.gamma = resolve_vector(opt.gamma, opt.d, "gamma");
  config.beta = resolve_vector(opt.beta, opt.d, "beta");
  config.token_frequencies = opt.frequencies;
  config.base = lnsim::parse_distribution(opt.distribution);
  config.seed = opt.seed;

  stream::StreamHeader header;
  header.dim = static_cast<std::uint32_t>(opt.d);
  header.layer = opt.layer;
  header.model_tag = "ln-sim";
  {
    auto f = open_output(opt.out / "ln.emb");
    stream::StreamWriter writer(f, header);
    lnsim::generate_ln_stream(config, writer);
    manifest.output("ln.emb");
  }
  {
    stream::Vocab vocab;
    for (std::size_t t = 0; t < opt.frequencies.size(); ++t) {
      auto token = fmt::format("tok{}", t);
      const auto len = static_cast<std::uint32_t>(token.size());
      vocab.add({static_cast<std::uint32_t>(t), std::move(token), len});
    }
    auto f = open_output(opt.out / "vocab.tsv");
    vocab.write(f);
    manifest.output("vocab.tsv");
  }
  manifest.write(opt.out);
}

}  // namespace embstats::cli
