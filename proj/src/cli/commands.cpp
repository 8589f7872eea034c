#include "bayeshield/cli/commands.hpp"

#include "bayeshield/cli/dataset_io.hpp"
#include "bayeshield/cli/report.hpp"
#include "bayeshield/embed.hpp"
#include "bayeshield/estimator.hpp"
#include "bayeshield/perturb.hpp"
#include "bayeshield/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

namespace bayeshield::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradcheckTolerance = 1e-4;
constexpr double kReferenceTruncnormAnalytic = 0.1427;
constexpr double kReferenceTruncnormEstimate = 0.1426;
constexpr double kReferenceMoonsBefore = 0.1434;
constexpr double kReferenceMoonsAfter = 0.1888;

std::string fixed6(double value)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string sci(double value)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", value);
  return buf;
}

std::string absolute_path(const std::string& path)
{
  return fs::absolute(path).lexically_normal().string();
}

std::optional<EmbeddingMap> embedding_of(const json& config)
{
  if (!config.contains("embedding") || config.at("embedding").is_null()) {
    return std::nullopt;
  }
  return embedding_from_json(config.at("embedding"));
}

unsigned threads_of(const json& config)
{
  return config.value("threads", 0U);
}

struct LoadedDataset
{
  CsvDataset csv;
  std::string fingerprint;
};

LoadedDataset load_dataset(const json& config)
{
  const std::string path = config.at("dataset").get<std::string>();
  const std::string bytes = read_text_file(path);
  return { parse_dataset_csv(bytes, path), fingerprint(bytes) };
}

// Bandwidth is chosen where similarity is evaluated, i.e. after the embedding.
struct ResolvedBandwidth
{
  double sigma;
  std::string source;
};

ResolvedBandwidth resolve_bandwidth(const LabeledDataset& feature_space, const json& config)
{
  if (config.contains("sigma") && !config.at("sigma").is_null()) {
    return { config.at("sigma").get<double>(), "explicit" };
  }
  const BandwidthRule rule = parse_bandwidth_rule(config.at("sigma_heuristic").get<std::string>());
  return { select_bandwidth(feature_space, rule, threads_of(config)), to_string(rule) };
}

LabeledDataset feature_space(const LabeledDataset& data, const std::optional<EmbeddingMap>& embedding)
{
  return embedding ? embed_dataset(*embedding, data) : data;
}

std::string fallback_warning(std::size_t rows)
{
  return std::to_string(rows) +
         " sample(s) have no similarity mass at this bandwidth and use the uniform posterior";
}

void print_warnings(std::ostream& out, const std::vector<std::string>& warnings)
{
  for (const auto& w : warnings) {
    out << "warning: " << w << '\n';
  }
}

json class_counts(const LabeledDataset& data)
{
  std::vector<Index> counts(static_cast<std::size_t>(data.num_classes()), 0);
  for (int y : data.labels()) {
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

// ---------------------------------------------------------------- estimate

Execution execute_estimate(const json& config, bool emit, std::ostream& out)
{
  const auto loaded = load_dataset(config);
  const auto embedding = embedding_of(config);
  const LabeledDataset features = feature_space(loaded.csv.data, embedding);
  const auto bandwidth = resolve_bandwidth(features, config);
  const auto estimate =
    estimate_bayes_error(features, SimilarityKernel::gaussian(bandwidth.sigma), threads_of(config));

  Execution ex;
  ex.input_fingerprint = loaded.fingerprint;
  ex.results = { { "bayes_error", estimate.value },
                 { "sigma", bandwidth.sigma },
                 { "sigma_source", bandwidth.source },
                 { "n", features.size() },
                 { "num_classes", features.num_classes() },
                 { "per_sample_max_posterior", estimate.per_sample_max_posterior },
                 { "uniform_fallback_rows", estimate.uniform_fallback_rows } };
  if (estimate.has_warnings()) {
    ex.warnings.push_back(fallback_warning(estimate.uniform_fallback_rows.size()));
  }
  if (emit) {
    out << "bayes_error " << fixed6(estimate.value) << '\n'
        << "sigma " << fixed6(bandwidth.sigma) << " (" << bandwidth.source << ")\n"
        << "samples " << features.size() << ", classes " << features.num_classes() << '\n';
    print_warnings(out, ex.warnings);
    out << "index,max_posterior\n";
    for (std::size_t i = 0; i < estimate.per_sample_max_posterior.size(); ++i) {
      out << i << ',' << fixed6(estimate.per_sample_max_posterior[i]) << '\n';
    }
  }
  return ex;
}

// ----------------------------------------------------------------- perturb

PgaConfig pga_config_of(const json& config)
{
  PgaConfig pga;
  pga.step_size = config.at("eta").get<double>();
  pga.max_iterations = config.at("iters").get<int>();
  pga.threads = threads_of(config);
  return pga;
}

json perturb_results(const PgaResult& result, double sigma, const std::string& source, NormOrder norm)
{
  const double before = result.trace.front();
  const double after = result.trace.back();
  double largest = 0.0;
  for (Index i = 0; i < result.deltas.rows(); ++i) {
    largest = std::max(largest, norm_of(row_span(result.deltas, i), norm));
  }
  return { { "sigma", sigma },
           { "sigma_source", source },
           { "bayes_error_before", before },
           { "bayes_error_after", after },
           { "ratio", before > 0.0 ? json(after / before) : json(nullptr) },
           { "trace", result.trace },
           { "max_delta_norm", largest } };
}

Execution execute_perturb(const json& config, bool emit, std::ostream& out)
{
  const auto loaded = load_dataset(config);
  const LabeledDataset& data = loaded.csv.data;
  const auto embedding = embedding_of(config);
  const auto bandwidth = resolve_bandwidth(feature_space(data, embedding), config);
  const NormOrder norm = parse_norm_order(config.at("norm").get<std::string>());
  const PerturbationConstraint constraint(
    norm, config.at("eps").get<double>(), config.at("frozen").get<std::vector<Index>>());
  const PgaResult result = pga_maximize(data,
                                        SimilarityKernel::gaussian(bandwidth.sigma),
                                        constraint,
                                        pga_config_of(config),
                                        embedding ? &*embedding : nullptr);

  Execution ex;
  ex.input_fingerprint = loaded.fingerprint;
  ex.results = perturb_results(result, bandwidth.sigma, bandwidth.source, norm);
  const std::string perturbed_csv = format_dataset_csv(result.perturbed, loaded.csv.label_names);
  ex.results["perturbed_fingerprint"] = fingerprint(perturbed_csv);
  ex.warnings = result.warnings;

  if (emit) {
    const auto& outputs = config.at("outputs");
    write_text_file(outputs.at("perturbed").get<std::string>(), perturbed_csv);
    write_text_file(outputs.at("deltas").get<std::string>(), format_deltas_csv(result.deltas));
    write_text_file(outputs.at("trace").get<std::string>(), format_trace_csv(result.trace));
    out << "sigma " << fixed6(bandwidth.sigma) << " (" << bandwidth.source << ")\n"
        << "bayes_error_before " << fixed6(result.trace.front()) << '\n'
        << "bayes_error_after " << fixed6(result.trace.back()) << '\n';
    if (result.trace.front() > 0.0) {
      out << "ratio " << fixed6(result.trace.back() / result.trace.front()) << '\n';
    }
    print_warnings(out, ex.warnings);
    out << "wrote " << outputs.at("perturbed").get<std::string>() << ", "
        << outputs.at("deltas").get<std::string>() << ", " << outputs.at("trace").get<std::string>()
        << '\n';
  }
  return ex;
}

// --------------------------------------------------------------- gradcheck

Execution execute_gradcheck(const json& config, bool emit, std::ostream& out)
{
  const auto loaded = load_dataset(config);
  const LabeledDataset& data = loaded.csv.data;
  const auto embedding = embedding_of(config);
  const LabeledDataset features = feature_space(data, embedding);
  const auto bandwidth = resolve_bandwidth(features, config);
  const auto kernel = SimilarityKernel::gaussian(bandwidth.sigma);
  const unsigned threads = threads_of(config);
  const double h = config.at("h").get<double>();
  const double tie_tolerance = config.at("tie_tolerance").get<double>();
  const double coupling = config.at("coupling_threshold").get<double>();

  const GradientReport analytic =
    embedding ? objective_and_gradient(data, kernel, *embedding, TieBreak::lowest_class_index, threads)
              : objective_and_gradient(data, kernel, TieBreak::lowest_class_index, threads);
  const Matrix numeric = finite_difference_gradient(data, kernel, embedding ? &*embedding : nullptr, h);

  // A row whose two largest posteriors (nearly) coincide sits on a kink of
  // the max; any sample with non-negligible similarity to it inherits the kink
  // in its finite difference.
  std::vector<Index> tied;
  for (Index i = 0; i < data.size(); ++i) {
    if (data.num_classes() < 2) {
      break;
    }
    std::vector<double> row(analytic.posteriors.row(i).begin(), analytic.posteriors.row(i).end());
    std::partial_sort(row.begin(), row.begin() + 2, row.end(), std::greater<>());
    if (row[0] - row[1] <= tie_tolerance) {
      tied.push_back(i);
    }
  }
  std::vector<Index> excluded;
  for (Index m = 0; m < data.size(); ++m) {
    const bool hit = std::any_of(tied.begin(), tied.end(), [&](Index i) {
      return i == m || kernel(features.point(i), features.point(m)) > coupling;
    });
    if (hit) {
      excluded.push_back(m);
    }
  }

  double worst = 0.0;
  Index compared = 0;
  for (Index m = 0; m < data.size(); ++m) {
    if (std::binary_search(excluded.begin(), excluded.end(), m)) {
      continue;
    }
    for (Index k = 0; k < data.dim(); ++k) {
      const double a = analytic.gradients(m, k);
      const double f = numeric(m, k);
      worst = std::max(worst, std::abs(a - f) / (std::abs(f) + 1e-8));
      ++compared;
    }
  }

  Execution ex;
  ex.input_fingerprint = loaded.fingerprint;
  const bool pass = worst <= kGradcheckTolerance;
  ex.results = { { "objective", analytic.objective },
                 { "sigma", bandwidth.sigma },
                 { "sigma_source", bandwidth.source },
                 { "max_relative_error", compared > 0 ? json(worst) : json(nullptr) },
                 { "compared_coordinates", compared },
                 { "tied_rows", tied },
                 { "excluded_rows", excluded },
                 { "tolerance", kGradcheckTolerance },
                 { "pass", pass } };
  if (!tied.empty()) {
    ex.warnings.push_back(std::to_string(tied.size()) + " row(s) have an argmax tie; " +
                          std::to_string(excluded.size()) +
                          " row(s) coupled to them are excluded from the comparison");
  }
  if (compared == 0) {
    ex.warnings.push_back("every row was excluded; nothing was compared");
  }
  ex.status = pass ? kExitOk : kExitInternal;

  if (emit) {
    out << "objective " << fixed6(analytic.objective) << '\n'
        << "sigma " << fixed6(bandwidth.sigma) << " (" << bandwidth.source << ")\n";
    if (compared > 0) {
      out << "max_relative_error " << sci(worst) << " over " << compared << " coordinate(s)\n";
    }
    if (!tied.empty()) {
      out << "tied_rows";
      for (Index i : tied) {
        out << ' ' << i;
      }
      out << "\nexcluded_rows";
      for (Index i : excluded) {
        out << ' ' << i;
      }
      out << '\n';
    }
    print_warnings(out, ex.warnings);
    out << (pass ? "PASS" : "FAIL") << " (tolerance " << sci(kGradcheckTolerance) << ")\n";
  }
  return ex;
}

// --------------------------------------------------------------------- gen

LabeledDataset generate(const json& config)
{
  const std::string generator = config.at("generator").get<std::string>();
  const Index n = config.at("n").get<Index>();
  const auto seed = config.at("seed").get<std::uint64_t>();
  if (generator == "moons") {
    return generate_moons(n, config.at("noise").get<double>(), seed);
  }
  if (generator == "truncnorm") {
    return sample_truncated_normal_pair(canonical_truncated_normal_pair(), n, seed);
  }
  throw ValidationError("unknown generator '" + generator + "'");
}

Execution execute_gen(const json& config, bool emit, std::ostream& out)
{
  const LabeledDataset data = generate(config);
  const std::string csv = format_dataset_csv(data);
  Execution ex;
  ex.input_fingerprint = fingerprint(csv);
  ex.results = { { "rows", data.size() }, { "class_counts", class_counts(data) } };
  if (emit) {
    if (config.at("out").is_null()) {
      out << csv;
    } else {
      write_text_file(config.at("out").get<std::string>(), csv);
    }
  }
  return ex;
}

// -------------------------------------------------------------------- demo

Execution demo_truncnorm(const json& config, bool emit, std::ostream& out)
{
  const auto spec = canonical_truncated_normal_pair();
  const LabeledDataset data = sample_truncated_normal_pair(
    spec, config.at("n").get<Index>(), config.at("seed").get<std::uint64_t>());
  const std::string csv = format_dataset_csv(data);
  const unsigned threads = threads_of(config);
  const double analytic = analytic_bayes_error(spec, config.at("quadrature_points").get<int>());
  const BandwidthRule rule = parse_bandwidth_rule(config.at("sigma_heuristic").get<std::string>());
  const double sigma = select_bandwidth(data, rule, threads);
  const auto estimate = estimate_bayes_error(data, SimilarityKernel::gaussian(sigma), threads);
  const double median_sigma = median_heuristic_bandwidth(data);
  const auto median_estimate = estimate_bayes_error(data, SimilarityKernel::gaussian(median_sigma), threads);

  Execution ex;
  ex.input_fingerprint = fingerprint(csv);
  ex.results = { { "analytic_bayes_error", analytic },
                 { "bayes_error", estimate.value },
                 { "sigma", sigma },
                 { "sigma_source", to_string(rule) },
                 { "absolute_error", std::abs(estimate.value - analytic) },
                 { "median_heuristic_sigma", median_sigma },
                 { "median_heuristic_bayes_error", median_estimate.value },
                 { "class_counts", class_counts(data) } };
  if (estimate.has_warnings()) {
    ex.warnings.push_back(fallback_warning(estimate.uniform_fallback_rows.size()));
  }

  if (emit) {
    const fs::path dir = config.at("out_dir").get<std::string>();
    fs::create_directories(dir);
    write_text_file(dir / "truncnorm_sample.csv", csv);
    // Class-conditional densities on a grid covering both supports.
    std::string density = "x,pdf0,pdf1,weighted0,weighted1,overlap\n";
    const double lo = std::min(spec.classes[0].lower, spec.classes[1].lower);
    const double hi = std::max(spec.classes[0].upper, spec.classes[1].upper);
    constexpr int kGrid = 600;
    for (int k = 0; k <= kGrid; ++k) {
      const double x = lo + (hi - lo) * k / kGrid;
      const double f0 = truncated_normal_pdf(spec.classes[0], x);
      const double f1 = truncated_normal_pdf(spec.classes[1], x);
      const double w0 = spec.priors[0] * f0;
      const double w1 = spec.priors[1] * f1;
      density += format_double(x) + "," + format_double(f0) + "," + format_double(f1) + "," +
                 format_double(w0) + "," + format_double(w1) + "," + format_double(std::min(w0, w1)) +
                 "\n";
    }
    write_text_file(dir / "truncnorm_density.csv", density);

    out << "analytic_bayes_error " << fixed6(analytic) << "  (reference "
        << fixed6(kReferenceTruncnormAnalytic) << ")\n"
        << "bayes_error " << fixed6(estimate.value) << "  (reference "
        << fixed6(kReferenceTruncnormEstimate) << ", n=" << data.size() << ", sigma "
        << fixed6(sigma) << " by " << to_string(rule) << ")\n"
        << "absolute_error " << fixed6(std::abs(estimate.value - analytic)) << '\n'
        << "median_heuristic_bayes_error " << fixed6(median_estimate.value) << "  (sigma "
        << fixed6(median_sigma) << ")\n";
    print_warnings(out, ex.warnings);
    out << "wrote " << (dir / "truncnorm_sample.csv").string() << ", "
        << (dir / "truncnorm_density.csv").string() << '\n';
  }
  return ex;
}

Execution demo_moons(const json& config, bool emit, std::ostream& out)
{
  const LabeledDataset data = generate_moons(config.at("n").get<Index>(),
                                             config.at("noise").get<double>(),
                                             config.at("seed").get<std::uint64_t>());
  const std::string csv = format_dataset_csv(data);
  const double sigma = config.at("sigma").get<double>();
  const NormOrder norm = parse_norm_order(config.at("norm").get<std::string>());
  const PerturbationConstraint constraint(norm, config.at("eps").get<double>(), {});
  const PgaResult result =
    pga_maximize(data, SimilarityKernel::gaussian(sigma), constraint, pga_config_of(config));

  Execution ex;
  ex.input_fingerprint = fingerprint(csv);
  ex.results = perturb_results(result, sigma, "explicit", norm);
  const std::string after_csv = format_dataset_csv(result.perturbed);
  ex.results["perturbed_fingerprint"] = fingerprint(after_csv);
  ex.warnings = result.warnings;

  if (emit) {
    const fs::path dir = config.at("out_dir").get<std::string>();
    fs::create_directories(dir);
    write_text_file(dir / "moons_before.csv", csv);
    write_text_file(dir / "moons_after.csv", after_csv);
    write_text_file(dir / "moons_deltas.csv", format_deltas_csv(result.deltas));
    write_text_file(dir / "moons_trace.csv", format_trace_csv(result.trace));
    const double before = result.trace.front();
    const double after = result.trace.back();
    out << "bayes_error_before " << fixed6(before) << "  (reference " << fixed6(kReferenceMoonsBefore)
        << ")\n"
        << "bayes_error_after " << fixed6(after) << "  (reference " << fixed6(kReferenceMoonsAfter)
        << " at eps 0.25)\n"
        << "ratio " << fixed6(before > 0.0 ? after / before : 0.0)
        << "  (reference range 1.20 to 1.40)\n";
    print_warnings(out, ex.warnings);
    out << "wrote moons_before.csv, moons_after.csv, moons_deltas.csv, moons_trace.csv in "
        << dir.string() << '\n';
  }
  return ex;
}

Execution execute_demo(const json& config, bool emit, std::ostream& out)
{
  const std::string name = config.at("name").get<std::string>();
  if (name == "truncnorm") {
    return demo_truncnorm(config, emit, out);
  }
  if (name == "moons") {
    return demo_moons(config, emit, out);
  }
  throw ValidationError("unknown demo '" + name + "' (expected truncnorm or moons)");
}

// ------------------------------------------------------------------ replay

// Integers written as signed come back unsigned after parsing, so equality is
// checked before comparing types.
std::string first_difference(const json& expected, const json& actual, const std::string& where = "")
{
  if (expected == actual) {
    return "";
  }
  if (expected.type() != actual.type()) {
    return where.empty() ? "/" : where;
  }
  if (expected.is_object()) {
    for (auto it = expected.begin(); it != expected.end(); ++it) {
      if (!actual.contains(it.key())) {
        return where + "/" + it.key();
      }
      if (auto d = first_difference(it.value(), actual.at(it.key()), where + "/" + it.key()); !d.empty()) {
        return d;
      }
    }
    return expected.size() == actual.size() ? "" : (where.empty() ? "/" : where);
  }
  if (expected.is_array()) {
    if (expected.size() != actual.size()) {
      return where.empty() ? "/" : where;
    }
    for (std::size_t k = 0; k < expected.size(); ++k) {
      if (auto d = first_difference(expected[k], actual[k], where + "/" + std::to_string(k)); !d.empty()) {
        return d;
      }
    }
    return "";
  }
  return expected == actual ? "" : (where.empty() ? "/" : where);
}

// ------------------------------------------------------------ flag wiring

struct Options
{
  std::string dataset;
  std::optional<double> sigma;
  std::string sigma_heuristic = "loo-cv";
  std::optional<double> eps;
  std::string norm = "linf";
  std::optional<double> eta;
  int iters = 100;
  std::string frozen;
  std::string embedding;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string report;
  std::string out;
  std::string trace;
  std::string deltas;
  double h = 1e-5;
  double tie_tolerance = 1e-6;
  double coupling_threshold = 1e-12;
  Index n = 0;
  double noise = 0.1;
  int quadrature_points = 4096;
  std::string name;
};

void add_kernel_flags(CLI::App* cmd, Options& o)
{
  cmd->add_option("--sigma", o.sigma, "Gaussian bandwidth (overrides --sigma-heuristic)");
  cmd->add_option("--sigma-heuristic", o.sigma_heuristic, "Bandwidth rule when --sigma is absent")
    ->check(CLI::IsMember({ "loo-cv", "median" }));
  cmd->add_option("--embedding", o.embedding, "Embedding map file; similarity is measured after it");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--seed", o.seed, "Seed echoed in the report");
  cmd->add_option("--report", o.report, "Write a JSON run report here");
}

json kernel_config(const Options& o)
{
  json config = { { "dataset", absolute_path(o.dataset) },
                  { "sigma", o.sigma ? json(*o.sigma) : json(nullptr) },
                  { "sigma_heuristic", o.sigma_heuristic },
                  { "threads", o.threads },
                  { "seed", o.seed },
                  { "embedding", nullptr } };
  if (!o.embedding.empty()) {
    config["embedding"] = embedding_to_json(load_embedding(o.embedding));
  }
  return config;
}

std::string with_suffix(const std::string& path, const std::string& suffix)
{
  fs::path p(path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

} // namespace

Execution execute(const std::string& command, const json& config, bool emit, std::ostream& out)
{
  try {
    if (command == "estimate") {
      return execute_estimate(config, emit, out);
    }
    if (command == "perturb") {
      return execute_perturb(config, emit, out);
    }
    if (command == "gradcheck") {
      return execute_gradcheck(config, emit, out);
    }
    if (command == "gen") {
      return execute_gen(config, emit, out);
    }
    if (command == "demo") {
      return execute_demo(config, emit, out);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("incomplete configuration: ") + e.what());
  }
  throw ValidationError("unknown command '" + command + "'");
}

namespace {

int run_unguarded(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Bayes-error estimation and unlearnable-dataset construction", "bayeshield" };
  app.require_subcommand(1);
  Options o;

  auto* estimate = app.add_subcommand("estimate", "Estimate the Bayes error of a dataset");
  estimate->add_option("dataset", o.dataset, "Dataset CSV")->required();
  add_kernel_flags(estimate, o);

  auto* perturb = app.add_subcommand("perturb", "Maximise the Bayes-error estimate under a budget");
  perturb->add_option("dataset", o.dataset, "Dataset CSV")->required();
  add_kernel_flags(perturb, o);
  perturb->add_option("--eps", o.eps, "Perturbation radius")->required();
  perturb->add_option("--norm", o.norm, "Budget norm")->check(CLI::IsMember({ "l2", "linf" }));
  perturb->add_option("--eta", o.eta, "Step size (default 0.1 * eps)");
  perturb->add_option("--iters", o.iters, "Number of ascent iterations");
  perturb->add_option("--frozen", o.frozen, "File of indices that must stay unperturbed");
  perturb->add_option("--out", o.out, "Perturbed dataset CSV")->required();
  perturb->add_option("--trace", o.trace, "Trace CSV (default <out>.trace.csv)");
  perturb->add_option("--deltas", o.deltas, "Deltas CSV (default <out>.deltas.csv)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare the analytic gradient to finite differences");
  gradcheck->add_option("dataset", o.dataset, "Dataset CSV")->required();
  add_kernel_flags(gradcheck, o);
  gradcheck->add_option("--fd-step", o.h, "Central-difference step h");
  gradcheck->add_option("--tie-tolerance", o.tie_tolerance, "Posterior gap treated as an argmax tie");

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset");
  gen->add_option("generator", o.name, "moons or truncnorm")
    ->required()
    ->check(CLI::IsMember({ "moons", "truncnorm" }));
  gen->add_option("--n", o.n, "Number of samples");
  gen->add_option("--noise", o.noise, "Moons noise standard deviation");
  gen->add_option("--seed", o.seed, "Random seed");
  gen->add_option("--out", o.out, "Output CSV (default stdout)");
  gen->add_option("--report", o.report, "Write a JSON run report here");

  auto* demo = app.add_subcommand("demo", "Reproduce a worked example and write plot data");
  demo->add_option("name", o.name, "truncnorm or moons")->required()->check(CLI::IsMember({ "truncnorm", "moons" }));
  demo->add_option("--n", o.n, "Number of samples");
  demo->add_option("--seed", o.seed, "Random seed");
  demo->add_option("--eps", o.eps, "Moons perturbation radius (default 0.25)");
  demo->add_option("--norm", o.norm, "Moons budget norm")->check(CLI::IsMember({ "l2", "linf" }));
  demo->add_option("--eta", o.eta, "Moons step size");
  demo->add_option("--iters", o.iters, "Moons iterations");
  demo->add_option("--sigma", o.sigma, "Moons bandwidth");
  demo->add_option("--sigma-heuristic", o.sigma_heuristic, "Truncnorm bandwidth rule")
    ->check(CLI::IsMember({ "loo-cv", "median" }));
  demo->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  demo->add_option("--out", o.out, "Output directory (default demo_<name>)");
  demo->add_option("--report", o.report, "Report path (default <out>/<name>_report.json)");

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Recompute a report and compare the results");
  replay->add_option("report", replay_path, "Report written by --report")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (replay->parsed()) {
      const RunReport stored = load_report(replay_path);
      const Execution again = execute(stored.command, stored.config, false, out);
      if (again.input_fingerprint != stored.input_fingerprint) {
        err << "replay: input changed (" << stored.input_fingerprint << " recorded, "
            << again.input_fingerprint << " now)\n";
        return kExitUsage;
      }
      if (const auto diff = first_difference(stored.results, again.results); !diff.empty()) {
        err << "replay: results differ at " << diff << '\n';
        return kExitInternal;
      }
      if (again.warnings != stored.warnings) {
        err << "replay: warnings differ\n";
        return kExitInternal;
      }
      out << "replay: " << stored.command << " results identical\n";
      return kExitOk;
    }

    std::string command;
    json config;
    if (estimate->parsed()) {
      command = "estimate";
      config = kernel_config(o);
    } else if (perturb->parsed()) {
      command = "perturb";
      config = kernel_config(o);
      config["eps"] = *o.eps;
      config["norm"] = o.norm;
      config["eta"] = o.eta ? *o.eta : PgaConfig::defaults_for(*o.eps).step_size;
      config["iters"] = o.iters;
      config["frozen"] = o.frozen.empty() ? std::vector<Index>{} : read_frozen_indices(o.frozen);
      config["outputs"] = { { "perturbed", absolute_path(o.out) },
                            { "trace", absolute_path(o.trace.empty() ? with_suffix(o.out, ".trace.csv") : o.trace) },
                            { "deltas",
                              absolute_path(o.deltas.empty() ? with_suffix(o.out, ".deltas.csv") : o.deltas) } };
    } else if (gradcheck->parsed()) {
      command = "gradcheck";
      config = kernel_config(o);
      config["h"] = o.h;
      config["tie_tolerance"] = o.tie_tolerance;
      config["coupling_threshold"] = o.coupling_threshold;
    } else if (gen->parsed()) {
      command = "gen";
      config = { { "generator", o.name },
                 { "n", o.n > 0 ? o.n : (o.name == "moons" ? Index{ 200 } : Index{ 2000 }) },
                 { "seed", o.seed },
                 { "out", o.out.empty() ? json(nullptr) : json(absolute_path(o.out)) } };
      if (o.name == "moons") {
        config["noise"] = o.noise;
      }
    } else {
      command = "demo";
      const std::string dir = absolute_path(o.out.empty() ? "demo_" + o.name : o.out);
      config = { { "name", o.name }, { "seed", o.seed }, { "threads", o.threads }, { "out_dir", dir } };
      if (o.name == "truncnorm") {
        config["n"] = o.n > 0 ? o.n : Index{ 2000 };
        config["quadrature_points"] = o.quadrature_points;
        config["sigma_heuristic"] = o.sigma_heuristic;
      } else {
        const MoonsSetup setup;
        const bool norm_given = demo->count("--norm") > 0;
        const bool iters_given = demo->count("--iters") > 0;
        config["n"] = o.n > 0 ? o.n : setup.n;
        config["noise"] = setup.noise;
        config["sigma"] = o.sigma ? *o.sigma : setup.sigma;
        config["eps"] = o.eps ? *o.eps : 0.25;
        config["eta"] = o.eta ? *o.eta : setup.step_size;
        config["iters"] = iters_given ? o.iters : setup.iterations;
        config["norm"] = norm_given ? o.norm : to_string(setup.norm);
      }
      if (o.report.empty()) {
        o.report = (fs::path(dir) / (o.name + "_report.json")).string();
      }
    }

    const auto start = std::chrono::steady_clock::now();
    Execution ex = execute(command, config, true, out);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!o.report.empty()) {
      RunReport report{ command, ex.input_fingerprint, config, ex.results, ex.warnings, elapsed };
      save_report(report, o.report);
    }
    return ex.status;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UndefinedPosteriorError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  try {
    return run_unguarded(args, out, err);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

} // namespace bayeshield::cli
