// fracdiff: fractional diffusion u(t) = exp(-t (L^T)^alpha) u0 on directed graphs.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fracdiff/cli.hpp"

namespace {

using namespace fracdiff;

template <typename E>
std::vector<E> expand(const std::string& s, E (*parse)(std::string_view)) {
  if (s.empty() || s == "all") return {};
  return {parse(s)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional diffusion on directed graphs by rational Krylov methods"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::string pole, desing, ordering = "rcm", reference;
  std::string out;
  Index source = 0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--graph", cfg.graph_path, "Adjacency matrix (Matrix Market)")
        ->required();
    sub->add_option("--ordering", ordering, "Fill-reducing ordering")
        ->check(CLI::IsMember({"natural", "rcm"}));
    sub->add_option("--lambda2", cfg.lambda2, "Override |lambda_2|");
    sub->add_option("--lambdan", cfg.lambdaN, "Override |lambda_n|");
    sub->add_option("--out", out, "Output file");
  };
  const auto method = [&](CLI::App* sub, bool allow_all) {
    sub->add_option("--t", cfg.t, "Time")->check(CLI::NonNegativeNumber);
    sub->add_option("--alpha", cfg.alpha, "Fractional exponent in (0, 1]")
        ->check(CLI::Range(0.0, 1.0));
    std::vector<std::string> poles{"poly", "si-geomean", "si-time", "eds"};
    std::vector<std::string> desings{"none", "rank1", "proj", "implicit"};
    if (allow_all) {
      poles.push_back("all");
      desings.push_back("all");
    }
    sub->add_option("--pole", pole, "Pole choice")->check(CLI::IsMember(poles));
    sub->add_option("--desing", desing, "Desingularization")->check(CLI::IsMember(desings));
    sub->add_option("--theta", cfg.theta, "Rank-one shift theta")->check(CLI::PositiveNumber);
    sub->add_option("--tol", cfg.tol, "Stop when consecutive iterates differ by <= tol")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--max-k", cfg.max_k, "Maximum Krylov dimension")
        ->check(CLI::PositiveNumber);
    sub->add_option("--eds-seed", cfg.eds_seed, "Starting index of the EDS sequence");
    sub->add_option("--source", source, "1-based source node (default: first LCC node)")
        ->check(CLI::PositiveNumber);
  };

  auto* solve = app.add_subcommand("solve", "Compute u(t) from a point source");
  common(solve);
  method(solve, false);

  auto* study = app.add_subcommand("study", "Convergence study, CSV output");
  common(study);
  method(study, true);
  study->add_option("--dense-limit", cfg.dense_limit, "Largest n for the dense reference");
  study->add_option("--reference", reference, "Reference solution")
      ->check(CLI::IsMember({"dense", "eds"}));
  bool no_timing = false;
  study->add_flag("--no-timing", no_timing, "Write 0 in the seconds column");

  auto* spectrum = app.add_subcommand("spectrum", "Estimate |lambda_2| and |lambda_n|");
  common(spectrum);
  auto* nullvec = app.add_subcommand("nullvec", "Left null vector z of the Laplacian");
  common(nullvec);
  auto* scc = app.add_subcommand("scc", "Size of the largest strongly connected component");
  common(scc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*solve) cfg.command = Command::solve;
  if (*study) cfg.command = Command::study;
  if (*spectrum) cfg.command = Command::spectrum;
  if (*nullvec) cfg.command = Command::nullvec;
  if (*scc) cfg.command = Command::scc;

  cfg.poles = expand(pole, parse_pole_kind);
  cfg.desings = expand(desing, parse_desing);
  cfg.ordering = ordering == "natural" ? Ordering::natural : Ordering::rcm;
  if (!out.empty()) cfg.out = out;
  if (source > 0) cfg.source = source;
  if (reference == "dense") cfg.reference = ReferenceKind::dense;
  if (reference == "eds") cfg.reference = ReferenceKind::eds_implicit_refined;
  cfg.timing = !no_timing;

  return run_command(cfg, std::cout, std::cerr);
}
