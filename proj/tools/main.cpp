// transfer: command-line front end for the transfer library.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cli/verbs.hpp"

using namespace transfer;
using namespace transfer::cli;

namespace {

struct Options {
  std::uint64_t seed = 0;
  std::optional<double> tol;
  std::string out;
  std::string format = "json";
  std::string transfer, cost, space, mu, nu, chain, spec, entropy, generator, alpha, link, level = "fast";
  std::string base_point;
  std::optional<double> ell;
  std::vector<std::string> with;
};

bool looks_like_file(const std::string& s) {
  return s.size() > 5 && s.substr(s.size() - 5) == ".json" ? true : std::filesystem::is_regular_file(s);
}

json parse_inline_or_file(const std::string& s) {
  if (looks_like_file(s)) return load_file(s);
  try {
    return json::parse(s);
  } catch (const json::parse_error&) {
    return json(s);  // a bare name such as "xlogx"
  }
}

// --transfer accepts a descriptor file or a kind completed by --cost,
// --space and --with key=file.
json transfer_descriptor(const Options& o) {
  if (o.transfer.empty()) throw InputError("--transfer is required");
  if (looks_like_file(o.transfer)) return load_file(o.transfer);
  json d{{"kind", o.transfer}};
  if (!o.cost.empty()) d["cost"] = load_file(o.cost);
  if (!o.space.empty()) d["space"] = load_file(o.space);
  for (const std::string& kv : o.with) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--with expects key=file, got '" + kv + "'");
    d[kv.substr(0, eq)] = parse_inline_or_file(kv.substr(eq + 1));
  }
  return d;
}

json entropy_descriptor(const Options& o) {
  if (o.entropy.empty()) throw InputError("--entropy is required");
  if (looks_like_file(o.entropy)) return load_file(o.entropy);
  json d{{"kind", o.entropy}};
  if (!o.space.empty()) d["space"] = load_file(o.space);
  if (!o.generator.empty()) d["generator"] = load_file(o.generator);
  if (!o.alpha.empty()) d["alpha"] = parse_inline_or_file(o.alpha);
  if (!o.link.empty()) d["link"] = load_file(o.link);
  return d;
}

json gather(const std::string& verb, const Options& o) {
  json in = json::object();
  auto pair = [&] {
    if (o.mu.empty() || o.nu.empty()) throw InputError("--mu and --nu are required");
    in["mu"] = load_file(o.mu);
    in["nu"] = load_file(o.nu);
  };
  if (verb == "eval" || verb == "dual-gap") {
    in["transfer"] = transfer_descriptor(o);
    pair();
  } else if (verb == "kam" || verb == "mather" || verb == "barrier") {
    in["transfer"] = transfer_descriptor(o);
    if (!o.base_point.empty()) in["base_point"] = o.base_point;
    if (o.ell) in["ell"] = num(*o.ell);
  } else if (verb == "convolve" || verb == "tensor") {
    if (o.chain.empty()) throw InputError("--chain is required");
    in["chain"] = load_file(o.chain);
    pair();
  } else if (verb == "ineq") {
    if (o.spec.empty()) throw InputError("--spec is required");
    in["spec"] = load_file(o.spec);
  } else if (verb == "entropy") {
    in["entropy"] = entropy_descriptor(o);
    pair();
  } else if (verb == "verify") {
    in["level"] = o.level;
  }
  return in;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "seed for every randomized step");
  cmd->add_option("--tol", o.tol, "tolerance override (else TRANSFER_TOL, else solver default)");
  cmd->add_option("--out", o.out, "write the report here instead of stdout");
  cmd->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

void add_transfer(CLI::App* cmd, Options& o) {
  cmd->add_option("--transfer", o.transfer, "descriptor file or kind (mk, kr, tv, trivial, ...)");
  cmd->add_option("--cost", o.cost, "cost matrix file");
  cmd->add_option("--space", o.space, "space file");
  cmd->add_option("--with", o.with, "extra descriptor field, key=file or key=json");
}

void add_pair(CLI::App* cmd, Options& o) {
  cmd->add_option("--mu", o.mu, "source measure file");
  cmd->add_option("--nu", o.nu, "target measure file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfers between probability measures on finite spaces"};
  app.require_subcommand(1);
  Options o;
  std::map<std::string, std::string> help{
      {"eval", "evaluate a transfer on (mu, nu)"},
      {"dual-gap", "primal value, ascent dual and their gap"},
      {"convolve", "inf-convolution of a chain of transfers"},
      {"tensor", "tensor product of two transfers"},
      {"ineq", "check a transport-entropy inequality"},
      {"kam", "effective constant and calibrated fixed point"},
      {"mather", "Aubry set and Mather measure"},
      {"barrier", "Peierls barrier"},
      {"entropy", "entropic transfer value and dual"},
      {"verify", "run the invariant batteries"},
  };
  for (const std::string& verb : verbs()) {
    CLI::App* cmd = app.add_subcommand(verb, help[verb]);
    add_common(cmd, o);
    if (verb == "eval" || verb == "dual-gap" || verb == "kam" || verb == "mather" || verb == "barrier")
      add_transfer(cmd, o);
    if (verb == "eval" || verb == "dual-gap" || verb == "convolve" || verb == "tensor" || verb == "entropy")
      add_pair(cmd, o);
    if (verb == "kam" || verb == "mather" || verb == "barrier")
      cmd->add_option("--base-point", o.base_point, "label where fixed points vanish");
    if (verb == "mather" || verb == "barrier") cmd->add_option("--ell", o.ell, "effective constant to calibrate with");
    if (verb == "convolve" || verb == "tensor") cmd->add_option("--chain", o.chain, "list of transfer descriptors");
    if (verb == "ineq") cmd->add_option("--spec", o.spec, "inequality spec file");
    if (verb == "entropy") {
      cmd->add_option("--entropy", o.entropy, "descriptor file or kind (log, donsker_varadhan, generalized, power)");
      cmd->add_option("--space", o.space, "space file");
      cmd->add_option("--generator", o.generator, "generator file for donsker_varadhan");
      cmd->add_option("--alpha", o.alpha, "scalar function name, JSON or file");
      cmd->add_option("--link", o.link, "transfer descriptor to convolve with");
    }
    if (verb == "verify") cmd->add_option("--level", o.level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg;
    cfg.seed = o.seed;
    cfg.tol = o.tol;
    cfg.format = parse_format(o.format);
    const Report r = run(verb, gather(verb, o), cfg);
    const json j = r.to_json();
    validate_report(j);
    const std::string text = cfg.format == Format::Csv ? render_csv(r) : render_json(j);
    if (o.out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(o.out, std::ios::binary);
      if (!f) throw InputError("cannot write '" + o.out + "'");
      f << text;
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    return exit_code(r);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
