#include "cxdiag/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "cxdiag/checker.hpp"
#include "cxdiag/counterexample.hpp"
#include "cxdiag/diagnosis.hpp"
#include "cxdiag/error.hpp"
#include "cxdiag/explicit_io.hpp"
#include "cxdiag/pctl.hpp"
#include "cxdiag/program.hpp"

namespace cxdiag::cli {

namespace {

struct RunConfig {
  std::string model;
  std::string model_format = "auto";
  std::string labels;
  std::string prop;
  std::string props_file;
  std::vector<std::string> constants;
  double epsilon = kDefaultEpsilon;
  std::size_t max_paths = kDefaultMaxPaths;
  double min_prob = kDefaultMinProb;
  std::size_t state_cap = BuildOptions{}.state_cap;
  std::string format = "text";
  std::string out;
  std::string export_cx;
  std::string trace;
  bool normalize = false;
  bool serial = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

struct LoadedModel {
  Mdp mdp;
  std::optional<BuildResult> program;
  std::vector<std::string> state_names;
};

bool is_program(const RunConfig& c) {
  if (c.model_format == "program") return true;
  if (c.model_format == "explicit") return false;
  auto ends_with = [&](std::string_view suffix) {
    return c.model.size() >= suffix.size() && c.model.compare(c.model.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".pm") || ends_with(".prism") || ends_with(".nm");
}

LoadedModel load_model(const RunConfig& c) {
  LoadedModel out;
  if (is_program(c)) {
    ConstantOverrides overrides;
    for (const auto& kv : c.constants) {
      auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--const expects NAME=VALUE, got '" + kv + "'");
      overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    auto program = parse_program(read_file(c.model), overrides, c.model);
    BuildOptions options;
    options.state_cap = c.state_cap;
    out.program = build_mdp(program, options);
    out.mdp = out.program->mdp;
    out.state_names.reserve(out.mdp.num_states());
    for (StateId s = 0; s < out.mdp.num_states(); ++s) out.state_names.push_back(out.program->describe(s));
  } else {
    if (!c.constants.empty()) throw UsageError("--const applies to program models only");
    out.mdp = read_explicit_model(read_file(c.model), c.labels.empty() ? std::string{} : read_file(c.labels));
  }
  auto violations = validate_mdp(out.mdp);
  if (!violations.empty()) {
    std::string msg = "model is not a valid MDP:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw DomainError(msg);
  }
  return out;
}

std::vector<PropertySpec> load_properties(const RunConfig& c, const Mdp& m) {
  const SymbolTable* labels = &m.labeling().aps();
  if (!c.prop.empty() && !c.props_file.empty()) throw UsageError("give either --prop or --props-file, not both");
  if (!c.prop.empty()) return {parse_property(c.prop, labels)};
  if (!c.props_file.empty()) {
    auto props = parse_properties_file(read_file(c.props_file), labels);
    if (props.empty()) throw UsageError("no properties in '" + c.props_file + "'");
    return props;
  }
  throw UsageError("a property is required (--prop or --props-file)");
}

CheckOptions check_options(const RunConfig& c) {
  if (!(c.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
  if (c.max_paths < 1) throw UsageError("--max-paths must be at least 1");
  if (c.state_cap < 1) throw UsageError("--state-cap must be at least 1");
  CheckOptions o;
  o.epsilon = c.epsilon;
  o.scheduler_tolerance = c.epsilon;
  o.kernel = c.serial ? Kernel::Serial : Kernel::Parallel;
  return o;
}

std::string shortest(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Output {
 public:
  Output(const RunConfig& c, std::ostream& out) : path_(c.out), out_(out) {}
  std::ostream& stream() { return path_.empty() ? out_ : buffer_; }
  void flush() {
    if (!path_.empty()) write_file(path_, buffer_.str());
  }

 private:
  std::string path_;
  std::ostream& out_;
  std::ostringstream buffer_;
};

int cmd_check(const RunConfig& c, std::ostream& out) {
  auto model = load_model(c);
  auto props = load_properties(c, model.mdp);
  auto options = check_options(c);
  Output sink(c, out);
  int code = kHolds;
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& spec : props) {
    auto v = check_property(model.mdp, spec, options);
    if (!v.holds) code = kViolated;
    if (c.format == "json") {
      results.push_back({{"property", to_string(spec)},
                         {"pmax", v.pmax},
                         {"threshold", spec.threshold},
                         {"holds", v.holds},
                         {"iterations", v.values.iterations}});
    } else {
      sink.stream() << "property: " << to_string(spec) << "\n"
                    << "states: " << model.mdp.num_states() << "  transitions: " << model.mdp.num_transitions() << "\n"
                    << "pmax: " << shortest(v.pmax) << "  threshold: " << shortest(spec.threshold) << "\n"
                    << "result: " << (v.holds ? "HOLDS" : "VIOLATED") << "\n";
    }
  }
  if (c.format == "json") sink.stream() << nlohmann::ordered_json{{"format_version", 1}, {"results", results}}.dump(2) << "\n";
  sink.flush();
  return code;
}

void emit_report(const RunConfig& c, const DiagnosisReport& report, const std::vector<std::string>* names, Output& sink) {
  if (c.format == "json") {
    sink.stream() << render_json(report);
  } else {
    TextOptions t;
    t.normalize = c.normalize;
    t.state_names = names && !names->empty() ? names : nullptr;
    sink.stream() << render_text(report, t);
  }
}

int cmd_diagnose(const RunConfig& c, std::ostream& out) {
  auto model = load_model(c);
  auto props = load_properties(c, model.mdp);
  CounterexampleOptions options;
  options.check = check_options(c);
  options.max_paths = c.max_paths;
  options.min_prob = c.min_prob;
  Output sink(c, out);
  int code = kHolds;
  for (const auto& spec : props) {
    if (spec.path.kind != PathKind::Until)
      throw DomainError("diagnosis supports Until and bounded Until only, got " + to_string(spec.path));
    auto v = check_property(model.mdp, spec, options.check);
    if (v.holds) {
      sink.stream() << "property: " << to_string(spec) << "\npmax: " << shortest(v.pmax)
                    << "\nproperty holds, no counterexample\n";
      continue;
    }
    code = kViolated;
    auto cx = build_mipcx(model.mdp, spec, *v.witness, v.pmax, options);
    if (!c.export_cx.empty()) write_file(c.export_cx, counterexample_to_json(cx));
    std::optional<SourceAnnotations> annotations;
    if (model.program) annotations.emplace(SourceAnnotations{model.program->source_map, model.mdp.actions()});
    auto report = generate_diagnoses(cx, spec, annotations ? &*annotations : nullptr);
    emit_report(c, report, &model.state_names, sink);
  }
  sink.flush();
  return code;
}

int cmd_diagnose_trace(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto cx = counterexample_from_json(read_file(c.trace));
  std::optional<LoadedModel> model;
  if (!c.model.empty()) model = load_model(c);
  auto violations = verify_counterexample(cx, cx.labels, model ? &model->mdp : nullptr);
  if (!violations.empty()) {
    err << "invalid counterexample trace '" << c.trace << "':\n";
    for (const auto& v : violations) err << "  " << v.message << "\n";
    return kUsageError;
  }
  std::optional<SourceAnnotations> annotations;
  if (model && model->program) annotations.emplace(SourceAnnotations{model->program->source_map, model->mdp.actions()});
  auto report = generate_diagnoses(cx, cx.property, annotations ? &*annotations : nullptr);
  Output sink(c, out);
  emit_report(c, report, model ? &model->state_names : nullptr, sink);
  sink.flush();
  return kViolated;
}

void add_model_options(CLI::App& sub, RunConfig& c, bool required) {
  auto* model = sub.add_option("--model", c.model, "Model file (.pm program or explicit .tra transitions)");
  if (required) model->required();
  sub.add_option("--model-format", c.model_format, "Model format")->check(CLI::IsMember({"auto", "explicit", "program"}));
  sub.add_option("--labels", c.labels, "Labels file for explicit models");
  sub.add_option("--const", c.constants, "Constant override NAME=VALUE (repeatable)");
  sub.add_option("--state-cap", c.state_cap, "Maximum number of explored states");
}

void add_output_options(CLI::App& sub, RunConfig& c) {
  sub.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json"}));
  sub.add_option("--out", c.out, "Write output to PATH instead of standard output");
  sub.add_flag("--normalize", c.normalize, "Report masses relative to the counterexample mass");
}

void add_numeric_options(CLI::App& sub, RunConfig& c) {
  sub.add_option("--prop", c.prop, "Property, e.g. 'P<=0.5 [ a U b ]'");
  sub.add_option("--props-file", c.props_file, "File with one property per line");
  sub.add_option("--epsilon", c.epsilon, "Value-iteration convergence threshold");
  sub.add_option("--max-paths", c.max_paths, "Path budget for counterexample search");
  sub.add_option("--min-prob", c.min_prob, "Smallest path probability explored");
  sub.add_flag("--serial", c.serial, "Use the single-threaded value-iteration kernel");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Model checking and counterexample diagnosis for MDPs", "cxdiag"};
  app.require_subcommand(1);
  auto* check = app.add_subcommand("check", "Compute Pmax and decide the property");
  add_model_options(*check, c, true);
  add_numeric_options(*check, c);
  add_output_options(*check, c);
  auto* diagnose = app.add_subcommand("diagnose", "Build a counterexample and rank causes and actions");
  add_model_options(*diagnose, c, true);
  add_numeric_options(*diagnose, c);
  add_output_options(*diagnose, c);
  diagnose->add_option("--export-cx", c.export_cx, "Also write the counterexample as JSON");
  auto* trace = app.add_subcommand("diagnose-trace", "Diagnose a counterexample read from JSON");
  trace->add_option("trace", c.trace, "Counterexample JSON file")->required();
  add_model_options(*trace, c, false);
  add_output_options(*trace, c);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kHolds : kUsageError;
  }

  try {
    if (check->parsed()) return cmd_check(c, out);
    if (diagnose->parsed()) return cmd_diagnose(c, out);
    return cmd_diagnose_trace(c, out, err);
  } catch (const IncompleteCounterexample& e) {
    err << "error: " << e.what() << "\n";
    return kResourceError;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << "\n";
    return kResourceError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace cxdiag::cli
