#include <json.hpp>

#include <set>

#include "cxdiag/counterexample.hpp"

namespace cxdiag {

using json = nlohmann::ordered_json;

std::string counterexample_to_json(const Counterexample& cx) {
  json paths = json::array();
  std::set<StateId> visited;
  for (const auto& wp : cx.paths) {
    json actions = json::array(), labels = json::array();
    for (ActionId a : wp.path.actions) actions.push_back(cx.actions.name(a));
    for (StateId s : wp.path.states) {
      visited.insert(s);
      json names = json::array();
      for (ApId ap : cx.labels.labels_of(s)) names.push_back(cx.labels.aps().name(ap));
      labels.push_back(std::move(names));
    }
    paths.push_back({{"probability", wp.probability}, {"states", wp.path.states}, {"actions", actions}, {"labels", labels}});
  }
  json scheduler = json::array();
  for (StateId s : visited)
    if (cx.scheduler[s] != kNoAction) scheduler.push_back({{"state", s}, {"action", cx.actions.name(cx.scheduler[s])}});

  json doc = {
      {"format_version", 1},
      {"property", to_string(cx.property)},
      {"threshold", cx.property.threshold},
      {"pmax", cx.pmax},
      {"total_mass", cx.total_mass},
      {"actions", cx.actions.names()},
      {"aps", cx.labels.aps().names()},
      {"scheduler", scheduler},
      {"paths", paths},
  };
  return doc.dump(2) + "\n";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw ParseError("counterexample trace: " + what, 0, 0); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) bad(std::string("missing field '") + key + "'");
  return obj.at(key);
}

}  // namespace

Counterexample counterexample_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("counterexample trace: ") + e.what(), 0, 0);
  }
  try {
    if (field(doc, "format_version") != 1) bad("unsupported format_version");
    Counterexample cx;
    SymbolTable aps;
    if (doc.contains("aps"))
      for (const auto& name : doc.at("aps")) aps.intern(name.get<std::string>());
    if (doc.contains("actions"))
      for (const auto& name : doc.at("actions")) cx.actions.intern(name.get<std::string>());
    for (const auto& name : aps.names()) cx.labels.intern(name);

    StateId max_state = 0;
    std::vector<std::pair<StateId, std::vector<std::string>>> state_labels;
    for (const auto& p : field(doc, "paths")) {
      WeightedPath wp;
      wp.probability = field(p, "probability").get<double>();
      wp.path.states = field(p, "states").get<std::vector<StateId>>();
      for (const auto& a : field(p, "actions")) wp.path.actions.push_back(cx.actions.intern(a.get<std::string>()));
      if (p.contains("labels")) {
        const auto& labels = p.at("labels");
        if (labels.size() != wp.path.states.size()) bad("labels and states differ in length");
        for (std::size_t i = 0; i < labels.size(); ++i)
          state_labels.emplace_back(wp.path.states[i], labels[i].get<std::vector<std::string>>());
      }
      for (StateId s : wp.path.states) max_state = std::max(max_state, s);
      cx.paths.push_back(std::move(wp));
    }

    cx.labels.resize(cx.paths.empty() ? 0 : max_state + 1);
    std::vector<std::optional<std::set<std::string>>> seen(cx.labels.num_states());
    for (auto& [s, names] : state_labels) {
      std::set<std::string> set(names.begin(), names.end());
      if (seen[s] && *seen[s] != set) bad("state " + std::to_string(s) + " carries different labels on different paths");
      if (!seen[s]) {
        for (const auto& n : set) cx.labels.add(s, n);
        seen[s] = std::move(set);
      }
    }

    cx.property = parse_property(field(doc, "property").get<std::string>(), &cx.labels.aps());
    if (doc.contains("pmax")) cx.pmax = doc.at("pmax").get<double>();
    cx.total_mass = doc.contains("total_mass") ? doc.at("total_mass").get<double>() : 0.0;
    if (!doc.contains("total_mass"))
      for (const auto& wp : cx.paths) cx.total_mass += wp.probability;

    cx.scheduler = Scheduler(cx.labels.num_states());
    if (doc.contains("scheduler"))
      for (const auto& entry : doc.at("scheduler")) {
        auto s = field(entry, "state").get<StateId>();
        if (s >= cx.scheduler.size()) continue;
        cx.scheduler.set(s, cx.actions.intern(field(entry, "action").get<std::string>()));
      }
    return cx;
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

}  // namespace cxdiag
