#include <json.hpp>

#include <cstdio>
#include <sstream>

#include "cxdiag/diagnosis.hpp"

namespace cxdiag {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string state_name(StateId s, const TextOptions& o) {
  std::string out = "s" + std::to_string(s);
  if (o.state_names && s < o.state_names->size() && !(*o.state_names)[s].empty()) out += " " + (*o.state_names)[s];
  return out;
}

std::string sources_text(const std::vector<SourceRef>& refs) {
  std::string out;
  for (const auto& r : refs) out += (out.empty() ? "" : ", ") + r.module + ":" + std::to_string(r.line);
  return out;
}

json sources_json(const std::vector<SourceRef>& refs) {
  json out = json::array();
  for (const auto& r : refs) out.push_back({{"module", r.module}, {"line", r.line}});
  return out;
}

json cause_json(const Cause& c, const SymbolTable& aps) {
  return {{"state", c.state},
          {"literal", to_string(c.literal, aps)},
          {"dR", c.dR},
          {"mass", c.mass},
          {"normalized_mass", c.normalized_mass},
          {"origin", to_string(c.origin)}};
}

}  // namespace

std::string render_text(const DiagnosisReport& r, const TextOptions& o) {
  const auto& cx = r.counterexample;
  const auto& aps = cx.labels.aps();
  const double scale = o.normalize && cx.total_mass > 0.0 ? 1.0 / cx.total_mass : 1.0;
  std::ostringstream out;
  out << "property: " << to_string(cx.property) << "\n";
  out << "pmax: " << num(cx.pmax) << "  threshold: " << num(cx.property.threshold) << "  VIOLATED\n";
  out << "counterexample: " << cx.paths.size() << " paths, mass " << num(cx.total_mass) << "\n";
  for (std::size_t i = 0; i < cx.paths.size(); ++i) {
    const auto& p = cx.paths[i].path;
    out << "  #" << i + 1 << "  " << num(cx.paths[i].probability) << "  s" << p.states[0];
    for (std::size_t j = 0; j < p.actions.size(); ++j)
      out << " -" << cx.actions.name(p.actions[j]) << "-> s" << p.states[j + 1];
    out << "\n";
  }
  out << "\ndiagnoses" << (o.normalize ? " (masses relative to the counterexample)" : "") << ":\n";
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    const auto& e = r.actions[i];
    out << "[" << i + 1 << "] action " << cx.actions.name(e.action) << " at " << state_name(e.state, o)
        << "  dB=" << num(e.dB * scale) << "\n";
    for (const auto& c : e.contributions) {
      for (const auto& cause : c.causes)
        out << "      cause (s" << cause.state << ", " << to_string(cause.literal, aps) << ")  dR=" << num(cause.dR)
            << "  Pr=" << num(cause.mass * scale) << "  dRxPr=" << num(cause.dR * cause.mass * scale) << "\n";
      if (c.causes.empty()) out << "      no cause at s" << c.successor << "\n";
      out << "    transition " << state_name(e.state, o) << " -> " << state_name(c.successor, o)
          << "  mass=" << num(c.mass * scale);
      if (!c.sources.empty()) out << "  [" << sources_text(c.sources) << "]";
      out << "\n";
    }
  }
  out << "\nmost responsible:";
  for (auto i : r.most_responsible) {
    const auto& c = r.causes[i];
    out << " (s" << c.state << ", " << to_string(c.literal, aps) << ")";
  }
  out << "\nmost blamed:";
  for (auto i : r.most_blamed) out << " " << cx.actions.name(r.actions[i].action) << "@s" << r.actions[i].state;
  out << "\n";
  return out.str();
}

std::string render_json(const DiagnosisReport& r) {
  const auto& cx = r.counterexample;
  const auto& aps = cx.labels.aps();
  json paths = json::array();
  for (const auto& wp : cx.paths) {
    json actions = json::array();
    for (ActionId a : wp.path.actions) actions.push_back(cx.actions.name(a));
    paths.push_back({{"probability", wp.probability}, {"states", wp.path.states}, {"actions", actions}});
  }
  json actions = json::array();
  for (const auto& e : r.actions) {
    json transitions = json::array();
    for (const auto& c : e.contributions) {
      json causes = json::array();
      for (const auto& cause : c.causes) causes.push_back(cause_json(cause, aps));
      json t = {{"to", c.successor}, {"mass", c.mass}, {"max_dR", c.max_dR}, {"causes", causes}};
      if (r.annotated) t["source"] = sources_json(c.sources);
      transitions.push_back(std::move(t));
    }
    actions.push_back({{"state", e.state}, {"action", cx.actions.name(e.action)}, {"dB", e.dB}, {"transitions", transitions}});
  }
  json most_responsible = json::array();
  for (auto i : r.most_responsible) most_responsible.push_back(cause_json(r.causes[i], aps));
  json most_blamed = json::array();
  for (auto i : r.most_blamed)
    most_blamed.push_back({{"state", r.actions[i].state}, {"action", cx.actions.name(r.actions[i].action)}, {"dB", r.actions[i].dB}});

  json doc = {
      {"format_version", 1},
      {"property", to_string(cx.property)},
      {"threshold", cx.property.threshold},
      {"pmax", cx.pmax},
      {"counterexample", {{"total_mass", cx.total_mass}, {"paths", paths}}},
      {"actions", actions},
      {"most_responsible", most_responsible},
      {"most_blamed", most_blamed},
  };
  return doc.dump(2) + "\n";
}

}  // namespace cxdiag
