#include "cxdiag/explicit_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

#include "cxdiag/error.hpp"

namespace cxdiag {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
  std::vector<std::size_t> columns;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto raw = text.substr(pos, end - pos);
    ++number;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    Line line{number, {}, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r')) ++i;
      std::size_t start = i;
      while (i < raw.size() && raw[i] != ' ' && raw[i] != '\t' && raw[i] != '\r') ++i;
      if (i > start) {
        line.tokens.push_back(raw.substr(start, i - start));
        line.columns.push_back(start + 1);
      }
    }
    if (!line.tokens.empty()) out.push_back(std::move(line));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

std::uint64_t parse_uint(const Line& line, std::size_t idx, const char* what) {
  auto tok = line.tokens.at(idx);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(std::string("expected ") + what + ", got '" + std::string(tok) + "'", line.number,
                     line.columns[idx]);
  return v;
}

double parse_prob(const Line& line, std::size_t idx) {
  std::string tok(line.tokens.at(idx));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || tok.empty())
    throw ParseError("expected probability, got '" + tok + "'", line.number, line.columns[idx]);
  return v;
}

}  // namespace

Mdp read_explicit_model(std::string_view transitions, std::string_view labels) {
  auto lines = tokenize(transitions);
  std::size_t i = 0;
  auto expect_header = [&](std::string_view keyword) -> std::uint64_t {
    if (i >= lines.size()) throw ParseError("missing " + std::string(keyword) + " line", lines.empty() ? 1 : lines.back().number + 1, 1);
    const auto& line = lines[i];
    if (line.tokens.size() != 2 || line.tokens[0] != keyword)
      throw ParseError("expected '" + std::string(keyword) + " <n>'", line.number, line.columns[0]);
    ++i;
    return parse_uint(line, 1, "integer");
  };
  auto n = expect_header("STATES");
  auto init = expect_header("INIT");
  if (init >= n) throw ParseError("INIT " + std::to_string(init) + " is not a state", lines[i - 1].number, lines[i - 1].columns[1]);

  MdpBuilder builder(n, static_cast<StateId>(init));
  for (; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.tokens.size() != 4) throw ParseError("expected '<s> <action> <s'> <prob>'", line.number, line.columns[0]);
    auto s = parse_uint(line, 0, "state id");
    auto t = parse_uint(line, 2, "state id");
    if (s >= n) throw ParseError("state " + std::to_string(s) + " out of range", line.number, line.columns[0]);
    if (t >= n) throw ParseError("state " + std::to_string(t) + " out of range", line.number, line.columns[2]);
    builder.add_transition(static_cast<StateId>(s), line.tokens[1], static_cast<StateId>(t), parse_prob(line, 3));
  }

  for (const auto& line : tokenize(labels)) {
    auto head = line.tokens[0];
    std::size_t first_ap = 1;
    if (head.back() == ':') {
      head.remove_suffix(1);
    } else if (line.tokens.size() > 1 && line.tokens[1] == ":") {
      first_ap = 2;
    } else {
      throw ParseError("expected '<s>: <ap> ...'", line.number, line.columns[0]);
    }
    std::uint64_t s = 0;
    auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), s);
    if (ec != std::errc{} || ptr != head.data() + head.size() || s >= n)
      throw ParseError("bad state id '" + std::string(head) + "'", line.number, line.columns[0]);
    for (std::size_t k = first_ap; k < line.tokens.size(); ++k) builder.add_label(static_cast<StateId>(s), line.tokens[k]);
  }
  return std::move(builder).build();
}

std::string write_transitions(const Mdp& m) {
  std::ostringstream out;
  out << "STATES " << m.num_states() << "\nINIT " << m.initial_state() << "\n";
  char buf[64];
  for (StateId s = 0; s < m.num_states(); ++s)
    for (const auto& c : m.choices(s))
      for (const auto& succ : c.successors) {
        std::snprintf(buf, sizeof buf, "%.17g", succ.probability);
        out << s << ' ' << m.actions().name(c.action) << ' ' << succ.target << ' ' << buf << '\n';
      }
  return out.str();
}

std::string write_labels(const Mdp& m) {
  std::ostringstream out;
  const auto& lab = m.labeling();
  for (StateId s = 0; s < m.num_states(); ++s) {
    auto aps = lab.labels_of(s);
    if (aps.empty()) continue;
    out << s << ':';
    for (ApId ap : aps) out << ' ' << lab.aps().name(ap);
    out << '\n';
  }
  return out.str();
}

bool equivalent(const Mdp& a, const Mdp& b) {
  if (a.num_states() != b.num_states() || a.initial_state() != b.initial_state()) return false;
  using Row = std::tuple<std::string, StateId, double>;
  for (StateId s = 0; s < a.num_states(); ++s) {
    auto rows = [](const Mdp& m, StateId s) {
      std::vector<Row> out;
      for (const auto& c : m.choices(s))
        for (const auto& succ : c.successors) out.emplace_back(m.actions().name(c.action), succ.target, succ.probability);
      std::sort(out.begin(), out.end());
      return out;
    };
    if (rows(a, s) != rows(b, s)) return false;
    auto names = [](const Mdp& m, StateId s) {
      std::set<std::string> out;
      for (ApId ap : m.labeling().labels_of(s)) out.insert(m.labeling().aps().name(ap));
      return out;
    };
    if (names(a, s) != names(b, s)) return false;
  }
  return true;
}

}  // namespace cxdiag
