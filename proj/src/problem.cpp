#include "bifurc/problem.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bifurc {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error("problem file line " + std::to_string(line) + ": " + msg);
}

// strips a # comment, respecting double-quoted strings
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

int bracket_depth(const std::string& s) {
  bool in_str = false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct ValueParser {
  const std::string& s;
  std::size_t i = 0;
  int line;

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r'))
      ++i;
  }

  json parse() {
    skip_ws();
    if (i >= s.size()) fail(line, "missing value");
    char c = s[i];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  json parse_string() {
    ++i;  // opening quote
    std::string out;
    while (i < s.size() && s[i] != '"') {
      char c = s[i++];
      if (c == '\\' && i < s.size()) {
        char e = s[i++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(line, std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    if (i >= s.size()) fail(line, "unterminated string");
    ++i;  // closing quote
    return json(out);
  }

  json parse_array() {
    ++i;  // '['
    json arr = json::array();
    skip_ws();
    if (i < s.size() && s[i] == ']') {
      ++i;
      return arr;
    }
    while (true) {
      arr.push_back(parse());
      skip_ws();
      if (i < s.size() && s[i] == ',') {
        ++i;
        skip_ws();
        if (i < s.size() && s[i] == ']') {  // trailing comma
          ++i;
          return arr;
        }
        continue;
      }
      if (i < s.size() && s[i] == ']') {
        ++i;
        return arr;
      }
      fail(line, "expected ',' or ']' in array");
    }
  }

  json parse_scalar() {
    std::size_t start = i;
    while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != ' ' && s[i] != '\t' &&
           s[i] != '\n' && s[i] != '\r')
      ++i;
    std::string tok = s.substr(start, i - start);
    if (tok == "true") return json(true);
    if (tok == "false") return json(false);
    if (tok == "inf" || tok == "+inf") return json(kInf);
    if (tok == "-inf") return json(-kInf);
    if (tok == "nan") return json(kNaN);
    // integers keep full 64-bit precision (seeds), everything else is double
    {
      std::int64_t v;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec == std::errc() && p == tok.data() + tok.size()) return json(v);
    }
    {
      std::uint64_t v;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec == std::errc() && p == tok.data() + tok.size()) return json(v);
    }
    char* end = nullptr;
    double d = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty())
      fail(line, "cannot parse value '" + tok + "'");
    return json(d);
  }
};

double as_number(const json& v, int line, const char* what) {
  if (v.is_number()) return v.get<double>();
  fail(line, std::string(what) + " must be a number");
}

Interval as_interval(const json& v, int line, const char* what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(line, std::string(what) + " must be a two-element interval [lo, hi]");
  Interval iv{v[0].get<double>(), v[1].get<double>()};
  if (!(iv.lo <= iv.hi)) fail(line, std::string(what) + " interval has lo > hi");
  return iv;
}

IntervalSet as_interval_set(const json& v, int line, const char* what) {
  if (!v.is_array() || v.empty())
    fail(line, std::string(what) + " must be a non-empty interval list");
  IntervalSet out;
  if (v[0].is_number()) {
    out.push_back(as_interval(v, line, what));  // bare [lo, hi]
    return out;
  }
  for (const json& e : v) out.push_back(as_interval(e, line, what));
  return out;
}

int as_int(const json& v, int line, const char* what) {
  if (v.is_number_integer()) return int(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return int(v.get<std::uint64_t>());
  fail(line, std::string(what) + " must be an integer");
}

std::uint64_t as_u64(const json& v, int line, const char* what) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    std::int64_t x = v.get<std::int64_t>();
    if (x >= 0) return std::uint64_t(x);
  }
  fail(line, std::string(what) + " must be a non-negative integer");
}

std::string as_string(const json& v, int line, const char* what) {
  if (v.is_string()) return v.get<std::string>();
  fail(line, std::string(what) + " must be a quoted string");
}

struct RawFile {
  // (section, key, value, line)
  struct Entry {
    std::string section, key;
    json value;
    int line;
  };
  std::vector<Entry> entries;
};

RawFile read_toml(const std::string& text) {
  RawFile rf;
  std::istringstream in(text);
  std::string physical, logical;
  std::string section;
  int line_no = 0, start_line = 0;
  int depth = 0;
  while (std::getline(in, physical)) {
    ++line_no;
    std::string piece = strip_comment(physical);
    if (logical.empty()) {
      if (trim(piece).empty()) continue;
      start_line = line_no;
      logical = piece;
    } else {
      logical += "\n" + piece;
    }
    depth += bracket_depth(piece);
    if (depth > 0) continue;  // keep joining a multi-line array
    if (depth < 0) fail(start_line, "unbalanced ']'");

    std::string stmt = trim(logical);
    logical.clear();
    if (stmt.empty()) continue;
    if (stmt.front() == '[' && stmt.back() == ']' && stmt.find('=') == std::string::npos) {
      section = trim(stmt.substr(1, stmt.size() - 2));
      if (section.empty()) fail(start_line, "empty section name");
      continue;
    }
    std::size_t eq = std::string::npos;
    {
      bool in_str = false;
      for (std::size_t i = 0; i < stmt.size(); ++i) {
        char c = stmt[i];
        if (in_str) {
          if (c == '\\') ++i;
          else if (c == '"') in_str = false;
        } else if (c == '"') {
          in_str = true;
        } else if (c == '=') {
          eq = i;
          break;
        }
      }
    }
    if (eq == std::string::npos) fail(start_line, "expected key = value");
    std::string key = trim(stmt.substr(0, eq));
    if (key.empty()) fail(start_line, "empty key");
    std::string vtext = trim(stmt.substr(eq + 1));
    ValueParser vp{vtext, 0, start_line};
    json value = vp.parse();
    vp.skip_ws();
    if (vp.i != vtext.size()) fail(start_line, "trailing characters after value");
    rf.entries.push_back({section, key, std::move(value), start_line});
  }
  if (depth != 0) fail(start_line, "unterminated array");
  return rf;
}

void apply_entry(ProblemFile& pf, const RawFile::Entry& e) {
  const std::string& sec = e.section;
  const std::string& key = e.key;
  const json& v = e.value;
  int line = e.line;

  if (sec.empty() || sec == "problem") {
    if (key == "n") {
      pf.n = as_int(v, line, "n");
      if (pf.n < 1) fail(line, "dimension n must be at least 1");
    } else if (key == "f") {
      pf.f_text = as_string(v, line, "f");
    } else if (key == "g") {
      pf.g_text = as_string(v, line, "g");
    } else if (key == "S") {
      pf.S = as_interval_set(v, line, "S");
    } else if (key == "U") {
      pf.U = as_interval(v, line, "U");
    } else if (key == "R") {
      pf.R = as_number(v, line, "R");
      if (!(pf.R > 0.0)) fail(line, "R must be positive");
    } else {
      fail(line, "unknown key '" + key + "' in [problem]");
    }
    return;
  }
  if (sec == "sweep") {
    SweepConfig& sw = pf.sweep;
    if (key == "r0") {
      sw.r0 = as_number(v, line, "r0");
      if (!(sw.r0 > 0.0)) fail(line, "r0 must be positive");
    } else if (key == "q") {
      sw.q = as_number(v, line, "q");
      if (!(sw.q > 1.0)) fail(line, "radius factor q must exceed 1");
    } else if (key == "levels") {
      sw.levels = as_int(v, line, "levels");
      if (sw.levels < 0) fail(line, "levels must be non-negative");
    } else if (key == "directions") {
      sw.directions = as_int(v, line, "directions");
      if (sw.directions < 1) fail(line, "directions must be at least 1");
    } else if (key == "refine_iters") sw.refine_iters = as_int(v, line, "refine_iters");
    else if (key == "seed") sw.seed = as_u64(v, line, "seed");
    else if (key == "f_window") sw.f_window = as_interval(v, line, "f_window");
    else if (key == "max_evaluations") sw.max_evaluations = as_u64(v, line, "max_evaluations");
    else if (key == "slice_count") sw.slice_count = as_int(v, line, "slice_count");
    else if (key == "slice_seeds") sw.slice_seeds = as_int(v, line, "slice_seeds");
    else fail(line, "unknown key '" + key + "' in [sweep]");
    return;
  }
  if (sec == "tolerances") {
    if (key == "transport") pf.tol.transport = as_number(v, line, "transport");
    else if (key == "on_manifold") pf.tol.on_manifold = as_number(v, line, "on_manifold");
    else if (key == "degeneracy") pf.tol.degeneracy = as_number(v, line, "degeneracy");
    else fail(line, "unknown key '" + key + "' in [tolerances]");
    if (!(as_number(v, line, key.c_str()) > 0.0)) fail(line, "tolerances must be positive");
    return;
  }
  fail(line, "unknown section [" + sec + "]");
}

}  // namespace

ProblemFile parse_problem_text(const std::string& text) {
  ProblemFile pf;
  RawFile rf = read_toml(text);
  std::set<std::string> seen;
  for (const auto& e : rf.entries) {
    if (!seen.insert(e.section + "\x1f" + e.key).second)
      fail(e.line, "duplicate key '" + e.key + "'");
    apply_entry(pf, e);
  }
  if (pf.n < 1) throw Error("problem file: missing dimension n");
  if (pf.f_text.empty()) throw Error("problem file: missing formula f");
  auto parse_formula = [&](const std::string& which, const std::string& body) {
    try {
      return parse_expression(body, pf.n);
    } catch (const Error& e) {
      throw Error("problem file: bad expression for " + which + ": \"" + body +
                  "\": " + e.what());
    }
  };
  pf.f = parse_formula("f", pf.f_text);
  if (pf.g_text) pf.g = parse_formula("g", *pf.g_text);
  return pf;
}

ProblemFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str());
}

ProblemPair problem_pair(const ProblemFile& pf) {
  if (!pf.g) throw Error("problem file has no hypersurface map g");
  return make_problem(pf.f, *pf.g);
}

}  // namespace bifurc
