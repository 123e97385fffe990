#pragma once

// Importer for MATPOWER .m case files. Extracts the DC planning subset:
// buses, in-service branches, in-service generators with linear costs, and
// bus loads. Wind farms are not part of the MATPOWER schema and are added
// separately by the caller.

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "facts/common.hpp"
#include "facts/network.hpp"

namespace facts {

struct MatpowerOptions {
  // RATE_A = 0 means unlimited in MATPOWER; substitute this limit in MW.
  double rate_a_default = 9999.0;
  // Clamp negative PMIN (pumped storage, synchronous condensers) to zero.
  bool clamp_negative_pmin = true;
};

namespace detail {

// Grabs the bracketed matrix after "mpc.<name> = [", rows split on ';' or
// newline, '%' comments stripped. Returns empty if the field is absent.
inline std::vector<std::vector<double>> mp_matrix(const std::string& text,
                                                  const std::string& name) {
  const std::string key = "mpc." + name;
  size_t pos = 0;
  while (true) {
    pos = text.find(key, pos);
    if (pos == std::string::npos) return {};
    const size_t after = pos + key.size();
    // reject prefixes like mpc.buscount when searching mpc.bus
    if (after < text.size() && (std::isalnum(text[after]) || text[after] == '_')) {
      pos = after;
      continue;
    }
    size_t eq = text.find('=', after);
    if (eq == std::string::npos) return {};
    size_t open = text.find('[', eq);
    if (open == std::string::npos) return {};
    size_t close = text.find(']', open);
    if (close == std::string::npos)
      throw ParseError("unterminated matrix for " + key);
    std::string body = text.substr(open + 1, close - open - 1);
    std::vector<std::vector<double>> rows;
    std::string rowbuf;
    auto flush = [&]() {
      const auto tok = tokenize(trim(rowbuf));
      rowbuf.clear();
      if (tok.empty()) return;
      std::vector<double> row;
      row.reserve(tok.size());
      for (const auto& t : tok) row.push_back(parse_double(t, key));
      rows.push_back(std::move(row));
    };
    for (size_t i = 0; i < body.size(); ++i) {
      char ch = body[i];
      if (ch == '%') {
        while (i < body.size() && body[i] != '\n') ++i;
        flush();
      } else if (ch == ';' || ch == '\n') {
        flush();
      } else {
        rowbuf.push_back(ch);
      }
    }
    flush();
    return rows;
  }
}

inline double mp_scalar(const std::string& text, const std::string& name, double fallback) {
  const std::string key = "mpc." + name;
  size_t pos = text.find(key);
  if (pos == std::string::npos) return fallback;
  size_t eq = text.find('=', pos + key.size());
  if (eq == std::string::npos) return fallback;
  size_t end = text.find(';', eq);
  std::string val = trim(text.substr(eq + 1, end == std::string::npos ? std::string::npos
                                                                      : end - eq - 1));
  return parse_double(val, key);
}

}  // namespace detail

inline NetworkCase import_matpower(const std::string& text,
                                   const MatpowerOptions& opt = {}) {
  NetworkCase c;
  c.base_mva = detail::mp_scalar(text, "baseMVA", 100.0);
  const auto bus = detail::mp_matrix(text, "bus");
  const auto gen = detail::mp_matrix(text, "gen");
  const auto branch = detail::mp_matrix(text, "branch");
  const auto gencost = detail::mp_matrix(text, "gencost");
  if (bus.empty()) throw ParseError("matpower case has no bus matrix");
  if (branch.empty()) throw ParseError("matpower case has no branch matrix");

  bool have_ref = false;
  int next_load = 1;
  for (const auto& row : bus) {
    if (row.size() < 3) throw ParseError("bus row too short");
    Bus b;
    b.id = int(row[0]);
    const int type = int(row[1]);
    if (type == 4) continue;  // isolated
    if (type == 3 && !have_ref) {
      b.reference = true;
      have_ref = true;
    }
    c.buses.push_back(b);
    const double pd = row[2];
    if (pd > 0) c.loads.push_back({next_load++, b.id, pd});
  }
  if (!have_ref && !c.buses.empty()) c.buses[0].reference = true;

  int next_branch = 1;
  for (const auto& row : branch) {
    if (row.size() < 6) throw ParseError("branch row too short");
    if (row.size() >= 11 && row[10] == 0) continue;  // out of service
    Branch b;
    b.id = next_branch++;
    b.from = int(row[0]);
    b.to = int(row[1]);
    b.x = row[3];
    if (b.x <= 0)
      throw ParseError("branch " + std::to_string(b.from) + "-" + std::to_string(b.to) +
                       " has nonpositive reactance; not representable in the DC model");
    b.smax = row[5] > 0 ? row[5] : opt.rate_a_default;
    c.branches.push_back(b);
  }

  int next_gen = 1;
  for (size_t gi = 0; gi < gen.size(); ++gi) {
    const auto& row = gen[gi];
    if (row.size() < 10) throw ParseError("gen row too short");
    if (row.size() >= 8 && row[7] <= 0) continue;  // out of service
    Generator g;
    g.id = next_gen++;
    g.bus = int(row[0]);
    g.pmax = row[8];
    g.pmin = row[9];
    if (g.pmin < 0 && opt.clamp_negative_pmin) g.pmin = 0;
    g.cost = 0;
    if (gi < gencost.size()) {
      const auto& cr = gencost[gi];
      // MODEL STARTUP SHUTDOWN NCOST C(n-1) ... C0
      if (cr.size() >= 5 && int(cr[0]) == 2) {
        const int ncost = int(cr[3]);
        // linear coefficient is second from the end of the polynomial list
        if (ncost >= 2 && cr.size() >= size_t(4 + ncost)) g.cost = cr[4 + ncost - 2];
      } else if (cr.size() >= 8 && int(cr[0]) == 1) {
        // piecewise linear: slope of the first segment
        const double x0 = cr[4], y0 = cr[5], x1 = cr[6], y1 = cr[7];
        if (x1 > x0) g.cost = (y1 - y0) / (x1 - x0);
      }
    }
    c.generators.push_back(g);
  }

  c.validate();
  return c;
}

inline NetworkCase import_matpower_file(const std::string& path,
                                        const MatpowerOptions& opt = {}) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open matpower file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return import_matpower(ss.str(), opt);
}

}  // namespace facts
