#pragma once

// Scenario construction: hourly load/wind profiles are reduced to a small
// weighted scenario set. The two extreme hours (peak demand, then peak wind
// among the remaining hours) are kept verbatim; the rest are clustered with
// seeded k-means and replaced by centroids weighted by cluster size, so the
// scenario weights always add up to the original hour count.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "facts/common.hpp"

namespace facts {

struct HourlyProfiles {
  std::vector<std::string> wind_names;     // one per wind column
  std::vector<double> load;                // per-hour load level
  std::vector<std::vector<double>> wind;   // [column][hour] intensity in [0,1]
  int n_hours() const { return int(load.size()); }
};

// CSV: header "hour,load,<wind names...>", one row per hour.
inline HourlyProfiles read_profiles_csv(std::istream& in,
                                        const std::string& filename = "<stream>") {
  HourlyProfiles p;
  std::string line;
  int lineno = 0;
  auto where = [&]() { return filename + ":" + std::to_string(lineno); };
  if (!std::getline(in, line)) throw ParseError(filename + ": empty profile file");
  ++lineno;
  auto header = split(trim(line), ',');
  if (header.size() < 3 || to_lower(trim(header[0])) != "hour" ||
      to_lower(trim(header[1])) != "load")
    throw ParseError(where() + ": expected header 'hour,load,<wind...>'");
  for (size_t i = 2; i < header.size(); ++i) {
    auto name = trim(header[i]);
    if (name.empty()) throw ParseError(where() + ": empty wind column name");
    p.wind_names.push_back(name);
  }
  p.wind.resize(p.wind_names.size());
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto tok = split(line, ',');
    if (tok.size() != header.size())
      throw ParseError(where() + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(tok.size()));
    const long hour = parse_int(trim(tok[0]), where() + " hour");
    if (hour != long(p.load.size()))
      throw ParseError(where() + ": hours must run 0,1,... without gaps");
    const double l = parse_double(trim(tok[1]), where() + " load");
    if (l < 0) throw ParseError(where() + ": negative load level");
    p.load.push_back(l);
    for (size_t i = 0; i < p.wind.size(); ++i) {
      const double w = parse_double(trim(tok[2 + i]), where() + " wind");
      if (w < 0 || w > 1)
        throw ParseError(where() + ": wind intensity outside [0,1]");
      p.wind[i].push_back(w);
    }
  }
  if (p.load.empty()) throw ParseError(filename + ": no profile rows");
  return p;
}

inline HourlyProfiles read_profiles_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open profile file '" + path + "'");
  return read_profiles_csv(f, path);
}

struct Scenario {
  int id = 0;
  double hours = 0;            // weight N_t
  double load = 0;             // load level multiplier
  std::vector<double> wind;    // intensity per wind column
};

struct ScenarioSet {
  std::vector<std::string> wind_names;
  std::vector<Scenario> scenarios;
  double total_hours() const {
    double s = 0;
    for (const auto& sc : scenarios) s += sc.hours;
    return s;
  }
};

struct ExtremeHours {
  int load_hour = -1;
  int wind_hour = -1;
};

// Peak-demand hour first (ties to the earliest hour), then the peak-wind
// hour among the remaining ones, ranked by the mean over wind columns.
inline ExtremeHours extract_extremes(const HourlyProfiles& p) {
  if (p.n_hours() < 2) throw ValidationError("need at least two hours to extract extremes");
  ExtremeHours e;
  for (int h = 0; h < p.n_hours(); ++h)
    if (e.load_hour < 0 || p.load[h] > p.load[e.load_hour]) e.load_hour = h;
  auto mean_wind = [&](int h) {
    if (p.wind.empty()) return 0.0;
    double s = 0;
    for (const auto& col : p.wind) s += col[h];
    return s / double(p.wind.size());
  };
  for (int h = 0; h < p.n_hours(); ++h) {
    if (h == e.load_hour) continue;
    if (e.wind_hour < 0 || mean_wind(h) > mean_wind(e.wind_hour)) e.wind_hour = h;
  }
  return e;
}

struct KmeansResult {
  std::vector<std::vector<double>> centroids;  // surviving clusters
  std::vector<int> assign;                     // point -> cluster
  std::vector<int> sizes;                      // cluster -> member count
  std::vector<double> sse_trace;               // per accepted iteration
  double sse = 0;
  int iterations = 0;
  int reseeds = 0;
};

// Lloyd iterations with deterministic seeding: initial centroids are k
// distinct points chosen by the seeded generator, distance ties go to the
// lower cluster index, and an emptied cluster is reseeded at the point
// farthest from its current centroid. Clusters that cannot be refilled
// (fewer distinct points than k) are dropped.
inline KmeansResult kmeans(const std::vector<std::vector<double>>& pts, int k, uint64_t seed,
                           int max_iter = 300) {
  const int n = int(pts.size());
  if (n == 0) throw ValidationError("k-means: no points");
  if (k <= 0) throw ValidationError("k-means: cluster count must be positive");
  if (k > n) throw ValidationError("k-means: more clusters than points");
  const size_t dim = pts[0].size();
  for (const auto& p : pts)
    if (p.size() != dim) throw ValidationError("k-means: inconsistent point dimension");

  Rng rng(seed);
  auto init = rng.sample_indices(size_t(n), size_t(k));
  KmeansResult r;
  r.centroids.reserve(k);
  for (auto idx : init) r.centroids.push_back(pts[idx]);
  std::vector<bool> dead(k, false);

  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t d = 0; d < dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  };

  r.assign.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      int best = -1;
      double bestd = kInf;
      for (int c = 0; c < k; ++c) {
        if (dead[c]) continue;
        const double d = dist2(pts[i], r.centroids[c]);
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      sse += bestd;
      if (best != r.assign[i]) {
        r.assign[i] = best;
        changed = true;
      }
    }
    r.sse_trace.push_back(sse);
    r.sse = sse;
    ++r.iterations;

    std::vector<int> count(k, 0);
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
      ++count[r.assign[i]];
      for (size_t d = 0; d < dim; ++d) sum[r.assign[i]][d] += pts[i][d];
    }
    bool reseeded = false;
    for (int c = 0; c < k; ++c) {
      if (dead[c]) continue;
      if (count[c] > 0) {
        for (size_t d = 0; d < dim; ++d) r.centroids[c][d] = sum[c][d] / count[c];
        continue;
      }
      // empty cluster: restart it at the point farthest from its centroid
      int far = -1;
      double fard = -1;
      for (int i = 0; i < n; ++i) {
        const double d = dist2(pts[i], r.centroids[r.assign[i]]);
        if (d > fard) {
          fard = d;
          far = i;
        }
      }
      if (fard <= 0) {
        dead[c] = true;  // every point already sits on a centroid
        continue;
      }
      r.centroids[c] = pts[far];
      ++r.reseeds;
      reseeded = true;
    }
    if (!changed && !reseeded && it > 0) break;
  }

  // compact away dead clusters
  std::vector<int> remap(k, -1);
  KmeansResult out;
  out.sse = r.sse;
  out.sse_trace = r.sse_trace;
  out.iterations = r.iterations;
  out.reseeds = r.reseeds;
  for (int c = 0; c < k; ++c) {
    if (dead[c]) continue;
    remap[c] = int(out.centroids.size());
    out.centroids.push_back(r.centroids[c]);
  }
  out.assign.resize(n);
  out.sizes.assign(out.centroids.size(), 0);
  for (int i = 0; i < n; ++i) {
    out.assign[i] = remap[r.assign[i]];
    ++out.sizes[out.assign[i]];
  }
  return out;
}

// Full pipeline: extract both extreme hours, cluster the rest, and emit
// clusters first (ids 1..k) followed by the peak-load and peak-wind hours.
inline ScenarioSet build_scenario_set(const HourlyProfiles& p, int clusters, uint64_t seed) {
  if (p.n_hours() < clusters + 2)
    throw ValidationError("profile too short for requested cluster count");
  const auto ex = extract_extremes(p);
  std::vector<std::vector<double>> pts;
  pts.reserve(p.n_hours() - 2);
  for (int h = 0; h < p.n_hours(); ++h) {
    if (h == ex.load_hour || h == ex.wind_hour) continue;
    std::vector<double> f;
    f.reserve(1 + p.wind.size());
    f.push_back(p.load[h]);
    for (const auto& col : p.wind) f.push_back(col[h]);
    pts.push_back(std::move(f));
  }
  const auto km = kmeans(pts, clusters, seed);

  ScenarioSet set;
  set.wind_names = p.wind_names;
  for (int c = 0; c < int(km.centroids.size()); ++c) {
    Scenario s;
    s.id = c + 1;
    s.hours = km.sizes[c];
    s.load = km.centroids[c][0];
    s.wind.assign(km.centroids[c].begin() + 1, km.centroids[c].end());
    set.scenarios.push_back(std::move(s));
  }
  auto verbatim = [&](int hour, int id) {
    Scenario s;
    s.id = id;
    s.hours = 1;
    s.load = p.load[hour];
    for (const auto& col : p.wind) s.wind.push_back(col[hour]);
    set.scenarios.push_back(std::move(s));
  };
  verbatim(ex.load_hour, int(km.centroids.size()) + 1);
  verbatim(ex.wind_hour, int(km.centroids.size()) + 2);
  return set;
}

// Available wind power for a farm: the intensity is rescaled by a
// site-specific factor and clamped back into [0,1] before applying capacity.
inline double wind_available_mw(double capacity_mw, double intensity, double scale = 1.0) {
  const double eff = std::clamp(scale * intensity, 0.0, 1.0);
  return eff * capacity_mw;
}

// --- scenario table io ------------------------------------------------------
// CSV: header "scenario,hours,load,<wind names...>".

inline void write_scenario_table(std::ostream& os, const ScenarioSet& set) {
  os << "scenario,hours,load";
  for (const auto& n : set.wind_names) os << "," << n;
  os << "\n";
  for (const auto& s : set.scenarios) {
    os << s.id << "," << fmt_full(s.hours) << "," << fmt_full(s.load);
    for (double w : s.wind) os << "," << fmt_full(w);
    os << "\n";
  }
}

inline ScenarioSet read_scenario_table(std::istream& in,
                                       const std::string& filename = "<stream>") {
  ScenarioSet set;
  std::string line;
  int lineno = 0;
  auto where = [&]() { return filename + ":" + std::to_string(lineno); };
  if (!std::getline(in, line)) throw ParseError(filename + ": empty scenario table");
  ++lineno;
  auto header = split(trim(line), ',');
  if (header.size() < 3 || to_lower(trim(header[0])) != "scenario" ||
      to_lower(trim(header[1])) != "hours" || to_lower(trim(header[2])) != "load")
    throw ParseError(where() + ": expected header 'scenario,hours,load,<wind...>'");
  for (size_t i = 3; i < header.size(); ++i) set.wind_names.push_back(trim(header[i]));
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto tok = split(line, ',');
    if (tok.size() != header.size())
      throw ParseError(where() + ": expected " + std::to_string(header.size()) + " fields");
    Scenario s;
    s.id = int(parse_int(trim(tok[0]), where() + " scenario"));
    s.hours = parse_double(trim(tok[1]), where() + " hours");
    if (s.hours <= 0) throw ParseError(where() + ": scenario weight must be positive");
    s.load = parse_double(trim(tok[2]), where() + " load");
    for (size_t i = 3; i < tok.size(); ++i)
      s.wind.push_back(parse_double(trim(tok[i]), where() + " wind"));
    set.scenarios.push_back(std::move(s));
  }
  if (set.scenarios.empty()) throw ParseError(filename + ": no scenarios");
  return set;
}

inline ScenarioSet read_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open scenario table '" + path + "'");
  return read_scenario_table(f, path);
}

}  // namespace facts
