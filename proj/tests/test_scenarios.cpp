#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "facts/scenarios.hpp"

using namespace facts;

namespace {

HourlyProfiles synthetic_profiles(int hours, uint64_t seed, int wind_cols = 1) {
  HourlyProfiles p;
  Rng rng(seed);
  for (int c = 0; c < wind_cols; ++c) p.wind_names.push_back("w" + std::to_string(c + 1));
  p.wind.resize(wind_cols);
  for (int h = 0; h < hours; ++h) {
    p.load.push_back(0.3 + 0.7 * rng.uniform01());
    for (int c = 0; c < wind_cols; ++c) p.wind[c].push_back(rng.uniform01());
  }
  return p;
}

}  // namespace

TEST_CASE("extreme hours: peak load first, then peak wind among the rest") {
  HourlyProfiles p;
  p.wind_names = {"w"};
  p.load = {0.5, 0.9, 0.9, 0.4, 0.6};
  p.wind = {{0.2, 0.95, 0.1, 0.9, 0.3}};
  auto e = extract_extremes(p);
  // two hours tie at peak load, the earlier one wins
  CHECK(e.load_hour == 1);
  // hour 1 also has the highest wind but is taken; next best is hour 3
  CHECK(e.wind_hour == 3);
}

TEST_CASE("constant profile falls back to the first two hours") {
  HourlyProfiles p;
  p.wind_names = {"w"};
  p.load.assign(10, 0.7);
  p.wind = {std::vector<double>(10, 0.5)};
  auto e = extract_extremes(p);
  CHECK(e.load_hour == 0);
  CHECK(e.wind_hour == 1);
}

TEST_CASE("multi-column wind extremes rank by the column mean") {
  HourlyProfiles p;
  p.wind_names = {"a", "b"};
  p.load = {0.9, 0.5, 0.5};
  // hour 1 mean = 0.55, hour 2 mean = 0.6 despite the lower max column
  p.wind = {{0.1, 1.0, 0.6}, {0.1, 0.1, 0.6}};
  auto e = extract_extremes(p);
  CHECK(e.load_hour == 0);
  CHECK(e.wind_hour == 2);
}

TEST_CASE("scenario weights conserve the hour count and keep the ordering") {
  auto p = synthetic_profiles(200, 42);
  auto set = build_scenario_set(p, 6, 7);
  REQUIRE(set.scenarios.size() == 8);
  CHECK(set.total_hours() == Catch::Approx(200.0));
  for (int i = 0; i < 8; ++i) CHECK(set.scenarios[i].id == i + 1);
  // the two verbatim extremes carry unit weight and exact profile values
  auto e = extract_extremes(p);
  const auto& sl = set.scenarios[6];
  const auto& sw = set.scenarios[7];
  CHECK(sl.hours == 1.0);
  CHECK(sw.hours == 1.0);
  CHECK(sl.load == p.load[e.load_hour]);
  CHECK(sl.wind[0] == p.wind[0][e.load_hour]);
  CHECK(sw.load == p.load[e.wind_hour]);
  CHECK(sw.wind[0] == p.wind[0][e.wind_hour]);
}

TEST_CASE("scenario reduction is bit-identical across repeated runs") {
  auto p = synthetic_profiles(300, 11, 2);
  auto a = build_scenario_set(p, 8, 123);
  auto b = build_scenario_set(p, 8, 123);
  REQUIRE(a.scenarios.size() == b.scenarios.size());
  for (size_t i = 0; i < a.scenarios.size(); ++i) {
    CHECK(a.scenarios[i].hours == b.scenarios[i].hours);
    CHECK(a.scenarios[i].load == b.scenarios[i].load);
    REQUIRE(a.scenarios[i].wind == b.scenarios[i].wind);
  }
}

TEST_CASE("objective trace is non-increasing when no cluster is reseeded") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> pts;
    const int n = 60 + int(rng.uniform_int(100));
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform01(), rng.uniform01()});
    auto km = kmeans(pts, 5, rng.uniform_int(1u << 30));
    if (km.reseeds > 0) continue;
    for (size_t i = 1; i < km.sse_trace.size(); ++i)
      REQUIRE(km.sse_trace[i] <= km.sse_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("centroids are the exact member means and stay inside the hull") {
  Rng rng(9);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 120; ++i) pts.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.0, 1.0)});
  auto km = kmeans(pts, 4, 77);
  REQUIRE(km.centroids.size() == 4);
  std::vector<std::vector<double>> sums(4, {0.0, 0.0});
  std::vector<int> cnt(4, 0);
  for (size_t i = 0; i < pts.size(); ++i) {
    sums[km.assign[i]][0] += pts[i][0];
    sums[km.assign[i]][1] += pts[i][1];
    ++cnt[km.assign[i]];
  }
  for (int c = 0; c < 4; ++c) {
    REQUIRE(cnt[c] == km.sizes[c]);
    REQUIRE(cnt[c] > 0);
    CHECK(km.centroids[c][0] == Catch::Approx(sums[c][0] / cnt[c]).margin(1e-12));
    CHECK(km.centroids[c][1] == Catch::Approx(sums[c][1] / cnt[c]).margin(1e-12));
    CHECK(km.centroids[c][0] >= 0.2);
    CHECK(km.centroids[c][0] <= 0.8);
  }
}

TEST_CASE("well separated blobs are recovered under seed restarts") {
  Rng rng(31);
  std::vector<std::vector<double>> pts;
  const std::vector<std::vector<double>> centers = {{0.1, 0.1}, {0.9, 0.1}, {0.5, 0.95}};
  const std::vector<int> sizes = {30, 20, 25};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < sizes[c]; ++i)
      pts.push_back({centers[c][0] + 0.01 * rng.uniform01(), centers[c][1] + 0.01 * rng.uniform01()});
  // Lloyd iterations can stall in a local optimum for an unlucky start, so
  // scan a few seeds and require that most recover the planted partition.
  int exact = 0;
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    auto km = kmeans(pts, 3, seed);
    REQUIRE(km.centroids.size() <= 3);
    int total = 0;
    for (int s : km.sizes) total += s;
    REQUIRE(total == int(pts.size()));
    std::vector<int> got = km.sizes;
    std::sort(got.begin(), got.end());
    if (got == std::vector<int>{20, 25, 30} && km.sse < 0.01 * pts.size()) ++exact;
  }
  CHECK(exact >= 5);
}

TEST_CASE("identical points collapse irreparable clusters") {
  std::vector<std::vector<double>> pts(5, {0.4, 0.6});
  auto km = kmeans(pts, 3, 99);
  REQUIRE(km.centroids.size() == 1);
  CHECK(km.sizes[0] == 5);
  CHECK(km.sse == 0.0);
  for (int a : km.assign) CHECK(a == 0);
}

TEST_CASE("available wind power applies the site scale with clamping") {
  CHECK(wind_available_mw(800.0, 0.6046, 0.9) == Catch::Approx(435.312).margin(1e-9));
  CHECK(wind_available_mw(100.0, 0.6, 2.0) == Catch::Approx(100.0));   // clamped up
  CHECK(wind_available_mw(100.0, 0.0, 0.9) == Catch::Approx(0.0));
  CHECK(wind_available_mw(100.0, 0.5) == Catch::Approx(50.0));         // default scale
}

TEST_CASE("reference scenario table loads with the published totals") {
  auto set = read_scenario_file(std::string(FACTS_DATA_DIR) + "/table1_scenarios.csv");
  REQUIRE(set.scenarios.size() == 20);
  CHECK(set.total_hours() == Catch::Approx(8760.0));
  const auto& peak_load = set.scenarios[18];
  CHECK(peak_load.id == 19);
  CHECK(peak_load.hours == 1.0);
  CHECK(peak_load.load == Catch::Approx(1.0000));
  CHECK(peak_load.wind[0] == Catch::Approx(0.1840));
  const auto& peak_wind = set.scenarios[19];
  CHECK(peak_wind.id == 20);
  CHECK(peak_wind.hours == 1.0);
  CHECK(peak_wind.load == Catch::Approx(0.4915));
  CHECK(peak_wind.wind[0] == Catch::Approx(0.8670));
}

TEST_CASE("scenario table round trips") {
  auto p = synthetic_profiles(100, 4, 2);
  auto set = build_scenario_set(p, 5, 17);
  std::ostringstream os;
  write_scenario_table(os, set);
  std::istringstream in(os.str());
  auto back = read_scenario_table(in, "round_trip");
  REQUIRE(back.scenarios.size() == set.scenarios.size());
  REQUIRE(back.wind_names == set.wind_names);
  for (size_t i = 0; i < set.scenarios.size(); ++i) {
    CHECK(back.scenarios[i].id == set.scenarios[i].id);
    CHECK(back.scenarios[i].hours == set.scenarios[i].hours);
    CHECK(back.scenarios[i].load == set.scenarios[i].load);
    CHECK(back.scenarios[i].wind == set.scenarios[i].wind);
  }
}

TEST_CASE("profile csv parses multiple wind columns") {
  std::istringstream in("hour,load,north,south\n0,0.5,0.1,0.9\n1,0.7,0.2,0.8\n");
  auto p = read_profiles_csv(in, "p.csv");
  REQUIRE(p.wind_names == std::vector<std::string>{"north", "south"});
  REQUIRE(p.n_hours() == 2);
  CHECK(p.load[1] == Catch::Approx(0.7));
  CHECK(p.wind[1][0] == Catch::Approx(0.9));
}

TEST_CASE("profile and table parsers reject malformed input") {
  auto parse_p = [](const std::string& t) {
    std::istringstream in(t);
    return read_profiles_csv(in, "bad.csv");
  };
  CHECK_THROWS_WITH(parse_p(""), Catch::Matchers::ContainsSubstring("empty"));
  CHECK_THROWS_WITH(parse_p("time,load,w\n"), Catch::Matchers::ContainsSubstring("header"));
  CHECK_THROWS_WITH(parse_p("hour,load,w\n0,0.5,1.2\n"),
                    Catch::Matchers::ContainsSubstring("outside [0,1]"));
  CHECK_THROWS_WITH(parse_p("hour,load,w\n0,0.5,0.3\n2,0.5,0.3\n"),
                    Catch::Matchers::ContainsSubstring("without gaps"));
  CHECK_THROWS_WITH(parse_p("hour,load,w\n0,0.5\n"),
                    Catch::Matchers::ContainsSubstring("fields"));
  auto parse_t = [](const std::string& t) {
    std::istringstream in(t);
    return read_scenario_table(in, "bad.csv");
  };
  CHECK_THROWS_WITH(parse_t("scenario,hours,load,w\n1,0,0.5,0.5\n"),
                    Catch::Matchers::ContainsSubstring("positive"));
  CHECK_THROWS_WITH(parse_t("scenario,load\n"), Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("cluster count must fit the profile") {
  auto p = synthetic_profiles(10, 1);
  CHECK_THROWS_AS(build_scenario_set(p, 9, 1), ValidationError);
  CHECK_NOTHROW(build_scenario_set(p, 8, 1));
  CHECK_THROWS_AS(kmeans({{0.0}}, 2, 1), ValidationError);
  CHECK_THROWS_AS(kmeans({}, 1, 1), ValidationError);
  CHECK_THROWS_AS(kmeans({{0.0}, {1.0}}, 0, 1), ValidationError);
}
