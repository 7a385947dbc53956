#include <sstream>

#include <gtest/gtest.h>

#include "safemes/timeseries.hpp"

using namespace safemes;

namespace {

ExogenousRecord rec(std::int64_t i, double demand = 1.0) {
  return ExogenousRecord{i, demand, 0.5, 0.3, 0.2, 40.0, 5.0};
}

std::vector<ExogenousRecord> rows(std::size_t n) {
  std::vector<ExogenousRecord> r;
  for (std::size_t i = 0; i < n; ++i) r.push_back(rec(static_cast<std::int64_t>(i)));
  return r;
}

}  // namespace

TEST(Calendar, MidnightMondayIsOrigin) {
  EXPECT_EQ(rec(0).hour_of_day(), 0);
  EXPECT_EQ(rec(0).day_of_week(), 0);
}

TEST(Calendar, LastQuarterOfSunday) {
  const auto r = rec(kStepsPerWeek - 1);
  EXPECT_EQ(r.hour_of_day(), 23);
  EXPECT_EQ(r.day_of_week(), 6);
  EXPECT_EQ(rec(kStepsPerWeek).day_of_week(), 0);
}

// Rows are counted from 1, as in a data file.
TEST(Series, RejectsNegativeDemand) {
  auto r = rows(4);
  r[2].thermal_demand_mw = -0.1;
  try {
    ExogenousSeries s(r);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("negative demand at row 3"), std::string::npos);
  }
}

TEST(Series, RejectsGap) {
  auto r = rows(5);
  r.erase(r.begin() + 3);
  EXPECT_THROW(ExogenousSeries{r}, Error);
}

TEST(Series, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(ExogenousSeries{std::vector<ExogenousRecord>{}}, Error);
  auto r = rows(3);
  r[1].price_eur_mwh = std::nan("");
  EXPECT_THROW(ExogenousSeries{r}, Error);
}

TEST(Series, RejectsInfeedOutsideUnitInterval) {
  auto r = rows(3);
  r[0].solar_potential = 1.2;
  EXPECT_THROW(ExogenousSeries{r}, Error);
}

TEST(SeriesCsv, RoundTripIsExact) {
  const auto s = synth_profiles(3, 500);
  std::stringstream a;
  write_series(s, a);
  const auto back = read_series(a);
  EXPECT_EQ(back, s);
  std::stringstream b;
  write_series(back, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(SeriesCsv, HeaderIsMandatory) {
  std::stringstream in("0,1,1,0,0,40,5\n");
  EXPECT_THROW(read_series(in), Error);
}

TEST(SeriesCsv, MalformedRowNamesTheRow) {
  std::stringstream in(std::string(kSeriesCsvHeader) + "\n0,1,1,0,0,40,5\n1,abc,1,0,0,40,5\n");
  try {
    read_series(in);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row"), std::string::npos);
  }
}

TEST(Synth, PureFunctionOfSeedAndLength) {
  EXPECT_EQ(synth_profiles(7, 1000), synth_profiles(7, 1000));
  EXPECT_NE(synth_profiles(7, 1000), synth_profiles(8, 1000));
}

TEST(Synth, YearHasDailyStructureAndValidRanges) {
  const auto s = synth_profiles(1, 35040);
  ASSERT_EQ(s.size(), 35040u);
  double night = 0, noon = 0;
  for (const auto& r : s.records()) {
    EXPECT_GE(r.thermal_demand_mw, 0.0);
    EXPECT_GE(r.solar_potential, 0.0);
    EXPECT_LE(r.solar_potential, 1.0);
    if (r.hour_of_day() == 2) {
      EXPECT_EQ(r.solar_potential, 0.0);
      night += r.price_eur_mwh;
    }
    if (r.hour_of_day() == 19) noon += r.price_eur_mwh;
  }
  EXPECT_GT(noon, night);  // evening peak above the night trough
}

TEST(Window, OneWeekSliceIsRebased) {
  const auto s = synth_profiles(1, 35040);
  const auto w = window(s, 96, kStepsPerWeek);
  ASSERT_EQ(w.size(), 672u);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].index, static_cast<std::int64_t>(i));
    EXPECT_EQ(w[i].thermal_demand_mw, s[96 + i].thermal_demand_mw);
    EXPECT_EQ(w[i].price_eur_mwh, s[96 + i].price_eur_mwh);
  }
}

TEST(Window, FullLengthIsIdentity) {
  const auto s = synth_profiles(2, 300);
  EXPECT_EQ(window(s, 0, 300), s);
}

TEST(Window, OutOfRangeThrows) {
  const auto s = synth_profiles(2, 96);
  EXPECT_THROW(window(s, 90, 10), Error);
}
