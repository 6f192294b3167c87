#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "kneehar/dataset_io.hpp"
#include "kneehar/signal.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace kneehar;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

void write_meta(const std::filesystem::path& csv, double rate) {
  write_file(metadata_path(csv),
             R"({"format":"kneehar-dataset","version":1,"source_rate_hz":)" + std::to_string(rate) + "}");
}

std::string grid_csv(int subjects, int samples) {
  std::string s = "subject,activity,ordinal,angle_deg\n";
  for (int subj = 1; subj <= subjects; ++subj) {
    for (auto a : kAllActivities) {
      for (int i = 0; i < samples; ++i) {
        s += std::to_string(subj) + "," + std::string(activity_name(a)) + "," + std::to_string(i) + "," +
             std::to_string(subj * 10 + i * 0.5) + "\n";
      }
    }
  }
  return s;
}

}  // namespace

TEST(Activity, CodesAreABijectionWithNames) {
  std::set<std::string_view> names;
  for (int code = 0; code < kNumActivities; ++code) {
    const auto a = activity_from_code(code);
    ASSERT_TRUE(a);
    EXPECT_EQ(activity_code(*a), code);
    EXPECT_EQ(parse_activity(activity_name(*a)), a);
    names.insert(activity_name(*a));
  }
  EXPECT_EQ(names.size(), 3u);
  EXPECT_FALSE(activity_from_code(3));
  EXPECT_FALSE(activity_from_code(-1));
}

TEST(Activity, AliasesAreCaseInsensitive) {
  EXPECT_EQ(parse_activity("March"), Activity::Gait);
  EXPECT_EQ(parse_activity("GAIT"), Activity::Gait);
  EXPECT_EQ(parse_activity("sit-extension"), Activity::SitExtension);
  EXPECT_EQ(parse_activity("Stand Flexion"), Activity::StandFlexion);
  EXPECT_FALSE(parse_activity("jump"));
}

TEST(Dataset, RejectsInvalidRecordings) {
  EXPECT_THROW(Dataset({{1, Activity::Gait, {}, 1000.0}}), DataError);
  EXPECT_THROW(Dataset({{1, Activity::Gait, {1.0}, 0.0}}), DataError);
  EXPECT_THROW(Dataset({{1, Activity::Gait, {std::nan("")}, 1000.0}}), DataError);
  EXPECT_THROW(Dataset({{1, Activity::Gait, {1.0}, 1000.0}, {1, Activity::Gait, {2.0}, 1000.0}}), DataError);
}

TEST(Dataset, SubjectIdsAreSortedAndDistinct) {
  Dataset ds({{3, Activity::Gait, {1.0}, 10.0}, {1, Activity::Gait, {1.0}, 10.0},
              {3, Activity::StandFlexion, {1.0}, 10.0}});
  EXPECT_EQ(ds.subject_ids(), (std::vector<int>{1, 3}));
  ASSERT_NE(ds.find(3, Activity::StandFlexion), nullptr);
  EXPECT_EQ(ds.find(1, Activity::StandFlexion), nullptr);
}

TEST(LoadDataset, TwoSubjectsThreeActivities) {
  testutil::TempDir dir;
  const auto csv = dir / "d.csv";
  write_file(csv, grid_csv(2, 100));
  write_meta(csv, 1000.0);
  const auto ds = load_dataset(csv);
  EXPECT_EQ(ds.recordings().size(), 6u);
  EXPECT_EQ(ds.subject_ids(), (std::vector<int>{1, 2}));
  for (const auto& rec : ds.recordings()) {
    EXPECT_EQ(rec.samples.size(), 100u);
    EXPECT_EQ(rec.source_rate_hz, 1000.0);
  }
}

TEST(LoadDataset, UnknownActivityNamesTheRow) {
  testutil::TempDir dir;
  const auto csv = dir / "d.csv";
  write_file(csv, "subject,activity,ordinal,angle_deg\n1,gait,0,1.0\n1,jump,1,2.0\n");
  write_meta(csv, 1000.0);
  try {
    (void)load_dataset(csv);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("jump"), std::string::npos) << msg;
  }
}

TEST(LoadDataset, ErrorsCarryLineNumbers) {
  testutil::TempDir dir;
  const auto csv = dir / "d.csv";
  write_meta(csv, 100.0);

  write_file(csv, "subject,activity,ordinal,angle_deg\n1,gait,0,1.0\n1,gait,0,2.0\n");
  EXPECT_THROW(
      {
        try {
          (void)load_dataset(csv);
        } catch (const DataError& e) {
          EXPECT_NE(std::string(e.what()).find(":3: duplicate"), std::string::npos) << e.what();
          throw;
        }
      },
      DataError);

  write_file(csv, "subject,activity,ordinal,angle_deg\n1,gait,5,1.0\n1,gait,4,2.0\n");
  EXPECT_THROW(
      {
        try {
          (void)load_dataset(csv);
        } catch (const DataError& e) {
          EXPECT_NE(std::string(e.what()).find(":3: non-monotonic"), std::string::npos) << e.what();
          throw;
        }
      },
      DataError);

  write_file(csv, "subject,activity,ordinal,angle_deg\n1,gait,0,abc\n");
  EXPECT_THROW((void)load_dataset(csv), DataError);
  write_file(csv, "subject,activity,angle_deg\n1,gait,1.0\n");
  EXPECT_THROW((void)load_dataset(csv), DataError);
  EXPECT_THROW((void)load_dataset(dir / "missing.csv"), DataError);
}

TEST(LoadDataset, CustomSchemaWithoutSidecar) {
  testutil::TempDir dir;
  const auto csv = dir / "d.tsv";
  write_file(csv, "t\tangle\tperson\ttask\n0\t1.5\t7\tMarch\n1\t2.5\t7\tMarch\n");
  DatasetSchema schema;
  schema.subject = "person";
  schema.activity = "task";
  schema.ordinal = "t";
  schema.angle = "angle";
  schema.delimiter = '\t';
  EXPECT_THROW((void)load_dataset(csv, schema), DataError);  // no rate anywhere
  schema.source_rate_hz = 50.0;
  const auto ds = load_dataset(csv, schema);
  ASSERT_EQ(ds.recordings().size(), 1u);
  EXPECT_EQ(ds.recordings()[0].subject_id, 7);
  EXPECT_EQ(ds.recordings()[0].activity, Activity::Gait);
  EXPECT_EQ(ds.recordings()[0].samples, (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(ds.recordings()[0].source_rate_hz, 50.0);
}

TEST(LoadDataset, InterleavedRowsAreGroupedInOrdinalOrder) {
  testutil::TempDir dir;
  const auto csv = dir / "d.csv";
  write_file(csv,
             "subject,activity,ordinal,angle_deg\n2,gait,0,1\n1,gait,0,9\n2,gait,1,2\n1,gait,3,8\n2,gait,2,3\n");
  write_meta(csv, 40.0);
  const auto ds = load_dataset(csv);
  ASSERT_EQ(ds.recordings().size(), 2u);
  EXPECT_EQ(ds.find(2, Activity::Gait)->samples, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(ds.find(1, Activity::Gait)->samples, (std::vector<double>{9, 8}));
}

TEST(LoadDataset, ElevenSubjectsSupportElevenFolds) {
  testutil::TempDir dir;
  const auto csv = dir / "d.csv";
  write_file(csv, grid_csv(11, 5));
  write_meta(csv, 1000.0);
  EXPECT_EQ(load_dataset(csv).subject_ids().size(), 11u);
}

TEST(RoundTrip, WriteThenLoadIsBitExact) {
  testutil::TempDir dir;
  const auto ds = synthesize_dataset(3, 4.0, 17);
  write_dataset(ds, dir / "sub" / "ds.csv");
  EXPECT_TRUE(std::filesystem::exists(metadata_path(dir / "sub" / "ds.csv")));
  const auto back = load_dataset(dir / "sub" / "ds.csv");
  EXPECT_EQ(back, ds);

  // Arbitrary doubles survive too.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> values(500);
  for (auto& v : values) v = u(rng);
  Dataset odd({{4, Activity::SitExtension, values, 123.456}});
  write_dataset(odd, dir / "odd.csv");
  EXPECT_EQ(load_dataset(dir / "odd.csv"), odd);
}

TEST(FilterSubjects, KeepsExactlyTheRequestedSubjects) {
  const auto ds = synthesize_dataset(22, 4.0, 5, 100.0);
  std::set<int> normal;
  for (int id = 1; id <= 11; ++id) normal.insert(id);
  const auto kept = filter_subjects(ds, normal);
  EXPECT_EQ(kept.subject_ids().size(), 11u);
  EXPECT_EQ(kept.recordings().size(), 33u);
  for (std::size_t i = 0; i < kept.recordings().size(); ++i) EXPECT_EQ(kept.recordings()[i], ds.recordings()[i]);

  const std::set<int> all(ds.subject_ids().begin(), ds.subject_ids().end());
  EXPECT_EQ(filter_subjects(ds, all), ds);
  EXPECT_THROW((void)filter_subjects(ds, {}), DataError);
  EXPECT_THROW((void)filter_subjects(ds, {1, 99}), DataError);
}

TEST(Synthesize, IsDeterministic) {
  EXPECT_EQ(synthesize_dataset(11, 120.0, 100), synthesize_dataset(11, 120.0, 100));
  EXPECT_FALSE(synthesize_dataset(3, 4.0, 1) == synthesize_dataset(3, 4.0, 2));
}

TEST(Synthesize, ShapeAndRange) {
  const auto ds = synthesize_dataset(2, 4.0, 1);
  ASSERT_EQ(ds.recordings().size(), 6u);
  for (const auto& rec : ds.recordings()) {
    EXPECT_GE(static_cast<double>(rec.samples.size()) / rec.source_rate_hz, 4.0);
    for (double v : rec.samples) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 120.0);
    }
  }
  EXPECT_THROW((void)synthesize_dataset(1, 10.0, 1), UsageError);
  EXPECT_THROW((void)synthesize_dataset(2, 3.9, 1), UsageError);
}

TEST(Synthesize, GaitCyclesAreMoreThanTwiceAsFast) {
  const auto ds = synthesize_dataset(11, 30.0, 100);
  for (int id : ds.subject_ids()) {
    // Decimate to 100 Hz for the autocorrelation search (0.5 s .. 6 s).
    auto period_s = [&](Activity a) {
      const auto& rec = *ds.find(id, a);
      std::vector<double> x;
      for (std::size_t i = 0; i < rec.samples.size(); i += 10) x.push_back(rec.samples[i]);
      const auto lag = oracle::autocorr_period(x, 50, 600);
      EXPECT_TRUE(lag) << "subject " << id;
      return lag ? static_cast<double>(*lag) / 100.0 : 0.0;
    };
    const double gait = period_s(Activity::Gait);
    const double sit = period_s(Activity::SitExtension);
    const double stand = period_s(Activity::StandFlexion);
    EXPECT_LT(gait, sit / 2.0) << "subject " << id;
    EXPECT_LT(gait, stand / 2.0) << "subject " << id;
    const auto& prof = synthetic_profile(Activity::Gait);
    EXPECT_GE(gait, prof.period_lo_s - 0.02);
    EXPECT_LE(gait, prof.period_hi_s + 0.02);
  }
}
