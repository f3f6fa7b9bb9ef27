#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "scalepress/experiment.hpp"

using namespace scalepress;
using namespace scalepress::experiment;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = SCALEPRESS_SOURCE_DIR;

fs::path demo(const std::string& name) { return kSource / "demos" / name; }

json k2p2_doc() {
  return json::parse(R"({
    "id": "k2p2",
    "system": {"builder": "periodic_subshift", "alphabet": 2, "period": 2},
    "folner": {"kind": "box", "max_n": 2},
    "scale": {"kind": "constant_one"},
    "potential": {"kind": "zero"},
    "eps": [0.75],
    "quantities": ["Q", "P", "p", "q", "sep", "spa"]
  })");
}

std::string message_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  return "";
}

const Row* find_row(const std::vector<Row>& rows, const std::string& id, Quantity q, std::int64_t n, double eps) {
  for (const auto& r : rows)
    if (r.system_id == id && r.quantity == q && r.n == n && r.eps == eps) return &r;
  return nullptr;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("scalepress_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

// ----------------------------------------------------------- validation

TEST(Config, ValidDocumentParses) {
  const auto cfg = parse_config(k2p2_doc());
  ASSERT_EQ(cfg.experiments.size(), 1u);
  EXPECT_EQ(cfg.experiments[0].system.size(), 4u);
  EXPECT_EQ(cfg.mode, solver::Mode::Exact);
}

TEST(Config, DeltaOutOfRangeNamesTheField) {
  const auto msg = message_of(read_json_file(kSource / "tests" / "data" / "bad_delta.json"));
  EXPECT_NE(msg.find("delta[0]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("1.5"), std::string::npos) << msg;
}

TEST(Config, AllErrorsReportedTogether) {
  auto doc = k2p2_doc();
  doc["eps"] = json::array({-0.1, 0.5});
  doc["quantities"] = json::array({"Q", "bogus", "Pmu"});
  doc["scale"] = {{"kind", "power"}};
  doc["mode"] = "fastest";
  const auto msg = message_of(doc);
  for (const char* field : {"eps[0]", "quantities[1]", "delta", "scale", "mode"})
    EXPECT_NE(msg.find(field), std::string::npos) << field << " missing from: " << msg;
}

TEST(Config, RequiredQualifiersPerQuantity) {
  auto doc = k2p2_doc();
  doc["quantities"] = json::array({"POP"});
  EXPECT_NE(message_of(doc).find("eps_pseudo"), std::string::npos);
  doc["eps_pseudo"] = json::array({0.0});
  EXPECT_NE(message_of(doc).find("eps_pseudo[0]"), std::string::npos);
}

TEST(Config, NonConstantScaleNeedsEpsBelowOne) {
  auto doc = k2p2_doc();
  doc["scale"] = {{"kind", "neg_log"}};
  doc["eps"] = json::array({0.5, 1.0});
  EXPECT_NE(message_of(doc).find("eps[1]"), std::string::npos);
}

TEST(Config, DuplicateIdsRejected) {
  json doc;
  doc["experiments"] = json::array({k2p2_doc(), k2p2_doc()});
  EXPECT_NE(message_of(doc).find("experiments[1]"), std::string::npos);
}

TEST(Config, GridsSortedAndDeduplicated) {
  auto doc = k2p2_doc();
  doc["eps"] = json::array({0.75, 0.3, 0.75});
  EXPECT_EQ(parse_config(doc).experiments[0].eps, (std::vector<double>{0.3, 0.75}));
}

TEST(Config, OverridesWin) {
  auto doc = k2p2_doc();
  Overrides ov;
  ov.mode = solver::Mode::Greedy;
  ov.output = "elsewhere";
  const auto cfg = parse_config(doc, ".", ov);
  EXPECT_EQ(cfg.mode, solver::Mode::Greedy);
  EXPECT_EQ(cfg.output, "elsewhere");
  EXPECT_NE(config_hash(cfg), config_hash(parse_config(doc)));
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config(kSource / "no" / "such.json"), IoError);
}

TEST(Config, AllDemosLoad) {
  for (const char* name : {"one_point.json", "subshift_k2p2.json", "rotation_q8.json", "random12.json", "all.json"})
    EXPECT_NO_THROW(load_config(demo(name))) << name;
}

// -------------------------------------------------------------- running

TEST(Runner, SubshiftSingleSiteRow) {
  const auto res = Runner(load_config(demo("subshift_k2p2.json")), {}).run();
  ASSERT_TRUE(res.all_ok());
  const Row* r = find_row(res.rows, "k2p2", Quantity::P, 1, 0.75);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->patch_size, 1u);
  EXPECT_EQ(r->lower, 2.0);
  EXPECT_EQ(r->upper, 2.0);
  EXPECT_EQ(r->method, Method::Exact);
  EXPECT_EQ(r->s_kind, "constant_one");
}

TEST(Runner, OnePointValuesAreOne) {
  const auto res = Runner(load_config(demo("one_point.json")), {}).run();
  ASSERT_TRUE(res.all_ok());
  ASSERT_FALSE(res.rows.empty());
  for (const auto& r : res.rows) {
    EXPECT_EQ(r.upper, 1.0) << r.system_id << " " << to_string(r.quantity);
    EXPECT_EQ(r.per_site, 0.0);
  }
}

TEST(Runner, DeterministicAcrossJobsAndCache) {
  const auto cfg = load_config(demo("all.json"));
  const auto a = csv_text(Runner(cfg, {1, false, false}).run().rows);
  const auto b = csv_text(Runner(cfg, {4, true, false}).run().rows);
  const auto c = csv_text(Runner(cfg, {3, true, false}).run().rows);
  EXPECT_EQ(a, b);
  EXPECT_EQ(b, c);
}

TEST(Runner, CacheHitsDoNotChangeValues) {
  const auto cfg = load_config(demo("subshift_k2p2.json"));
  const auto cached = Runner(cfg, {2, true, false}).run();
  const auto fresh = Runner(cfg, {2, false, false}).run();
  EXPECT_GT(cached.cache_hits, 0u);
  EXPECT_EQ(fresh.cache_hits, 0u);
  EXPECT_EQ(csv_text(cached.rows), csv_text(fresh.rows));
}

TEST(Runner, RowsSortedAndQualified) {
  const auto res = Runner(load_config(demo("subshift_k2p2.json")), {}).run();
  auto sorted = res.rows;
  Runner::sort_rows(sorted);
  EXPECT_EQ(csv_text(sorted), csv_text(res.rows));
  EXPECT_NE(find_row(res.rows, "k2p2#mu1#delta0.1", Quantity::Pmu, 1, 0.75), nullptr);
  EXPECT_NE(find_row(res.rows, "k2p2#ep0.3", Quantity::POP, 2, 0.6), nullptr);
  for (const auto& r : res.rows) EXPECT_EQ(r.wall_ms, 0.0);
}

TEST(Runner, GreedyModeMarksCells) {
  Overrides ov;
  ov.mode = solver::Mode::Greedy;
  const auto res = Runner(load_config(demo("random12.json"), ov), {}).run();
  ASSERT_TRUE(res.all_ok());
  std::size_t greedy = 0;
  for (const auto& r : res.rows)
    if (r.method == Method::Greedy) {
      ++greedy;
      EXPECT_LE(r.lower, r.upper);
    }
  EXPECT_GT(greedy, 0u);
}

TEST(Runner, CellErrorsAreRecordedNotFatal) {
  auto doc = k2p2_doc();
  doc["system"] = {{"builder", "random"}, {"points", 40}, {"seed", 3}};
  doc["caps"] = {{"exact_points", 10}};
  doc["eps"] = json::array({0.3});
  const auto res = Runner(parse_config(doc), {}).run();
  EXPECT_FALSE(res.all_ok());
  EXPECT_NE(res.cells.front().status.find("greedy"), std::string::npos);
}

// -------------------------------------------------------------- outputs

TEST(Outputs, CsvRoundTrip) {
  const auto res = Runner(load_config(demo("rotation_q8.json")), {}).run();
  const auto text = csv_text(res.rows);
  EXPECT_EQ(text.rfind("# schema: scalepress-results/1", 0), 0u);
  const auto back = parse_csv(text, "mem");
  ASSERT_EQ(back.size(), res.rows.size());
  EXPECT_EQ(csv_text(back), text);
}

TEST(Outputs, MalformedCsvIsIoError) {
  EXPECT_THROW(parse_csv("# schema: scalepress-results/1\nsystem_id,quantity\nx,Q\n", "bad.csv"), IoError);
}

TEST(Outputs, WriteAndReport) {
  const auto dir = scratch("report");
  const auto cfg = load_config(demo("subshift_k2p2.json"));
  write_outputs(cfg, Runner(cfg, {}).run(), dir);
  for (const char* f : {"results.csv", "summary.json", "manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto text = report(dir);
  EXPECT_NE(text.find("== k2p2"), std::string::npos);
  EXPECT_NE(text.find("cell_chain: pass"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Outputs, ReportOnMissingDirectoryIsIoError) {
  try {
    report(scratch("missing"));
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("results.csv"), std::string::npos);
  }
}

TEST(Analysis, AllChecksPassOnEveryDemo) {
  const auto cfg = load_config(demo("all.json"));
  const auto res = Runner(cfg, {4, true, false}).run();
  ASSERT_TRUE(res.all_ok());
  for (const auto& ex : cfg.experiments) {
    const auto an = analyze(ex.id, res.rows, cell_aux(ex), ex.scale);
    for (const auto& c : an.checks) {
      EXPECT_NE(c.verdict(), "FAIL") << ex.id << " " << c.name;
      if (c.name == "cell_chain" || c.name == "variational_chain") {
        EXPECT_GT(c.checked, 0u) << ex.id << " " << c.name;
      }
    }
    EXPECT_TRUE(an.surrogates.count("SP"));
  }
}

TEST(Analysis, OnePointSurrogatesVanish) {
  const auto cfg = load_config(demo("one_point.json"));
  const auto res = Runner(cfg, {}).run();
  const auto an = analyze("one_point", res.rows, cell_aux(cfg.experiments[0]), cfg.experiments[0].scale);
  EXPECT_EQ(an.surrogates.at("SP"), 0.0);
  EXPECT_EQ(an.surrogates.at("PSP"), 0.0);
}

// --------------------------------------------------------------- oracle

TEST(Oracle, DemosAgreeExactly) {
  for (const char* name : {"one_point.json", "subshift_k2p2.json", "rotation_q8.json", "random12.json"}) {
    const auto rep = run_oracle(load_config(demo(name)), 4);
    EXPECT_TRUE(rep.pass(1e-9)) << name << " max discrepancy " << rep.max_discrepancy;
    EXPECT_FALSE(rep.cells.empty());
  }
}

TEST(Oracle, RefusesOversizedSystems) {
  auto doc = k2p2_doc();
  doc["system"] = {{"builder", "random"}, {"points", 13}, {"seed", 1}};
  doc["eps"] = json::array({0.3});
  EXPECT_THROW(run_oracle(parse_config(doc)), SizeLimitError);
}

TEST(Oracle, RefusesOversizedWindowSets) {
  auto doc = k2p2_doc();
  doc["eps_pseudo"] = json::array({0.6});
  doc["quantities"] = json::array({"POP"});
  doc["folner"] = {{"kind", "box"}, {"max_n", 3}};
  try {
    run_oracle(parse_config(doc));
    FAIL();
  } catch (const SizeLimitError& e) {
    EXPECT_NE(std::string(e.what()).find("oracle refuses cell"), std::string::npos);
  }
}
