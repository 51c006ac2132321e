#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "analysis.hpp"
#include "io.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "simulation.hpp"

using namespace cci;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    const fs::path dir = fs::path(CCI_TEST_TMPDIR);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvSpec basic_spec() {
    CsvSpec spec;
    spec.outcome_col = "y";
    spec.income_col = "inc";
    spec.exposure_col = "e";
    spec.covariate_cols = {"x1", "x2"};
    spec.income_transform.enabled = false;
    return spec;
}

} // namespace

TEST_CASE("well-formed three-row file loads fully") {
    const fs::path f = tmp_dir() / "three.csv";
    write_text(f, "y,inc,e,x1,x2\n1.0,2.0,0,0.1,0.2\n2.0,1.0,1,0.3,0.4\n3.0,3.0,0,0.5,0.6\n");
    const auto [data, rep] = load_csv(f.string(), basic_spec());
    CHECK(data.n() == 3);
    CHECK(rep.n_dropped_missing == 0);
    CHECK(data.n_levels == 2);
    CHECK(data.covariates.cols() == 3); // intercept + 2
}

TEST_CASE("a blank cell drops the row with a count") {
    const fs::path f = tmp_dir() / "blank.csv";
    write_text(f, "y,inc,e,x1,x2\n1.0,,0,0.1,0.2\n2.0,1.0,1,0.3,0.4\n3.0,3.0,0,0.5,0.6\n");
    const auto [data, rep] = load_csv(f.string(), basic_spec());
    CHECK(data.n() == 2);
    CHECK(rep.n_dropped_missing == 1);
}

TEST_CASE("an unparseable cell reports its line and column") {
    const fs::path f = tmp_dir() / "garbage.csv";
    write_text(f, "y,inc,e,x1,x2\n1.0,2.0,0,0.1,0.2\n2.0,oops,1,0.3,0.4\n3.0,1.0,1,0.5,0.6\n");
    try {
        load_csv(f.string(), basic_spec());
        FAIL("expected parse error");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::parse);
        CHECK(std::string(err.what()).find("line 3") != std::string::npos);
        CHECK(std::string(err.what()).find("inc") != std::string::npos);
    }
}

TEST_CASE("a missing column is rejected by name") {
    const fs::path f = tmp_dir() / "nocol.csv";
    write_text(f, "y,inc,e\n1.0,2.0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(f.string(), basic_spec()), doctest::Contains("x1"), Error);
}

TEST_CASE("save and reload reproduces every used column value for value") {
    const Dataset data = generate({.n = 120, .seed = 61});
    Dataset nonneg = data;
    nonneg.y = data.y.cwiseAbs(); // strict user-data contract on reload
    const fs::path f = tmp_dir() / "roundtrip.csv";
    save_csv(f.string(), nonneg);
    CsvSpec spec = basic_spec();
    spec.outcome_col = "y";
    spec.income_col = "income";
    spec.exposure_col = "exposure";
    spec.covariate_cols = {"x1", "x2"};
    const auto [back, rep] = load_csv(f.string(), spec);
    REQUIRE(back.n() == nonneg.n());
    CHECK((back.y - nonneg.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.income - nonneg.income).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.covariates - nonneg.covariates).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.exposure == nonneg.exposure);
}

TEST_CASE("exposure labels recode in ascending order with a baseline override") {
    const fs::path f = tmp_dir() / "labels.csv";
    write_text(f,
               "y,inc,e,x1,x2\n1,1,10,0,0\n2,2,2,0,1\n3,3,1,1,0\n4,4,10,1,1\n5,5,2,0.5,0.5\n6,6,1,"
               "0.2,0.8\n");
    const auto [data, rep] = load_csv(f.string(), basic_spec());
    // numeric labels sort by value: 1 -> 0, 2 -> 1, 10 -> 2
    CHECK(rep.level_labels == std::vector<std::string>{"1", "2", "10"});
    CHECK(data.exposure[0] == 2);
    CHECK(data.exposure[1] == 1);
    CHECK(data.exposure[2] == 0);

    CsvSpec spec = basic_spec();
    spec.baseline_label = "2";
    const auto [data2, rep2] = load_csv(f.string(), spec);
    CHECK(rep2.level_labels == std::vector<std::string>{"2", "1", "10"});
    CHECK(data2.exposure[1] == 0);
}

TEST_CASE("income transform applies (i + offset)^power") {
    const fs::path f = tmp_dir() / "transform.csv";
    write_text(f, "y,inc,e,x1,x2\n1.0,0.0,0,0,0\n2.0,31.0,1,1,1\n3.0,1.0,0,0.5,0.5\n");
    CsvSpec spec = basic_spec();
    spec.income_transform.enabled = true;
    spec.income_transform.power = 0.2;
    spec.income_transform.offset = 1.0;
    const auto [data, rep] = load_csv(f.string(), spec);
    CHECK(data.income[0] == doctest::Approx(1.0));
    CHECK(data.income[1] == doctest::Approx(std::pow(32.0, 0.2)));
}

TEST_CASE("estimate report json carries the schema and provenance") {
    const Dataset data = generate({.n = 300, .seed = 62});
    AnalysisOptions opts;
    opts.allow_negative_outcome = true;
    opts.nuisance.grid_size = 60;
    const AnalysisResult res = analyze(data, NuisanceDesigns::shared(data), opts);
    Json config;
    config["seed"] = 1;
    const Json j = estimate_report_json(res, {"0", "1", "2"}, config);
    CHECK(j["schema"] == "cci.estimate/1");
    CHECK(j["library_version"] == library_version());
    CHECK(j["levels"].size() == 3);
    CHECK(j["contrasts"].size() == 2);
    for (const auto& lvl : j["levels"]) {
        CHECK(lvl.contains("naive"));
        CHECK(lvl.contains("plug_in"));
        CHECK(lvl.contains("one_step"));
        CHECK(lvl.contains("est_eq"));
        CHECK(lvl["plug_in"]["conservative_se"] == true);
    }
    for (const auto& cb : j["contrasts"]) {
        CHECK(cb.contains("one_step"));
        CHECK(cb["one_step"].contains("se"));
        CHECK(cb["one_step"]["ci"].size() == 2);
    }
}

TEST_CASE("estimate json structure matches the golden schema") {
    const fs::path golden_path = fs::path(CCI_TEST_SRCDIR) / "golden" / "estimates_schema.json";
    REQUIRE(fs::exists(golden_path));
    CsvSpec spec;
    spec.outcome_col = "hosp";
    spec.income_col = "inc";
    spec.exposure_col = "edu";
    spec.covariate_cols = {"age", "region"};
    spec.income_transform.enabled = true;
    const auto [data, rep] =
        load_csv((fs::path(CCI_TEST_SRCDIR) / "golden" / "sample.csv").string(), spec);
    AnalysisOptions opts;
    opts.nuisance.grid_size = 24;
    opts.nuisance.trim_threshold = 0.01;
    const AnalysisResult res = analyze(data, NuisanceDesigns::shared(data), opts);
    Json config;
    config["estimators"] = "naive,plug-in,one-step,est-eq";
    const Json j = estimate_report_json(res, rep.level_labels, config);
    const Json golden = Json::parse(read_text(golden_path));

    // identical key structure everywhere, values compared loosely
    std::function<void(const Json&, const Json&, const std::string&)> compare =
        [&](const Json& a, const Json& b, const std::string& where) {
            if (a.is_number() && b.is_number()) {
                CHECK_MESSAGE(std::fabs(a.get<double>() - b.get<double>()) <=
                                  1e-6 * (std::fabs(b.get<double>()) + 1.0),
                              where);
                return;
            }
            REQUIRE_MESSAGE(a.type() == b.type(), where);
            if (a.is_object()) {
                std::vector<std::string> ka, kb;
                for (auto it = a.begin(); it != a.end(); ++it) ka.push_back(it.key());
                for (auto it = b.begin(); it != b.end(); ++it) kb.push_back(it.key());
                REQUIRE_MESSAGE(ka == kb, where);
                for (const std::string& k : ka) compare(a[k], b[k], where + "." + k);
            } else if (a.is_array()) {
                REQUIRE_MESSAGE(a.size() == b.size(), where);
                for (size_t i = 0; i < a.size(); ++i)
                    compare(a[i], b[i], where + "[" + std::to_string(i) + "]");
            } else {
                CHECK_MESSAGE(a == b, where);
            }
        };
    compare(j, golden, "$");
}

TEST_CASE("cli estimate runs end to end on an exported simulation dataset") {
    const fs::path dir = tmp_dir() / "cli_estimate";
    fs::create_directories(dir);
    Dataset data = generate({.n = 2000, .seed = 63});
    // export with the strict user-data contract in mind
    data.y = data.y.cwiseMax(0.0);
    const fs::path csv = dir / "dgp.csv";
    save_csv(csv.string(), data);

    std::ostringstream cmd;
    cmd << CCI_CLI_PATH << " estimate --input " << csv.string()
        << " --outcome y --income income --exposure exposure --covariates x1,x2"
        << " --income-transform none --estimators plug-in,one-step,est-eq"
        << " --seed 5 --threads 2 --out-dir " << dir.string();
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    REQUIRE(fs::exists(dir / "estimates.json"));
    REQUIRE(fs::exists(dir / "estimates.csv"));

    const Json j = Json::parse(read_text(dir / "estimates.json"));
    const auto& th1 = j["contrasts"][0]["one_step"];
    const double value = th1["value"].get<double>();
    const double se = th1["se"].get<double>();
    // clamping the 2.5% negative tail shifts the estimand slightly, so allow
    // 3 se around the unclamped reference plus the clamp offset
    CHECK(std::fabs(value - (-0.18879)) < 3.0 * se + 0.01);

    // byte-identical rerun
    const std::string first = read_text(dir / "estimates.json");
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    CHECK(read_text(dir / "estimates.json") == first);
}

TEST_CASE("cli estimate with a single exposure level reports no contrasts") {
    const fs::path dir = tmp_dir() / "cli_single";
    fs::create_directories(dir);
    const fs::path csv = dir / "single.csv";
    std::ostringstream content;
    content << "y,income,exposure,x1,x2\n";
    Rng rng(64);
    for (int i = 0; i < 80; ++i)
        content << std::fabs(rng.normal(2, 1)) << ',' << rng.normal() << ",0," << rng.normal()
                << ',' << rng.normal() << "\n";
    write_text(csv, content.str());

    std::ostringstream cmd;
    cmd << CCI_CLI_PATH << " estimate --input " << csv.string()
        << " --outcome y --income income --exposure exposure --covariates x1,x2"
        << " --income-transform none --out-dir " << dir.string();
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    const Json j = Json::parse(read_text(dir / "estimates.json"));
    CHECK(j["contrasts"].size() == 0);
    CHECK(j["levels"].size() == 1);
    CHECK(j["levels"][0].contains("one_step"));
}

TEST_CASE("cli fails with a structured error and nonzero exit on a missing file") {
    const fs::path dir = tmp_dir() / "cli_missing";
    fs::create_directories(dir);
    std::ostringstream cmd;
    cmd << CCI_CLI_PATH << " estimate --input " << (dir / "nope.csv").string()
        << " --outcome y --income income --exposure exposure --covariates x1,x2"
        << " --out-dir " << dir.string() << " 2> " << (dir / "err.txt").string();
    CHECK(std::system(cmd.str().c_str()) != 0);
    const std::string err = read_text(dir / "err.txt");
    CHECK(err.find("\"error\"") != std::string::npos);
    CHECK(err.find("\"code\"") != std::string::npos);
}

TEST_CASE("cli truth emits the constants file") {
    const fs::path dir = tmp_dir() / "cli_truth";
    fs::create_directories(dir);
    std::ostringstream cmd;
    cmd << CCI_CLI_PATH << " truth --n-big 100000 --seed 3 --out-dir " << dir.string()
        << " > /dev/null";
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    const Json j = Json::parse(read_text(dir / "truth.json"));
    CHECK(j["schema"] == "cci.truth/1");
    CHECK(j["noise_convention"] == "sd");
    CHECK(std::fabs(j["g0"].get<double>() - 0.12486) < 0.01);
}

TEST_CASE("cli simulate smoke run emits well-formed outputs") {
    const fs::path dir = tmp_dir() / "cli_sim";
    fs::create_directories(dir);
    std::ostringstream cmd;
    cmd << CCI_CLI_PATH << " simulate --n 200 --replicates 4 --scenarios correct,wrong_y"
        << " --estimators plug-in,one-step --truth-n 100000 --grid-size 30 --threads 2"
        << " --out-dir " << dir.string();
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    REQUIRE(fs::exists(dir / "mcreport.csv"));
    REQUIRE(fs::exists(dir / "mcreport.txt"));
    REQUIRE(fs::exists(dir / "mcreport.json"));
    // row count: scenarios x estimators x estimands + header
    const std::string csv = read_text(dir / "mcreport.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 3);
    const Json j = Json::parse(read_text(dir / "mcreport.json"));
    CHECK(j["schema"] == "cci.mc/1");
    CHECK(j["noise_convention"] == "sd");
    CHECK(j["truth"]["schema"] == "cci.truth/1");
    CHECK(j["cells"].size() == 12);
}
