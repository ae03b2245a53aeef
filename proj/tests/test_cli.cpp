#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lesionseg/checkpoint.hpp"
#include "lesionseg/nifti.hpp"
#include "lesionseg/phantom.hpp"
#include "lesionseg/pipeline.hpp"

using namespace lesionseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = LESIONSEG_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

bool same_files(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

// Shared tiny pipeline fixture: phantom cohort + trained checkpoint.
struct Fixture {
    TempDir dir{"lesionseg_cli_fixture"};
    std::string data_dir, manifest, ckpt;

    Fixture() {
        data_dir = dir / "data";
        REQUIRE(run("phantom --out " + data_dir +
                    " --seed 11 --subjects 3 --dims 24 --lesions-min 2 --lesions-max 3 "
                    "--radius-max 2.5") == 0);
        manifest = data_dir + "/manifest.json";
        REQUIRE(run("train --data " + manifest + " --out " + (dir / "model") +
                    " --norm condin --channels 3,5 --iters 6 --batch 2 --seed 1") == 0);
        ckpt = dir / "model/checkpoint.bin";
    }
};

} // namespace

TEST_CASE("phantom runs are bitwise reproducible and create the output dir") {
    TempDir t("lesionseg_cli_phantom");
    const std::string a = t / "a/deeper"; // missing parents get created
    const std::string b = t / "b";
    REQUIRE(run("phantom --out " + a + " --seed 7 --subjects 2 --dims 24 --lesions-min 2 "
                "--lesions-max 3 --radius-max 2.5") == 0);
    REQUIRE(run("phantom --out " + b + " --seed 7 --subjects 2 --dims 24 --lesions-min 2 "
                "--lesions-max 3 --radius-max 2.5") == 0);

    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename().string();
        if (name == "run_config.json")
            continue; // echoes the differing --out path
        CHECK(same_files(entry.path(), fs::path(b) / name));
        ++files;
    }
    CHECK(files == 2 * 6 + 1); // 4 contrasts + 2 masks per subject, manifest
}

TEST_CASE("usage and data errors map to exit codes 2 and 3") {
    TempDir t("lesionseg_cli_errors");
    CHECK(run("phantom --out " + (t / "x") + " --subjects 0") == 2);
    CHECK(run("bogus-subcommand") == 2);
    CHECK(run("phantom") == 2); // missing required --out
    CHECK(run("train --data " + (t / "missing/manifest.json") + " --out " + (t / "m")) == 3);
    CHECK(run("infer --ckpt " + (t / "none.bin") + " --data " + (t / "m.json") + " --out " +
              (t / "o")) == 3);
}

TEST_CASE("config file keys apply, flags override, unknown keys are rejected") {
    TempDir t("lesionseg_cli_config");
    {
        std::ofstream os(t / "good.json");
        os << R"({"subjects": 2, "dims": 24, "lesions_min": 2, "lesions_max": 3,)"
           << R"( "radius_max": 2.5, "seed": 9})";
    }
    REQUIRE(run("phantom --out " + (t / "out") + " --config " + (t / "good.json")) == 0);
    json manifest = json::parse(slurp(fs::path(t / "out") / "manifest.json"));
    CHECK(manifest["n_subjects"] == 2);
    CHECK(manifest["seed"] == 9);

    // explicit flag wins over the file value
    REQUIRE(run("phantom --out " + (t / "out2") + " --seed 4 --config " + (t / "good.json")) ==
            0);
    json manifest2 = json::parse(slurp(fs::path(t / "out2") / "manifest.json"));
    CHECK(manifest2["seed"] == 4);

    {
        std::ofstream os(t / "bad.json");
        os << R"({"subjects": 2, "bogus_key": 1})";
    }
    CHECK(run("phantom --out " + (t / "out3") + " --config " + (t / "bad.json")) == 2);
}

// Budget check for the default desk preset; the suite timeout enforces the
// ceiling, the assertions only require success.
TEST_CASE("desk-preset training completes within the CI budget") {
    TempDir t("lesionseg_cli_desk");
    REQUIRE(run("phantom --out " + (t / "data") + " --seed 19 --subjects 4 --dims 48") == 0);
    REQUIRE(run("train --data " + (t / "data/manifest.json") + " --out " + (t / "model") +
                " --norm bn --seed 2") == 0); // defaults: 3 levels, 300 iters, batch 4
    CHECK(fs::exists(fs::path(t / "model") / "checkpoint.bin"));
    CHECK(fs::exists(fs::path(t / "model") / "loss.csv"));
}

TEST_CASE("pipeline end to end") {
    Fixture fx;

    SUBCASE("train echoes the conditional parameter sets") {
        json echo = json::parse(slurp(fs::path(fx.dir / "model") / "run_config.json"));
        CHECK(echo["resolved_checkpoint_config"]["norm_param_sets"] == 15);
        CHECK(echo["resolved_checkpoint_config"]["norm"] == "condin");
        CHECK(fs::exists(fs::path(fx.dir / "model") / "loss.csv"));
    }

    SUBCASE("identity transforms with tau 0/0 reduce to the plain prediction") {
        const std::string out = fx.dir / "infer_id";
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + out +
                    " --stats ttin --transforms identity --tau1 0 --tau2 0") == 0);

        UNet net = load_checkpoint(fx.ckpt);
        auto cohort = load_cohort(fx.manifest);
        for (const auto& s : cohort) {
            BinaryMask3D direct =
                net.predict_volume(s.image, Plane::Axial, StatsMode::InstanceStats);
            BinaryMask3D written =
                nifti::read_mask((fs::path(out) / ("mask_" + s.id + ".nii.gz")).string());
            CHECK(written == direct);
        }
    }

    SUBCASE("3-plane with tau 1/1 equals the majority-vote reduction") {
        const std::string out = fx.dir / "infer_3p";
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + out +
                    " --stats ttin --transforms 3plane --tau1 1 --tau2 1") == 0);

        UNet net = load_checkpoint(fx.ckpt);
        auto cohort = load_cohort(fx.manifest);
        for (const auto& s : cohort) {
            std::array<BinaryMask3D, 3> planes = {
                net.predict_volume(s.image, Plane::Axial, StatsMode::InstanceStats),
                net.predict_volume(s.image, Plane::Sagittal, StatsMode::InstanceStats),
                net.predict_volume(s.image, Plane::Coronal, StatsMode::InstanceStats)};
            BinaryMask3D majority = majority_vote_3plane(planes);
            BinaryMask3D written =
                nifti::read_mask((fs::path(out) / ("mask_" + s.id + ".nii.gz")).string());
            CHECK(written == majority);
        }
    }

    SUBCASE("inference is bitwise reproducible, also with --jobs") {
        const std::string a = fx.dir / "infer_a";
        const std::string b = fx.dir / "infer_b";
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + a +
                    " --stats ttin --tau1 4 --tau2 2") == 0);
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + b +
                    " --stats ttin --tau1 4 --tau2 2 --jobs 3") == 0);
        int compared = 0;
        for (const auto& entry : fs::directory_iterator(a)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("conf_", 0) != 0 && name.rfind("mask_", 0) != 0)
                continue; // the config echo records the differing --jobs value
            CHECK(same_files(entry.path(), fs::path(b) / name));
            ++compared;
        }
        CHECK(compared == 6);
    }

    SUBCASE("eval scores 1.0 when predictions equal both raters") {
        auto cohort = load_cohort(fx.manifest);
        const std::string pred = fx.dir / "perfect";
        fs::create_directories(pred);
        std::vector<double> volumes;
        for (const auto& s : cohort) {
            nifti::write_mask(s.rater1, (fs::path(pred) / ("mask_" + s.id + ".nii.gz")).string());
            volumes.push_back(double(s.rater1.count()));
        }
        // identical raters: overwrite rater2 files with rater1
        for (const auto& s : cohort)
            nifti::write_mask(s.rater1,
                              (fs::path(fx.data_dir) / (s.id + "_rater2.nii.gz")).string());

        REQUIRE(run("eval --pred " + pred + " --data " + fx.manifest + " --out " +
                    (fx.dir / "report")) == 0);
        json rep = json::parse(slurp(fx.dir / "report.json"));
        CHECK(rep["n_subjects"] == 3);
        CHECK(rep["average"]["dsc"] == 1.0);
        CHECK(rep["average"]["lfpr"] == 0.0);
        // lesion volumes differ across random subjects, so vc is defined
        REQUIRE_FALSE(rep["partial"].get<bool>());
        CHECK(rep["average"]["score"].get<double>() == doctest::Approx(1.0));
    }

    SUBCASE("a 1x1 sweep grid matches eval on the matching infer output") {
        const std::string out = fx.dir / "infer_sw";
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + out +
                    " --stats ttin --tau1 6 --tau2 3") == 0);
        REQUIRE(run("eval --pred " + out + " --data " + fx.manifest + " --out " +
                    (fx.dir / "rep_sw")) == 0);
        REQUIRE(run("sweep --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " +
                    (fx.dir / "sweep.csv") +
                    " --stats ttin --tau1-min 6 --tau1-max 6 --tau2-min 3 --tau2-max 3") == 0);

        json rep = json::parse(slurp(fx.dir / "rep_sw.json"));
        std::istringstream csv(slurp(fx.dir / "sweep.csv"));
        std::string header, row;
        std::getline(csv, header);
        std::getline(csv, row);
        CHECK(header == "tau1,tau2,mean_score,n_subjects");
        std::stringstream rs(row);
        std::string t1, t2, score, n;
        std::getline(rs, t1, ',');
        std::getline(rs, t2, ',');
        std::getline(rs, score, ',');
        std::getline(rs, n, ',');
        CHECK(t1 == "6");
        CHECK(t2 == "3");
        CHECK(std::stod(score) ==
              doctest::Approx(rep["average"]["score"].get<double>()).epsilon(1e-9));
        CHECK(n == "3");
    }

    SUBCASE("sweeping many cells performs one inference pass per subject") {
        UNet net = load_checkpoint(fx.ckpt);
        auto cohort = load_cohort(fx.manifest);
        InferOptions opts;
        opts.stats = StatsMode::InstanceStats;
        opts.transforms = "all24";
        std::vector<int> tau1, tau2;
        for (int t = 0; t < 24; t += 2)
            tau1.push_back(t);
        for (int t = 0; t < 18; t += 2)
            tau2.push_back(t);
        long passes = 0;
        auto rows = run_sweep(net, cohort, opts, tau1, tau2, &passes);
        CHECK(rows.size() == 72); // valid tau1 >= tau2 cells of the 12x9 grid
        CHECK(passes == long(cohort.size()) * 24);
    }

    SUBCASE("dropping a contrast at inference changes the availability path") {
        const std::string out = fx.dir / "infer_drop";
        REQUIRE(run("infer --ckpt " + fx.ckpt + " --data " + fx.manifest + " --out " + out +
                    " --stats ttin --tau1 4 --tau2 2 --drop FLAIR --drop PDw") == 0);
        CHECK(fs::exists(fs::path(out) / "mask_subject000.nii.gz"));
    }
}
