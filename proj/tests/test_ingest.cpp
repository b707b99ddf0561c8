#include <doctest.h>

#include <cmath>
#include <limits>

#include "calm/csv.hpp"
#include "calm/error.hpp"
#include "calm/ingest.hpp"
#include "calm/rng.hpp"
#include "test_support.hpp"

using namespace calm;
using calm::test::TempDir;
using calm::test::read_file;
using calm::test::write_file;

TEST_SUITE("ingest.load_manifest") {
    TEST_CASE("single valid row") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        const auto manifests = load_manifest(dir.path / "m.csv");
        REQUIRE(manifests.size() == 1);
        CHECK(manifests[0].participant_id == "P001");
        CHECK(manifests[0].device == Device::tobii);
        CHECK(manifests[0].task == Task::rest);
        CHECK(manifests[0].light == Light::light);
        CHECK(manifests[0].nominal_rate_hz == 100.0);
        CHECK(manifests[0].path == dir.path / "p.csv");
    }

    TEST_CASE("unknown task enum is a validation error") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,cl3,light,100,p.csv\n");
        CHECK_THROWS_AS(load_manifest(dir.path / "m.csv"), ValidationError);
    }

    TEST_CASE("malformed row names its line number") {
        TempDir dir;
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii\n");
        try {
            load_manifest(dir.path / "m.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    TEST_CASE("wrong header is rejected") {
        TempDir dir;
        write_file(dir.path / "m.csv", "participant,session\nP001,S1\n");
        CHECK_THROWS_AS(load_manifest(dir.path / "m.csv"), ParseError);
    }

    TEST_CASE("missing channel file is a validation error") {
        TempDir dir;
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,nope.csv\n");
        CHECK_THROWS_AS(load_manifest(dir.path / "m.csv"), ValidationError);
    }

    TEST_CASE("paper-scale manifest: 10 x 3 x 2 x 3 = 180 rows") {
        TempDir dir;
        write_file(dir.path / "ch.csv", "timestamp_s,value\n0,3\n");
        std::string m = "participant_id,session_id,device,task,light,nominal_rate_hz,path\n";
        const char* devices[] = {"tobii", "biopac", "polar"};
        const char* tasks[] = {"rest", "cl1", "cl2"};
        const char* lights[] = {"light", "dark"};
        for (int p = 0; p < 10; ++p) {
            for (const char* task : tasks) {
                for (const char* light : lights) {
                    for (const char* device : devices) {
                        m += "P" + std::to_string(p) + ",S_" + task + "_" + light + "," + device + "," +
                             task + "," + light + ",100,ch.csv\n";
                    }
                }
            }
        }
        write_file(dir.path / "m.csv", m);
        CHECK(load_manifest(dir.path / "m.csv").size() == 180);
    }

    TEST_CASE("manifest write/reload round-trip is idempotent") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n"
                   "P001,S2,polar,cl2,dark,120,p.csv\n");
        const auto first = load_manifest(dir.path / "m.csv");
        write_manifest_csv(first, dir.path / "m2.csv", dir.path);
        const auto second = load_manifest(dir.path / "m2.csv");
        REQUIRE(first.size() == second.size());
        for (std::size_t i = 0; i < first.size(); ++i) {
            CHECK(first[i].participant_id == second[i].participant_id);
            CHECK(first[i].session_id == second[i].session_id);
            CHECK(first[i].device == second[i].device);
            CHECK(first[i].task == second[i].task);
            CHECK(first[i].light == second[i].light);
            CHECK(first[i].nominal_rate_hz == second[i].nominal_rate_hz);
            CHECK(first[i].path == second[i].path);
        }
        write_manifest_csv(second, dir.path / "m3.csv", dir.path);
        CHECK(read_file(dir.path / "m2.csv") == read_file(dir.path / "m3.csv"));
    }
}

TEST_SUITE("ingest.load_channel") {
    TEST_CASE("three-row pupil file") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3.1\n0.01,3.2\n0.02,3.3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        const auto ch = load_channel(load_manifest(dir.path / "m.csv")[0]);
        REQUIRE(ch.size() == 3);
        CHECK(ch.kind == ChannelKind::pupil_diameter_mm);
        CHECK(ch.values[2] == 3.3);
        CHECK(ch.missing_count() == 0);
    }

    TEST_CASE("duplicated timestamp violates strict ascent") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3.1\n0.01,3.2\n0.01,3.3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        CHECK_THROWS_AS(load_channel(load_manifest(dir.path / "m.csv")[0]), DataError);
    }

    TEST_CASE("empty file is a data error") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        CHECK_THROWS_AS(load_channel(load_manifest(dir.path / "m.csv")[0]), DataError);
    }

    TEST_CASE("empty cells load as missing markers, not dropped rows") {
        TempDir dir;
        write_file(dir.path / "p.csv", "timestamp_s,value\n0,3.1\n0.01,\n0.02,3.3\n");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        const auto ch = load_channel(load_manifest(dir.path / "m.csv")[0]);
        REQUIRE(ch.size() == 3);
        CHECK(ch.missing_count() == 1);
        CHECK(std::isnan(ch.values[1]));
    }

    TEST_CASE("3-minute biopac file at 1000 Hz loads 180000 samples") {
        TempDir dir;
        std::string body = "timestamp_s,value\n";
        body.reserve(180000 * 16);
        for (int i = 0; i < 180000; ++i) {
            body += csv::format_double(i * 0.001);
            body += ",500\n";
        }
        write_file(dir.path / "e.csv", body);
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,biopac,rest,light,1000,e.csv\n");
        const auto ch = load_channel(load_manifest(dir.path / "m.csv")[0]);
        CHECK(ch.size() == 180000);
        CHECK(ch.kind == ChannelKind::ecg_mv);
    }

    TEST_CASE("channel CSV round-trips bit-exactly including missing cells") {
        TempDir dir;
        Rng rng(99);
        RawChannel ch;
        ch.kind = ChannelKind::pupil_diameter_mm;
        double t = 0.0;
        for (int i = 0; i < 500; ++i) {
            t += rng.uniform(0.001, 0.1);
            ch.timestamps_s.push_back(t);
            if (rng.below(10) == 0) {
                ch.values.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                // exercise awkward decimals
                ch.values.push_back(rng.normal(3.0, 1.0) *
                                    std::pow(10.0, static_cast<double>(rng.below(7)) - 3.0));
            }
        }
        write_channel_csv(ch, dir.path / "ch.csv");
        write_file(dir.path / "m.csv",
                   "participant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,ch.csv\n");
        const auto back = load_channel(load_manifest(dir.path / "m.csv")[0]);
        REQUIRE(back.size() == ch.size());
        for (std::size_t i = 0; i < ch.size(); ++i) {
            CHECK(back.timestamps_s[i] == ch.timestamps_s[i]); // bit-exact
            if (std::isnan(ch.values[i])) {
                CHECK(std::isnan(back.values[i]));
            } else {
                CHECK(back.values[i] == ch.values[i]); // bit-exact
            }
        }
    }

    TEST_CASE("comment lines are ignored") {
        TempDir dir;
        write_file(dir.path / "p.csv",
                   "# exported by device X\ntimestamp_s,value\n0,3.1\n# mid comment\n0.01,3.2\n");
        write_file(dir.path / "m.csv",
                   "# study manifest\nparticipant_id,session_id,device,task,light,nominal_rate_hz,path\n"
                   "P001,S1,tobii,rest,light,100,p.csv\n");
        const auto ch = load_channel(load_manifest(dir.path / "m.csv")[0]);
        CHECK(ch.size() == 2);
    }
}
