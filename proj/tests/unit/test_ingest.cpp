#include "doctest.h"

#include "t2dm/ingest.hpp"

using namespace t2dm;

TEST_CASE("diagnosis code matching, version 9") {
    // positive label: five characters, 250 prefix, final digit 0 or 2
    CHECK(icd_matches_t2dm(9, "25000"));
    CHECK(icd_matches_t2dm(9, "25002"));
    CHECK(icd_matches_t2dm(9, "25090"));
    CHECK(icd_matches_t2dm(9, "250.02"));  // dots stripped
    CHECK_FALSE(icd_matches_t2dm(9, "25001"));  // type 1 suffix
    CHECK_FALSE(icd_matches_t2dm(9, "25003"));
    CHECK_FALSE(icd_matches_t2dm(9, "2500"));   // too short
    CHECK_FALSE(icd_matches_t2dm(9, "250002"));
    CHECK_FALSE(icd_matches_t2dm(9, "E1100"));  // wrong version
}

TEST_CASE("diagnosis code matching, version 10") {
    CHECK(icd_matches_t2dm(10, "E11"));
    CHECK(icd_matches_t2dm(10, "E119"));
    CHECK(icd_matches_t2dm(10, "E11.65"));
    CHECK(icd_matches_t2dm(10, "e1122"));  // case-insensitive
    CHECK_FALSE(icd_matches_t2dm(10, "E10"));  // type 1
    CHECK_FALSE(icd_matches_t2dm(10, "E139"));
    CHECK_FALSE(icd_matches_t2dm(10, "25000"));
}

TEST_CASE("family history flag codes") {
    CHECK(icd_matches_family_history(9, "V180"));
    CHECK(icd_matches_family_history(9, "V1800"));
    CHECK(icd_matches_family_history(10, "Z833"));
    CHECK(icd_matches_family_history(10, "Z83.3"));
    CHECK_FALSE(icd_matches_family_history(9, "V181"));
    CHECK_FALSE(icd_matches_family_history(10, "Z834"));
}

namespace {

RawCohort make_cohort() {
    RawCohort c;
    c.patients = {{"p1", 1, 60}, {"p2", 2, 70}};
    c.admissions = {{"p1", "a1", 1000, 90000}, {"p2", "a1", 2000, 95000}};
    return c;
}

IcuStayRow stay(const std::string& pid, const std::string& aid, const std::string& sid,
                EpochSeconds in, EpochSeconds out, const std::string& unit) {
    return {pid, aid, sid, in, out, unit};
}

}  // namespace

TEST_CASE("admission without a care-unit record yields no episode") {
    RawCohort c = make_cohort();
    c.icu_stays = {stay("p1", "a1", "s1", 1100, 5000, "MICU")};
    auto eps = extract_episodes(c);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].patient_id == "p1");
    CHECK(eps[0].stay_id == "s1");
}

TEST_CASE("icu -> ward -> icu interleaving excludes the admission") {
    RawCohort c = make_cohort();
    c.icu_stays = {stay("p1", "a1", "s1", 1100, 2000, "MICU"),
                   stay("p1", "a1", "w1", 2000, 3000, "MED"),
                   stay("p1", "a1", "s2", 3000, 4000, "SICU"),
                   stay("p2", "a1", "s3", 2100, 4000, "CCU")};
    auto eps = extract_episodes(c);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].patient_id == "p2");
}

TEST_CASE("consecutive icu records are allowed; the first anchors the episode") {
    RawCohort c = make_cohort();
    c.icu_stays = {stay("p1", "a1", "s2", 2000, 3000, "SICU"),
                   stay("p1", "a1", "s1", 1100, 2000, "MICU")};
    auto eps = extract_episodes(c);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].stay_id == "s1");
    CHECK(eps[0].icu_in_time == 1100);
}

TEST_CASE("ward care before or after the icu block does not exclude") {
    RawCohort c = make_cohort();
    c.icu_stays = {stay("p1", "a1", "w0", 1000, 1100, "MED"),
                   stay("p1", "a1", "s1", 1100, 2000, "MICU"),
                   stay("p1", "a1", "w1", 2000, 3000, "MED")};
    auto eps = extract_episodes(c);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].stay_id == "s1");
}

TEST_CASE("same admission id on different patients does not collide") {
    RawCohort c = make_cohort();
    c.icu_stays = {stay("p1", "a1", "s1", 1100, 2000, "MICU"),
                   stay("p2", "a1", "s2", 2100, 3000, "MICU")};
    auto eps = extract_episodes(c);
    REQUIRE(eps.size() == 2);
    CHECK(eps[0].stay_id == "s1");
    CHECK(eps[1].stay_id == "s2");
}

TEST_CASE("patient-level labels propagate across admissions") {
    RawCohort c = make_cohort();
    c.admissions.push_back({"p1", "a2", 100000, 190000});
    c.icu_stays = {stay("p1", "a1", "s1", 1100, 2000, "MICU"),
                   stay("p1", "a2", "s2", 100100, 110000, "MICU")};
    c.diagnoses = {{"p1", "a2", 10, "E119"}, {"p1", "a1", 9, "V180"}};

    auto eps = labeled_episodes(c);
    REQUIRE(eps.size() == 2);
    CHECK(eps[0].y == 1);  // a1 labeled through the patient-level rule
    CHECK(eps[1].y == 1);
    CHECK(eps[0].family_history == 1);

    IngestOptions per_admission;
    per_admission.patient_level_labels = false;
    auto eps2 = labeled_episodes(c, per_admission);
    CHECK(eps2[0].y == 0);
    CHECK(eps2[1].y == 1);
}
