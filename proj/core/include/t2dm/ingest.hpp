#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "t2dm/timeutil.hpp"

namespace t2dm {

struct PatientRow {
    std::string patient_id;
    int sex = 0;  // Female: 1, Male: 2
    double anchor_age = 0;
};

struct AdmissionRow {
    std::string patient_id;
    std::string admission_id;
    EpochSeconds admit_time = 0;
    EpochSeconds discharge_time = 0;
};

// One care-unit record. ICU stays are the records whose care_unit is in the
// configured ICU-unit list; the ordered per-admission sequence of these
// records drives the transfer exclusion.
struct IcuStayRow {
    std::string patient_id;
    std::string admission_id;
    std::string stay_id;
    EpochSeconds in_time = 0;
    EpochSeconds out_time = 0;
    std::string care_unit;
};

struct DiagnosisRow {
    std::string patient_id;
    std::string admission_id;
    int icd_version = 0;  // 9 or 10
    std::string icd_code;
};

struct RowIssue {
    std::string file;
    long line = 0;
    std::string message;
};

struct RawCohort {
    std::vector<PatientRow> patients;
    std::vector<AdmissionRow> admissions;
    std::vector<IcuStayRow> icu_stays;
    std::vector<DiagnosisRow> diagnoses;
    // Malformed / referentially broken rows, counted and surfaced, never
    // silently dropped.
    std::vector<RowIssue> issues;
};

struct Episode {
    std::string patient_id;
    std::string admission_id;
    std::string stay_id;
    EpochSeconds icu_in_time = 0;
    EpochSeconds icu_out_time = 0;
    EpochSeconds admit_time = 0;
    int y = 0;
    int family_history = 0;
    double age = 0;
    int sex = 0;

    std::string id() const { return patient_id + "/" + admission_id; }
};

struct IngestOptions {
    std::vector<std::string> icu_units = {"MICU", "SICU", "CCU",  "CSRU",
                                          "TSICU", "NICU", "CVICU", "ICU"};
    // true: any qualifying code anywhere in the patient's record labels all of
    // that patient's episodes. false: per-admission lookup.
    bool patient_level_labels = true;
};

// Parses patients.csv, admissions.csv, icustays.csv and diagnoses_icd.csv from
// raw_dir. Missing file -> ConfigError. Malformed rows land in issues.
RawCohort load_raw_cohort(const std::filesystem::path& raw_dir);

// Reduces a cohort to unlabeled episodes: one per admission that has at least
// one ICU care-unit record and no ICU -> ward -> ICU interleaving; the
// chronologically first ICU record is kept. Deterministic order
// (patient_id, admit_time, admission_id).
std::vector<Episode> extract_episodes(const RawCohort& cohort,
                                      const IngestOptions& opt = {});

// ICD pattern matching: dots stripped, case-insensitive.
// y: v9 250x0 / 250x2 (5 chars, "250" prefix, last char 0 or 2), v10 E11 prefix.
// family history: v9 V180 prefix, v10 Z833 prefix.
bool icd_matches_t2dm(int version, const std::string& code);
bool icd_matches_family_history(int version, const std::string& code);

struct LabelFlags {
    int y = 0;
    int family_history = 0;
};
LabelFlags label_and_flags(const std::vector<std::pair<int, std::string>>& codes,
                           std::vector<RowIssue>* issues = nullptr);

// extract_episodes + label assignment from the cohort's diagnoses.
std::vector<Episode> labeled_episodes(const RawCohort& cohort,
                                      const IngestOptions& opt = {});

}  // namespace t2dm
