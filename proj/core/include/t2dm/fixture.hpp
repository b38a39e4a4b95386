#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace t2dm {

// Synthetic raw-corpus generator. Writes the full input layout (patients,
// admissions, icustays, diagnoses_icd, chartevents, outputevents,
// cxr_metadata + PNGs, ecg_records + .f32 waveforms) plus expected.json, an
// oracle of per-episode ground truth computed directly from the drawn values
// while they are generated.
struct FixtureConfig {
    int patients = 20;
    double prevalence = 0.31;
    uint64_t seed = 0;

    // Class-conditional signal strengths; set all three to 0 for a
    // label-free (null) cohort.
    double ehr_signal_bpm = 10.0;   // heart-rate mean shift for positives
    double cxr_signal = 0.35;       // brightness of the planted central disc
    double ecg_signal = 120.0;      // low-frequency amplitude for positives

    // family-history flag rates (a genuine static signal when they differ)
    double fh_rate_pos = 0.6, fh_rate_neg = 0.1;

    int image_side = 64;
    int ecg_rows = 5000, ecg_leads = 12;

    // Structural oddities on fixed patient indices (skipped admissions,
    // transfer exclusions, AP-only / out-of-window imaging, missing leads,
    // event-free stays). Requires patients >= 10.
    bool planted_edge_cases = true;
};

struct FixtureSummary {
    int patients = 0;
    int expected_samples = 0;  // episodes that should survive the pipeline
    int positives = 0;
};

FixtureSummary generate_cohort(const FixtureConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace t2dm
