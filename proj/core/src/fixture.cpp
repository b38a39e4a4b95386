#include "t2dm/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "json.hpp"

#include "t2dm/csv.hpp"
#include "t2dm/ecg.hpp"
#include "t2dm/errors.hpp"
#include "t2dm/timeutil.hpp"

namespace t2dm {

namespace {

constexpr int kRateMin = 30;
constexpr int kDurationH = 48;
constexpr int kBins = kDurationH * 60 / kRateMin;  // 96

std::string pid_of(int p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%05d", p);
    return buf;
}

std::string ts(EpochSeconds t) { return format_iso8601(t); }

struct Writers {
    std::ofstream patients, admissions, icustays, diagnoses, chartevents, outputevents, cxr, ecg;
};

}  // namespace

FixtureSummary generate_cohort(const FixtureConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.patients < 1) throw ConfigError("fixture: need at least one patient");
    if (cfg.planted_edge_cases && cfg.patients < 10)
        throw ConfigError("fixture: planted edge cases need at least 10 patients");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "waveforms");

    Writers w;
    w.patients.open(out_dir / "patients.csv");
    w.admissions.open(out_dir / "admissions.csv");
    w.icustays.open(out_dir / "icustays.csv");
    w.diagnoses.open(out_dir / "diagnoses_icd.csv");
    w.chartevents.open(out_dir / "chartevents.csv");
    w.outputevents.open(out_dir / "outputevents.csv");
    w.cxr.open(out_dir / "cxr_metadata.csv");
    w.ecg.open(out_dir / "ecg_records.csv");

    w.patients << "patient_id,sex,anchor_age\n";
    w.admissions << "patient_id,admission_id,admit_time,discharge_time\n";
    w.icustays << "patient_id,admission_id,stay_id,in_time,out_time,care_unit\n";
    w.diagnoses << "patient_id,admission_id,icd_version,icd_code\n";
    w.chartevents << "stay_id,chart_time,variable_label,value,unit\n";
    w.outputevents << "stay_id,chart_time,variable_label,value,unit\n";
    w.cxr << "patient_id,study_time,view_position,path\n";
    w.ecg << "patient_id,record_time,path,missing_flags\n";

    const EpochSeconds base = *parse_iso8601("2130-01-01T00:00:00");

    nlohmann::json expected;
    expected["config"] = {{"patients", cfg.patients},
                          {"prevalence", cfg.prevalence},
                          {"seed", cfg.seed},
                          {"ehr_signal_bpm", cfg.ehr_signal_bpm},
                          {"cxr_signal", cfg.cxr_signal},
                          {"ecg_signal", cfg.ecg_signal},
                          {"rate_min", kRateMin},
                          {"duration_h", kDurationH}};
    nlohmann::json jpatients = nlohmann::json::array();

    FixtureSummary summary;
    summary.patients = cfg.patients;

    for (int p = 0; p < cfg.patients; ++p) {
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(p) + 1);
        const std::string pid = pid_of(p);
        const bool edge = cfg.planted_edge_cases;

        const int y = std::bernoulli_distribution(cfg.prevalence)(rng) ? 1 : 0;
        const int age = std::uniform_int_distribution<int>(40, 89)(rng);
        const int sex = std::bernoulli_distribution(0.5)(rng) ? 2 : 1;
        const int fh =
            std::bernoulli_distribution(y ? cfg.fh_rate_pos : cfg.fh_rate_neg)(rng) ? 1 : 0;
        summary.positives += y;

        w.patients << pid << ',' << sex << ',' << age << '\n';

        const EpochSeconds admit = base + static_cast<EpochSeconds>(p) * 2 * kSecondsPerDay;
        const EpochSeconds discharge = admit + 5 * kSecondsPerDay;
        const EpochSeconds icu_in = admit + 2 * 3600;
        const EpochSeconds icu_out = admit + 4 * kSecondsPerDay;
        w.admissions << pid << ",A1," << ts(admit) << ',' << ts(discharge) << '\n';

        nlohmann::json jp = {{"id", pid}, {"y", y}, {"family_history", fh},
                             {"age", age}, {"sex", sex}};
        nlohmann::json jepisodes = nlohmann::json::array();

        // Care-unit records. Patient 3 gets two back-to-back ICU records
        // (allowed; the first one anchors the episode).
        w.icustays << pid << ",A1,S" << p << "a," << ts(icu_in) << ','
                   << ts(edge && p == 3 ? icu_in + kSecondsPerDay : icu_out) << ",MICU\n";
        if (edge && p == 3)
            w.icustays << pid << ",A1,S" << p << "b," << ts(icu_in + kSecondsPerDay) << ','
                       << ts(icu_out) << ",SICU\n";
        const std::string stay = "S" + std::to_string(p) + "a";

        // Diagnoses: everyone carries a benign code; positives a qualifying
        // one (dot form exercised); family history its own flag code.
        w.diagnoses << pid << ",A1," << (p % 2 ? 9 : 10) << ',' << (p % 2 ? "4019" : "I10")
                    << '\n';
        if (y) {
            if (p % 3 == 0)
                w.diagnoses << pid << ",A1,9,25000\n";
            else if (p % 3 == 1)
                w.diagnoses << pid << ",A1,9,250.02\n";
            else
                w.diagnoses << pid << ",A1,10,E11.9\n";
        }
        if (fh) w.diagnoses << pid << ",A1," << (p % 2 ? 9 : 10) << ',' << (p % 2 ? "V180" : "Z833") << '\n';

        // Planted structural exclusions on their own extra admission.
        if (edge && p == 1) {
            // Admission without any care-unit record: never becomes an episode.
            w.admissions << pid << ",A2," << ts(admit + 20 * kSecondsPerDay) << ','
                         << ts(admit + 22 * kSecondsPerDay) << '\n';
            jepisodes.push_back({{"admission_id", "A2"}, {"included", false}, {"reason", "no_icu"}});
        }
        if (edge && p == 2) {
            EpochSeconds a2 = admit + 20 * kSecondsPerDay;
            w.admissions << pid << ",A2," << ts(a2) << ',' << ts(a2 + 3 * kSecondsPerDay) << '\n';
            w.icustays << pid << ",A2,S" << p << "x," << ts(a2) << ',' << ts(a2 + kSecondsPerDay)
                       << ",MICU\n";
            w.icustays << pid << ",A2,W" << p << ',' << ts(a2 + kSecondsPerDay) << ','
                       << ts(a2 + 2 * kSecondsPerDay) << ",MED\n";
            w.icustays << pid << ",A2,S" << p << "y," << ts(a2 + 2 * kSecondsPerDay) << ','
                       << ts(a2 + 3 * kSecondsPerDay) << ",MICU\n";
            jepisodes.push_back(
                {{"admission_id", "A2"}, {"included", false}, {"reason", "transfer"}});
        }

        const bool no_events = edge && p == 7;
        std::vector<double> hr_bins;
        if (!no_events) {
            // One heart-rate event per bin, integer values: the expected bin
            // mean is exactly the drawn value.
            std::normal_distribution<double> hr_d(75.0 + y * cfg.ehr_signal_bpm, 8.0);
            for (int k = 0; k < kBins; ++k) {
                double v = std::clamp(std::round(hr_d(rng)), 40.0, 180.0);
                hr_bins.push_back(v);
                w.chartevents << stay << ',' << ts(icu_in + k * kRateMin * 60 + 300)
                              << ",Heart rate," << v << ",bpm\n";
            }
            std::normal_distribution<double> rr_d(18, 3), sbp_d(120, 12), dbp_d(70, 8),
                tf_d(98.6, 0.7);
            for (int k = 0; k < kDurationH / 2; ++k) {
                EpochSeconds t = icu_in + k * 7200 + 600;
                w.chartevents << stay << ',' << ts(t) << ",Respiratory Rate,"
                              << std::round(rr_d(rng)) << ",insp/min\n";
                w.chartevents << stay << ',' << ts(t)
                              << ",Non Invasive Blood Pressure systolic,"
                              << std::round(sbp_d(rng)) << ",mmHg\n";
                w.chartevents << stay << ',' << ts(t)
                              << ",Non Invasive Blood Pressure diastolic,"
                              << std::round(dbp_d(rng)) << ",mmHg\n";
            }
            for (int k = 0; k < kDurationH / 4; ++k)
                w.chartevents << stay << ',' << ts(icu_in + k * 14400 + 900)
                              << ",Temperature Fahrenheit,"
                              << std::round(tf_d(rng) * 10) / 10 << ",degF\n";
            w.chartevents << stay << ',' << ts(icu_in + 600) << ",Height,"
                          << std::uniform_int_distribution<int>(60, 75)(rng) << ",inches\n";
            w.chartevents << stay << ',' << ts(icu_in + 600) << ",Admission Weight (Kg),"
                          << std::uniform_int_distribution<int>(55, 110)(rng) << ",kg\n";
            // Rows the cleaner must reject: out-of-range, out-of-window,
            // unmapped label.
            w.chartevents << stay << ',' << ts(icu_in + 1000) << ",Heart rate,400,bpm\n";
            w.chartevents << stay << ',' << ts(icu_in + 49 * 3600) << ",Heart rate,77,bpm\n";
            w.chartevents << stay << ',' << ts(icu_in + 1200) << ",Albumin,3.1,g/dL\n";
            std::normal_distribution<double> ur_d(120, 30);
            for (int k = 0; k < kDurationH / 4; ++k)
                w.outputevents << stay << ',' << ts(icu_in + k * 14400 + 1800) << ",Foley,"
                               << std::max(0.0, std::round(ur_d(rng))) << ",mL\n";
        }

        // Chest image: noisy background; positives get a brighter central disc.
        {
            cv::Mat img(cfg.image_side, cfg.image_side, CV_8UC1);
            std::uniform_int_distribution<int> bg(90, 140);
            for (int r = 0; r < img.rows; ++r)
                for (int c = 0; c < img.cols; ++c) img.at<uint8_t>(r, c) = static_cast<uint8_t>(bg(rng));
            if (y && cfg.cxr_signal > 0) {
                double cx = cfg.image_side / 2.0, radius = cfg.image_side / 5.0;
                int bump = static_cast<int>(cfg.cxr_signal * 255);
                for (int r = 0; r < img.rows; ++r)
                    for (int c = 0; c < img.cols; ++c)
                        if ((r - cx) * (r - cx) + (c - cx) * (c - cx) <= radius * radius)
                            img.at<uint8_t>(r, c) = static_cast<uint8_t>(
                                std::min(255, img.at<uint8_t>(r, c) + bump));
            }
            std::string rel = "images/" + pid + ".png";
            if (!cv::imwrite((out_dir / rel).string(), img))
                throw DataError("fixture: failed to write " + rel);
            bool ap_only = edge && p == 4;
            EpochSeconds study =
                (edge && p == 5) ? admit + 200 * kSecondsPerDay : admit + kSecondsPerDay;
            w.cxr << pid << ',' << ts(study) << ',' << (ap_only ? "AP" : "PA") << ',' << rel
                  << '\n';
        }

        // Waveform: broadband content plus an in-band low-frequency component
        // whose amplitude carries the label when ecg_signal > 0. A 200 Hz tone
        // sits above the pass band.
        {
            std::vector<float> wav(static_cast<size_t>(cfg.ecg_rows) * cfg.ecg_leads);
            std::normal_distribution<double> noise(0, 20);
            std::uniform_real_distribution<double> ph_d(0, 2 * M_PI);
            for (int l = 0; l < cfg.ecg_leads; ++l) {
                double ph1 = ph_d(rng), ph2 = ph_d(rng);
                for (int t = 0; t < cfg.ecg_rows; ++t) {
                    double s = noise(rng) + 40 * std::sin(2 * M_PI * 9 * t / 500.0 + ph1) +
                               30 * std::sin(2 * M_PI * 200 * t / 500.0) +
                               y * cfg.ecg_signal * std::sin(2 * M_PI * 0.9 * t / 500.0 + ph2);
                    wav[static_cast<size_t>(t) * cfg.ecg_leads + l] = static_cast<float>(s);
                }
            }
            std::string rel = "waveforms/" + pid + ".f32";
            write_waveform_f32(out_dir / rel, wav);
            std::string flags(12, '0');
            if (edge && p == 6) flags[0] = '1';  // only record has a missing lead
            w.ecg << pid << ',' << ts(admit + kSecondsPerDay) << ',' << rel << ',' << flags
                  << '\n';
        }

        // Main-episode verdict.
        bool included = true;
        std::string reason;
        if (edge && p == 4) { included = false; reason = "cxr_ap_only"; }
        if (edge && p == 5) { included = false; reason = "cxr_out_of_window"; }
        if (edge && p == 6) { included = false; reason = "ecg_missing_lead"; }
        if (no_events) { included = false; reason = "no_events"; }

        nlohmann::json je = {{"admission_id", "A1"}, {"stay_id", stay}, {"included", included}};
        if (included) {
            je["sample_id"] = pid + "_A1";
            je["hr_bins"] = hr_bins;
            je["cxr_path"] = "images/" + pid + ".png";
            je["ecg_path"] = "waveforms/" + pid + ".f32";
            ++summary.expected_samples;
        } else {
            je["reason"] = reason;
        }
        jepisodes.push_back(je);
        jp["episodes"] = jepisodes;
        jpatients.push_back(jp);
    }

    expected["patients"] = jpatients;
    expected["expected_samples"] = summary.expected_samples;
    std::ofstream out(out_dir / "expected.json");
    out << expected.dump(1) << '\n';
    return summary;
}

}  // namespace t2dm
