#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t2dm/cxr.hpp"
#include "t2dm/ecg.hpp"
#include "t2dm/ehr.hpp"
#include "t2dm/ingest.hpp"

namespace t2dm {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
std::string split_name(Split s);
Split split_from_string(const std::string& s);

struct Sample {
    std::string id;  // <patient_id>_<admission_id>
    std::string patient_id, admission_id, stay_id;
    Split split = Split::kTrain;
    int y = 0;
    EhrMatrix ehr;
    // mask over [CLS] + 11 feature columns; element 0 always 1.
    std::array<uint8_t, kEhrFeatureCount + 1> ehr_mask{};
    bool has_ecg = false;
    EcgMatrix ecg;  // empty when the variant omits ECG
    // mask over [CLS] + 12 leads; element 0 always 1.
    std::array<uint8_t, kEcgLeads + 1> ecg_mask{};
    std::filesystem::path image_png;  // stage-1 raster inside the dataset dir
};

struct StandardizationStats {
    std::array<double, kEhrFeatureCount> ehr_mu{}, ehr_sigma{};
    std::array<double, kEcgLeads> ecg_mu{}, ecg_sigma{};
    bool sample_estimator = false;  // population (divide by N) by default
};

struct Dataset {
    std::string variant;  // "ecg" | "no-ecg"
    uint64_t seed = 0;
    bool standardized = false;
    StandardizationStats stats;
    EhrAssemblyOptions ehr_opt;
    CxrOptions cxr_opt;
    std::filesystem::path root;  // set when loaded/persisted
    std::vector<Sample> samples;

    std::vector<const Sample*> split(Split s) const;
};

// Seeded uniform shuffle then contiguous cut: floor(r_train*N) to train,
// floor(r_val*N) to val, remainder to test. Throws on fewer than 3 episodes.
std::vector<Split> partition(size_t n, double r_train, double r_val, double r_test,
                             uint64_t seed);
// Same cut but over patient groups (leakage-hygiene opt-in).
std::vector<Split> partition_by_patient(const std::vector<std::string>& patient_ids,
                                        double r_train, double r_val, double r_test,
                                        uint64_t seed);

// Per-column mu/sigma over all rows of all train matrices (post-imputation);
// sigma == 0 is replaced by 1.
StandardizationStats fit_standardizer(const std::vector<Sample>& samples,
                                      bool sample_estimator = false);
// In-place (E - mu)/sigma on every sample; guarded by Dataset::standardized.
void apply_standardizer(Dataset& ds, const StandardizationStats& stats);

struct BuildOptions {
    std::filesystem::path raw_dir;
    std::filesystem::path out_dir;
    bool include_ecg = true;  // variant: true -> D_{E+C+G}, false -> D_{E+C}
    EhrAssemblyOptions ehr;
    CxrOptions cxr;
    IngestOptions ingest;
    std::optional<std::filesystem::path> features_config;
    double r_train = 0.7, r_val = 0.1, r_test = 0.2;
    uint64_t seed = 0;
    bool split_by_patient = false;
    int filter_order = 5;  // prototype order for the ECG band-pass
    double filter_lo_hz = 0.5, filter_hi_hz = 150.0;
    double ecg_fs_hz = 500.0;
    bool filter_forward_backward = false;
};

struct BuildReport {
    long episodes_extracted = 0;
    long dropped_no_events = 0;
    long dropped_no_cxr = 0;
    long dropped_no_ecg = 0;
    long dropped_bad_image = 0;
    long final_samples = 0;
    long n_train = 0, n_val = 0, n_test = 0;
    CleaningReport cleaning;
    std::vector<RowIssue> issues;
};

// Full pipeline: ingest -> EHR matrices -> CXR pairing -> ECG pipeline ->
// partition -> standardize -> persist to opt.out_dir.
Dataset build_dataset(const BuildOptions& opt, BuildReport* report = nullptr);

// Round-trip persistence: manifest.json + tensors.bin + images/.
void persist_dataset(const Dataset& ds, const std::filesystem::path& out_dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace t2dm
