#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "t2dm/ingest.hpp"
#include "t2dm/timeutil.hpp"

namespace t2dm {

inline constexpr int kEhrFeatureCount = 11;

// Column order follows the feature table: age, sex, height, weight,
// diastolic BP, heart rate, respiratory rate, systolic BP, temperature,
// urine output, family history.
enum EhrFeature : int {
    kAge = 0,
    kSex = 1,
    kHeight = 2,
    kWeight = 3,
    kDiastolicBp = 4,
    kHeartRate = 5,
    kRespRate = 6,
    kSystolicBp = 7,
    kTemperature = 8,
    kUrineOutput = 9,
    kFamilyHistory = 10,
};

enum class BinAggregator { kMean, kSum };
enum class ImputeStrategy { kZero, kMean, kPrevious, kNext };

ImputeStrategy impute_from_string(const std::string& s);
std::string impute_to_string(ImputeStrategy s);

struct ClinicalEvent {
    std::string stay_id;
    EpochSeconds chart_time = 0;
    std::string variable_label;
    double value = 0;
    std::string unit;
};

struct FeatureSpec {
    int index = 0;
    std::string name;
    bool is_static = false;
    // Lower-cased accepted event labels, each with a conversion to the
    // canonical unit.
    std::map<std::string, std::function<double(double)>> labels;
    double lo = 0, hi = 0;  // valid range in canonical units, inclusive
    BinAggregator aggregator = BinAggregator::kMean;
};

// The 11 specs with default label map, conversions and valid ranges.
// `overrides` (flat key/value file, keys documented in the repo README) can
// replace per-feature lo/hi.
std::vector<FeatureSpec> default_feature_specs();
std::vector<FeatureSpec> feature_specs_with_overrides(const std::filesystem::path& config_file);

// Feature index owning an event label, or nullopt (event discarded).
std::optional<int> map_event(const std::string& variable_label,
                             const std::vector<FeatureSpec>& specs);

struct CleaningReport {
    long mapped = 0;
    long unmapped_label = 0;
    long non_numeric = 0;
    long out_of_range = 0;
    long out_of_window = 0;
    void merge(const CleaningReport& o) {
        mapped += o.mapped;
        unmapped_label += o.unmapped_label;
        non_numeric += o.non_numeric;
        out_of_range += o.out_of_range;
        out_of_window += o.out_of_window;
    }
};

// Unit conversion + range check. Returns nullopt for out-of-range values.
std::optional<double> clean_event(const ClinicalEvent& ev, const FeatureSpec& spec,
                                  CleaningReport* report = nullptr);

struct EhrMatrix {
    int rows = 0;
    // Row-major rows x 11.
    std::vector<float> values;
    // 1 iff the feature had at least one observed value, or is static.
    std::array<uint8_t, kEhrFeatureCount> presence{};

    float at(int r, int c) const { return values[static_cast<size_t>(r) * kEhrFeatureCount + c]; }
    float& at(int r, int c) { return values[static_cast<size_t>(r) * kEhrFeatureCount + c]; }
};

struct EhrAssemblyOptions {
    int rate_min = 30;
    int duration_h = 48;
    ImputeStrategy impute = ImputeStrategy::kZero;
};

// A (feature index, cleaned value, chart time) triple ready for binning.
struct CleanedEvent {
    int feature = 0;
    EpochSeconds chart_time = 0;
    double value = 0;
};

// Bins events into the (duration*60/rate) x 11 matrix. Returns nullopt when
// the episode has zero in-window events across all time-series features
// (such stays are discarded upstream).
std::optional<EhrMatrix> assemble_ehr_matrix(const std::vector<CleanedEvent>& events,
                                             const Episode& episode,
                                             const std::vector<FeatureSpec>& specs,
                                             const EhrAssemblyOptions& opt = {},
                                             CleaningReport* report = nullptr);

// Streams chartevents.csv + outputevents.csv and groups cleaned in-window
// events by stay_id (only stays present in `episodes` are kept).
std::map<std::string, std::vector<CleanedEvent>> load_events_for_episodes(
    const std::filesystem::path& raw_dir, const std::vector<Episode>& episodes,
    const std::vector<FeatureSpec>& specs, CleaningReport* report = nullptr);

}  // namespace t2dm
