#include "t2dm/ehr.hpp"

#include <cmath>

#include "t2dm/config.hpp"
#include "t2dm/csv.hpp"
#include "t2dm/errors.hpp"

namespace t2dm {

ImputeStrategy impute_from_string(const std::string& s) {
    std::string t = to_lower(trim(s));
    if (t == "zero") return ImputeStrategy::kZero;
    if (t == "mean") return ImputeStrategy::kMean;
    if (t == "previous") return ImputeStrategy::kPrevious;
    if (t == "next") return ImputeStrategy::kNext;
    throw ConfigError("unknown imputation strategy: " + s);
}

std::string impute_to_string(ImputeStrategy s) {
    switch (s) {
        case ImputeStrategy::kZero: return "zero";
        case ImputeStrategy::kMean: return "mean";
        case ImputeStrategy::kPrevious: return "previous";
        case ImputeStrategy::kNext: return "next";
    }
    return "zero";
}

namespace {

double identity(double v) { return v; }
double fahrenheit_to_celsius(double v) { return (v - 32.0) * 5.0 / 9.0; }
double lbs_to_kg(double v) { return v * 0.45359237; }
double inches_to_cm(double v) { return v * 2.54; }

FeatureSpec make_spec(int index, std::string name, bool is_static, double lo, double hi,
                      BinAggregator agg,
                      std::vector<std::pair<std::string, double (*)(double)>> labels) {
    FeatureSpec s;
    s.index = index;
    s.name = std::move(name);
    s.is_static = is_static;
    s.lo = lo;
    s.hi = hi;
    s.aggregator = agg;
    for (auto& [label, fn] : labels) s.labels[to_lower(label)] = fn;
    return s;
}

}  // namespace

std::vector<FeatureSpec> default_feature_specs() {
    std::vector<FeatureSpec> specs;
    specs.push_back(make_spec(kAge, "age", true, 0, 300, BinAggregator::kMean, {}));
    specs.push_back(make_spec(kSex, "sex", true, 1, 2, BinAggregator::kMean, {}));
    specs.push_back(make_spec(kHeight, "height", false, 50, 260, BinAggregator::kMean,
                              {{"Height", &inches_to_cm}, {"Height (cm)", &identity}}));
    specs.push_back(make_spec(kWeight, "weight", false, 20, 400, BinAggregator::kMean,
                              {{"Admission Weight (Kg)", &identity},
                               {"Admission Weight (lbs.)", &lbs_to_kg}}));
    specs.push_back(make_spec(kDiastolicBp, "diastolic_bp", false, 0, 250, BinAggregator::kMean,
                              {{"Arterial Blood Pressure diastolic", &identity},
                               {"ART BP Diastolic", &identity},
                               {"Non Invasive Blood Pressure diastolic", &identity},
                               {"Manual Blood Pressure Diastolic Left", &identity},
                               {"Manual Blood Pressure Diastolic Right", &identity}}));
    specs.push_back(make_spec(kHeartRate, "heart_rate", false, 0, 300, BinAggregator::kMean,
                              {{"Heart rate", &identity}}));
    specs.push_back(make_spec(kRespRate, "resp_rate", false, 0, 120, BinAggregator::kMean,
                              {{"Respiratory Rate", &identity},
                               {"Respiratory Rate (spontaneous)", &identity},
                               {"Respiratory Rate (Total)", &identity}}));
    specs.push_back(make_spec(kSystolicBp, "systolic_bp", false, 0, 300, BinAggregator::kMean,
                              {{"Arterial Blood Pressure systolic", &identity},
                               {"ART BP Systolic", &identity},
                               {"Non Invasive Blood Pressure systolic", &identity},
                               {"Manual Blood Pressure Systolic Left", &identity},
                               {"Manual Blood Pressure Systolic Right", &identity}}));
    specs.push_back(make_spec(kTemperature, "temperature", false, 25, 45, BinAggregator::kMean,
                              {{"Temperature Celsius", &identity},
                               {"Temperature Fahrenheit", &fahrenheit_to_celsius}}));
    specs.push_back(make_spec(kUrineOutput, "urine_output", false, 0, 5000, BinAggregator::kSum,
                              {{"R Ureteral Stent", &identity},
                               {"L Ureteral Stent", &identity},
                               {"Foley", &identity},
                               {"Void", &identity},
                               {"Condom Cath", &identity},
                               {"Suprapubic", &identity},
                               {"R Nephrostomy", &identity},
                               {"L Nephrostomy", &identity},
                               {"Straight Cath", &identity},
                               {"Ileoconduit", &identity},
                               {"GU Irrigant Volume In", &identity},
                               {"GU Irrigant/Urine Volume Out", &identity}}));
    specs.push_back(make_spec(kFamilyHistory, "family_history", true, 0, 1,
                              BinAggregator::kMean, {}));
    return specs;
}

std::vector<FeatureSpec> feature_specs_with_overrides(const std::filesystem::path& config_file) {
    auto specs = default_feature_specs();
    KvConfig cfg = KvConfig::parse_file(config_file);
    for (auto& s : specs) {
        if (cfg.has(s.name + ".lo")) s.lo = cfg.get_double(s.name + ".lo");
        if (cfg.has(s.name + ".hi")) s.hi = cfg.get_double(s.name + ".hi");
        if (cfg.has(s.name + ".agg")) {
            std::string a = to_lower(cfg.get(s.name + ".agg"));
            if (a == "mean") s.aggregator = BinAggregator::kMean;
            else if (a == "sum") s.aggregator = BinAggregator::kSum;
            else throw ConfigError("unknown aggregator for " + s.name + ": " + a);
        }
    }
    return specs;
}

std::optional<int> map_event(const std::string& variable_label,
                             const std::vector<FeatureSpec>& specs) {
    std::string key = to_lower(trim(variable_label));
    for (const auto& s : specs)
        if (s.labels.count(key)) return s.index;
    return std::nullopt;
}

std::optional<double> clean_event(const ClinicalEvent& ev, const FeatureSpec& spec,
                                  CleaningReport* report) {
    if (!std::isfinite(ev.value)) {
        if (report) ++report->non_numeric;
        return std::nullopt;
    }
    auto it = spec.labels.find(to_lower(trim(ev.variable_label)));
    if (it == spec.labels.end()) return std::nullopt;
    double v = it->second(ev.value);
    if (v < spec.lo || v > spec.hi) {
        if (report) ++report->out_of_range;
        return std::nullopt;
    }
    return v;
}

std::optional<EhrMatrix> assemble_ehr_matrix(const std::vector<CleanedEvent>& events,
                                             const Episode& episode,
                                             const std::vector<FeatureSpec>& specs,
                                             const EhrAssemblyOptions& opt,
                                             CleaningReport* report) {
    const int rows = opt.duration_h * 60 / opt.rate_min;
    const EpochSeconds window = static_cast<EpochSeconds>(opt.duration_h) * 3600;
    const EpochSeconds rate_s = static_cast<EpochSeconds>(opt.rate_min) * 60;

    // Per (bin, feature) accumulation; mean needs a count, sum does not.
    std::vector<double> acc(static_cast<size_t>(rows) * kEhrFeatureCount, 0.0);
    std::vector<int> cnt(static_cast<size_t>(rows) * kEhrFeatureCount, 0);

    bool any_event = false;
    for (const auto& ev : events) {
        EpochSeconds dt = ev.chart_time - episode.icu_in_time;
        if (dt < 0 || dt >= window) {
            if (report) ++report->out_of_window;
            continue;
        }
        int bin = static_cast<int>(dt / rate_s);
        size_t k = static_cast<size_t>(bin) * kEhrFeatureCount + ev.feature;
        acc[k] += ev.value;
        cnt[k] += 1;
        any_event = true;
    }
    if (!any_event) return std::nullopt;

    EhrMatrix m;
    m.rows = rows;
    m.values.assign(static_cast<size_t>(rows) * kEhrFeatureCount, 0.0f);

    for (const auto& spec : specs) {
        int c = spec.index;
        if (spec.is_static) {
            m.presence[c] = 1;
            double v = 0;
            if (c == kAge) v = episode.age;
            else if (c == kSex) v = episode.sex;
            else if (c == kFamilyHistory) v = episode.family_history;
            for (int r = 0; r < rows; ++r) m.at(r, c) = static_cast<float>(v);
            continue;
        }

        std::vector<double> col(rows, 0.0);
        std::vector<bool> observed(rows, false);
        bool any = false;
        for (int r = 0; r < rows; ++r) {
            size_t k = static_cast<size_t>(r) * kEhrFeatureCount + c;
            if (cnt[k] == 0) continue;
            observed[r] = true;
            any = true;
            col[r] = spec.aggregator == BinAggregator::kMean ? acc[k] / cnt[k] : acc[k];
        }
        m.presence[c] = any ? 1 : 0;

        if (any) {
            switch (opt.impute) {
                case ImputeStrategy::kZero:
                    break;  // empty bins stay 0
                case ImputeStrategy::kMean: {
                    double sum = 0;
                    int n = 0;
                    for (int r = 0; r < rows; ++r)
                        if (observed[r]) { sum += col[r]; ++n; }
                    double mean = sum / n;
                    for (int r = 0; r < rows; ++r)
                        if (!observed[r]) col[r] = mean;
                    break;
                }
                case ImputeStrategy::kPrevious: {
                    // Carry forward; bins before the first observation stay 0.
                    bool seen = false;
                    double last = 0;
                    for (int r = 0; r < rows; ++r) {
                        if (observed[r]) { last = col[r]; seen = true; }
                        else if (seen) col[r] = last;
                    }
                    break;
                }
                case ImputeStrategy::kNext: {
                    bool seen = false;
                    double nxt = 0;
                    for (int r = rows - 1; r >= 0; --r) {
                        if (observed[r]) { nxt = col[r]; seen = true; }
                        else if (seen) col[r] = nxt;
                    }
                    break;
                }
            }
        }
        for (int r = 0; r < rows; ++r) m.at(r, c) = static_cast<float>(col[r]);
    }
    return m;
}

namespace {

void load_events_file(const std::filesystem::path& file,
                      const std::map<std::string, const Episode*>& by_stay,
                      const std::vector<FeatureSpec>& specs, CleaningReport* report,
                      std::map<std::string, std::vector<CleanedEvent>>& out) {
    csv::Reader r(file);
    r.require_columns({"stay_id", "chart_time", "variable_label", "value", "unit"});
    int cs = r.column("stay_id"), ct = r.column("chart_time");
    int cl = r.column("variable_label"), cv = r.column("value");
    csv::Row row;
    while (r.next(row)) {
        std::string stay = trim(row.fields[cs]);
        auto sit = by_stay.find(stay);
        if (sit == by_stay.end()) continue;

        auto fi = map_event(row.fields[cl], specs);
        if (!fi) {
            if (report) ++report->unmapped_label;
            continue;
        }
        auto t = parse_iso8601(trim(row.fields[ct]));
        if (!t) {
            if (report) ++report->non_numeric;
            continue;
        }
        ClinicalEvent ev;
        ev.stay_id = stay;
        ev.chart_time = *t;
        ev.variable_label = row.fields[cl];
        try {
            size_t used = 0;
            ev.value = std::stod(trim(row.fields[cv]), &used);
            if (used != trim(row.fields[cv]).size()) throw std::invalid_argument("trailing");
        } catch (...) {
            if (report) ++report->non_numeric;
            continue;
        }
        auto cleaned = clean_event(ev, specs[*fi], report);
        if (!cleaned) continue;
        if (report) ++report->mapped;
        out[stay].push_back({*fi, ev.chart_time, *cleaned});
    }
}

}  // namespace

std::map<std::string, std::vector<CleanedEvent>> load_events_for_episodes(
    const std::filesystem::path& raw_dir, const std::vector<Episode>& episodes,
    const std::vector<FeatureSpec>& specs, CleaningReport* report) {
    std::map<std::string, const Episode*> by_stay;
    for (const auto& ep : episodes) by_stay[ep.stay_id] = &ep;

    std::map<std::string, std::vector<CleanedEvent>> out;
    load_events_file(raw_dir / "chartevents.csv", by_stay, specs, report, out);
    load_events_file(raw_dir / "outputevents.csv", by_stay, specs, report, out);
    return out;
}

}  // namespace t2dm
