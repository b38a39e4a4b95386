#include "t2dm/ingest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "t2dm/config.hpp"
#include "t2dm/csv.hpp"
#include "t2dm/errors.hpp"

namespace t2dm {

namespace {

std::optional<EpochSeconds> parse_time_field(const std::string& s) {
    return parse_iso8601(trim(s));
}

std::optional<double> parse_number(const std::string& s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    try {
        size_t used = 0;
        double v = std::stod(t, &used);
        if (used != t.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace

RawCohort load_raw_cohort(const std::filesystem::path& raw_dir) {
    RawCohort c;

    {
        csv::Reader r(raw_dir / "patients.csv");
        r.require_columns({"patient_id", "sex", "anchor_age"});
        int ci = r.column("patient_id"), cs = r.column("sex"), ca = r.column("anchor_age");
        csv::Row row;
        while (r.next(row)) {
            PatientRow p;
            p.patient_id = trim(row.fields[ci]);
            auto sex = parse_number(row.fields[cs]);
            auto age = parse_number(row.fields[ca]);
            if (p.patient_id.empty() || !sex || !age) {
                c.issues.push_back({"patients.csv", row.line, "malformed patient row"});
                continue;
            }
            p.sex = static_cast<int>(*sex);
            p.anchor_age = *age;
            c.patients.push_back(std::move(p));
        }
    }

    std::unordered_set<std::string> patient_ids;
    for (const auto& p : c.patients) patient_ids.insert(p.patient_id);

    {
        csv::Reader r(raw_dir / "admissions.csv");
        r.require_columns({"patient_id", "admission_id", "admit_time", "discharge_time"});
        int cp = r.column("patient_id"), ca = r.column("admission_id");
        int ct = r.column("admit_time"), cd = r.column("discharge_time");
        csv::Row row;
        while (r.next(row)) {
            AdmissionRow a;
            a.patient_id = trim(row.fields[cp]);
            a.admission_id = trim(row.fields[ca]);
            auto t0 = parse_time_field(row.fields[ct]);
            auto t1 = parse_time_field(row.fields[cd]);
            if (!t0 || !t1) {
                c.issues.push_back({"admissions.csv", row.line, "unparseable timestamp"});
                continue;
            }
            if (!patient_ids.count(a.patient_id)) {
                c.issues.push_back(
                    {"admissions.csv", row.line, "admission references unknown patient " + a.patient_id});
                continue;
            }
            a.admit_time = *t0;
            a.discharge_time = *t1;
            c.admissions.push_back(std::move(a));
        }
    }

    std::unordered_set<std::string> admission_ids;
    for (const auto& a : c.admissions) admission_ids.insert(a.admission_id);

    {
        csv::Reader r(raw_dir / "icustays.csv");
        r.require_columns(
            {"patient_id", "admission_id", "stay_id", "in_time", "out_time", "care_unit"});
        int cp = r.column("patient_id"), ca = r.column("admission_id"), cs = r.column("stay_id");
        int ci = r.column("in_time"), co = r.column("out_time"), cu = r.column("care_unit");
        csv::Row row;
        while (r.next(row)) {
            IcuStayRow s;
            s.patient_id = trim(row.fields[cp]);
            s.admission_id = trim(row.fields[ca]);
            s.stay_id = trim(row.fields[cs]);
            s.care_unit = trim(row.fields[cu]);
            auto t0 = parse_time_field(row.fields[ci]);
            auto t1 = parse_time_field(row.fields[co]);
            if (!t0 || !t1) {
                c.issues.push_back({"icustays.csv", row.line, "unparseable timestamp"});
                continue;
            }
            if (*t0 >= *t1) {
                c.issues.push_back({"icustays.csv", row.line, "in_time not before out_time"});
                continue;
            }
            if (!admission_ids.count(s.admission_id)) {
                c.issues.push_back(
                    {"icustays.csv", row.line, "stay references unknown admission " + s.admission_id});
                continue;
            }
            s.in_time = *t0;
            s.out_time = *t1;
            c.icu_stays.push_back(std::move(s));
        }
    }

    {
        csv::Reader r(raw_dir / "diagnoses_icd.csv");
        r.require_columns({"patient_id", "admission_id", "icd_version", "icd_code"});
        int cp = r.column("patient_id"), ca = r.column("admission_id");
        int cv = r.column("icd_version"), cc = r.column("icd_code");
        csv::Row row;
        while (r.next(row)) {
            DiagnosisRow d;
            d.patient_id = trim(row.fields[cp]);
            d.admission_id = trim(row.fields[ca]);
            d.icd_code = trim(row.fields[cc]);
            auto v = parse_number(row.fields[cv]);
            if (!v || (*v != 9 && *v != 10)) {
                c.issues.push_back({"diagnoses_icd.csv", row.line, "unknown icd_version"});
                continue;
            }
            if (d.icd_code.empty()) {
                c.issues.push_back({"diagnoses_icd.csv", row.line, "empty icd_code"});
                continue;
            }
            if (!patient_ids.count(d.patient_id)) {
                c.issues.push_back(
                    {"diagnoses_icd.csv", row.line, "diagnosis references unknown patient"});
                continue;
            }
            d.icd_version = static_cast<int>(*v);
            c.diagnoses.push_back(std::move(d));
        }
    }

    return c;
}

namespace {

std::string normalize_code(const std::string& code) {
    std::string out;
    for (char ch : code)
        if (ch != '.') out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

bool icd_matches_t2dm(int version, const std::string& raw) {
    std::string code = normalize_code(raw);
    if (version == 9) {
        // 250x0 / 250x2: x is a numeric placeholder.
        return code.size() == 5 && code.compare(0, 3, "250") == 0 && is_digit(code[3]) &&
               (code[4] == '0' || code[4] == '2');
    }
    if (version == 10) return code.compare(0, 3, "E11") == 0;
    return false;
}

bool icd_matches_family_history(int version, const std::string& raw) {
    std::string code = normalize_code(raw);
    if (version == 9) return code.compare(0, 4, "V180") == 0;
    if (version == 10) return code.compare(0, 4, "Z833") == 0;
    return false;
}

LabelFlags label_and_flags(const std::vector<std::pair<int, std::string>>& codes,
                           std::vector<RowIssue>* issues) {
    LabelFlags f;
    for (const auto& [version, code] : codes) {
        if (version != 9 && version != 10) {
            if (issues)
                issues->push_back({"diagnoses", 0, "unknown icd_version " + std::to_string(version)});
            continue;
        }
        if (icd_matches_t2dm(version, code)) f.y = 1;
        if (icd_matches_family_history(version, code)) f.family_history = 1;
    }
    return f;
}

std::vector<Episode> extract_episodes(const RawCohort& cohort, const IngestOptions& opt) {
    std::unordered_set<std::string> icu_units;
    for (const auto& u : opt.icu_units) icu_units.insert(to_lower(u));
    auto is_icu = [&](const std::string& unit) { return icu_units.count(to_lower(unit)) > 0; };

    std::unordered_map<std::string, const PatientRow*> patients;
    for (const auto& p : cohort.patients) patients[p.patient_id] = &p;

    // Admission ids are only unique within a patient; key by the pair.
    std::unordered_map<std::string, std::vector<const IcuStayRow*>> by_admission;
    for (const auto& s : cohort.icu_stays)
        by_admission[s.patient_id + '\x1f' + s.admission_id].push_back(&s);

    std::vector<const AdmissionRow*> admissions;
    for (const auto& a : cohort.admissions) admissions.push_back(&a);
    std::sort(admissions.begin(), admissions.end(),
              [](const AdmissionRow* a, const AdmissionRow* b) {
                  return std::tie(a->patient_id, a->admit_time, a->admission_id) <
                         std::tie(b->patient_id, b->admit_time, b->admission_id);
              });

    std::vector<Episode> episodes;
    for (const AdmissionRow* adm : admissions) {
        auto it = by_admission.find(adm->patient_id + '\x1f' + adm->admission_id);
        if (it == by_admission.end()) continue;  // no ICU stay

        std::vector<const IcuStayRow*> records = it->second;
        std::sort(records.begin(), records.end(), [](const IcuStayRow* a, const IcuStayRow* b) {
            return std::tie(a->in_time, a->stay_id) < std::tie(b->in_time, b->stay_id);
        });

        // Transfer exclusion: an ICU record, later a non-ICU record, later an
        // ICU record again. Ward care before or after the ICU block is fine.
        bool seen_icu = false, seen_ward_after_icu = false, transfer = false;
        const IcuStayRow* first_icu = nullptr;
        for (const IcuStayRow* rec : records) {
            if (is_icu(rec->care_unit)) {
                if (seen_ward_after_icu) transfer = true;
                if (!first_icu) first_icu = rec;
                seen_icu = true;
            } else if (seen_icu) {
                seen_ward_after_icu = true;
            }
        }
        if (!seen_icu || transfer) continue;

        auto pit = patients.find(adm->patient_id);
        if (pit == patients.end()) continue;

        Episode ep;
        ep.patient_id = adm->patient_id;
        ep.admission_id = adm->admission_id;
        ep.stay_id = first_icu->stay_id;
        ep.icu_in_time = first_icu->in_time;
        ep.icu_out_time = first_icu->out_time;
        ep.admit_time = adm->admit_time;
        ep.age = pit->second->anchor_age;
        ep.sex = pit->second->sex;
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

std::vector<Episode> labeled_episodes(const RawCohort& cohort, const IngestOptions& opt) {
    std::vector<Episode> episodes = extract_episodes(cohort, opt);

    std::map<std::string, std::vector<std::pair<int, std::string>>> by_patient, by_admission;
    for (const auto& d : cohort.diagnoses) {
        by_patient[d.patient_id].emplace_back(d.icd_version, d.icd_code);
        by_admission[d.patient_id + '\x1f' + d.admission_id].emplace_back(d.icd_version,
                                                                          d.icd_code);
    }

    for (auto& ep : episodes) {
        const auto& codes = opt.patient_level_labels
                                ? by_patient[ep.patient_id]
                                : by_admission[ep.patient_id + '\x1f' + ep.admission_id];
        LabelFlags f = label_and_flags(codes);
        ep.y = f.y;
        ep.family_history = f.family_history;
    }
    return episodes;
}

}  // namespace t2dm
