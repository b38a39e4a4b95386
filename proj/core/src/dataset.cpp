#include "t2dm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "t2dm/errors.hpp"

namespace t2dm {

using nlohmann::json;

std::string split_name(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        case Split::kTest: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "val") return Split::kVal;
    if (s == "test") return Split::kTest;
    throw DataError("unknown split name: " + s);
}

std::vector<const Sample*> Dataset::split(Split s) const {
    std::vector<const Sample*> out;
    for (const auto& smp : samples)
        if (smp.split == s) out.push_back(&smp);
    return out;
}

std::vector<Split> partition(size_t n, double r_train, double r_val, double r_test,
                             uint64_t seed) {
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");
    if (n < 3) throw DataError("need at least 3 episodes to partition");
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    size_t n_train = static_cast<size_t>(std::floor(r_train * n));
    size_t n_val = static_cast<size_t>(std::floor(r_val * n));

    std::vector<Split> out(n, Split::kTest);
    for (size_t i = 0; i < n_train; ++i) out[idx[i]] = Split::kTrain;
    for (size_t i = n_train; i < n_train + n_val; ++i) out[idx[i]] = Split::kVal;
    return out;
}

std::vector<Split> partition_by_patient(const std::vector<std::string>& patient_ids,
                                        double r_train, double r_val, double r_test,
                                        uint64_t seed) {
    std::vector<std::string> unique(patient_ids);
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<Split> per_patient = partition(unique.size(), r_train, r_val, r_test, seed);
    std::map<std::string, Split> lookup;
    for (size_t i = 0; i < unique.size(); ++i) lookup[unique[i]] = per_patient[i];
    std::vector<Split> out;
    out.reserve(patient_ids.size());
    for (const auto& pid : patient_ids) out.push_back(lookup.at(pid));
    return out;
}

StandardizationStats fit_standardizer(const std::vector<Sample>& samples, bool sample_estimator) {
    StandardizationStats st;
    st.sample_estimator = sample_estimator;

    std::array<double, kEhrFeatureCount> esum{}, esum2{};
    std::array<double, kEcgLeads> gsum{}, gsum2{};
    long erows = 0, grows = 0;
    for (const auto& s : samples) {
        if (s.split != Split::kTrain) continue;
        for (int r = 0; r < s.ehr.rows; ++r)
            for (int c = 0; c < kEhrFeatureCount; ++c) {
                double v = s.ehr.at(r, c);
                esum[c] += v;
                esum2[c] += v * v;
            }
        erows += s.ehr.rows;
        if (s.has_ecg) {
            for (int r = 0; r < kEcgReducedRows; ++r)
                for (int c = 0; c < kEcgLeads; ++c) {
                    double v = s.ecg.at(r, c);
                    gsum[c] += v;
                    gsum2[c] += v * v;
                }
            grows += kEcgReducedRows;
        }
    }
    if (erows == 0) throw DataError("fit_standardizer: empty train split");

    auto finish = [sample_estimator](double sum, double sum2, long n, double& mu, double& sigma) {
        mu = sum / n;
        double var = sum2 / n - mu * mu;
        if (sample_estimator && n > 1) var *= static_cast<double>(n) / (n - 1);
        var = std::max(var, 0.0);
        sigma = std::sqrt(var);
        if (sigma == 0.0) sigma = 1.0;  // constant column rule
    };
    for (int c = 0; c < kEhrFeatureCount; ++c)
        finish(esum[c], esum2[c], erows, st.ehr_mu[c], st.ehr_sigma[c]);
    for (int c = 0; c < kEcgLeads; ++c) {
        if (grows == 0) {
            st.ecg_mu[c] = 0;
            st.ecg_sigma[c] = 1;
        } else {
            finish(gsum[c], gsum2[c], grows, st.ecg_mu[c], st.ecg_sigma[c]);
        }
    }
    return st;
}

void apply_standardizer(Dataset& ds, const StandardizationStats& stats) {
    if (ds.standardized) throw DataError("dataset already standardized");
    for (auto& s : ds.samples) {
        for (int r = 0; r < s.ehr.rows; ++r)
            for (int c = 0; c < kEhrFeatureCount; ++c)
                s.ehr.at(r, c) = static_cast<float>((s.ehr.at(r, c) - stats.ehr_mu[c]) /
                                                    stats.ehr_sigma[c]);
        if (s.has_ecg)
            for (int r = 0; r < kEcgReducedRows; ++r)
                for (int c = 0; c < kEcgLeads; ++c)
                    s.ecg.values[static_cast<size_t>(r) * kEcgLeads + c] = static_cast<float>(
                        (s.ecg.at(r, c) - stats.ecg_mu[c]) / stats.ecg_sigma[c]);
    }
    ds.stats = stats;
    ds.standardized = true;
}

Dataset build_dataset(const BuildOptions& opt, BuildReport* report) {
    BuildReport local;
    BuildReport& rep = report ? *report : local;

    RawCohort cohort = load_raw_cohort(opt.raw_dir);
    rep.issues = cohort.issues;
    std::vector<Episode> episodes;
    {
        IngestOptions ing = opt.ingest;
        episodes = labeled_episodes(cohort, ing);
    }
    rep.episodes_extracted = static_cast<long>(episodes.size());

    auto specs = opt.features_config ? feature_specs_with_overrides(*opt.features_config)
                                     : default_feature_specs();
    auto events_by_stay = load_events_for_episodes(opt.raw_dir, episodes, specs, &rep.cleaning);

    // EHR matrices; stays with zero in-window events are discarded.
    std::vector<Episode> kept;
    std::vector<EhrMatrix> matrices;
    for (const auto& ep : episodes) {
        auto it = events_by_stay.find(ep.stay_id);
        std::optional<EhrMatrix> m;
        if (it != events_by_stay.end())
            m = assemble_ehr_matrix(it->second, ep, specs, opt.ehr, &rep.cleaning);
        if (!m) {
            ++rep.dropped_no_events;
            continue;
        }
        kept.push_back(ep);
        matrices.push_back(std::move(*m));
    }

    // Group admissions and episode indices per patient.
    std::map<std::string, std::vector<AdmissionRow>> adm_by_patient;
    for (const auto& a : cohort.admissions) adm_by_patient[a.patient_id].push_back(a);
    std::map<std::string, std::vector<size_t>> eps_by_patient;
    for (size_t i = 0; i < kept.size(); ++i) eps_by_patient[kept[i].patient_id].push_back(i);

    auto cxr_metas = load_cxr_metadata(opt.raw_dir / "cxr_metadata.csv", opt.raw_dir, &rep.issues);
    std::map<std::string, std::vector<CxrMeta>> cxr_by_patient;
    for (auto& m : cxr_metas) cxr_by_patient[m.patient_id].push_back(m);

    auto ecg_metas =
        load_ecg_metadata(opt.raw_dir / "ecg_records.csv", opt.raw_dir, &rep.issues);
    std::map<std::string, std::vector<EcgRecord>> ecg_by_patient;
    for (auto& r : ecg_metas) ecg_by_patient[r.patient_id].push_back(r);

    FilterCoeffs coeffs =
        design_butterworth(opt.filter_order, opt.filter_lo_hz, opt.filter_hi_hz, opt.ecg_fs_hz);

    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir / "images", ec);

    // Per-patient modality selection; the ECG-availability rule applies to
    // both variants so their sample ids match exactly.
    std::vector<Sample> samples;
    std::map<std::string, EcgMatrix> ecg_cache;        // per patient
    std::map<std::string, std::string> image_cache;    // per patient, dataset-relative

    for (auto& [pid, idxs] : eps_by_patient) {
        std::vector<Episode> peps;
        for (size_t i : idxs) peps.push_back(kept[i]);
        const auto& padms = adm_by_patient[pid];

        auto cxr = select_cxr(peps, cxr_by_patient[pid], padms, opt.cxr);
        if (!cxr) {
            rep.dropped_no_cxr += static_cast<long>(idxs.size());
            continue;
        }
        auto ecg = select_ecg(peps, ecg_by_patient[pid], padms);
        if (!ecg) {
            rep.dropped_no_ecg += static_cast<long>(idxs.size());
            continue;
        }

        std::string image_rel = "images/" + pid + ".png";
        try {
            preprocess_cxr_stage1(cxr->path, opt.cxr.target_short_side,
                                  opt.out_dir / image_rel);
        } catch (const DataError& e) {
            rep.dropped_bad_image += static_cast<long>(idxs.size());
            rep.issues.push_back({"cxr", 0, e.what()});
            continue;
        }

        EcgMatrix reduced;
        if (opt.include_ecg) {
            auto raw = read_waveform_f32(ecg->path, kEcgSamples, kEcgLeads);
            auto filtered = apply_bandpass(raw, kEcgSamples, coeffs,
                                           {.forward_backward = opt.filter_forward_backward});
            reduced = reduce_ecg(filtered, kEcgSamples);
        }

        for (size_t i : idxs) {
            const Episode& ep = kept[i];
            Sample s;
            s.id = ep.patient_id + "_" + ep.admission_id;
            s.patient_id = ep.patient_id;
            s.admission_id = ep.admission_id;
            s.stay_id = ep.stay_id;
            s.y = ep.y;
            s.ehr = matrices[i];
            s.ehr_mask[0] = 1;  // prepended classification-token slot
            for (int c = 0; c < kEhrFeatureCount; ++c) s.ehr_mask[c + 1] = s.ehr.presence[c];
            s.has_ecg = opt.include_ecg;
            if (opt.include_ecg) {
                s.ecg = reduced;
                s.ecg_mask.fill(1);
            } else {
                s.ecg_mask[0] = 1;
            }
            s.image_png = image_rel;
            samples.push_back(std::move(s));
        }
    }

    // Deterministic sample order before partitioning.
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });

    std::vector<Split> splits;
    if (opt.split_by_patient) {
        std::vector<std::string> pids;
        for (const auto& s : samples) pids.push_back(s.patient_id);
        splits = partition_by_patient(pids, opt.r_train, opt.r_val, opt.r_test, opt.seed);
    } else {
        splits = partition(samples.size(), opt.r_train, opt.r_val, opt.r_test, opt.seed);
    }
    for (size_t i = 0; i < samples.size(); ++i) samples[i].split = splits[i];

    Dataset ds;
    ds.variant = opt.include_ecg ? "ecg" : "no-ecg";
    ds.seed = opt.seed;
    ds.ehr_opt = opt.ehr;
    ds.cxr_opt = opt.cxr;
    ds.root = opt.out_dir;
    ds.samples = std::move(samples);

    apply_standardizer(ds, fit_standardizer(ds.samples));

    rep.final_samples = static_cast<long>(ds.samples.size());
    for (const auto& s : ds.samples) {
        if (s.split == Split::kTrain) ++rep.n_train;
        else if (s.split == Split::kVal) ++rep.n_val;
        else ++rep.n_test;
    }

    persist_dataset(ds, opt.out_dir);
    return ds;
}

namespace {

json stats_to_json(const StandardizationStats& st) {
    json j;
    j["ehr_mu"] = st.ehr_mu;
    j["ehr_sigma"] = st.ehr_sigma;
    j["ecg_mu"] = st.ecg_mu;
    j["ecg_sigma"] = st.ecg_sigma;
    j["sample_estimator"] = st.sample_estimator;
    return j;
}

StandardizationStats stats_from_json(const json& j) {
    StandardizationStats st;
    auto em = j.at("ehr_mu").get<std::vector<double>>();
    auto es = j.at("ehr_sigma").get<std::vector<double>>();
    auto gm = j.at("ecg_mu").get<std::vector<double>>();
    auto gs = j.at("ecg_sigma").get<std::vector<double>>();
    std::copy(em.begin(), em.end(), st.ehr_mu.begin());
    std::copy(es.begin(), es.end(), st.ehr_sigma.begin());
    std::copy(gm.begin(), gm.end(), st.ecg_mu.begin());
    std::copy(gs.begin(), gs.end(), st.ecg_sigma.begin());
    st.sample_estimator = j.value("sample_estimator", false);
    return st;
}

template <class It>
std::string mask_to_string(It begin, It end) {
    std::string s;
    for (It it = begin; it != end; ++it) s += (*it ? '1' : '0');
    return s;
}

}  // namespace

void persist_dataset(const Dataset& ds, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream blob(out_dir / "tensors.bin", std::ios::binary);
    if (!blob) throw DataError("cannot write tensors.bin");

    json manifest;
    manifest["version"] = 1;
    manifest["variant"] = ds.variant;
    manifest["seed"] = ds.seed;
    manifest["standardized"] = ds.standardized;
    manifest["stats"] = stats_to_json(ds.stats);
    manifest["ehr"] = {{"rate_min", ds.ehr_opt.rate_min},
                       {"duration_h", ds.ehr_opt.duration_h},
                       {"impute", impute_to_string(ds.ehr_opt.impute)}};
    manifest["cxr"] = {{"target_short_side", ds.cxr_opt.target_short_side},
                       {"model_side", ds.cxr_opt.model_side},
                       {"norm_mean", {ds.cxr_opt.norm_mean[0], ds.cxr_opt.norm_mean[1],
                                      ds.cxr_opt.norm_mean[2]}},
                       {"norm_std", {ds.cxr_opt.norm_std[0], ds.cxr_opt.norm_std[1],
                                     ds.cxr_opt.norm_std[2]}}};

    json entries = json::array();
    uint64_t offset = 0;
    for (const auto& s : ds.samples) {
        json e;
        e["id"] = s.id;
        e["patient_id"] = s.patient_id;
        e["admission_id"] = s.admission_id;
        e["stay_id"] = s.stay_id;
        e["split"] = split_name(s.split);
        e["y"] = s.y;
        e["ehr_rows"] = s.ehr.rows;
        e["ehr_offset"] = offset;
        blob.write(reinterpret_cast<const char*>(s.ehr.values.data()),
                   static_cast<std::streamsize>(s.ehr.values.size() * sizeof(float)));
        offset += s.ehr.values.size() * sizeof(float);
        e["has_ecg"] = s.has_ecg;
        if (s.has_ecg) {
            e["ecg_offset"] = offset;
            blob.write(reinterpret_cast<const char*>(s.ecg.values.data()),
                       static_cast<std::streamsize>(s.ecg.values.size() * sizeof(float)));
            offset += s.ecg.values.size() * sizeof(float);
        }
        e["ehr_mask"] = mask_to_string(s.ehr_mask.begin(), s.ehr_mask.end());
        e["ecg_mask"] = mask_to_string(s.ecg_mask.begin(), s.ecg_mask.end());
        e["image"] = s.image_png.generic_string();
        entries.push_back(std::move(e));
    }
    manifest["samples"] = std::move(entries);
    manifest["tensor_bytes"] = offset;

    std::ofstream mf(out_dir / "manifest.json");
    if (!mf) throw DataError("cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw ConfigError("cannot open dataset manifest in " + dir.string());
    json manifest = json::parse(mf);
    if (manifest.value("version", 0) != 1)
        throw DataError("dataset manifest version mismatch in " + dir.string());

    Dataset ds;
    ds.variant = manifest.at("variant");
    ds.seed = manifest.at("seed");
    ds.standardized = manifest.at("standardized");
    ds.stats = stats_from_json(manifest.at("stats"));
    ds.ehr_opt.rate_min = manifest.at("ehr").at("rate_min");
    ds.ehr_opt.duration_h = manifest.at("ehr").at("duration_h");
    ds.ehr_opt.impute = impute_from_string(manifest.at("ehr").at("impute"));
    ds.cxr_opt.target_short_side = manifest.at("cxr").at("target_short_side");
    ds.cxr_opt.model_side = manifest.at("cxr").at("model_side");
    for (int i = 0; i < 3; ++i) {
        ds.cxr_opt.norm_mean[i] = manifest.at("cxr").at("norm_mean")[i];
        ds.cxr_opt.norm_std[i] = manifest.at("cxr").at("norm_std")[i];
    }
    ds.root = dir;

    std::ifstream blob(dir / "tensors.bin", std::ios::binary);
    if (!blob) throw DataError("missing tensors.bin in " + dir.string());
    blob.seekg(0, std::ios::end);
    const uint64_t blob_size = static_cast<uint64_t>(blob.tellg());
    if (blob_size != manifest.value("tensor_bytes", uint64_t(0)))
        throw DataError("tensors.bin length does not match manifest (corrupted blob?)");

    for (const auto& e : manifest.at("samples")) {
        Sample s;
        s.id = e.at("id");
        s.patient_id = e.at("patient_id");
        s.admission_id = e.at("admission_id");
        s.stay_id = e.at("stay_id");
        s.split = split_from_string(e.at("split"));
        s.y = e.at("y");
        s.ehr.rows = e.at("ehr_rows");
        s.ehr.values.resize(static_cast<size_t>(s.ehr.rows) * kEhrFeatureCount);
        uint64_t off = e.at("ehr_offset");
        uint64_t bytes = s.ehr.values.size() * sizeof(float);
        if (off + bytes > blob_size) throw DataError("tensor blob truncated (ehr)");
        blob.seekg(static_cast<std::streamoff>(off));
        blob.read(reinterpret_cast<char*>(s.ehr.values.data()),
                  static_cast<std::streamsize>(bytes));
        s.has_ecg = e.at("has_ecg");
        if (s.has_ecg) {
            s.ecg.values.resize(static_cast<size_t>(kEcgReducedRows) * kEcgLeads);
            uint64_t goff = e.at("ecg_offset");
            uint64_t gbytes = s.ecg.values.size() * sizeof(float);
            if (goff + gbytes > blob_size) throw DataError("tensor blob truncated (ecg)");
            blob.seekg(static_cast<std::streamoff>(goff));
            blob.read(reinterpret_cast<char*>(s.ecg.values.data()),
                      static_cast<std::streamsize>(gbytes));
        }
        std::string em = e.at("ehr_mask"), gm = e.at("ecg_mask");
        if (em.size() != s.ehr_mask.size() || gm.size() != s.ecg_mask.size())
            throw DataError("mask length mismatch in manifest");
        for (size_t i = 0; i < em.size(); ++i) s.ehr_mask[i] = em[i] == '1';
        for (size_t i = 0; i < gm.size(); ++i) s.ecg_mask[i] = gm[i] == '1';
        s.image_png = std::filesystem::path(e.at("image").get<std::string>());
        // presence vector is recoverable from the mask tail
        for (int c = 0; c < kEhrFeatureCount; ++c) s.ehr.presence[c] = s.ehr_mask[c + 1];
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace t2dm
