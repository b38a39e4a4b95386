#include "t2dm/ecg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "t2dm/config.hpp"
#include "t2dm/csv.hpp"
#include "t2dm/errors.hpp"

namespace t2dm {

std::complex<double> FilterCoeffs::response(double f_hz) const {
    const double w = 2.0 * M_PI * f_hz / fs_hz;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : sections)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

double FilterCoeffs::max_pole_magnitude() const {
    double m = 0;
    for (const auto& p : poles) m = std::max(m, std::abs(p));
    return m;
}

FilterCoeffs design_butterworth(int order, double lo_hz, double hi_hz, double fs_hz) {
    if (order < 1) throw ConfigError("butterworth order must be >= 1");
    if (!(0 < lo_hz && lo_hz < hi_hz && hi_hz < fs_hz / 2))
        throw ConfigError("invalid band: need 0 < lo < hi < fs/2");

    using cd = std::complex<double>;
    const int n = order;

    // Analog low-pass prototype poles on the unit circle, left half-plane.
    std::vector<cd> proto;
    for (int k = 1; k <= n; ++k) {
        double theta = M_PI * (2.0 * k + n - 1.0) / (2.0 * n);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // Pre-warped band edges.
    const double fs2 = 2.0 * fs_hz;
    const double w1 = fs2 * std::tan(M_PI * lo_hz / fs_hz);
    const double w2 = fs2 * std::tan(M_PI * hi_hz / fs_hz);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;

    // Low-pass -> band-pass: each prototype pole yields a conjugate-free pair;
    // n zeros at s = 0. Analog gain bw^n.
    std::vector<cd> apoles;
    for (const cd& p : proto) {
        cd a = p * (bw / 2.0);
        cd d = std::sqrt(a * a - w0sq);
        apoles.push_back(a + d);
        apoles.push_back(a - d);
    }

    // Bilinear transform. Analog zeros: n at 0 -> digital z = +1; the n
    // zeros at infinity map to z = -1.
    std::vector<cd> zpoles;
    cd gain = std::pow(cd(bw, 0.0), n);
    for (int i = 0; i < n; ++i) gain *= cd(fs2, 0.0);  // numerator (fs2 - 0) per analog zero
    for (const cd& p : apoles) {
        zpoles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
        gain /= (cd(fs2, 0.0) - p);
    }
    const double k = gain.real();

    // Group poles into conjugate pairs (positive-imaginary first, sorted for
    // determinism), each section gets numerator (z-1)(z+1) = z^2 - 1.
    std::vector<cd> upper;
    for (const cd& p : zpoles)
        if (p.imag() > 1e-12) upper.push_back(p);
    std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) {
        return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a.real() < b.real();
    });
    // Real poles (band-pass from complex prototype pairs should produce none
    // for odd orders >= 3 except the order-1 prototype's real pole pair).
    std::vector<double> reals;
    for (const cd& p : zpoles)
        if (std::abs(p.imag()) <= 1e-12) reals.push_back(p.real());
    std::sort(reals.begin(), reals.end());

    FilterCoeffs out;
    out.prototype_order = order;
    out.lo_hz = lo_hz;
    out.hi_hz = hi_hz;
    out.fs_hz = fs_hz;
    out.poles = zpoles;

    for (const cd& p : upper) {
        Biquad s;
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        out.sections.push_back(s);
    }
    for (size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s;
        s.a1 = -(reals[i] + reals[i + 1]);
        s.a2 = reals[i] * reals[i + 1];
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        out.sections.push_back(s);
    }
    if (out.sections.empty()) throw ConfigError("degenerate filter design");

    // Fold the overall gain into the first section.
    out.sections.front().b0 *= k;
    out.sections.front().b1 *= k;
    out.sections.front().b2 *= k;
    return out;
}

std::vector<float> apply_bandpass(const std::vector<float>& samples, int rows,
                                  const FilterCoeffs& coeffs, const EcgFilterOptions& opt) {
    if (static_cast<size_t>(rows) * kEcgLeads != samples.size())
        throw DataError("waveform shape mismatch in apply_bandpass");

    auto one_pass = [&](std::vector<double>& lead) {
        for (const auto& s : coeffs.sections) {
            double z1 = 0, z2 = 0;  // transposed direct form II
            for (double& x : lead) {
                double y = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * y + z2;
                z2 = s.b2 * x - s.a2 * y;
                x = y;
            }
        }
    };

    std::vector<float> out(samples.size());
    std::vector<double> lead(rows);
    for (int c = 0; c < kEcgLeads; ++c) {
        for (int r = 0; r < rows; ++r) lead[r] = samples[static_cast<size_t>(r) * kEcgLeads + c];
        one_pass(lead);
        if (opt.forward_backward) {
            std::reverse(lead.begin(), lead.end());
            one_pass(lead);
            std::reverse(lead.begin(), lead.end());
        }
        for (int r = 0; r < rows; ++r) {
            if (!std::isfinite(lead[r]))
                throw DataError("non-finite filter output at lead " + std::to_string(c));
            out[static_cast<size_t>(r) * kEcgLeads + c] = static_cast<float>(lead[r]);
        }
    }
    return out;
}

EcgMatrix reduce_ecg(const std::vector<float>& filtered, int rows) {
    if (static_cast<size_t>(rows) * kEcgLeads != filtered.size() || rows % 50 != 0)
        throw DataError("reduce_ecg: row count must be a positive multiple of 50");
    const int out_rows = rows / 50;
    EcgMatrix m;
    m.values.assign(static_cast<size_t>(out_rows) * kEcgLeads, 0.0f);
    for (int r = 0; r < out_rows; ++r) {
        for (int c = 0; c < kEcgLeads; ++c) {
            double acc = 0;
            for (int i = 0; i < 50; ++i)
                acc += filtered[static_cast<size_t>(r * 50 + i) * kEcgLeads + c];
            m.values[static_cast<size_t>(r) * kEcgLeads + c] = static_cast<float>(acc / 50.0);
        }
    }
    return m;
}

std::optional<EcgRecord> select_ecg(const std::vector<Episode>& patient_episodes,
                                    const std::vector<EcgRecord>& records,
                                    const std::vector<AdmissionRow>& patient_admissions) {
    if (patient_episodes.empty() || patient_admissions.empty()) return std::nullopt;

    EpochSeconds first_admit = patient_admissions.front().admit_time;
    EpochSeconds last_discharge = patient_admissions.front().discharge_time;
    for (const auto& a : patient_admissions) {
        first_admit = std::min(first_admit, a.admit_time);
        last_discharge = std::max(last_discharge, a.discharge_time);
    }

    const EcgRecord* best = nullptr;
    for (const auto& r : records) {
        if (r.has_missing_lead()) continue;
        if (r.record_time < first_admit || r.record_time > last_discharge) continue;
        if (!best || std::tie(r.record_time, r.path) < std::tie(best->record_time, best->path))
            best = &r;
    }
    if (!best) return std::nullopt;
    return *best;
}

std::vector<EcgRecord> load_ecg_metadata(const std::filesystem::path& metadata_csv,
                                         const std::filesystem::path& waveform_root,
                                         std::vector<RowIssue>* issues) {
    csv::Reader r(metadata_csv);
    r.require_columns({"patient_id", "record_time", "path", "missing_flags"});
    int cp = r.column("patient_id"), ct = r.column("record_time");
    int cf = r.column("path"), cm = r.column("missing_flags");
    std::vector<EcgRecord> out;
    csv::Row row;
    while (r.next(row)) {
        auto t = parse_iso8601(trim(row.fields[ct]));
        std::string flags = trim(row.fields[cm]);
        if (!t || flags.size() != kEcgLeads) {
            if (issues) issues->push_back({"ecg_records.csv", row.line, "malformed record row"});
            continue;
        }
        EcgRecord rec;
        rec.patient_id = trim(row.fields[cp]);
        rec.record_time = *t;
        rec.path = waveform_root / trim(row.fields[cf]);
        for (int i = 0; i < kEcgLeads; ++i) rec.missing[i] = flags[i] == '1' ? 1 : 0;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<float> read_waveform_f32(const std::filesystem::path& file, int expected_rows,
                                     int expected_cols) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open waveform: " + file.string());
    in.seekg(0, std::ios::end);
    auto bytes = static_cast<size_t>(in.tellg());
    in.seekg(0);
    size_t expected = static_cast<size_t>(expected_rows) * expected_cols * sizeof(float);
    if (bytes != expected)
        throw DataError("waveform " + file.string() + ": expected " + std::to_string(expected) +
                        " bytes, got " + std::to_string(bytes));
    std::vector<float> out(static_cast<size_t>(expected_rows) * expected_cols);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected));
    if (!in) throw DataError("short read on waveform: " + file.string());
    return out;
}

void write_waveform_f32(const std::filesystem::path& file, const std::vector<float>& samples) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write waveform: " + file.string());
    out.write(reinterpret_cast<const char*>(samples.data()),
              static_cast<std::streamsize>(samples.size() * sizeof(float)));
}

}  // namespace t2dm
