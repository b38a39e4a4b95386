#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t2dm/ingest.hpp"
#include "t2dm/timeutil.hpp"

namespace t2dm {

inline constexpr int kEcgLeads = 12;
inline constexpr int kEcgSamples = 5000;  // 10 s at 500 Hz
inline constexpr int kEcgReducedRows = 100;

struct EcgRecord {
    std::string patient_id;
    EpochSeconds record_time = 0;
    std::filesystem::path path;
    std::array<uint8_t, kEcgLeads> missing{};  // 1 = lead missing
    // Row-major samples x 12; loaded lazily, may be empty until read.
    std::vector<float> samples;

    bool has_missing_lead() const {
        for (auto f : missing)
            if (f) return true;
        return false;
    }
};

struct Biquad {
    // H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct FilterCoeffs {
    std::vector<Biquad> sections;
    std::vector<std::complex<double>> poles;  // digital, design metadata
    int prototype_order = 0;
    double lo_hz = 0, hi_hz = 0, fs_hz = 0;

    // |H(e^{j 2 pi f / fs})| evaluated from the section cascade.
    std::complex<double> response(double f_hz) const;
    double magnitude(double f_hz) const { return std::abs(response(f_hz)); }
    // Max pole magnitude; < 1 for a stable design.
    double max_pole_magnitude() const;
};

// Band-pass design: analog Butterworth prototype of the given order,
// low-pass -> band-pass transform, bilinear transform with frequency
// pre-warping, conjugate pole pairs grouped into biquads.
FilterCoeffs design_butterworth(int order, double lo_hz, double hi_hz, double fs_hz);

struct EcgFilterOptions {
    bool forward_backward = false;  // default is a single causal pass
};

// Filters each lead independently, zero initial conditions. Input/output are
// row-major rows x 12. Throws DataError on non-finite output.
std::vector<float> apply_bandpass(const std::vector<float>& samples, int rows,
                                  const FilterCoeffs& coeffs, const EcgFilterOptions& opt = {});

struct EcgMatrix {
    // Row-major 100 x 12; row r = mean of input rows [50r, 50r+50).
    std::vector<float> values;
    float at(int r, int c) const { return values[static_cast<size_t>(r) * kEcgLeads + c]; }
};

EcgMatrix reduce_ecg(const std::vector<float>& filtered, int rows);

// Earliest record with record_time in [first admit, last discharge]
// (inclusive); records flagged with any missing lead are skipped. Ties broken
// by lexicographic path.
std::optional<EcgRecord> select_ecg(const std::vector<Episode>& patient_episodes,
                                    const std::vector<EcgRecord>& records,
                                    const std::vector<AdmissionRow>& patient_admissions);

// ecg_records.csv: patient_id, record_time, path, missing_flags
// (missing_flags = 12-char bitstring, '1' marks a missing lead). Paths
// resolve relative to waveform_root.
std::vector<EcgRecord> load_ecg_metadata(const std::filesystem::path& metadata_csv,
                                         const std::filesystem::path& waveform_root,
                                         std::vector<RowIssue>* issues = nullptr);

// Raw waveform file: little-endian float32, row-major 5000 x 12.
std::vector<float> read_waveform_f32(const std::filesystem::path& file, int expected_rows,
                                     int expected_cols);
void write_waveform_f32(const std::filesystem::path& file, const std::vector<float>& samples);

}  // namespace t2dm
