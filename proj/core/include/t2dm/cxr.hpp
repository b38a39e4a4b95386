#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t2dm/ingest.hpp"
#include "t2dm/timeutil.hpp"

namespace t2dm {

struct CxrMeta {
    std::string patient_id;
    EpochSeconds study_time = 0;
    std::string view_position;  // PA, AP, LATERAL, ...
    std::filesystem::path path;
};

struct CxrImage {
    int side = 0;  // square after the model-input transform
    // Channel-major 3 x side x side, values in [0,1] (normalization with the
    // configured mean/std happens at model input, not here).
    std::vector<float> pixels;
    std::filesystem::path source;
    std::vector<std::string> transform_log;

    float at(int c, int y, int x) const {
        return pixels[(static_cast<size_t>(c) * side + y) * side + x];
    }
};

// Per-channel (x - mean) / std; the final model-input transform.
std::vector<float> normalize_cxr(const CxrImage& img, const double mean[3], const double stddev[3]);

struct CxrOptions {
    int target_short_side = 384;  // stage-1 aspect-preserving resize
    int model_side = 224;         // stage-2 square model input
    double norm_mean[3] = {0.5, 0.5, 0.5};
    double norm_std[3] = {0.5, 0.5, 0.5};
    int window_days = 30;
};

// Earliest PA image with study_time in
// [first admit - window, last discharge + window], inclusive; ties on
// study_time broken by lexicographic path. nullopt -> patient excluded.
std::optional<CxrMeta> select_cxr(const std::vector<Episode>& patient_episodes,
                                  const std::vector<CxrMeta>& metas,
                                  const std::vector<AdmissionRow>& patient_admissions,
                                  const CxrOptions& opt = {});

// Stage 1: decode + resize so the shorter side equals target_short_side
// (aspect preserved), grayscale replicated to 3 channels.
// Stage 2: resize shorter side to model_side, center-crop to square, scale to
// [0,1]. Throws DataError on undecodable files.
CxrImage preprocess_cxr(const std::filesystem::path& image_file, const CxrOptions& opt = {});

// Stage 1 only, returned as an 8-bit BGR buffer written to out_png.
// Used when persisting datasets (transforms re-applied at load).
void preprocess_cxr_stage1(const std::filesystem::path& image_file, int target_short_side,
                           const std::filesystem::path& out_png);

// Stage 2 applied to an already stage-1-processed raster.
CxrImage load_model_input(const std::filesystem::path& stage1_png, const CxrOptions& opt = {});

// Reads cxr_metadata.csv (patient_id, study_time, view_position, path); paths
// are resolved relative to image_root.
std::vector<CxrMeta> load_cxr_metadata(const std::filesystem::path& metadata_csv,
                                       const std::filesystem::path& image_root,
                                       std::vector<RowIssue>* issues = nullptr);

}  // namespace t2dm
