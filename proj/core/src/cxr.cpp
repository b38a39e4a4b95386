#include "t2dm/cxr.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "t2dm/config.hpp"
#include "t2dm/csv.hpp"
#include "t2dm/errors.hpp"

namespace t2dm {

std::optional<CxrMeta> select_cxr(const std::vector<Episode>& patient_episodes,
                                  const std::vector<CxrMeta>& metas,
                                  const std::vector<AdmissionRow>& patient_admissions,
                                  const CxrOptions& opt) {
    if (patient_episodes.empty() || patient_admissions.empty()) return std::nullopt;

    EpochSeconds first_admit = patient_admissions.front().admit_time;
    EpochSeconds last_discharge = patient_admissions.front().discharge_time;
    for (const auto& a : patient_admissions) {
        first_admit = std::min(first_admit, a.admit_time);
        last_discharge = std::max(last_discharge, a.discharge_time);
    }
    const EpochSeconds lo = first_admit - static_cast<EpochSeconds>(opt.window_days) * kSecondsPerDay;
    const EpochSeconds hi = last_discharge + static_cast<EpochSeconds>(opt.window_days) * kSecondsPerDay;

    const CxrMeta* best = nullptr;
    for (const auto& m : metas) {
        if (to_lower(m.view_position) != "pa") continue;
        if (m.study_time < lo || m.study_time > hi) continue;
        if (!best || std::tie(m.study_time, m.path) < std::tie(best->study_time, best->path))
            best = &m;
    }
    if (!best) return std::nullopt;
    return *best;
}

namespace {

cv::Mat decode_bgr(const std::filesystem::path& file) {
    cv::Mat img = cv::imread(file.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw DataError("undecodable image file: " + file.string());
    return img;
}

cv::Mat resize_short_side(const cv::Mat& img, int target, std::vector<std::string>* log) {
    int h = img.rows, w = img.cols;
    int short_side = std::min(h, w);
    if (short_side == target) return img;
    double scale = static_cast<double>(target) / short_side;
    int nh = std::max(target, static_cast<int>(std::lround(h * scale)));
    int nw = std::max(target, static_cast<int>(std::lround(w * scale)));
    if (h <= w) nh = target;
    else nw = target;
    cv::Mat out;
    cv::resize(img, out, cv::Size(nw, nh), 0, 0, cv::INTER_AREA);
    if (log)
        log->push_back("resize_short_side " + std::to_string(w) + "x" + std::to_string(h) +
                       " -> " + std::to_string(nw) + "x" + std::to_string(nh));
    return out;
}

CxrImage to_model_input(cv::Mat img, const std::filesystem::path& source, int model_side,
                        std::vector<std::string> log) {
    img = resize_short_side(img, model_side, &log);
    int x0 = (img.cols - model_side) / 2;
    int y0 = (img.rows - model_side) / 2;
    cv::Mat crop = img(cv::Rect(x0, y0, model_side, model_side)).clone();
    log.push_back("center_crop " + std::to_string(model_side) + "x" + std::to_string(model_side));
    log.push_back("scale 1/255");

    CxrImage out;
    out.side = model_side;
    out.source = source;
    out.pixels.resize(3u * model_side * model_side);
    for (int y = 0; y < model_side; ++y) {
        const cv::Vec3b* row = crop.ptr<cv::Vec3b>(y);
        for (int x = 0; x < model_side; ++x) {
            // BGR -> RGB channel order.
            out.pixels[(0u * model_side + y) * model_side + x] = row[x][2] / 255.0f;
            out.pixels[(1u * model_side + y) * model_side + x] = row[x][1] / 255.0f;
            out.pixels[(2u * model_side + y) * model_side + x] = row[x][0] / 255.0f;
        }
    }
    out.transform_log = std::move(log);
    return out;
}

}  // namespace

CxrImage preprocess_cxr(const std::filesystem::path& image_file, const CxrOptions& opt) {
    std::vector<std::string> log;
    cv::Mat img = decode_bgr(image_file);
    img = resize_short_side(img, opt.target_short_side, &log);
    return to_model_input(img, image_file, opt.model_side, std::move(log));
}

void preprocess_cxr_stage1(const std::filesystem::path& image_file, int target_short_side,
                           const std::filesystem::path& out_png) {
    cv::Mat img = decode_bgr(image_file);
    img = resize_short_side(img, target_short_side, nullptr);
    if (!cv::imwrite(out_png.string(), img))
        throw DataError("cannot write image: " + out_png.string());
}

CxrImage load_model_input(const std::filesystem::path& stage1_png, const CxrOptions& opt) {
    std::vector<std::string> log;
    log.push_back("stage1 " + stage1_png.string());
    cv::Mat img = decode_bgr(stage1_png);
    return to_model_input(img, stage1_png, opt.model_side, std::move(log));
}

std::vector<float> normalize_cxr(const CxrImage& img, const double mean[3],
                                 const double stddev[3]) {
    std::vector<float> out(img.pixels.size());
    size_t plane = static_cast<size_t>(img.side) * img.side;
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i)
            out[c * plane + i] =
                static_cast<float>((img.pixels[c * plane + i] - mean[c]) / stddev[c]);
    return out;
}

std::vector<CxrMeta> load_cxr_metadata(const std::filesystem::path& metadata_csv,
                                       const std::filesystem::path& image_root,
                                       std::vector<RowIssue>* issues) {
    csv::Reader r(metadata_csv);
    r.require_columns({"patient_id", "study_time", "view_position", "path"});
    int cp = r.column("patient_id"), ct = r.column("study_time");
    int cv_ = r.column("view_position"), cf = r.column("path");
    std::vector<CxrMeta> out;
    csv::Row row;
    while (r.next(row)) {
        auto t = parse_iso8601(trim(row.fields[ct]));
        if (!t) {
            if (issues) issues->push_back({"cxr_metadata.csv", row.line, "unparseable study_time"});
            continue;
        }
        CxrMeta m;
        m.patient_id = trim(row.fields[cp]);
        m.study_time = *t;
        m.view_position = trim(row.fields[cv_]);
        m.path = image_root / trim(row.fields[cf]);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace t2dm
