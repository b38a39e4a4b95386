#include "t2dm/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace t2dm {

std::string format_ci(const BootstrapCi& ci, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << ci.point << " [" << ci.lo << ", " << ci.hi
      << "]";
    return s.str();
}

std::string render_metrics(const std::string& title, const MetricsReport& r) {
    std::ostringstream s;
    s << title << " (n=" << r.n << ")\n";
    s << "  auroc    " << format_ci(r.auroc) << '\n';
    s << "  auprc    " << format_ci(r.auprc) << '\n';
    s << "  accuracy " << format_ci(r.accuracy) << '\n';
    return s.str();
}

void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& file) {
    std::ofstream out(file);
    out << "metric,point,lo,hi,n\n";
    out << "auroc," << r.auroc.point << ',' << r.auroc.lo << ',' << r.auroc.hi << ',' << r.n << '\n';
    out << "auprc," << r.auprc.point << ',' << r.auprc.lo << ',' << r.auprc.hi << ',' << r.n << '\n';
    out << "accuracy," << r.accuracy.point << ',' << r.accuracy.lo << ',' << r.accuracy.hi << ','
        << r.n << '\n';
}

std::string render_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream s;
    s << std::left << std::setw(14) << "kind" << std::setw(13) << "family" << std::setw(8)
      << "target" << std::setw(11) << "amplitude" << std::setw(26) << "auroc" << "auprc\n";
    for (const auto& r : rows) {
        std::ostringstream amp;
        amp << r.amplitude;
        s << std::left << std::setw(14) << r.kind << std::setw(13)
          << (r.family.empty() ? "-" : r.family) << std::setw(8)
          << (r.target.empty() ? "-" : r.target) << std::setw(11) << amp.str() << std::setw(26)
          << format_ci(r.auroc) << format_ci(r.auprc) << '\n';
    }
    return s.str();
}

}  // namespace t2dm
