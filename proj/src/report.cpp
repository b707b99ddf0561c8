#include <algorithm>
#include <cmath>
#include <string>

#include "calm/csv.hpp"
#include "calm/error.hpp"
#include "calm/eval.hpp"

namespace calm {

namespace {

std::string fmt(double v) {
    return csv::format_double(v);
}

void write_metrics(std::span<const ScenarioOutcome> outcomes, const std::filesystem::path& dir) {
    std::string out =
        "sensors,scenario,window_s,filter,repetitions,n_train,n_test,accuracy_mean,accuracy_std,ece_mean,ece_std\n";
    for (const auto& o : outcomes) {
        out += o.sensors + ',' + o.scenario + ',' + fmt(o.window_s) + ',' +
               (o.filter_enabled ? "on" : "off") + ',' + std::to_string(o.repetitions) + ',' +
               std::to_string(o.n_train) + ',' + std::to_string(o.n_test) + ',' +
               fmt(o.accuracy_mean) + ',' + fmt(o.accuracy_std) + ',' + fmt(o.ece_mean) + ',' +
               fmt(o.ece_std) + '\n';
    }
    csv::write_file_atomic(dir / "metrics.csv", out);
}

void write_confusions(std::span<const ScenarioOutcome> outcomes, const std::filesystem::path& dir) {
    for (const auto& o : outcomes) {
        std::string out = "true_class";
        for (const auto& c : o.classes) {
            out += ',' + c;
        }
        out += '\n';
        for (std::size_t t = 0; t < o.confusion.n_classes; ++t) {
            out += o.classes[t];
            for (std::size_t p = 0; p < o.confusion.n_classes; ++p) {
                out += ',' + std::to_string(o.confusion.at(t, p));
            }
            out += '\n';
        }
        csv::write_file_atomic(dir / ("confusion_" + o.sensors + '_' + o.scenario + ".csv"), out);
    }
}

void write_reliability(std::span<const ScenarioOutcome> outcomes, const std::filesystem::path& dir) {
    std::string out = "sensors,scenario,bin,bin_lo,bin_hi,count,mean_confidence,accuracy\n";
    for (const auto& o : outcomes) {
        const auto m = static_cast<double>(o.reliability.bins.size());
        for (std::size_t b = 0; b < o.reliability.bins.size(); ++b) {
            const auto& bin = o.reliability.bins[b];
            out += o.sensors + ',' + o.scenario + ',' + std::to_string(b) + ',' +
                   fmt(static_cast<double>(b) / m) + ',' + fmt(static_cast<double>(b + 1) / m) + ',' +
                   std::to_string(bin.count) + ',' + fmt(bin.mean_confidence) + ',' + fmt(bin.accuracy) +
                   '\n';
        }
    }
    csv::write_file_atomic(dir / "reliability_bins.csv", out);
}

void write_importance(std::span<const ScenarioOutcome> outcomes, const std::filesystem::path& dir) {
    std::string out = "sensors,scenario,feature,importance\n";
    for (const auto& o : outcomes) {
        if (o.importances.empty()) {
            continue;
        }
        for (std::size_t f = 0; f < o.importances.size(); ++f) {
            out += o.sensors + ',' + o.scenario + ',' + o.feature_names[f] + ',' + fmt(o.importances[f]) + '\n';
        }
    }
    csv::write_file_atomic(dir / "importance.csv", out);
}

void write_distributions(std::span<const FeatureDistribution> distributions,
                         const std::filesystem::path& dir) {
    std::string out = "feature,group,count,min,q1,median,q3,max,mean,std,range_lo,range_hi";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        out += ",bin_" + std::to_string(b);
    }
    out += '\n';
    for (const auto& d : distributions) {
        for (const auto& g : d.groups) {
            out += d.feature + ',' + g.group + ',' + std::to_string(g.count) + ',' + fmt(g.min) + ',' +
                   fmt(g.q1) + ',' + fmt(g.median) + ',' + fmt(g.q3) + ',' + fmt(g.max) + ',' +
                   fmt(g.mean) + ',' + fmt(g.stddev) + ',' + fmt(d.range_lo) + ',' + fmt(d.range_hi);
            for (const std::size_t c : g.histogram) {
                out += ',' + std::to_string(c);
            }
            out += '\n';
        }
    }
    csv::write_file_atomic(dir / "distributions.csv", out);
}

// Static accuracy bar chart, one bar per (sensors, scenario) row.
void write_metrics_svg(std::span<const ScenarioOutcome> outcomes, const std::filesystem::path& dir) {
    const int bar_w = 28;
    const int gap = 14;
    const int height = 320;
    const int base_y = 260;
    const int width = 60 + static_cast<int>(outcomes.size()) * (bar_w + gap) + 20;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<line x1=\"50\" y1=\"20\" x2=\"50\" y2=\"260\" stroke=\"black\"/>\n";
    svg += "<line x1=\"50\" y1=\"260\" x2=\"" + std::to_string(width - 10) +
           "\" y2=\"260\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 10; tick += 2) {
        const int y = base_y - tick * 24;
        svg += "<text x=\"10\" y=\"" + std::to_string(y + 4) + "\" font-size=\"10\">" +
               fmt(static_cast<double>(tick) / 10.0) + "</text>\n";
        svg += "<line x1=\"46\" y1=\"" + std::to_string(y) + "\" x2=\"50\" y2=\"" + std::to_string(y) +
               "\" stroke=\"black\"/>\n";
    }
    int x = 60;
    for (const auto& o : outcomes) {
        const int h = static_cast<int>(std::lround(o.accuracy_mean * 240.0));
        const std::string color = o.sensors == "pupil" ? "#8fbcdb" : o.sensors == "hrv" ? "#9ccb86" : "#e9a76d";
        svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(base_y - h) + "\" width=\"" +
               std::to_string(bar_w) + "\" height=\"" + std::to_string(h) + "\" fill=\"" + color + "\"/>\n";
        svg += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" + std::to_string(base_y + 10) +
               "\" font-size=\"7\" text-anchor=\"middle\" transform=\"rotate(45 " +
               std::to_string(x + bar_w / 2) + " " + std::to_string(base_y + 10) + ")\">" + o.sensors +
               " " + o.scenario + "</text>\n";
        x += bar_w + gap;
    }
    svg += "</svg>\n";
    csv::write_file_atomic(dir / "metrics.svg", svg);
}

// Box plots per feature, one row of boxes per group.
void write_distributions_svg(std::span<const FeatureDistribution> distributions,
                             const std::filesystem::path& dir) {
    const int panel_w = 180;
    const int panel_h = 120;
    const int cols = 4;
    const auto n = distributions.size();
    const int rows = static_cast<int>((n + cols - 1) / cols);
    const int width = cols * panel_w + 20;
    const int height = rows * panel_h + 20;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = distributions[i];
        const int px = 10 + static_cast<int>(i % cols) * panel_w;
        const int py = 10 + static_cast<int>(i / cols) * panel_h;
        svg += "<text x=\"" + std::to_string(px + panel_w / 2) + "\" y=\"" + std::to_string(py + 12) +
               "\" font-size=\"10\" text-anchor=\"middle\">" + d.feature + "</text>\n";
        const double lo = d.range_lo;
        const double hi = d.range_hi;
        const auto sx = [&](double v) {
            return px + 15 + static_cast<int>(std::lround((v - lo) / (hi - lo) * (panel_w - 40.0)));
        };
        int gy = py + 34;
        for (const auto& g : d.groups) {
            svg += "<line x1=\"" + std::to_string(sx(g.min)) + "\" y1=\"" + std::to_string(gy) +
                   "\" x2=\"" + std::to_string(sx(g.max)) + "\" y2=\"" + std::to_string(gy) +
                   "\" stroke=\"black\"/>\n";
            svg += "<rect x=\"" + std::to_string(sx(g.q1)) + "\" y=\"" + std::to_string(gy - 8) +
                   "\" width=\"" + std::to_string(std::max(1, sx(g.q3) - sx(g.q1))) +
                   "\" height=\"16\" fill=\"#cfe3f0\" stroke=\"black\"/>\n";
            svg += "<line x1=\"" + std::to_string(sx(g.median)) + "\" y1=\"" + std::to_string(gy - 8) +
                   "\" x2=\"" + std::to_string(sx(g.median)) + "\" y2=\"" + std::to_string(gy + 8) +
                   "\" stroke=\"black\"/>\n";
            svg += "<text x=\"" + std::to_string(px + 2) + "\" y=\"" + std::to_string(gy + 3) +
                   "\" font-size=\"8\">" + g.group + "</text>\n";
            gy += 26;
        }
    }
    svg += "</svg>\n";
    csv::write_file_atomic(dir / "distributions.svg", svg);
}

} // namespace

void emit_report(std::span<const ScenarioOutcome> outcomes,
                 std::span<const FeatureDistribution> distributions,
                 const std::filesystem::path& out_dir, const ReportFormats& formats) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory: " + out_dir.string());
    }
    if (formats.csv) {
        write_metrics(outcomes, out_dir);
        write_confusions(outcomes, out_dir);
        write_reliability(outcomes, out_dir);
        write_importance(outcomes, out_dir);
        write_distributions(distributions, out_dir);
    }
    if (formats.svg) {
        write_metrics_svg(outcomes, out_dir);
        write_distributions_svg(distributions, out_dir);
    }
}

} // namespace calm
