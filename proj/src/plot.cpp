#include "eafpmed/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::harness {

void write_curves_csv(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("curves: cannot write " + path.string());
    out << "epoch,train_loss,train_accuracy,test_loss,test_accuracy\n";
    for (const auto& r : records) {
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy)
            << ',' << format_double(r.test_loss) << ',' << format_double(r.test_accuracy) << '\n';
    }
}

namespace {

constexpr int kPlotWidth = 640;
constexpr int kPlotHeight = 480;
constexpr int kMargin = 40;

struct Rgb {
    unsigned char r, g, b;
};

class Canvas {
public:
    Canvas() : pixels_(static_cast<std::size_t>(kPlotWidth) * kPlotHeight, Rgb{255, 255, 255}) {}

    void set(int x, int y, Rgb color) {
        if (x < 0 || x >= kPlotWidth || y < 0 || y >= kPlotHeight) return;
        pixels_[static_cast<std::size_t>(y) * kPlotWidth + x] = color;
    }

    void line(int x0, int y0, int x1, int y1, Rgb color) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, color);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("plot: cannot write " + path.string());
        out << "P6\n" << kPlotWidth << " " << kPlotHeight << "\n255\n";
        for (const auto& p : pixels_) {
            out.put(static_cast<char>(p.r));
            out.put(static_cast<char>(p.g));
            out.put(static_cast<char>(p.b));
        }
    }

private:
    std::vector<Rgb> pixels_;
};

void render_series_plot(const std::vector<EpochRecord>& records, const std::filesystem::path& path,
                        double EpochRecord::* train_field, double EpochRecord::* test_field,
                        bool clamp_unit) {
    if (records.empty()) throw FormatError("plot: no epoch records");
    double lo = 0.0, hi = 1.0;
    if (!clamp_unit) {
        hi = 0.0;
        for (const auto& r : records) hi = std::max({hi, r.*train_field, r.*test_field});
        hi = hi > 0.0 ? hi * 1.05 : 1.0;
    }

    Canvas canvas;
    const Rgb axis{0, 0, 0};
    canvas.line(kMargin, kMargin, kMargin, kPlotHeight - kMargin, axis);
    canvas.line(kMargin, kPlotHeight - kMargin, kPlotWidth - kMargin, kPlotHeight - kMargin, axis);

    const auto n = records.size();
    auto x_of = [n](std::size_t i) {
        if (n == 1) return kPlotWidth / 2;
        return kMargin + static_cast<int>(static_cast<double>(i) *
                                          (kPlotWidth - 2 * kMargin) / static_cast<double>(n - 1));
    };
    auto y_of = [lo, hi](double v) {
        const double t = (std::clamp(v, lo, hi) - lo) / (hi - lo);
        return kPlotHeight - kMargin - static_cast<int>(t * (kPlotHeight - 2 * kMargin));
    };

    const Rgb train_color{40, 80, 220};
    const Rgb test_color{220, 60, 40};
    for (std::size_t i = 1; i < n; ++i) {
        canvas.line(x_of(i - 1), y_of(records[i - 1].*train_field), x_of(i),
                    y_of(records[i].*train_field), train_color);
        canvas.line(x_of(i - 1), y_of(records[i - 1].*test_field), x_of(i),
                    y_of(records[i].*test_field), test_color);
    }
    if (n == 1) {
        canvas.set(x_of(0), y_of(records[0].*train_field), train_color);
        canvas.set(x_of(0), y_of(records[0].*test_field), test_color);
    }
    canvas.save(path);
}

}  // namespace

void render_loss_plot(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
    render_series_plot(records, path, &EpochRecord::train_loss, &EpochRecord::test_loss, false);
}

void render_accuracy_plot(const std::vector<EpochRecord>& records,
                          const std::filesystem::path& path) {
    render_series_plot(records, path, &EpochRecord::train_accuracy, &EpochRecord::test_accuracy,
                       true);
}

void write_run_manifest(const std::filesystem::path& out_dir,
                        const std::vector<std::filesystem::path>& files) {
    nlohmann::json entries = nlohmann::json::array();
    std::vector<std::filesystem::path> sorted = files;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& f : sorted) {
        entries.push_back({{"path", std::filesystem::relative(f, out_dir).string()},
                           {"fnv1a64", hash_file_hex(f)}});
    }
    nlohmann::json j = {{"files", entries}};
    std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
    if (!out) throw FormatError("manifest: cannot write " + (out_dir / "manifest.json").string());
    out << j.dump(2) << "\n";
}

}  // namespace eafpmed::harness
