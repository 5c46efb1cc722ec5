#include "collapse/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "collapse/error.hpp"

namespace collapse {

Series::Series(std::vector<std::string> cols) : columns(std::move(cols)) {}

void Series::add(std::vector<double> row)
{
    if (row.size() != columns.size()) fail("dim-mismatch", "series row width differs from the header");
    rows.push_back(std::move(row));
}

std::vector<std::string> density_columns(int dim)
{
    std::vector<std::string> cols = {"t"};
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            std::string ij = std::to_string(i) + std::to_string(j);
            if (dim > 10) ij = std::to_string(i) + "_" + std::to_string(j);
            cols.push_back("re_s" + ij);
            cols.push_back("im_s" + ij);
        }
    return cols;
}

Series density_series(const std::vector<double>& t, const std::vector<GeneralOperator>& rho)
{
    int d = rho.empty() ? 0 : static_cast<int>(rho.front().rows());
    Series s(density_columns(d));
    for (std::size_t k = 0; k < rho.size(); ++k) {
        std::vector<double> row = {t[k]};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                row.push_back(rho[k](i, j).real());
                row.push_back(rho[k](i, j).imag());
            }
        s.add(std::move(row));
    }
    return s;
}

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string series_csv(const Series& s)
{
    std::string out;
    for (std::size_t c = 0; c < s.columns.size(); ++c) out += (c ? "," : "") + csv_field(s.columns[c]);
    out += "\r\n";
    for (const auto& row : s.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_number(row[c]);
        out += "\r\n";
    }
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("io-error", "cannot write '" + path + "'");
    f << text;
    if (!f) fail("io-error", "write failed for '" + path + "'");
}

void emit_series_csv(const Series& s, const std::string& path) { write_text(path, series_csv(s)); }

namespace {

json sanitize(const json& j)
{
    if (j.is_number_float()) return std::isfinite(j.get<double>()) ? j : json(nullptr);
    if (j.is_array()) {
        json out = json::array();
        for (const auto& e : j) out.push_back(sanitize(e));
        return out;
    }
    if (j.is_object()) {
        json out = json::object();
        for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = sanitize(it.value());
        return out;
    }
    return j;
}

}  // namespace

std::string report_json(const json& report)
{
    json j = sanitize(report);
    j["spec_version"] = kSpecVersion;
    return j.dump(2) + "\n";
}

void emit_report_json(const json& report, const std::string& path) { write_text(path, report_json(report)); }

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Curve>& curves,
                           bool log_y)
{
    const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
    double x0 = x.empty() ? 0 : *std::min_element(x.begin(), x.end());
    double x1 = x.empty() ? 1 : *std::max_element(x.begin(), x.end());
    double y0 = INFINITY, y1 = -INFINITY;
    for (const auto& c : curves)
        for (double v : c.y)
            if (std::isfinite(ty(v))) {
                y0 = std::min(y0, ty(v));
                y1 = std::max(y1, ty(v));
            }
    if (!(y0 < y1)) {
        double m = std::isfinite(y0) ? y0 : 0.0;
        y0 = m - 1;
        y1 = m + 1;
    }
    if (!(x0 < x1)) x1 = x0 + 1;
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        double yp = H - B - (H - T - B) * k / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
           << fmt(xv) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << yp + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << (log_y ? "1e" + fmt(yv) : fmt(yv)) << "</text>\n";
    }
    for (std::size_t c = 0; c < curves.size(); ++c) {
        os << "<polyline fill=\"none\" stroke=\"" << kColors[c % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < x.size() && i < curves[c].y.size(); ++i)
            if (std::isfinite(ty(curves[c].y[i]))) os << fmt(px(x[i])) << "," << fmt(py(curves[c].y[i])) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 16 * (c + 1) << "\" font-size=\"12\" fill=\""
           << kColors[c % 6] << "\">" << esc(curves[c].name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& predicted, const std::vector<double>& observed)
{
    const double W = 480, H = 320, L = 50, B = 50, T = 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n";
    double slot = (W - L - 20) / std::max<std::size_t>(1, labels.size());
    double span = H - T - B;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double x = L + i * slot;
        double hp = span * std::clamp(predicted[i], 0.0, 1.0), ho = span * std::clamp(observed[i], 0.0, 1.0);
        os << "<rect x=\"" << fmt(x + 0.1 * slot) << "\" y=\"" << fmt(H - B - hp) << "\" width=\"" << fmt(0.35 * slot)
           << "\" height=\"" << fmt(hp) << "\" fill=\"" << kColors[0] << "\"/>\n";
        os << "<rect x=\"" << fmt(x + 0.5 * slot) << "\" y=\"" << fmt(H - B - ho) << "\" width=\"" << fmt(0.35 * slot)
           << "\" height=\"" << fmt(ho) << "\" fill=\"" << kColors[1] << "\"/>\n";
        os << "<text x=\"" << fmt(x + 0.5 * slot) << "\" y=\"" << H - B + 18
           << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(labels[i]) << "</text>\n";
    }
    os << "<text x=\"" << L << "\" y=\"" << H - 10 << "\" font-size=\"12\" fill=\"" << kColors[0]
       << "\">predicted</text>\n";
    os << "<text x=\"" << L + 90 << "\" y=\"" << H - 10 << "\" font-size=\"12\" fill=\"" << kColors[1]
       << "\">observed</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace collapse
