#pragma once

#include <string>
#include <vector>

#include "collapse/config.hpp"

namespace collapse {

// Column-oriented table; the first column is always t.
struct Series {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    explicit Series(std::vector<std::string> cols = {"t"});
    void add(std::vector<double> row);
};

// Row-major flattening names re_sij / im_sij for a d x d density.
std::vector<std::string> density_columns(int dim);
Series density_series(const std::vector<double>& t, const std::vector<GeneralOperator>& rho);

std::string format_number(double x);  // 17 significant digits, '.' decimal
std::string csv_field(const std::string& s);
std::string series_csv(const Series& s);
void emit_series_csv(const Series& s, const std::string& path);

inline constexpr int kSpecVersion = 1;
// Stable key order; non-finite numbers become null.
std::string report_json(const json& report);
void emit_report_json(const json& report, const std::string& path);

struct Curve {
    std::string name;
    std::vector<double> y;
};
std::string svg_line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Curve>& curves,
                           bool log_y = false);
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& predicted, const std::vector<double>& observed);
void write_text(const std::string& path, const std::string& text);

}  // namespace collapse
