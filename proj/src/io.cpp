#include "koopctl/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "koopctl/errors.hpp"

namespace koopctl {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj, double dt) {
    traj.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trajectory CSV for writing", path);
    const int d = traj.dim();
    out << 't';
    for (int i = 1; i <= d; ++i) out << ",y" << i;
    out << ",u1\n";
    for (int t = 0; t < traj.length(); ++t) {
        out << fmt17(t * dt);
        for (int i = 0; i < d; ++i) out << ',' << fmt17(traj.measurements[t](i, 0));
        out << ',';
        if (t + 1 < traj.length()) out << fmt17(traj.controls[t]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing trajectory CSV", path);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory CSV", path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory CSV", path);
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3 || header.front() != "t" || header.back() != "u1")
        throw IoError("trajectory CSV header must be t,y1..yD,u1", path);
    const int d = static_cast<int>(header.size()) - 2;
    for (int i = 0; i < d; ++i)
        if (header[i + 1] != "y" + std::to_string(i + 1))
            throw IoError("trajectory CSV header must be t,y1..yD,u1", path);
    Trajectory traj;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != d + 2)
            throw IoError("trajectory CSV row " + std::to_string(row) + " has wrong arity", path);
        Mat y(d, 1);
        try {
            for (int i = 0; i < d; ++i) y(i, 0) = std::stod(cells[i + 1]);
            if (!cells.back().empty()) {
                if (static_cast<int>(traj.controls.size()) != traj.length())
                    throw IoError("trajectory CSV has a gap in the control column", path);
                traj.controls.push_back(std::stod(cells.back()));
            }
        } catch (const std::invalid_argument&) {
            throw IoError("trajectory CSV row " + std::to_string(row) + " is not numeric", path);
        } catch (const std::out_of_range&) {
            throw IoError("trajectory CSV row " + std::to_string(row) + " is out of range", path);
        }
        traj.measurements.push_back(std::move(y));
    }
    if (traj.length() < 2) throw IoError("trajectory CSV needs at least two rows", path);
    if (static_cast<int>(traj.controls.size()) + 1 != traj.length())
        throw IoError("trajectory CSV must leave exactly the final control empty", path);
    return traj;
}

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<Series>& series) {
    if (series.empty()) throw ConfigError("plot: no series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw ConfigError("plot: series '" + s.label + "' is empty or ragged");
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) {
        ymax = ymin + 0.5;
        ymin -= 0.5;
    }
    const double w = 640, h = 400, ml = 56, mr = 16, mt = 28, mb = 36;
    const double pw = w - ml - mr, ph = h - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">" << title << "</text>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        svg << "<text x=\"" << px(fx) << "\" y=\"" << h - mb + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt_tick(fx) << "</text>\n";
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(fy) + 3
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt_tick(fy) << "</text>\n";
        if (i > 0 && i < 4) {
            svg << "<line x1=\"" << ml << "\" y1=\"" << py(fy) << "\" x2=\"" << ml + pw
                << "\" y2=\"" << py(fy) << "\" stroke=\"#ddd\"/>\n";
        }
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (i) svg << ' ';
            svg << fmt_tick(px(series[s].x[i])) << ',' << fmt_tick(py(series[s].y[i]));
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << w - mr - 8 << "\" y=\"" << mt + 14 + 14 * s
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
            << color << "\">" << series[s].label << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw IoError("cannot open SVG for writing", path);
    out << svg.str();
    if (!out) throw IoError("failed writing SVG", path);
}

void write_trajectory_svg(const std::string& path, const std::string& title,
                          const Trajectory& traj, double dt) {
    traj.validate();
    std::vector<Series> series(traj.dim());
    for (int i = 0; i < traj.dim(); ++i) {
        series[i].label = "y" + std::to_string(i + 1);
        series[i].x.reserve(traj.length());
        series[i].y.reserve(traj.length());
        for (int t = 0; t < traj.length(); ++t) {
            series[i].x.push_back(t * dt);
            series[i].y.push_back(traj.measurements[t](i, 0));
        }
    }
    write_line_plot_svg(path, title, series);
}

} // namespace koopctl
