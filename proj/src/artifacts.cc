#include "pivot/artifacts.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace pivot {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::runtime_error("write_png: need 1 or 3 channels");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<png_byte> row(static_cast<size_t>(image.cols) * image.channels);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.cols, image.rows, 8, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.rows; ++r) {
    for (int c = 0; c < image.cols; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) {
        const float v = std::clamp(image.at(r, c, ch), 0.0f, 1.0f);
        row[static_cast<size_t>(c) * image.channels + ch] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty metrics file");
  const auto header = split_csv(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error(path.string() + ": missing column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  const size_t c_step = column("step"), c_rew = column("mean_reward"), c_succ = column("success_rate"),
               c_dev = column("mean_deviation");
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": wrong number of fields");
    try {
      MetricsRow r;
      r.step = std::stoll(cells[c_step]);
      r.mean_reward = std::stod(cells[c_rew]);
      r.success_rate = std::stod(cells[c_succ]);
      r.mean_deviation = std::stod(cells[c_dev]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

std::string training_curves_svg(const std::vector<MetricsRow>& rows, const std::string& title) {
  constexpr double kW = 640, kPanelH = 220, kLeft = 70, kRight = 20, kTop = 40, kGap = 60;
  const double plot_w = kW - kLeft - kRight;
  const double total_h = kTop + 2 * kPanelH + kGap + 40;
  long long s_lo = 0, s_hi = 1;
  if (!rows.empty()) {
    s_lo = rows.front().step;
    s_hi = rows.front().step;
    for (const auto& r : rows) {
      s_lo = std::min(s_lo, r.step);
      s_hi = std::max(s_hi, r.step);
    }
    if (s_hi == s_lo) s_hi = s_lo + 1;
  }
  std::ostringstream svg;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" font-size=\"12\">\n",
                kW, total_h, kW, total_h);
  svg << buf;
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf), "<text x=\"%.0f\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">%s</text>\n",
                kW / 2, escape_xml(title).c_str());
  svg << buf;

  auto panel = [&](int index, const char* series, const char* label, const char* color, auto value, double lo,
                   double hi) {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double y0 = kTop + index * (kPanelH + kGap);
    auto px = [&](long long step) { return kLeft + plot_w * static_cast<double>(step - s_lo) / (s_hi - s_lo); };
    auto py = [&](double v) { return y0 + kPanelH * (1.0 - (v - lo) / (hi - lo)); };
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n",
                  kLeft, y0, plot_w, kPanelH);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n",
                  kLeft - 6, y0 + 4, hi, kLeft - 6, y0 + kPanelH + 4, lo);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\">%lld</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%lld</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">step</text>\n",
                  kLeft, y0 + kPanelH + 16, s_lo, kLeft + plot_w, y0 + kPanelH + 16, s_hi, kLeft + plot_w / 2,
                  y0 + kPanelH + 16);
    svg << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n", kLeft, y0 - 6, color,
                  label);
    svg << buf;
    svg << "<polyline class=\"" << series << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < rows.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", i ? " " : "", px(rows[i].step), py(value(rows[i])));
      svg << buf;
    }
    svg << "\"/>\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "<circle class=\"%s\" cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\"/>\n",
                    series, px(r.step), py(value(r)), color);
      svg << buf;
    }
  };

  double r_lo = 0.0, r_hi = 1.0;
  if (!rows.empty()) {
    r_lo = r_hi = rows.front().mean_reward;
    for (const auto& r : rows) {
      r_lo = std::min(r_lo, r.mean_reward);
      r_hi = std::max(r_hi, r.mean_reward);
    }
  }
  panel(0, "reward", "mean reward", "#1f77b4", [](const MetricsRow& r) { return r.mean_reward; }, r_lo, r_hi);
  panel(1, "success_rate", "success rate", "#d62728", [](const MetricsRow& r) { return r.success_rate; }, 0.0, 1.0);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pivot
