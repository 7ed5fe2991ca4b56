// Copyright 2026 The reprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "reprobe/error.hpp"

namespace reprobe::plot {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Frame {
  double width = 640, height = 420;
  double left = 60, right = 20, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string open_svg(const Frame& f, std::string_view title, std::string_view xlabel, std::string_view ylabel) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" +
                  num(f.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.height - f.bottom) + "\" x2=\"" + num(f.width - f.right) +
       "\" y2=\"" + num(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"" + num(f.height - 12) + "\" text-anchor=\"middle\">" + escape(xlabel) +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + num(f.height / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(f.height / 2) + ")\">" + escape(ylabel) + "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4, y = f.y0 + (f.y1 - f.y0) * i / 4;
    s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(f.height - f.bottom + 16) + "\" text-anchor=\"middle\">" +
         num(x) + "</text>\n";
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" + num(y) + "</text>\n";
  }
  return s;
}

struct Bar {
  double lo, hi, value;
  std::size_t count;
  bool muted;
};

/// Mean generation correctness per probability bucket; muted bars are drawn hollow.
inline std::string bucket_chart(const std::vector<Bar>& bars, std::string_view title) {
  require(!bars.empty(), Errc::SchemaError, "nothing to plot");
  Frame f;
  std::string s = open_svg(f, title, "probing probability of the correct label", "generation accuracy");
  for (const auto& b : bars) {
    const double x = f.px(b.lo) + 2, w = f.px(b.hi) - f.px(b.lo) - 4;
    const double y = f.py(b.value), h = f.py(0) - y;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" " +
         (b.muted ? "fill=\"none\" stroke=\"#999999\" stroke-dasharray=\"3,2\"" : "fill=\"#4c72b0\"") + "/>\n";
    s += "<text x=\"" + num(x + w / 2) + "\" y=\"" + num(y - 4) + "\" text-anchor=\"middle\" font-size=\"10\">" +
         std::to_string(b.count) + "</text>\n";
  }
  return s + "</svg>\n";
}

struct Point {
  double x, y;
  int group;
};

inline std::string scatter(const std::vector<Point>& points, std::string_view title) {
  require(!points.empty(), Errc::SchemaError, "nothing to plot");
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  Frame f;
  f.x0 = f.x1 = points.front().x;
  f.y0 = f.y1 = points.front().y;
  for (const auto& p : points) {
    f.x0 = std::min(f.x0, p.x), f.x1 = std::max(f.x1, p.x);
    f.y0 = std::min(f.y0, p.y), f.y1 = std::max(f.y1, p.y);
  }
  const double padx = std::max(1e-9, (f.x1 - f.x0) * 0.05), pady = std::max(1e-9, (f.y1 - f.y0) * 0.05);
  f.x0 -= padx, f.x1 += padx, f.y0 -= pady, f.y1 += pady;
  std::string s = open_svg(f, title, "PC 1", "PC 2");
  for (const auto& p : points) {
    const auto color = colors[static_cast<std::size_t>(std::abs(p.group)) % std::size(colors)];
    s += "<circle cx=\"" + num(f.px(p.x)) + "\" cy=\"" + num(f.py(p.y)) + "\" r=\"2.5\" fill=\"" + color +
         "\" fill-opacity=\"0.7\"/>\n";
  }
  return s + "</svg>\n";
}

}  // namespace reprobe::plot
