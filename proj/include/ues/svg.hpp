#pragma once

#include <string>
#include <vector>

namespace ues::svg {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Static charts with the plotted values embedded as a CSV table inside a
// <desc> element. Not an interactive surface, just a result display.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       const std::string& embedded_csv);

std::string bar_chart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<double>& bin_edges,
                      const std::vector<std::size_t>& counts, const std::string& embedded_csv);

}  // namespace ues::svg
