#pragma once

#include "stlplan/bench.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/semantics.hpp"

#include <string>
#include <vector>

namespace stlplan {

/// Top-down view: obstacles as <circle>, box zones and walls as <rect>, circular zones as
/// <circle>, one <polyline> per agent, start and end markers as <polygon>.
std::string trajectory_svg(const Scenario& scenario, const Trace& trace, const std::string& title);

/// Two panels (mean robustness, satisfaction rate), one group per scenario, one bar per method
/// in each panel. Bars are <rect class="bar ...">.
std::string bar_chart_svg(const std::vector<AggregateRow>& rows, const std::string& title);

/// Reads <in>/report.json (or, without one, every result.json + trace.csv pair below <in>) and
/// writes trajectory plots for the best seed of each row plus one bar chart. Returns the files written.
std::vector<std::string> export_plots(const std::string& in_dir, const std::string& out_dir);

}  // namespace stlplan
