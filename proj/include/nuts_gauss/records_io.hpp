#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "nuts_gauss/coupling.hpp"
#include "nuts_gauss/orbit.hpp"
#include "nuts_gauss/samplers.hpp"

namespace nuts_gauss {

inline constexpr std::string_view kTransitionHeader =
    "iter,stop_reason,orbit_min,orbit_k,L,path_time,norm_sq,max_abs_dH,a_index,grad_evals";
inline constexpr std::string_view kSimulateHeader = "chain,iter,norm_sq,stop_reason,orbit_k,grad_evals";
inline constexpr std::string_view kTraceHeader = "iter,mean_distance,mean_cum_leapfrog,met_fraction";
inline constexpr std::string_view kHistogramHeader = "path_time,count";
inline constexpr std::string_view kSineScanHeader = "k,time,dot_plus_over_d,dot_minus_over_d,sine,deviation";
inline constexpr std::string_view kFixHeader = "chain,iter,orbit_length,stop_reason";

/// Shortest decimal text that round-trips to the same double.
std::string format_real(double value);

void write_transition_row(std::ostream& out, long iter, const TransitionRecord<double>& rec);
void write_trace(std::ostream& out, const CoupledTrace& trace);
void write_histogram(std::ostream& out, const CoupledTrace& trace);
void write_sine_scan_rows(std::ostream& out, const std::vector<SineScanRow>& rows);

}  // namespace nuts_gauss
