#include "nuts_gauss/records_io.hpp"

#include <array>
#include <charconv>

namespace nuts_gauss {

std::string format_real(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_transition_row(std::ostream& out, long iter, const TransitionRecord<double>& rec) {
  out << iter << ',' << to_string(rec.stop_reason) << ',' << rec.orbit.min_index << ',' << rec.orbit.log2_length
      << ',' << rec.L << ',' << format_real(rec.path_length_time) << ',' << format_real(rec.norm_sq()) << ','
      << format_real(rec.max_abs_energy_error) << ',' << (rec.a_index_accept ? 1 : 0) << ',' << rec.gradient_evals
      << '\n';
}

void write_trace(std::ostream& out, const CoupledTrace& trace) {
  out << kTraceHeader << '\n';
  for (const TraceRow& row : trace.rows) {
    out << row.iter << ',' << format_real(row.mean_distance) << ',' << format_real(row.mean_cum_leapfrog) << ','
        << format_real(row.met_fraction) << '\n';
  }
}

void write_histogram(std::ostream& out, const CoupledTrace& trace) {
  out << kHistogramHeader << '\n';
  for (const auto& [L, count] : trace.index_counts) {
    out << format_real(trace.h * static_cast<double>(L)) << ',' << count << '\n';
  }
}

void write_sine_scan_rows(std::ostream& out, const std::vector<SineScanRow>& rows) {
  for (const SineScanRow& row : rows) {
    out << row.k << ',' << format_real(row.time) << ',' << format_real(row.dot_plus_over_d) << ','
        << format_real(row.dot_minus_over_d) << ',' << format_real(row.sine) << ',' << format_real(row.deviation)
        << '\n';
  }
}

}  // namespace nuts_gauss
