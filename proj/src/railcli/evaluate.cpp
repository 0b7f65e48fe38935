#include <cmath>
#include <cstdio>

#include "railvo/error.hpp"
#include "railvo/railcli.hpp"

namespace railvo::railcli {

namespace {

// Rows up to the first of any run of identical trailing timestamps.
std::size_t effective_rows(const std::vector<double>& t) {
  std::size_t n = t.size();
  while (n >= 2 && t[n - 1] == t[n - 2]) --n;
  return n;
}

std::string g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Evaluation evaluate_run(const CsvTable& trajectory, const CsvTable& truth,
                        const CsvTable* displacement) {
  const auto t_est = trajectory.values("t");
  const auto x_est = trajectory.values("x_g");
  const auto y_est = trajectory.values("y_g");
  const auto v_est = trajectory.values("v");
  const auto t_true = truth.values("t");
  const auto x_true = truth.values("x");
  const auto y_true = truth.values("y");
  const auto v_true = truth.values("v_l");

  const std::size_t n = effective_rows(t_est);
  const std::size_t m = effective_rows(t_true);
  if (n != m) {
    throw Error(ErrorCode::Alignment, "trajectory has " + std::to_string(n) +
                                          " timestamps, ground truth " + std::to_string(m));
  }
  if (n == 0) throw Error(ErrorCode::Alignment, "no samples");
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(t_est[k] - t_true[k]) > 1e-6) {
      throw Error(ErrorCode::Alignment, "timestamp " + g(t_est[k]) + " does not match " +
                                            g(t_true[k]) + " at row " + std::to_string(k + 2));
    }
  }

  Evaluation ev;
  Metrics& mt = ev.metrics;
  mt.samples = static_cast<int>(n);
  double sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      mt.distance_est_m += std::hypot(x_est[k] - x_est[k - 1], y_est[k] - y_est[k - 1]);
      mt.distance_true_m += std::hypot(x_true[k] - x_true[k - 1], y_true[k] - y_true[k - 1]);
      sq += (v_est[k] - v_true[k]) * (v_est[k] - v_true[k]);
    }
    const double err = std::hypot(x_est[k] - x_true[k], y_est[k] - y_true[k]);
    mt.max_position_error_m = std::max(mt.max_position_error_m, err);
    mt.final_position_error_m = err;
    ev.drift.push_back({t_true[k], mt.distance_true_m, err});
  }
  // The first sample precedes any measurement.
  if (n > 1) mt.velocity_rmse_mps = std::sqrt(sq / static_cast<double>(n - 1));
  mt.distance_error_m = mt.distance_est_m - mt.distance_true_m;
  mt.distance_error_pct = mt.distance_true_m > 0.0 ? 100.0 * mt.distance_error_m / mt.distance_true_m : 0.0;

  if (displacement) {
    const auto ids = displacement->values("keyframe_id");
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (k == 0 || ids[k] != ids[k - 1]) ++mt.keyframe_switches;
  }
  return ev;
}

std::string format_report(const Metrics& m) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "samples:                 %d\n"
                "distance (truth):        %.4f m\n"
                "distance (estimate):     %.4f m\n"
                "distance error:          %+.4f m (%+.4f %%)\n"
                "velocity rmse:           %.6f m/s\n"
                "final position error:    %.4f m\n"
                "max position error:      %.4f m\n"
                "keyframe switches:       %d\n",
                m.samples, m.distance_true_m, m.distance_est_m, m.distance_error_m,
                m.distance_error_pct, m.velocity_rmse_mps, m.final_position_error_m,
                m.max_position_error_m, m.keyframe_switches);
  return buf;
}

std::string format_metrics_csv(const Metrics& m) {
  return "samples,distance_true_m,distance_est_m,distance_error_m,distance_error_pct,"
         "velocity_rmse_mps,final_position_error_m,max_position_error_m,keyframe_switches\n" +
         std::to_string(m.samples) + "," + g(m.distance_true_m) + "," + g(m.distance_est_m) + "," +
         g(m.distance_error_m) + "," + g(m.distance_error_pct) + "," + g(m.velocity_rmse_mps) + "," +
         g(m.final_position_error_m) + "," + g(m.max_position_error_m) + "," +
         std::to_string(m.keyframe_switches) + "\n";
}

std::string format_drift_csv(const std::vector<DriftPoint>& drift) {
  std::string s = "t,distance_m,error_m\n";
  for (const auto& d : drift) s += g(d.t) + "," + g(d.distance_m) + "," + g(d.error_m) + "\n";
  return s;
}

}  // namespace railvo::railcli
