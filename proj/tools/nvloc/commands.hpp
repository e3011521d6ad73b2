#ifndef NVLOC_TOOLS_COMMANDS_HPP
#define NVLOC_TOOLS_COMMANDS_HPP

// Subcommand bodies. Each writes its files under the output directory,
// prints the main JSON document to stdout and returns an exit code.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nvloc/coupling.hpp"
#include "nvloc/density.hpp"
#include "nvloc/fitting.hpp"
#include "nvloc/io.hpp"
#include "nvloc/locator.hpp"
#include "nvloc/parallel.hpp"
#include "nvloc/wire_field.hpp"
#include "nvloc/config.hpp"

namespace nvloc::cli {

namespace fs = std::filesystem;

struct Run {
  json cfg;
  std::string hash;
  fs::path out;

  explicit Run(json resolved) : cfg(std::move(resolved)), hash(config_hash(cfg)), out(str(cfg, "/output_dir")) {}
};

inline json envelope(const std::string& command, const Run& run, json result) {
  json doc;
  doc["command"] = command;
  doc["config_hash"] = run.hash;
  doc["config"] = run.cfg;
  doc["result"] = std::move(result);
  return doc;
}

inline void emit(const Run& run, const std::string& name, const json& doc) {
  io::write_text(run.out / name, doc.dump(2) + "\n");
  std::cout << doc.dump(2) << "\n";
}

inline double to_nm(double m) { return m / units::nm; }

// ---------------------------------------------------------------------------
// Plot helpers
// ---------------------------------------------------------------------------

/// Panel for an (x', z') region in nm with equal scaling where practical.
inline io::Frame spatial_frame(double x0, double x1, double z0, double z1) {
  if (x1 <= x0) x0 -= 1, x1 += 1;
  if (z1 <= z0) z0 -= 1, z1 += 1;
  const double width = 560;
  const double height = std::clamp(width * (z1 - z0) / (x1 - x0), 160.0, 560.0);
  return {x0, x1, z0, z1, 80, 20, width, height};
}

/// Heatmap cells centred on the grid nodes, values mapped min..max.
inline void draw_heatmap(io::Svg& svg, const io::Frame& f, const Grid2D& g, double scale) {
  const auto& s = g.spec;
  const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
  const double span = *hi - *lo;
  const double dx = s.nx > 1 ? s.dx() : (f.x1 - f.x0);
  const double dz = s.nz > 1 ? s.dz() : (f.y1 - f.y0);
  for (std::size_t j = 0; j < s.nz; ++j)
    for (std::size_t i = 0; i < s.nx; ++i) {
      const double x = s.x(i) / scale, z = s.z(j) / scale;
      const double ax = std::max(f.px(x - dx / scale / 2), f.left);
      const double bx = std::min(f.px(x + dx / scale / 2), f.left + f.width);
      const double ay = std::max(f.py(z + dz / scale / 2), f.top);
      const double by = std::min(f.py(z - dz / scale / 2), f.top + f.height);
      if (bx <= ax || by <= ay) continue;
      const double t = span > 0 ? (g.at(i, j) - *lo) / span : 0.5;
      svg.rect(ax, ay, bx - ax, by - ay, io::ramp_color(t), "shape-rendering=\"crispEdges\"");
    }
}

/// Wire cross-section at z' in [0, t] and the diamond surface at z' = 0.
inline void draw_wire(io::Svg& svg, const io::Frame& f, const WireGeometry& g) {
  const double hw = to_nm(g.width) / 2, t = to_nm(g.thickness);
  const double ax = std::clamp(f.px(-hw), f.left, f.left + f.width);
  const double bx = std::clamp(f.px(hw), f.left, f.left + f.width);
  const double ay = std::clamp(f.py(t), f.top, f.top + f.height);
  const double by = std::clamp(f.py(0), f.top, f.top + f.height);
  if (bx > ax && by > ay) svg.rect(ax, ay, bx - ax, by - ay, "none", "stroke=\"white\" stroke-width=\"1.5\"");
  if (0 >= f.y0 && 0 <= f.y1) svg.line(f.left, f.py(0), f.left + f.width, f.py(0), "red", 2);
}

/// Field-versus-current points with the fitted line; x in uA, y in uT.
inline std::string line_fit_svg(const std::vector<CurrentSample>& pts, const LinearFit& fit, bool fold,
                                 const std::string& ylabel) {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (const auto& p : pts) {
    const double x = (fold ? std::abs(p.current) : p.current) / units::uA, y = p.value / units::uT;
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  const double py = 0.05 * std::max(y1 - y0, 1.0), px = 0.05 * std::max(x1 - x0, 1.0);
  const io::Frame f{x0 - px, x1 + px, y0 - py, y1 + py, 80, 20, 480, 320};
  io::Svg svg(600, 390);
  svg.axes(f, fold ? "|current| (uA)" : "current (uA)", ylabel);
  const double slope = fit.slope, icpt = fit.intercept / units::uT;  // uT per uA == T/A
  svg.line(f.px(f.x0), f.py(slope * f.x0 + icpt), f.px(f.x1), f.py(slope * f.x1 + icpt), "#3b528b", 1.5);
  for (const auto& p : pts)
    svg.circle(f.px((fold ? std::abs(p.current) : p.current) / units::uA), f.py(p.value / units::uT), 3.5, "black");
  return svg.str();
}

// ---------------------------------------------------------------------------
// fieldmap
// ---------------------------------------------------------------------------

inline int cmd_fieldmap(const Run& run) {
  const auto g = wire(run.cfg);
  const auto spec = grid(run.cfg);
  const auto m = model(run.cfg);
  const double current = num(run.cfg, "/fieldmap/current_mA") * units::mA;
  io::ensure_directory(run.out);

  Grid2D field = field_magnitude_grid(g, current, spec, m);
  io::Table t{{"x_nm", "z_nm", "B_mT"}, {}};
  for (std::size_t j = 0; j < spec.nz; ++j)
    for (std::size_t i = 0; i < spec.nx; ++i) t.rows.push_back({to_nm(spec.x(i)), to_nm(spec.z(j)), field.at(i, j) / units::mT});
  io::write_text(run.out / "fieldmap.csv", io::to_csv(t));

  Grid2D mt = field;
  for (auto& v : mt.values) v /= units::mT;
  const auto f = spatial_frame(to_nm(spec.x_min), to_nm(spec.x_max), to_nm(spec.z_min), to_nm(spec.z_max));
  io::Svg svg(f.left + f.width + 20, f.top + f.height + 50);
  svg.comment("config " + run.hash);
  draw_heatmap(svg, f, mt, units::nm);
  draw_wire(svg, f, g);
  svg.axes(f, "x' (nm)", "z' (nm)");
  {
    const auto [lo, hi] = std::minmax_element(mt.values.begin(), mt.values.end());
    svg.text(f.left + f.width, f.top + f.height + 32, "|B| " + io::fmt(std::round(*lo * 1e4) / 1e4) + " to " +
                                                          io::fmt(std::round(*hi * 1e4) / 1e4) + " mT",
             "text-anchor=\"end\"");
  }
  io::write_text(run.out / "fieldmap.svg", svg.str());

  const auto [lo, hi] = std::minmax_element(mt.values.begin(), mt.values.end());
  json r;
  r["current_mA"] = current / units::mA;
  r["model"] = to_string(m);
  r["points"] = spec.size();
  r["B_min_mT"] = *lo;
  r["B_max_mT"] = *hi;
  r["files"] = {"fieldmap.csv", "fieldmap.svg"};
  emit(run, "fieldmap.json", envelope("fieldmap", run, r));
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const Run& run) {
  const auto c = spin_constants(run.cfg);
  const auto kind = str(run.cfg, "/simulate/kind");
  if (kind != "odmr" && kind != "nutation")
    fail(ErrorKind::validation, "unknown simulate kind '" + kind + "' (expected odmr|nutation)");
  const std::string sec = "/simulate/" + kind;
  const auto currents = numbers(run.cfg, sec + "/currents_uA");
  require(!currents.empty(), "simulate needs at least one current");
  const double az = num(run.cfg, "/simulate/alpha_z_T_per_A");
  const double bz0 = num(run.cfg, "/simulate/bz_ambient_uT") * units::uT;
  const double ap = num(run.cfg, "/simulate/alpha_perp_T_per_A");
  const double bp0 = num(run.cfg, "/simulate/bperp_ambient_uT") * units::uT;
  const auto seed = static_cast<std::uint64_t>(count(run.cfg, "/seed"));
  io::ensure_directory(run.out);

  json files = json::array();
  for (std::size_t k = 0; k < currents.size(); ++k) {
    const double i0 = currents[k] * units::uA;
    const double bz = az * i0 + bz0;
    const std::uint64_t s = mix64(seed) + k;
    const std::string stem = kind + "_" + std::to_string(k);
    io::Table t;
    if (kind == "odmr") {
      OdmrSynthesis o;
      o.linewidth = num(run.cfg, sec + "/linewidth_MHz") * units::MHz;
      o.contrast = num(run.cfg, sec + "/contrast");
      o.rate = num(run.cfg, sec + "/rate_cps");
      o.integration = num(run.cfg, sec + "/integration_s");
      o.half_span = num(run.cfg, sec + "/half_span_MHz") * units::MHz;
      o.points = count(run.cfg, sec + "/points");
      o.shot_noise = run.cfg.at(json::json_pointer(sec + "/shot_noise")).get<bool>();
      const auto sp = synth_odmr(c, bz, i0, o, s);
      t.columns = {"freq_hz", "pl_cps"};
      for (std::size_t n = 0; n < sp.frequency.size(); ++n) t.rows.push_back({sp.frequency[n], sp.pl[n]});
    } else {
      NutationSynthesis o;
      o.noise = num(run.cfg, sec + "/noise");
      o.readout_contrast = num(run.cfg, sec + "/readout_contrast");
      o.span = num(run.cfg, sec + "/span_us") * units::us;
      o.points = count(run.cfg, sec + "/points");
      const double bp = std::abs(ap * i0 + bp0);
      const auto tr = synth_nutation(c, bz, bp, i0, o, s);
      t.columns = {"delay_s", "contrast"};
      for (std::size_t n = 0; n < tr.delay.size(); ++n) t.rows.push_back({tr.delay[n], tr.signal[n]});
    }
    io::write_text(run.out / (stem + ".csv"), io::to_csv(t));
    json side;
    side["i0_amp"] = i0;
    side["seed"] = s;
    side["config_hash"] = run.hash;
    io::write_text(run.out / (stem + ".json"), side.dump(2) + "\n");
    files.push_back({{"file", stem + ".csv"}, {"current_uA", currents[k]}, {"bz_uT", bz / units::uT}, {"seed", s}});
  }
  json r;
  r["kind"] = kind;
  r["files"] = files;
  emit(run, "simulate.json", envelope("simulate", run, r));
  return 0;
}

// ---------------------------------------------------------------------------
// Input series
// ---------------------------------------------------------------------------

/// Current of a data file: a constant `current_amp` column, else the
/// `i0_amp` field of the sidecar <stem>.json.
inline double file_current(const fs::path& path, const io::Table& t) {
  if (t.has("current_amp")) {
    const auto col = t.column("current_amp");
    require(!col.empty(), path.string() + ": no data rows");
    for (double v : col) require(v == col.front(), path.string() + ": current_amp column is not constant");
    return col.front();
  }
  fs::path side = path;
  side.replace_extension(".json");
  if (!fs::exists(side))
    fail(ErrorKind::validation, path.string() + ": no current_amp column and no sidecar " + side.string());
  const json j = read_json(side);
  if (!j.contains("i0_amp") || !j["i0_amp"].is_number())
    fail(ErrorKind::parse, side.string() + ": missing numeric i0_amp");
  return j["i0_amp"].get<double>();
}

inline std::vector<std::string> input_files(const Run& run, const std::string& pointer) {
  auto files = strings(run.cfg, pointer);
  return files;
}

inline json line_json(const LinearFit& f, const std::string& slope_key, const std::string& icpt_key) {
  json j;
  j[slope_key] = f.slope;
  j[slope_key + "_se"] = f.slope_se;
  j[icpt_key] = f.intercept / units::uT;
  j[icpt_key + "_se"] = f.intercept_se / units::uT;
  j["residual_rms_uT"] = f.residual_rms / units::uT;
  j["points"] = f.points;
  return j;
}

// ---------------------------------------------------------------------------
// fit-odmr
// ---------------------------------------------------------------------------

inline int cmd_fit_odmr(const Run& run) {
  const auto c = spin_constants(run.cfg);
  FourGaussianOptions opt;
  opt.smoothing_window = static_cast<int>(count(run.cfg, "/odmr_fit/smoothing_window"));
  opt.prominence = num(run.cfg, "/odmr_fit/prominence");
  const auto files = input_files(run, "/odmr_fit/files");
  if (files.size() < 3)
    fail(ErrorKind::insufficient_data,
         "fit-odmr needs at least 3 spectra at distinct currents, got " + std::to_string(files.size()));
  std::vector<OdmrSpectrum> spectra;
  for (const auto& f : files) {
    const auto t = io::read_csv(f, {"freq_hz", "pl_cps"});
    OdmrSpectrum s;
    s.frequency = t.column("freq_hz");
    s.pl = t.column("pl_cps");
    s.current = file_current(f, t);
    spectra.push_back(std::move(s));
  }
  io::ensure_directory(run.out);

  json r;
  r["files"] = files;
  std::optional<Error> error;
  OdmrSeriesResult series;
  try {
    series = fit_odmr_series(spectra, files, c, opt);
  } catch (const Error& e) {
    error = e;
    // Keep the per-spectrum outcomes even when the line fit cannot be made.
    series.reports.clear();
    for (std::size_t k = 0; k < spectra.size(); ++k) {
      SpectrumReport rep;
      rep.source = files[k];
      rep.current = spectra[k].current;
      try {
        rep.fit = fit_four_gaussians(spectra[k], c, opt);
        rep.bz = bz_from_centers(*rep.fit, c);
        rep.status = SeriesStatus::used;
      } catch (const Error& inner) {
        rep.message = inner.what();
      }
      series.reports.push_back(rep);
    }
  }
  json reports = json::array();
  std::vector<CurrentSample> pts;
  for (const auto& rep : series.reports) {
    json j;
    j["file"] = rep.source;
    j["current_uA"] = rep.current / units::uA;
    j["status"] = to_string(rep.status);
    if (!rep.message.empty()) j["message"] = rep.message;
    if (rep.fit) {
      j["baseline_cps"] = rep.fit->baseline;
      j["residual_rms_cps"] = rep.fit->residual_rms;
      j["labels_ambiguous"] = rep.fit->labels_ambiguous;
      json lines = json::array();
      for (const auto& l : rep.fit->lines)
        lines.push_back({{"center_MHz", l.center / units::MHz},
                         {"center_se_MHz", l.center_se / units::MHz},
                         {"sigma_MHz", l.sigma / units::MHz},
                         {"amplitude_cps", l.amplitude},
                         {"branch", l.branch == Branch::plus ? "+" : "-"},
                         {"m_i", l.m_i}});
      j["lines"] = lines;
    }
    if (rep.bz && rep.status == SeriesStatus::used) {
      j["bz_uT"] = rep.bz->value / units::uT;
      j["bz_se_uT"] = rep.bz->standard_error / units::uT;
      pts.push_back({rep.current, rep.bz->value});
    }
    reports.push_back(j);
  }
  r["spectra"] = reports;
  if (series.alpha_z) {
    r["alpha_z"] = line_json(*series.alpha_z, "alpha_z_T_per_A", "intercept_uT");
    io::write_text(run.out / "fit_odmr.svg", line_fit_svg(pts, *series.alpha_z, false, "B_z (uT)"));
  }
  if (!error && series.any_failed)
    error = Error(ErrorKind::fit_failure, "one or more spectra failed to fit (see fit_odmr.json)");
  r["status"] = error ? "failed" : "ok";
  if (error) r["error"] = {{"kind", to_string(error->kind())}, {"message", error->what()}};
  emit(run, "fit_odmr.json", envelope("fit-odmr", run, r));
  if (error) throw *error;
  return 0;
}

// ---------------------------------------------------------------------------
// fit-nutation
// ---------------------------------------------------------------------------

/// alpha_z (T/A) and B_z intercept (T): from a fit-odmr result when given,
/// else from the config.
inline std::pair<double, double> bz_line(const Run& run, json& provenance) {
  const auto path = str(run.cfg, "/nutation_fit/odmr_result");
  if (!path.empty()) {
    const json j = read_json(path);
    const json* a = nullptr;
    if (j.contains("result") && j["result"].contains("alpha_z")) a = &j["result"]["alpha_z"];
    if (!a || !a->contains("alpha_z_T_per_A") || !a->contains("intercept_uT"))
      fail(ErrorKind::parse, path + ": no alpha_z line (expected a fit-odmr result)");
    provenance = {{"source", path}};
    return {(*a)["alpha_z_T_per_A"].get<double>(), (*a)["intercept_uT"].get<double>() * units::uT};
  }
  const json& az = run.cfg.at(json::json_pointer("/nutation_fit/alpha_z_T_per_A"));
  if (az.is_null())
    fail(ErrorKind::validation, "fit-nutation needs B_z: pass --odmr-result or set nutation_fit.alpha_z_T_per_A");
  provenance = {{"source", "config"}};
  return {az.get<double>(), num(run.cfg, "/nutation_fit/bz_intercept_uT") * units::uT};
}

inline int cmd_fit_nutation(const Run& run) {
  const auto c = spin_constants(run.cfg);
  const auto mode = line_model(run.cfg);
  SinusoidOptions opt;
  opt.min_peak_ratio = num(run.cfg, "/nutation_fit/min_peak_ratio");
  const auto files = input_files(run, "/nutation_fit/files");
  if (files.size() < 3)
    fail(ErrorKind::insufficient_data,
         "fit-nutation needs at least 3 traces at distinct currents, got " + std::to_string(files.size()));
  json provenance;
  const auto [alpha_z, intercept] = bz_line(run, provenance);
  std::vector<NutationTrace> traces;
  for (const auto& f : files) {
    const auto t = io::read_csv(f, {"delay_s", "contrast"});
    NutationTrace tr;
    tr.delay = t.column("delay_s");
    tr.signal = t.column("contrast");
    tr.current = file_current(f, t);
    traces.push_back(std::move(tr));
  }
  io::ensure_directory(run.out);

  json r;
  r["files"] = files;
  r["line_model"] = to_string(mode);
  r["bz_line"] = provenance;
  r["bz_line"]["alpha_z_T_per_A"] = alpha_z;
  r["bz_line"]["intercept_uT"] = intercept / units::uT;

  std::optional<Error> error;
  NutationSeriesResult series;
  try {
    series = fit_nutation_series(traces, files, alpha_z, intercept, c, mode, opt);
  } catch (const Error& e) {
    error = e;
  }
  // On a failed line fit, redo the per-trace part for the report.
  if (error) {
    series.reports.clear();
    for (std::size_t k = 0; k < traces.size(); ++k) {
      TraceReport rep;
      rep.source = files[k];
      rep.current = traces[k].current;
      rep.bz = alpha_z * rep.current + intercept;
      try {
        rep.fit = fit_sinusoid(traces[k], opt);
        rep.b_perp = bperp_from_omega(rep.fit->frequency, rep.bz, c);
        rep.status = SeriesStatus::used;
      } catch (const Error& e) {
        rep.message = e.what();
      }
      series.reports.push_back(rep);
    }
  }
  json reports = json::array();
  std::vector<CurrentSample> pts;
  for (const auto& rep : series.reports) {
    json j;
    j["file"] = rep.source;
    j["current_uA"] = rep.current / units::uA;
    j["status"] = to_string(rep.status);
    if (!rep.message.empty()) j["message"] = rep.message;
    j["bz_uT"] = rep.bz / units::uT;
    if (rep.fit) {
      j["frequency_kHz"] = rep.fit->frequency / units::kHz;
      j["frequency_se_kHz"] = rep.fit->frequency_se / units::kHz;
      j["amplitude"] = rep.fit->amplitude;
      j["phase_rad"] = rep.fit->phase;
      j["offset"] = rep.fit->offset;
      j["peak_ratio"] = rep.fit->peak_ratio;
    }
    if (rep.b_perp) {
      j["bperp_uT"] = *rep.b_perp / units::uT;
      pts.push_back({rep.current, *rep.b_perp});
    }
    reports.push_back(j);
  }
  r["traces"] = reports;
  if (series.alpha_perp) {
    r["alpha_perp"] = line_json(*series.alpha_perp, "alpha_perp_T_per_A", "intercept_uT");
    const bool fold = mode == PerpLineModel::folded;
    io::write_text(run.out / "fit_nutation.svg", line_fit_svg(pts, *series.alpha_perp, fold, "B_perp (uT)"));
  }
  if (!error && series.any_failed)
    error = Error(ErrorKind::fit_failure, "one or more traces failed to fit (see fit_nutation.json)");
  r["status"] = error ? "failed" : "ok";
  if (error) r["error"] = {{"kind", to_string(error->kind())}, {"message", error->what()}};
  emit(run, "fit_nutation.json", envelope("fit-nutation", run, r));
  if (error) throw *error;
  return 0;
}

// ---------------------------------------------------------------------------
// locate
// ---------------------------------------------------------------------------

/// Reads alpha_z / alpha_perp (and optionally sigma_alpha), T/A, from a job
/// file with plain keys, or from fit-odmr / fit-nutation results.
inline void apply_alpha_json(json& cfg, const std::string& path) {
  const json j = read_json(path);
  auto set = [&](const char* key, double v) { cfg["measurement"][key] = v; };
  bool found = false;
  for (const char* k : {"alpha_z", "alpha_perp", "sigma_alpha"})
    if (j.contains(k)) {
      if (!j[k].is_number()) fail(ErrorKind::parse, path + ": " + k + " must be a number");
      set((std::string(k) + "_T_per_A").c_str(), j[k].get<double>());
      found = true;
    }
  if (j.contains("result")) {
    const auto& r = j["result"];
    if (r.contains("alpha_z") && r["alpha_z"].contains("alpha_z_T_per_A"))
      set("alpha_z_T_per_A", r["alpha_z"]["alpha_z_T_per_A"].get<double>()), found = true;
    if (r.contains("alpha_perp") && r["alpha_perp"].contains("alpha_perp_T_per_A"))
      set("alpha_perp_T_per_A", r["alpha_perp"]["alpha_perp_T_per_A"].get<double>()), found = true;
    if (r.contains("bz_line") && r["bz_line"].contains("alpha_z_T_per_A"))
      set("alpha_z_T_per_A", r["bz_line"]["alpha_z_T_per_A"].get<double>()), found = true;
  }
  if (!found) fail(ErrorKind::parse, path + ": no alpha values found");
}

inline json contour_json(const Contour& c) {
  json lines = json::array();
  for (const auto& l : c.lines) {
    json pts = json::array();
    for (const auto& p : l.points) pts.push_back({to_nm(p[0]), to_nm(p[1])});
    lines.push_back({{"closed", l.closed}, {"points_nm", pts}});
  }
  return {{"mass", c.mass}, {"threshold_per_nm2", c.threshold * units::nm * units::nm}, {"lines", lines}};
}

inline int cmd_locate(const Run& run) {
  const auto m = measurement(run.cfg);
  const auto pr = prior(run.cfg);
  const auto axis = nv_axis(run.cfg);
  const auto wm = model(run.cfg);
  const auto bo = bootstrap(run.cfg);
  io::ensure_directory(run.out);

  const auto point = fit_position(m, pr.nominal, axis, wm, bo.search);
  const auto boot = bootstrap_positions(m, pr, axis, wm, bo);
  const auto est = summarize(boot.samples);

  json r;
  r["model"] = to_string(wm);
  r["input"] = {{"alpha_z_T_per_A", m.alpha_z}, {"alpha_perp_T_per_A", m.alpha_perp}, {"sigma_alpha_T_per_A", m.sigma_alpha}};
  json pf = {{"x_nm", to_nm(point.x)},
             {"z_nm", to_nm(point.z)},
             {"residual_T_per_A", point.residual},
             {"model_alpha_z_T_per_A", point.model.alpha_z},
             {"model_alpha_perp_T_per_A", point.model.alpha_perp},
             {"mirror_ambiguous", point.mirror_ambiguous}};
  if (point.mirror) pf["mirror"] = {{"x_nm", to_nm(point.mirror->x)}, {"z_nm", to_nm(point.mirror->z)}};
  r["point_fit"] = pf;
  r["bootstrap"] = {{"n", bo.n},
                    {"seed", bo.seed},
                    {"successes", boot.samples.size()},
                    {"failures", boot.failures},
                    {"failure_fraction", boot.failure_fraction},
                    {"mirror_ambiguous_draws", boot.mirror_ambiguous}};
  r["estimate"] = {{"mean_x_nm", to_nm(est.x)}, {"mean_z_nm", to_nm(est.z)},
                   {"std_x_nm", to_nm(est.std_x)}, {"std_z_nm", to_nm(est.std_z)}};

  io::Table samples{{"x_nm", "z_nm"}, {}};
  for (const auto& s : boot.samples) samples.rows.push_back({to_nm(s.x), to_nm(s.z)});
  io::write_text(run.out / "samples.csv", io::to_csv(samples));

  std::optional<PositionPDF> pdf;
  if (boot.samples.size() >= 100) {
    const auto spec = auto_pdf_grid(boot.samples, count(run.cfg, "/pdf/nx"), count(run.cfg, "/pdf/nz"));
    std::optional<std::array<double, 2>> bw;
    const double hx = num(run.cfg, "/pdf/bandwidth_x_nm"), hz = num(run.cfg, "/pdf/bandwidth_z_nm");
    if (hx > 0 || hz > 0) {
      require(hx > 0 && hz > 0, "set both pdf bandwidths or neither");
      bw = std::array<double, 2>{hx * units::nm, hz * units::nm};
    }
    pdf = position_pdf(boot.samples, spec, bw, numbers(run.cfg, "/pdf/mass_levels"));
    json contours = json::array();
    for (const auto& c : pdf->contours) contours.push_back(contour_json(c));
    r["pdf"] = {{"bandwidth_x_nm", to_nm(pdf->bandwidth_x)},
                {"bandwidth_z_nm", to_nm(pdf->bandwidth_z)},
                {"delta_like", pdf->delta_like},
                {"mode_x_nm", to_nm(pdf->mode_x)},
                {"mode_z_nm", to_nm(pdf->mode_z)},
                {"local_maxima", count_modes(pdf->density)},
                {"contours", contours}};
    io::Table t{{"x_nm", "z_nm", "density_per_nm2"}, {}};
    for (std::size_t j = 0; j < spec.nz; ++j)
      for (std::size_t i = 0; i < spec.nx; ++i)
        t.rows.push_back({to_nm(spec.x(i)), to_nm(spec.z(j)), pdf->density.at(i, j) * units::nm * units::nm});
    io::write_text(run.out / "pdf.csv", io::to_csv(t));
  } else {
    r["pdf"] = nullptr;
    r["pdf_note"] = "fewer than 100 successful draws; no density map";
  }

  // Overlay: field magnitude at 1 mA over the config grid widened to the
  // PDF region, wire, surface, contours and the point fit.
  auto spec = grid(run.cfg);
  if (pdf) {
    spec.x_min = std::min(spec.x_min, pdf->density.spec.x_min);
    spec.x_max = std::max(spec.x_max, pdf->density.spec.x_max);
    spec.z_min = std::min(spec.z_min, pdf->density.spec.z_min);
    spec.z_max = std::max(spec.z_max, pdf->density.spec.z_max);
  }
  spec.nx = std::max<std::size_t>(spec.nx, 2);
  spec.nz = std::max<std::size_t>(spec.nz, 2);
  const auto field = field_magnitude_grid(pr.nominal, 1e-3, spec, WireModel::infinite);
  const auto f = spatial_frame(to_nm(spec.x_min), to_nm(spec.x_max), to_nm(spec.z_min), to_nm(spec.z_max));
  io::Svg svg(f.left + f.width + 20, f.top + f.height + 50);
  svg.comment("config " + run.hash);
  draw_heatmap(svg, f, field, units::nm);
  draw_wire(svg, f, pr.nominal);
  if (pdf) {
    const char* colors[] = {"white", "#dddddd", "#aaaaaa"};
    std::size_t k = 0;
    for (const auto& c : pdf->contours) {
      for (const auto& l : c.lines) {
        std::vector<std::array<double, 2>> px;
        for (const auto& p : l.points) px.push_back({f.px(to_nm(p[0])), f.py(to_nm(p[1]))});
        if (l.closed && !px.empty()) px.push_back(px.front());
        svg.polyline(px, colors[std::min<std::size_t>(k, 2)], 1.2);
      }
      ++k;
    }
  }
  svg.circle(f.px(to_nm(point.x)), f.py(to_nm(point.z)), 3, "red");
  svg.axes(f, "x' (nm)", "z' (nm)");
  io::write_text(run.out / "locate.svg", svg.str());

  r["files"] = pdf ? json{"samples.csv", "pdf.csv", "locate.svg"} : json{"samples.csv", "locate.svg"};
  emit(run, "locate.json", envelope("locate", run, r));
  return 0;
}

// ---------------------------------------------------------------------------
// couple
// ---------------------------------------------------------------------------

inline int cmd_couple(const Run& run) {
  const auto c = spin_constants(run.cfg);
  const auto res = resonator(run.cfg);
  const json& gk = run.cfg.at(json::json_pointer("/couple/g_kHz"));
  io::ensure_directory(run.out);
  json r;
  CouplingEstimate g;
  if (!gk.is_null()) {
    g = coupling_from_frequency(gk.get<double>() * units::kHz, res);
    r["source"] = "g_kHz";
  } else {
    const double ap = num(run.cfg, "/measurement/alpha_perp_T_per_A");
    g = coupling_constant(ap, res, c);
    g.detection_time = detection_time(g, res);
    r["source"] = "alpha_perp";
    r["alpha_perp_T_per_A"] = ap;
  }
  r["g_over_2pi_Hz"] = g.g_over_2pi;
  r["g_angular_rad_per_s"] = g.g_angular;
  r["detection_time_s"] = g.detection_time;
  emit(run, "couple.json", envelope("couple", run, r));
  return 0;
}

}  // namespace nvloc::cli

#endif  // NVLOC_TOOLS_COMMANDS_HPP
