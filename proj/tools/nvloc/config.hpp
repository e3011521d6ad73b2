#ifndef NVLOC_TOOLS_CONFIG_HPP
#define NVLOC_TOOLS_CONFIG_HPP

// Run configuration: JSON with unit-suffixed keys, merged over defaults,
// then resolved into SI-valued library structs.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "nvloc/coupling.hpp"
#include "nvloc/density.hpp"
#include "nvloc/errors.hpp"
#include "nvloc/fitting.hpp"
#include "nvloc/grid.hpp"
#include "nvloc/io.hpp"
#include "nvloc/locator.hpp"
#include "nvloc/spin_model.hpp"
#include "nvloc/wire_field.hpp"

namespace nvloc::cli {

using json = nlohmann::ordered_json;

inline json default_config() {
  return json::parse(R"({
  "output_dir": "nvloc_out",
  "seed": 1,
  "model": "infinite",
  "spin": {
    "zero_field_splitting_MHz": 2870,
    "gamma_e_MHz_per_T": 28000,
    "gamma_n_MHz_per_T": -4.3,
    "hyperfine_parallel_MHz": 3.03,
    "hyperfine_perp_MHz": 3.65,
    "gamma_n_perp_MHz_per_T": 75
  },
  "wire": {"width_nm": 36, "thickness_nm": 20, "length_nm": 500},
  "nv_axis": {"nv_direction": [1, 1, 1], "wire_direction": [1, 1, 0], "surface_normal": [0, 0, 1]},
  "grid": {"x_min_nm": -200, "x_max_nm": 200, "nx": 101, "z_min_nm": -100, "z_max_nm": 50, "nz": 51},
  "fieldmap": {"current_mA": 1},
  "measurement": {"alpha_z_T_per_A": 1.4, "alpha_perp_T_per_A": 1.9, "sigma_alpha_T_per_A": 0.02},
  "prior": {"width_sigma_nm": 5, "thickness_sigma_nm": 2, "rel_perp": 0.011, "rel_z": 0.037},
  "search": {
    "x_min_nm": -300, "x_max_nm": 300, "z_min_nm": -100, "z_max_nm": -1,
    "pitch_nm": 2, "tolerance_nm": 0.01, "max_residual_sigmas": 5, "half_plane": "auto"
  },
  "bootstrap": {"n": 5000, "threads": 0, "max_failure_fraction": 0.1},
  "pdf": {"nx": 121, "nz": 121, "bandwidth_x_nm": 0, "bandwidth_z_nm": 0, "mass_levels": [0.39, 0.86, 0.99]},
  "resonator": {"delta_i_nA": 35, "kappa_per_s": 1e5, "gamma2_per_s": 1e5, "eta": 1},
  "odmr_fit": {"files": [], "smoothing_window": 5, "prominence": 4},
  "nutation_fit": {
    "files": [], "line_model": "folded", "min_peak_ratio": 3,
    "odmr_result": "", "alpha_z_T_per_A": null, "bz_intercept_uT": 0
  },
  "simulate": {
    "kind": "odmr",
    "alpha_z_T_per_A": 1.4, "bz_ambient_uT": 30,
    "alpha_perp_T_per_A": 1.9, "bperp_ambient_uT": 0,
    "odmr": {
      "currents_uA": [-240, -160, 0, 160, 240],
      "linewidth_MHz": 1, "contrast": 0.03, "rate_cps": 1e5, "integration_s": 1, "half_span_MHz": 25, "points": 501,
      "shot_noise": true
    },
    "nutation": {
      "currents_uA": [240, 160, -120, -240],
      "noise": 0.01, "readout_contrast": 0.3, "span_us": 200, "points": 201
    }
  },
  "couple": {"g_kHz": null}
})");
}

namespace detail {

inline const char* type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_number()) return "number";
  return j.type_name();
}

/// Recursively overlays `user` on `base`. Keys must already exist and
/// keep their JSON type (null defaults accept numbers).
inline void merge(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) fail(ErrorKind::validation, "config " + (where.empty() ? "root" : where) + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where + "/" + it.key();
    if (!base.contains(it.key())) fail(ErrorKind::validation, "unknown config key " + path);
    json& slot = base[it.key()];
    const json& v = it.value();
    if (slot.is_object()) {
      merge(slot, v, path);
      continue;
    }
    const bool ok = (slot.is_number() && v.is_number()) || (slot.is_null() && (v.is_number() || v.is_null())) ||
                    (slot.is_string() && v.is_string()) || (slot.is_array() && v.is_array()) ||
                    (slot.is_boolean() && v.is_boolean());
    if (!ok)
      fail(ErrorKind::validation,
           "config key " + path + " expects a " + type_name(slot) + ", got " + type_name(v));
    slot = v;
  }
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k)
    if (text[k] == '\n') ++line;
  return line;
}

}  // namespace detail

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, source + ":" + std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                               ": invalid JSON (" + e.what() + ")");
  }
}

inline json read_json(const std::filesystem::path& path) { return parse_json_text(io::read_text(path), path.string()); }

/// One flag override: a JSON pointer into the config and the raw text.
struct Override {
  std::string pointer;
  std::string raw;
  bool list = false;  // comma-separated numbers
};

inline void apply_override(json& cfg, const Override& o) {
  const json::json_pointer ptr(o.pointer);
  if (!cfg.contains(ptr)) fail(ErrorKind::validation, "internal: no config key " + o.pointer);
  json& slot = cfg[ptr];
  if (o.list) {
    json arr = json::array();
    std::stringstream ss(o.raw);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') fail(ErrorKind::validation, "flag for " + o.pointer + ": bad number '" + cell + "'");
      arr.push_back(v);
    }
    slot = arr;
  } else if (slot.is_string()) {
    slot = o.raw;
  } else {
    char* end = nullptr;
    const double v = std::strtod(o.raw.c_str(), &end);
    if (o.raw.empty() || *end != '\0' || !std::isfinite(v))
      fail(ErrorKind::validation, "flag for " + o.pointer + ": expected a number, got '" + o.raw + "'");
    if (slot.is_number_integer() || slot.is_number_unsigned()) {
      if (v != std::floor(v)) fail(ErrorKind::validation, "flag for " + o.pointer + ": expected an integer");
      slot = static_cast<long long>(v);
    } else {
      slot = v;
    }
  }
}

/// Defaults, then the config file, then flag overrides (flags win).
inline json resolve_config(const std::string& config_path, const std::vector<Override>& overrides) {
  json cfg = default_config();
  if (!config_path.empty()) detail::merge(cfg, read_json(config_path), "");
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

inline std::string config_hash(const json& cfg) { return io::hex64(io::fnv1a(cfg.dump())); }

// ---------------------------------------------------------------------------
// Typed views
// ---------------------------------------------------------------------------

inline double num(const json& cfg, const std::string& pointer) {
  const json& v = cfg.at(json::json_pointer(pointer));
  if (!v.is_number()) fail(ErrorKind::validation, "config key " + pointer + " must be a number");
  return v.get<double>();
}

inline std::size_t count(const json& cfg, const std::string& pointer) {
  const double v = num(cfg, pointer);
  if (v < 0 || v != std::floor(v)) fail(ErrorKind::validation, "config key " + pointer + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::string str(const json& cfg, const std::string& pointer) {
  return cfg.at(json::json_pointer(pointer)).get<std::string>();
}

inline std::vector<double> numbers(const json& cfg, const std::string& pointer) {
  std::vector<double> out;
  for (const auto& v : cfg.at(json::json_pointer(pointer))) {
    if (!v.is_number()) fail(ErrorKind::validation, "config key " + pointer + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<std::string> strings(const json& cfg, const std::string& pointer) {
  std::vector<std::string> out;
  for (const auto& v : cfg.at(json::json_pointer(pointer))) {
    if (!v.is_string()) fail(ErrorKind::validation, "config key " + pointer + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline SpinConstants spin_constants(const json& cfg) {
  SpinConstants c;
  c.zero_field_splitting = num(cfg, "/spin/zero_field_splitting_MHz") * units::MHz;
  c.gamma_e = num(cfg, "/spin/gamma_e_MHz_per_T") * units::MHz;
  c.gamma_n = num(cfg, "/spin/gamma_n_MHz_per_T") * units::MHz;
  c.hyperfine_parallel = num(cfg, "/spin/hyperfine_parallel_MHz") * units::MHz;
  c.hyperfine_perp = num(cfg, "/spin/hyperfine_perp_MHz") * units::MHz;
  c.gamma_n_perp = num(cfg, "/spin/gamma_n_perp_MHz_per_T") * units::MHz;
  c.validate();
  return c;
}

inline WireGeometry wire(const json& cfg) {
  WireGeometry g;
  g.width = num(cfg, "/wire/width_nm") * units::nm;
  g.thickness = num(cfg, "/wire/thickness_nm") * units::nm;
  g.length = num(cfg, "/wire/length_nm") * units::nm;
  g.validate();
  return g;
}

inline Eigen::Vector3d vec3(const json& cfg, const std::string& pointer) {
  const auto v = numbers(cfg, pointer);
  if (v.size() != 3) fail(ErrorKind::validation, "config key " + pointer + " needs three components");
  return {v[0], v[1], v[2]};
}

inline NVAxis nv_axis(const json& cfg) {
  return NVAxis::from_crystal(vec3(cfg, "/nv_axis/nv_direction"), vec3(cfg, "/nv_axis/wire_direction"),
                              vec3(cfg, "/nv_axis/surface_normal"));
}

inline WireModel model(const json& cfg) { return parse_wire_model(str(cfg, "/model")); }

inline GridSpec grid(const json& cfg) {
  GridSpec g;
  g.x_min = num(cfg, "/grid/x_min_nm") * units::nm;
  g.x_max = num(cfg, "/grid/x_max_nm") * units::nm;
  g.nx = count(cfg, "/grid/nx");
  g.z_min = num(cfg, "/grid/z_min_nm") * units::nm;
  g.z_max = num(cfg, "/grid/z_max_nm") * units::nm;
  g.nz = count(cfg, "/grid/nz");
  g.validate();
  return g;
}

inline AlphaMeasurement measurement(const json& cfg) {
  AlphaMeasurement m;
  m.alpha_z = num(cfg, "/measurement/alpha_z_T_per_A");
  m.alpha_perp = num(cfg, "/measurement/alpha_perp_T_per_A");
  m.sigma_alpha = num(cfg, "/measurement/sigma_alpha_T_per_A");
  m.validate();
  return m;
}

inline GeometryPrior prior(const json& cfg) {
  GeometryPrior p;
  p.nominal = wire(cfg);
  p.width_sigma = num(cfg, "/prior/width_sigma_nm") * units::nm;
  p.thickness_sigma = num(cfg, "/prior/thickness_sigma_nm") * units::nm;
  p.rel_perp = num(cfg, "/prior/rel_perp");
  p.rel_z = num(cfg, "/prior/rel_z");
  p.validate();
  return p;
}

inline SearchOptions search(const json& cfg) {
  SearchOptions s;
  s.x_min = num(cfg, "/search/x_min_nm") * units::nm;
  s.x_max = num(cfg, "/search/x_max_nm") * units::nm;
  s.z_min = num(cfg, "/search/z_min_nm") * units::nm;
  s.z_max = num(cfg, "/search/z_max_nm") * units::nm;
  s.pitch = num(cfg, "/search/pitch_nm") * units::nm;
  s.tolerance = num(cfg, "/search/tolerance_nm") * units::nm;
  s.max_residual_sigmas = num(cfg, "/search/max_residual_sigmas");
  s.half_plane = parse_half_plane(str(cfg, "/search/half_plane"));
  s.validate();
  return s;
}

inline BootstrapOptions bootstrap(const json& cfg) {
  BootstrapOptions b;
  b.n = count(cfg, "/bootstrap/n");
  b.seed = static_cast<std::uint64_t>(count(cfg, "/seed"));
  b.threads = static_cast<unsigned>(count(cfg, "/bootstrap/threads"));
  b.max_failure_fraction = num(cfg, "/bootstrap/max_failure_fraction");
  b.search = search(cfg);
  return b;
}

inline ResonatorParams resonator(const json& cfg) {
  ResonatorParams r;
  r.delta_i = num(cfg, "/resonator/delta_i_nA") * units::nA;
  r.kappa = num(cfg, "/resonator/kappa_per_s");
  r.gamma2 = num(cfg, "/resonator/gamma2_per_s");
  r.eta = num(cfg, "/resonator/eta");
  r.validate();
  return r;
}

inline PerpLineModel line_model(const json& cfg) {
  const auto s = str(cfg, "/nutation_fit/line_model");
  if (s == "folded") return PerpLineModel::folded;
  if (s == "absolute") return PerpLineModel::absolute_line;
  fail(ErrorKind::validation, "unknown nutation line model '" + s + "' (expected folded|absolute)");
}

}  // namespace nvloc::cli

#endif  // NVLOC_TOOLS_CONFIG_HPP
