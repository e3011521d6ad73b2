// nvloc: field maps, synthetic data, ODMR / nutation fits, NV localization
// and coupling estimates from one JSON config.

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nvloc/commands.hpp"

using namespace nvloc;
using namespace nvloc::cli;

namespace {

struct Flag {
  std::string name;
  std::string pointer;
  std::string help;
  bool list = false;
};

// Flags shared by every subcommand.
const std::vector<Flag> kCommon = {
    {"--out", "/output_dir", "output directory"},
    {"--seed", "/seed", "RNG seed"},
    {"--model", "/model", "wire model: infinite|finite"},
    {"--width-nm", "/wire/width_nm", "wire width"},
    {"--thickness-nm", "/wire/thickness_nm", "wire thickness"},
    {"--length-nm", "/wire/length_nm", "wire length (finite model)"},
};

const std::map<std::string, std::vector<Flag>> kFlags = {
    {"fieldmap",
     {{"--current-mA", "/fieldmap/current_mA", "wire current"},
      {"--x-min-nm", "/grid/x_min_nm", "grid"},
      {"--x-max-nm", "/grid/x_max_nm", "grid"},
      {"--nx", "/grid/nx", "grid points along x'"},
      {"--z-min-nm", "/grid/z_min_nm", "grid"},
      {"--z-max-nm", "/grid/z_max_nm", "grid"},
      {"--nz", "/grid/nz", "grid points along z'"}}},
    {"simulate",
     {{"--kind", "/simulate/kind", "odmr|nutation"},
      {"--alpha-z-T-per-A", "/simulate/alpha_z_T_per_A", "true alpha_z"},
      {"--alpha-perp-T-per-A", "/simulate/alpha_perp_T_per_A", "true alpha_perp"},
      {"--bz-ambient-uT", "/simulate/bz_ambient_uT", "B_z at zero current"},
      {"--bperp-ambient-uT", "/simulate/bperp_ambient_uT", "B_perp at zero current"},
      {"--contrast", "/simulate/odmr/contrast", "ODMR dip depth"},
      {"--noise", "/simulate/nutation/noise", "nutation noise sigma"}}},
    {"fit-odmr",
     {{"--smoothing-window", "/odmr_fit/smoothing_window", "dip detection smoothing"},
      {"--prominence", "/odmr_fit/prominence", "dip prominence in noise units"}}},
    {"fit-nutation",
     {{"--odmr-result", "/nutation_fit/odmr_result", "fit-odmr JSON with the B_z line"},
      {"--alpha-z-T-per-A", "/nutation_fit/alpha_z_T_per_A", "B_z slope when no --odmr-result"},
      {"--bz-intercept-uT", "/nutation_fit/bz_intercept_uT", "B_z intercept when no --odmr-result"},
      {"--line-model", "/nutation_fit/line_model", "folded|absolute"}}},
    {"locate",
     {{"--alpha-z-T-per-A", "/measurement/alpha_z_T_per_A", "measured alpha_z"},
      {"--alpha-perp-T-per-A", "/measurement/alpha_perp_T_per_A", "measured alpha_perp"},
      {"--sigma-alpha-T-per-A", "/measurement/sigma_alpha_T_per_A", "alpha uncertainty"},
      {"--n", "/bootstrap/n", "bootstrap draws"},
      {"--threads", "/bootstrap/threads", "worker threads (0: NVLOC_THREADS or all)"},
      {"--half-plane", "/search/half_plane", "auto|negative|positive"}}},
    {"couple",
     {{"--alpha-perp-T-per-A", "/measurement/alpha_perp_T_per_A", "alpha_perp"},
      {"--g-kHz", "/couple/g_kHz", "use this g/2pi instead of alpha_perp"},
      {"--delta-i-nA", "/resonator/delta_i_nA", "vacuum current fluctuations"},
      {"--kappa-per-s", "/resonator/kappa_per_s", "resonator damping"},
      {"--gamma2-per-s", "/resonator/gamma2_per_s", "NV decoherence rate"},
      {"--eta", "/resonator/eta", "detection efficiency"}}},
};

const std::map<std::string, std::string> kHelp = {
    {"fieldmap", "|B| of the wire on an (x', z') grid: CSV, SVG heatmap"},
    {"simulate", "synthetic ODMR spectra or nutation traces, one CSV per current"},
    {"fit-odmr", "alpha_z from ODMR spectra at several currents"},
    {"fit-nutation", "alpha_perp from nuclear nutation traces at several currents"},
    {"locate", "NV position with bootstrap errors, density map and contours"},
    {"couple", "spin-resonator coupling and single-spin detection time"},
};

int report(const Error& e) {
  std::cerr << "nvloc: " << to_string(e.kind()) << ": " << e.what() << "\n";
  return exit_code(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center localization next to a nanowire"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> values;  // by flag name
    std::vector<std::string> files;
    std::string currents;
    std::string alpha_json;
    std::vector<Flag> flags;
  };
  std::map<std::string, Sub> subs;
  for (const auto& [name, help] : kHelp) {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", s.config, "JSON config file");
    s.flags = kCommon;
    const auto& extra = kFlags.at(name);
    s.flags.insert(s.flags.end(), extra.begin(), extra.end());
    for (const auto& f : s.flags) s.app->add_option(f.name, s.values[f.name], f.help + " [" + f.pointer + "]");
  }
  subs["simulate"].app->add_option("--currents-uA", subs["simulate"].currents, "comma-separated currents");
  subs["fit-odmr"].app->add_option("files", subs["fit-odmr"].files, "ODMR CSV files");
  subs["fit-nutation"].app->add_option("files", subs["fit-nutation"].files, "nutation CSV files");
  for (const char* n : {"locate", "couple"})
    subs[n].app->add_option("--alpha-json", subs[n].alpha_json, "JSON with alpha values (job file or fit result)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::validation);
  }

  const std::map<std::string, std::function<int(const Run&)>> commands = {
      {"fieldmap", cmd_fieldmap},         {"simulate", cmd_simulate}, {"fit-odmr", cmd_fit_odmr},
      {"fit-nutation", cmd_fit_nutation}, {"locate", cmd_locate},     {"couple", cmd_couple},
  };

  for (auto& [name, s] : subs) {
    if (!s.app->parsed()) continue;
    try {
      std::vector<Override> overrides;
      for (const auto& f : s.flags)
        if (s.app->count(f.name) > 0) overrides.push_back({f.pointer, s.values[f.name], f.list});
      if (name == "simulate" && s.app->count("--currents-uA") > 0) {
        overrides.push_back({"/simulate/odmr/currents_uA", s.currents, true});
        overrides.push_back({"/simulate/nutation/currents_uA", s.currents, true});
      }
      // Defaults, config file, alpha file, then flags.
      json cfg = resolve_config(s.config, {});
      if (!s.alpha_json.empty()) apply_alpha_json(cfg, s.alpha_json);
      for (const auto& o : overrides) apply_override(cfg, o);
      if (!s.files.empty()) cfg[name == "fit-odmr" ? "odmr_fit" : "nutation_fit"]["files"] = s.files;
      return commands.at(name)(Run(std::move(cfg)));
    } catch (const Error& e) {
      return report(e);
    } catch (const json::exception& e) {
      return report(Error(ErrorKind::validation, std::string("config: ") + e.what()));
    } catch (const std::exception& e) {
      return report(Error(ErrorKind::numerical, e.what()));
    }
  }
  return exit_code(ErrorKind::validation);
}
