#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "shockstab/io.hpp"
#include "shockstab/model.hpp"
#include "shockstab/pde.hpp"
#include "shockstab/reduced.hpp"
#include "shockstab/riccati.hpp"
#include "shockstab/spectrum_essential.hpp"
#include "shockstab/wave.hpp"

namespace fs = std::filesystem;
using namespace shockstab;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> k = {
      "eps", "c", "use_paper_eq2_D",
      "wave.L", "wave.rtol",
      "essential.kmax", "essential.n", "essential.probe_re", "essential.probe_im",
      "evans.lambda_re", "evans.lambda_im", "evans.rtol",
      "winding.contour", "winding.center_re", "winding.center_im", "winding.radius",
      "winding.R", "winding.r", "winding.n0",
      "localize.re0", "localize.re1", "localize.im0", "localize.im1", "localize.strips",
      "localize.axis_band", "localize.jitter", "localize.diam_tol", "localize.grid_phase",
      "fast.lo", "fast.hi", "fast.n", "fast.L0",
      "slow.lo", "slow.hi", "slow.n", "slow.section_U",
      "sim.x0", "sim.x1", "sim.nx", "sim.dt", "sim.t_end", "sim.cfl", "sim.n_samples",
      "sim.n_snapshots", "sim.shape", "sim.amplitude", "sim.width", "sim.center",
      "sim.rng_seed",
  };
  return k;
}

// configuration view that records every key it resolves, including defaults,
// so the manifest echoes the complete effective configuration
struct Resolved {
  const Config* cfg;
  std::map<std::string, std::string> used;

  double d(const std::string& k, double dflt) {
    const double v = cfg->get_double(k, dflt);
    used[k] = detail::fmt_g17(v);
    return v;
  }
  long i(const std::string& k, long dflt) {
    const long v = cfg->get_int(k, dflt);
    used[k] = std::to_string(v);
    return v;
  }
  bool b(const std::string& k, bool dflt) {
    const bool v = cfg->get_bool(k, dflt);
    used[k] = v ? "true" : "false";
    return v;
  }
  std::string s(const std::string& k, const std::string& dflt) {
    const std::string v = cfg->get_str(k, dflt);
    used[k] = v;
    return v;
  }
};

struct Ctx {
  std::string config_path;
  std::string outdir = "out";
  std::string wave_prefix;  // defaults to <outdir>/wave
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  Config cfg;
  Resolved rc{&cfg, {}};

  void load() {
    if (!config_path.empty()) cfg = Config::from_file(config_path);
    cfg.validate_keys(known_keys());
    fs::create_directories(outdir);
    if (wave_prefix.empty()) wave_prefix = outdir + "/wave";
  }
  std::string path(const std::string& name) const { return outdir + "/" + name; }
  Model model() {
    ModelParams p;
    p.eps = rc.d("eps", p.eps);
    p.c = rc.d("c", p.c);
    p.use_paper_eq2_D = rc.b("use_paper_eq2_D", false);
    return Model(p);
  }
  void manifest(const std::string& command, const std::vector<std::string>& outputs) {
    write_manifest(path("manifest_" + command + ".json"), command, rc.used, outputs);
  }
};

WaveProfile load_wave(Ctx& ctx, const Model& m) {
  const std::string csv = ctx.wave_prefix + ".csv", js = ctx.wave_prefix + ".json";
  if (!fs::exists(csv) || !fs::exists(js))
    throw ConfigError("wave profile not found at '" + ctx.wave_prefix +
                      ".{csv,json}'; run the 'wave' command first or pass --wave");
  return read_wave_profile(m, csv, js);
}

// ---------------------------------------------------------------------------

int cmd_wave(Ctx& ctx) {
  const Model m = ctx.model();
  WaveBvpOpts opt;
  opt.L = ctx.rc.d("wave.L", opt.L);
  opt.rtol = ctx.rc.d("wave.rtol", opt.rtol);
  const WaveProfile wp = solve_wave_bvp(m, opt);
  write_wave_profile(wp, ctx.wave_prefix + ".csv", ctx.wave_prefix + ".json");
  ordered_json j;
  j["eps"] = wp.eps;
  j["c"] = wp.c;
  j["L"] = wp.L;
  j["N"] = wp.zeta.size();
  j["max_residual"] = wp.max_residual;
  j["bc_residual"] = wp.bc_residual;
  std::cout << j.dump(2) << std::endl;
  ctx.manifest("wave", {ctx.wave_prefix + ".csv", ctx.wave_prefix + ".json"});
  return 0;
}

int cmd_essential(Ctx& ctx) {
  const Model m = ctx.model();
  const double eps = m.eps();
  const double c = m.c();
  const double kmax = ctx.rc.d("essential.kmax", 10.0);
  const long n = ctx.rc.i("essential.n", 2000);
  const double pre = ctx.rc.d("essential.probe_re", 1.0);
  const double pim = ctx.rc.d("essential.probe_im", 0.0);

  std::vector<std::vector<double>> rows;
  for (double Ustar : {1.0, 0.0}) {
    const FredholmBorder b = essential_spectrum_plotdata(m, eps, c, Ustar, kmax, (int)n);
    for (size_t i = 0; i < b.k.size(); ++i)
      rows.push_back({b.k[i], b.lambda[i].real(), b.lambda[i].imag(), Ustar});
  }
  const std::string csv = ctx.path("essential.csv");
  write_csv(csv, {"k", "re_lambda", "im_lambda", "endpoint"}, rows);

  const RegionLabel reg = region_signature(m, eps, c, cd(pre, pim));
  ordered_json j;
  j["rightmost_left_end"] = border_rightmost(m, eps, c, 1.0, kmax, (int)n);
  j["rightmost_right_end"] = border_rightmost(m, eps, c, 0.0, kmax, (int)n);
  j["probe_lambda"] = {pre, pim};
  j["signature"] = reg.text;
  j["in_omega"] = reg.in_omega;
  const std::string js = ctx.path("essential.json");
  write_json(js, j);
  std::cout << j.dump(2) << std::endl;
  ctx.manifest("essential", {csv, js});
  return 0;
}

int cmd_evans(Ctx& ctx, const std::vector<double>& lambda_cli) {
  const Model m = ctx.model();
  const WaveProfile wp = load_wave(ctx, m);
  double lre = ctx.rc.d("evans.lambda_re", 0.0);
  double lim = ctx.rc.d("evans.lambda_im", 0.0);
  if (lambda_cli.size() == 2) {
    lre = lambda_cli[0];
    lim = lambda_cli[1];
    ctx.rc.used["evans.lambda_re"] = detail::fmt_g17(lre);
    ctx.rc.used["evans.lambda_im"] = detail::fmt_g17(lim);
  }
  RiccatiOpts ro;
  ro.rtol = ctx.rc.d("evans.rtol", ro.rtol);
  const RiccatiEvans ev(m, wp, ro);
  const cd E = ev.eval(cd(lre, lim));
  ordered_json j;
  j["lambda"] = {lre, lim};
  j["E"] = {E.real(), E.imag()};
  j["abs_E"] = std::abs(E);
  const std::string js = ctx.path("evans.json");
  write_json(js, j);
  std::cout << j.dump(2) << std::endl;
  ctx.manifest("evans", {js});
  return 0;
}

int cmd_winding(Ctx& ctx, bool localize) {
  const Model m = ctx.model();
  const WaveProfile wp = load_wave(ctx, m);
  RiccatiOpts ro;
  ro.rtol = ctx.rc.d("evans.rtol", ro.rtol);
  const RiccatiEvans ev(m, wp, ro);
  auto f = [&](cd lam) { return ev.eval(lam); };

  std::vector<std::string> outputs;
  ordered_json j;
  if (localize) {
    LocalizeOpts lo;
    const double re0 = ctx.rc.d("localize.re0", -2.0);
    const double re1 = ctx.rc.d("localize.re1", 0.05);
    const double im0 = ctx.rc.d("localize.im0", -0.5);
    const double im1 = ctx.rc.d("localize.im1", 0.5);
    lo.strips = (int)ctx.rc.i("localize.strips", lo.strips);
    lo.axis_band = ctx.rc.d("localize.axis_band", lo.axis_band);
    lo.jitter = ctx.rc.d("localize.jitter", lo.jitter);
    lo.diam_tol = ctx.rc.d("localize.diam_tol", lo.diam_tol);
    lo.grid_phase = ctx.rc.d("localize.grid_phase", lo.grid_phase);
    lo.threads = ctx.threads;
    lo.ess_margin = ctx.rc.d("localize.ess_margin", lo.ess_margin);
    lo.ess_left = dispersion_left_limit(m, wp.eps, wp.c);
    const SpectralReport rep = localize_spectrum(f, re0, re1, im0, im1, lo);
    j = spectral_report_json(rep);
    const std::string js = ctx.path("localize.json");
    write_json(js, j);
    outputs.push_back(js);
  } else {
    const std::string kind = ctx.rc.s("winding.contour", "circle");
    Contour C;
    if (kind == "circle") {
      const double cre = ctx.rc.d("winding.center_re", 0.0);
      const double cim = ctx.rc.d("winding.center_im", 0.0);
      const double rad = ctx.rc.d("winding.radius", 0.1);
      C = circle_contour(cd(cre, cim), rad);
    } else if (kind == "right_halfplane") {
      C = right_halfplane_contour(ctx.rc.d("winding.R", 1e5), ctx.rc.d("winding.r", 1.0));
    } else if (kind == "rect") {
      C = rect_contour(ctx.rc.d("localize.re0", -2.0), ctx.rc.d("localize.re1", 0.05),
                       ctx.rc.d("localize.im0", -0.5), ctx.rc.d("localize.im1", 0.5));
    } else {
      throw ConfigError("winding.contour must be circle, right_halfplane or rect");
    }
    WindingOpts wo;
    wo.n0 = (int)ctx.rc.i("winding.n0", wo.n0);
    wo.threads = ctx.threads;
    const WindingResult wr = winding_number(f, C, wo);
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < wr.s.size(); ++i) {
      const cd lam = C.at(wr.s[i]);
      rows.push_back({wr.s[i], lam.real(), lam.imag(), wr.val[i].real(), wr.val[i].imag()});
    }
    const std::string csv = ctx.path("contour.csv");
    write_csv(csv, {"s", "re_lambda", "im_lambda", "re_E", "im_E"}, rows);
    j["winding"] = wr.winding;
    j["raw"] = wr.raw;
    j["n_evals"] = wr.n_evals;
    const std::string js = ctx.path("winding.json");
    write_json(js, j);
    outputs = {csv, js};
  }
  std::cout << j.dump(2) << std::endl;
  ctx.manifest(localize ? "localize" : "winding", outputs);
  return 0;
}

int cmd_fast(Ctx& ctx, const std::vector<double>& interval) {
  const Model m = ctx.model();
  const WaveProfile wp = load_wave(ctx, m);
  double lo = ctx.rc.d("fast.lo", 0.0), hi = ctx.rc.d("fast.hi", 5000.0);
  if (interval.size() == 2) {
    lo = interval[0];
    hi = interval[1];
    ctx.rc.used["fast.lo"] = detail::fmt_g17(lo);
    ctx.rc.used["fast.hi"] = detail::fmt_g17(hi);
  }
  const long n = ctx.rc.i("fast.n", 48);
  FastProbeOpts fo;
  fo.L0 = ctx.rc.d("fast.L0", fo.L0);
  const HermiteSeries U = wave_U_interpolant(wp);
  auto ubar = [U](double z) { return U(z); };
  const FastScanReport rep = fast_probe_root_scan(m, ubar, wp.L, wp.eps, wp.c, lo, hi,
                                                  (int)n, ctx.threads, fo);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i <= rep.grid_n; ++i)
    rows.push_back({rep.grid_lam[i], rep.grid_Ef[i]});
  const std::string csv = ctx.path("fast_scan.csv");
  write_csv(csv, {"lambda", "re_Ef"}, rows);
  const ordered_json j = fast_report_json(rep);
  const std::string js = ctx.path("fast.json");
  write_json(js, j);
  std::cout << j.dump(2) << std::endl;
  ctx.manifest("fast", {csv, js});
  return 0;
}

int cmd_slow(Ctx& ctx, const std::vector<double>& interval) {
  const Model m = ctx.model();
  double lo = ctx.rc.d("slow.lo", -2.0), hi = ctx.rc.d("slow.hi", 0.5);
  if (interval.size() == 2) {
    lo = interval[0];
    hi = interval[1];
    ctx.rc.used["slow.lo"] = detail::fmt_g17(lo);
    ctx.rc.used["slow.hi"] = detail::fmt_g17(hi);
  }
  const long n = ctx.rc.i("slow.n", 160);
  SlowOpts so;
  so.section_U = ctx.rc.d("slow.section_U", so.section_U);
  const SingularGeometry geo = singular_wavespeed(m);
  const SlowEigReport rep = find_slow_eigenvalues(m, geo, lo, hi, (int)n, ctx.threads, so);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i <= rep.grid_n; ++i)
    rows.push_back({rep.grid_lam[i], rep.grid_Es[i]});
  const std::string csv = ctx.path("slow_scan.csv");
  write_csv(csv, {"lambda", "re_Es"}, rows);
  ordered_json j = slow_report_json(rep);
  j["c0"] = geo.c0;
  const std::string js = ctx.path("slow.json");
  write_json(js, j);
  // roots as a bare JSON array on stdout, ascending
  std::cout << ordered_json(rep.roots).dump() << std::endl;
  ctx.manifest("slow", {csv, js});
  return 0;
}

int cmd_simulate(Ctx& ctx) {
  const Model m = ctx.model();
  const WaveProfile wp = load_wave(ctx, m);
  SimConfig sc;
  sc.x0 = ctx.rc.d("sim.x0", sc.x0);
  sc.x1 = ctx.rc.d("sim.x1", sc.x1);
  sc.nx = (int)ctx.rc.i("sim.nx", sc.nx);
  sc.dt = ctx.rc.d("sim.dt", sc.dt);
  sc.t_end = ctx.rc.d("sim.t_end", sc.t_end);
  sc.cfl = ctx.rc.d("sim.cfl", sc.cfl);
  sc.n_samples = (int)ctx.rc.i("sim.n_samples", sc.n_samples);
  sc.n_snapshots = (int)ctx.rc.i("sim.n_snapshots", sc.n_snapshots);
  sc.perturb.shape = ctx.rc.s("sim.shape", sc.perturb.shape);
  sc.perturb.amplitude = ctx.rc.d("sim.amplitude", sc.perturb.amplitude);
  sc.perturb.width = ctx.rc.d("sim.width", sc.perturb.width);
  sc.perturb.center = ctx.rc.d("sim.center", sc.perturb.center);
  sc.rng_seed = (unsigned long)ctx.rc.i("sim.rng_seed", (long)sc.rng_seed);

  const DecayReport rep = run_perturbation_experiment(m, wp, sc);

  std::vector<std::string> header = {"x"};
  std::vector<std::vector<double>> rows(rep.x.size());
  for (size_t i = 0; i < rep.x.size(); ++i) rows[i].push_back(rep.x[i]);
  for (const auto& snap : rep.snapshots) {
    header.push_back("u_t" + detail::fmt_g17(snap.t));
    for (size_t i = 0; i < rep.x.size(); ++i) rows[i].push_back(snap.u[i]);
  }
  const std::string csv = ctx.path("snapshots.csv");
  write_csv(csv, header, rows);
  const ordered_json j = decay_report_json(rep);
  const std::string js = ctx.path("decay.json");
  write_json(js, j);
  std::cout << j.dump(2) << std::endl;
  ctx.manifest("simulate", {csv, js});
  return 0;
}

int cmd_reproduce_all(Ctx& ctx) {
  struct Row {
    std::string name;
    double computed, reference;
  };
  std::vector<Row> table;
  const Model m = ctx.model();

  std::cout << "[1/8] singular composite: wavespeed and jump geometry\n";
  const SingularGeometry geo = singular_wavespeed(m);
  table.push_back({"c0 (singular wavespeed)", geo.c0, 0.1968109995});
  table.push_back({"u-", geo.jump.u_minus, (8.0 - std::sqrt(3.0)) / 12.0});
  table.push_back({"u+", geo.jump.u_plus, (8.0 + std::sqrt(3.0)) / 12.0});

  std::cout << "[2/8] travelling wave at eps = " << m.eps() << "\n";
  WaveBvpOpts wopt;
  wopt.L = ctx.rc.d("wave.L", wopt.L);
  wopt.rtol = ctx.rc.d("wave.rtol", wopt.rtol);
  const WaveProfile wp = solve_wave_bvp(m, wopt);
  write_wave_profile(wp, ctx.wave_prefix + ".csv", ctx.wave_prefix + ".json");
  table.push_back({"c(eps)", wp.c, 0.19686});

  std::cout << "[3/8] essential spectrum borders\n";
  table.push_back({"rightmost border Re", border_rightmost(m, wp.eps, wp.c, 0.0), -1.0});

  RiccatiOpts ro;
  const RiccatiEvans ev(m, wp, ro);
  auto f = [&](cd lam) { return ev.eval(lam); };

  std::cout << "[4/8] Evans function at the origin\n";
  table.push_back({"|E(0)|", std::abs(ev.eval(0.0)), 0.0});

  std::cout << "[5/8] winding over the right-half-plane contour\n";
  WindingOpts wo;
  wo.threads = ctx.threads;
  const WindingResult whp = winding_number(f, right_halfplane_contour(), wo);
  table.push_back({"right-half-plane winding", (double)whp.winding, 0.0});

  std::cout << "[6/8] point spectrum in [-2, 0.05] x [-0.5, 0.5]\n";
  LocalizeOpts lopt;
  lopt.threads = ctx.threads;
  lopt.ess_left = dispersion_left_limit(m, wp.eps, wp.c);
  const SpectralReport srep = localize_spectrum(f, -2.0017, 0.0523, -0.503, 0.503, lopt);
  write_json(ctx.path("localize.json"), spectral_report_json(srep));
  double lam1 = std::numeric_limits<double>::quiet_NaN();
  double pole = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : srep.points) {
    if (p.index > 0 && std::abs(p.lambda.real() + 0.8) < 0.1) lam1 = p.lambda.real();
    if (p.index < 0) pole = p.lambda.real();
  }
  table.push_back({"lambda_1 (full system)", lam1, -0.80031});
  table.push_back({"chart pole", pole, -0.2938754239194082});

  std::cout << "[7/8] reduced problems: slow scan and fast probe\n";
  const SlowEigReport slow = find_slow_eigenvalues(m, geo, -2.0, 0.5, 160, ctx.threads);
  write_json(ctx.path("slow.json"), slow_report_json(slow));
  double slam1 = std::numeric_limits<double>::quiet_NaN();
  double slam0 = std::numeric_limits<double>::quiet_NaN();
  for (double r : slow.roots) {
    if (std::abs(r + 0.8) < 0.1) slam1 = r;
    if (std::abs(r) < 0.05) slam0 = r;
  }
  table.push_back({"lambda_1 (slow reduced)", slam1, -0.80031});
  table.push_back({"lambda_0 (slow reduced)", slam0, 0.0});

  const HermiteSeries Uw = wave_U_interpolant(wp);
  auto ubar = [Uw](double z) { return Uw(z); };
  const FastScanReport fast =
      fast_probe_root_scan(m, ubar, wp.L, wp.eps, wp.c, 0.0, 5000.0, 48, ctx.threads);
  write_json(ctx.path("fast.json"), fast_report_json(fast));
  if (!fast.roots.empty()) {
    table.push_back({"fast probe root", fast.roots[0].lam, 3718.025});
    table.push_back({"fast beta2 gap (magnitude)", std::abs(fast.roots[0].beta2_gap), 5.08});
  }

  std::cout << "[8/8] direct simulation at eps = 1e-2\n";
  ModelParams simp = m.params();
  simp.eps = 1e-2;
  const Model msim(simp);
  WaveBvpOpts wopt2 = wopt;
  const WaveProfile wp2 = solve_wave_bvp(msim, wopt2);
  write_wave_profile(wp2, ctx.path("wave_sim.csv"), ctx.path("wave_sim.json"));
  SimConfig sc;
  const DecayReport dec = run_perturbation_experiment(msim, wp2, sc);
  write_json(ctx.path("decay.json"), decay_report_json(dec));
  table.push_back({"fitted speed (simulation)", dec.fitted_speed, wp2.c});

  std::printf("\n%-34s %22s %22s %12s\n", "quantity", "computed", "reference", "|diff|");
  ordered_json jt = ordered_json::array();
  for (const auto& r : table) {
    std::printf("%-34s %22.12g %22.12g %12.3g\n", r.name.c_str(), r.computed, r.reference,
                std::abs(r.computed - r.reference));
    ordered_json e;
    e["name"] = r.name;
    e["computed"] = r.computed;
    e["reference"] = r.reference;
    jt.push_back(e);
  }
  write_json(ctx.path("summary.json"), jt);
  ctx.manifest("reproduce-all", {ctx.path("summary.json")});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shock-fronted travelling waves: construction and stability toolkit"};
  app.require_subcommand(1);

  Ctx ctx;
  app.add_option("--config", ctx.config_path, "key=value configuration file");
  app.add_option("-o,--output", ctx.outdir, "output directory (default: out)");
  app.add_option("--threads", ctx.threads, "worker threads for spectral sweeps");
  app.add_option("--wave", ctx.wave_prefix, "wave profile prefix (default: <output>/wave)");

  auto* c_wave = app.add_subcommand("wave", "solve the travelling-wave boundary value problem");
  auto* c_ess = app.add_subcommand("essential", "essential spectrum borders and signatures");
  auto* c_evans = app.add_subcommand("evans", "evaluate the Evans function at one lambda");
  std::vector<double> lambda_cli;
  c_evans->add_option("--lambda", lambda_cli, "lambda as 're im'")->expected(2);
  auto* c_wind = app.add_subcommand("winding", "winding number of the Evans function");
  bool localize = false;
  c_wind->add_flag("--localize", localize, "localize roots and poles in a rectangle");
  auto* c_fast = app.add_subcommand("fast", "fast reduced eigenvalue probe");
  std::vector<double> fast_iv;
  c_fast->add_option("--interval", fast_iv, "scan interval 'lo hi'")->expected(2);
  auto* c_slow = app.add_subcommand("slow", "slow reduced eigenvalue scan");
  std::vector<double> slow_iv;
  c_slow->add_option("--interval", slow_iv, "scan interval 'lo hi'")->expected(2);
  auto* c_sim = app.add_subcommand("simulate", "direct PDE simulation of a perturbed wave");
  auto* c_all = app.add_subcommand("reproduce-all", "full pipeline with a summary table");

  try {
    app.parse(argc, argv);
    ctx.load();
    if (ctx.threads < 1) ctx.threads = 1;
    if (c_wave->parsed()) return cmd_wave(ctx);
    if (c_ess->parsed()) return cmd_essential(ctx);
    if (c_evans->parsed()) return cmd_evans(ctx, lambda_cli);
    if (c_wind->parsed()) return cmd_winding(ctx, localize);
    if (c_fast->parsed()) return cmd_fast(ctx, fast_iv);
    if (c_slow->parsed()) return cmd_slow(ctx, slow_iv);
    if (c_sim->parsed()) return cmd_simulate(ctx);
    if (c_all->parsed()) return cmd_reproduce_all(ctx);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
