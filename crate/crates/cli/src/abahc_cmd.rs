use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use effspin::analysis::{defect_profile, epsilon_sweep, jeff_sweep, l_max_for, window_sweep, SweepResult};
use effspin::checkpoint::{load_uniform, save_uniform, WindowCheckpoint};
use effspin::defect::{DefectProblem, DefectSpec};
use effspin::model::Abahc;
use effspin::vumps::{vumps, VumpsOptions};
use effspin::window::TdvpOptions;
use effspin::UniformMps;
use serde::Serialize;

use crate::output::{LogPlot, Manifest, RunDir};
use crate::{parse_range, parse_unsigned_range, usage, Ctx, NotConverged};

const BACKGROUND: &str = "background.ckpt";

#[derive(Subcommand, Debug)]
pub enum AbahcCmd {
    /// Uniform ground state by VUMPS; writes the background checkpoint.
    Vumps(VumpsArgs),
    /// Single weak-weak defect: levels, profile, epsilon_m weights.
    Defect(DefectArgs),
    /// Fidelity distance against window size.
    WindowSweep(SweepArgs),
    /// Effective interaction of two man-made effective spins.
    Jeff(JeffArgs),
}

#[derive(Args, Debug)]
pub struct VumpsArgs {
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Bond dimension.
    #[arg(long = "D")]
    bond: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Flags shared by every command that starts from a background checkpoint.
#[derive(Args, Debug)]
pub struct Common {
    /// Background checkpoint; defaults to the one written by `abahc vumps`.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Dimerization of the background; read from the manifest next to the
    /// checkpoint when omitted.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Field used to select the up state of the defect.
    #[arg(long = "defect-hz")]
    defect_hz: Option<f64>,
    /// Per-step fidelity tolerance of the window TDVP.
    #[arg(long)]
    tol: Option<f64>,
    /// Initial imaginary-time step.
    #[arg(long)]
    dtau: Option<f64>,
    /// Smallest step before the run is declared stuck.
    #[arg(long)]
    dtau_min: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DefectArgs {
    #[command(flatten)]
    common: Common,
    /// Window half-width for the optimized state; 0 keeps the single-cell solution.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Site range of the profile.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// Cells per side for the epsilon_m weights.
    #[arg(long)]
    pad: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Window half-widths `a:b`.
    #[arg(long = "N")]
    n: Option<String>,
    /// Reference half-width.
    #[arg(long = "Nmax")]
    n_max: Option<usize>,
}

#[derive(Args, Debug)]
pub struct JeffArgs {
    #[command(flatten)]
    common: Common,
    /// Separations `a:b` in cells.
    #[arg(long = "L")]
    l: Option<String>,
    /// Separation standing in for infinity; default max(10 xi, 2 max L).
    #[arg(long = "Lmax")]
    l_max: Option<usize>,
    /// Uniform field for the optimized branch; required with `--optimize`.
    #[arg(long)]
    hz: Option<f64>,
    /// Re-optimize each man-made state over its window by TDVP.
    #[arg(long)]
    optimize: bool,
    /// Single-defect excitation gap bounding the field from above.
    #[arg(long = "delta-e")]
    delta_e: Option<f64>,
}

pub fn run(ctx: &Ctx, cmd: AbahcCmd) -> Result<()> {
    match cmd {
        AbahcCmd::Vumps(a) => cmd_vumps(ctx, a),
        AbahcCmd::Defect(a) => cmd_defect(ctx, a),
        AbahcCmd::WindowSweep(a) => cmd_window_sweep(ctx, a),
        AbahcCmd::Jeff(a) => cmd_jeff(ctx, a),
    }
}

#[derive(Serialize)]
struct VumpsConfig {
    delta: f64,
    bond: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
}

fn cmd_vumps(ctx: &Ctx, a: VumpsArgs) -> Result<()> {
    let s = ctx.config.scope("abahc", "vumps");
    let d = VumpsOptions::default();
    let cfg = VumpsConfig {
        delta: s.pick(a.delta, "delta", 0.03)?,
        bond: s.pick(a.bond, "bond", d.bond)?,
        tol: s.pick(a.tol, "tol", 1e-10)?,
        max_iter: s.pick(a.max_iter, "max_iter", d.max_iter)?,
        seed: s.pick(a.seed, "seed", d.seed)?,
    };
    let model = Abahc::new(cfg.delta, 0.0).map_err(|e| usage(e.to_string()))?;
    if cfg.bond == 0 {
        return Err(usage("--D must be positive"));
    }
    let mut dir = RunDir::open(&ctx.run_dir("abahc", "vumps"))?;
    let opts = VumpsOptions {
        bond: cfg.bond,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        seed: cfg.seed,
    };
    let r = vumps(model.uniform_pair().as_ref(), Abahc::cell_dims(), &opts)?;
    let spec = r.state.spectral_data(8.min(cfg.bond * cfg.bond))?;
    save_uniform(&r.state, &dir.file(BACKGROUND))?;
    let schmidt: Vec<Vec<f64>> = r.state.schmidt_values().iter().enumerate().map(|(k, s)| vec![k as f64, *s]).collect();
    dir.write_csv("schmidt.csv", &["k", "schmidt"], &schmidt)?;
    let transfer: Vec<Vec<f64>> = spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, l)| vec![k as f64, l.re, l.im, l.norm()])
        .collect();
    dir.write_csv("transfer_spectrum.csv", &["k", "re", "im", "abs"], &transfer)?;
    let history: Vec<Vec<f64>> = r.history.iter().enumerate().map(|(k, (e, g))| vec![k as f64, *e, *g]).collect();
    dir.write_csv("history.csv", &["iteration", "energy_per_cell", "gradient"], &history)?;
    let mut m = Manifest::new("abahc vumps", &cfg)?;
    m.put("energy_per_cell", r.energy)?;
    m.put("energy_per_site", r.energy / 2.0)?;
    m.put("xi_bulk", spec.xi)?;
    m.put("lambda2_abs", spec.eigenvalues.get(1).map(|l| l.norm()))?;
    m.put("gradient", r.gradient)?;
    m.put("iterations", r.iterations)?;
    m.put("converged", r.converged)?;
    finish_checked(dir, m, r.converged, "VUMPS did not reach its tolerance")
}

fn finish_checked(dir: RunDir, mut m: Manifest, converged: bool, what: &str) -> Result<()> {
    if !converged {
        m.status = "not_converged";
        m.warnings.push(what.to_string());
        dir.finish(m)?;
        return Err(NotConverged(what.to_string()).into());
    }
    dir.finish(m)
}

#[derive(Clone, Serialize)]
struct CommonConfig {
    background: PathBuf,
    delta: f64,
    bond: usize,
    defect_hz: f64,
    tol: f64,
    dtau: f64,
    dtau_min: f64,
    max_steps: usize,
}

struct Loaded {
    cfg: CommonConfig,
    uniform: UniformMps,
    xi: f64,
    lambda2: f64,
    tdvp: TdvpOptions,
}

fn load(ctx: &Ctx, cmd: &str, c: Common) -> Result<Loaded> {
    let s = ctx.config.scope("abahc", cmd);
    let default_bg = ctx.run_dir("abahc", "vumps").join(BACKGROUND);
    let background: PathBuf = s.pick(c.background, "background", default_bg)?;
    ctx.require_file(&background, "background checkpoint (run `effspin abahc vumps` first)")?;
    let uniform = load_uniform(&background).with_context(|| format!("loading {}", background.display()))?;
    let delta = match s.pick_opt(c.delta, "delta")? {
        Some(d) => d,
        None => read_delta(&background)?,
    };
    let d = TdvpOptions::default();
    let cfg = CommonConfig {
        bond: uniform.bond(),
        delta,
        background,
        defect_hz: s.pick(c.defect_hz, "defect_hz", 1e-3)?,
        tol: s.pick(c.tol, "tol", 1e-12)?,
        dtau: s.pick(c.dtau, "dtau", d.dtau)?,
        dtau_min: s.pick(c.dtau_min, "dtau_min", d.dtau_min)?,
        max_steps: s.pick(c.max_steps, "max_steps", d.max_steps)?,
    };
    if !(cfg.defect_hz > 0.0) {
        return Err(usage("--defect-hz must be positive to select the up state"));
    }
    let spec = uniform.spectral_data(4)?;
    let tdvp = TdvpOptions {
        dtau: cfg.dtau,
        dtau_min: cfg.dtau_min,
        tol: cfg.tol,
        max_steps: cfg.max_steps,
        center: None,
    };
    Ok(Loaded {
        xi: spec.xi,
        lambda2: spec.eigenvalues[1].norm(),
        cfg,
        uniform,
        tdvp,
    })
}

fn read_delta(background: &std::path::Path) -> Result<f64> {
    let manifest = background.with_file_name("manifest.json");
    let text = std::fs::read_to_string(&manifest)
        .map_err(|_| usage(format!("manifest next to the checkpoint not found at {}", manifest.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v["config"]["delta"]
        .as_f64()
        .ok_or_else(|| usage(format!("{} has no config.delta", manifest.display())))
}

fn problem(l: &Loaded, hz: f64) -> Result<DefectProblem> {
    Ok(DefectProblem::new(
        l.uniform.clone(),
        Abahc::new(l.cfg.delta, hz)?,
        DefectSpec::weak_weak(),
        1e-12,
    )?)
}

fn write_sweep(dir: &mut RunDir, base: &str, s: &SweepResult, y_label: &str) -> Result<()> {
    let header: Vec<&str> = s.columns.iter().map(String::as_str).collect();
    dir.write_csv(&format!("{base}.csv"), &header, &s.rows)?;
    let xs = s.column(&s.columns[0]).unwrap_or_default();
    let ys = s.column(&s.fit_column).unwrap_or_default();
    dir.write_plot(
        &format!("{base}.svg"),
        &LogPlot {
            title: format!("{base}: {y_label} vs {}", s.columns[0]),
            x_label: s.columns[0].clone(),
            y_label: y_label.into(),
            points: xs.into_iter().zip(ys).collect(),
            fit: s.fit.clone(),
        },
    )
}

fn put_sweep(m: &mut Manifest, s: &SweepResult) -> Result<()> {
    m.put("fit", &s.fit)?;
    m.put("fit_without_first", &s.fit_without_first)?;
    m.put("reference_length", s.reference_length)?;
    m.put("length_ratio", s.length_ratio())?;
    m.put("fit_robustness", s.fit_robustness())?;
    m.put("sweep_metadata", &s.metadata)?;
    m.warnings.extend(s.warnings.iter().cloned());
    Ok(())
}

#[derive(Serialize)]
struct DefectConfig {
    #[serde(flatten)]
    common: CommonConfig,
    n: usize,
    range: String,
    pad: usize,
}

fn cmd_defect(ctx: &Ctx, a: DefectArgs) -> Result<()> {
    let s = ctx.config.scope("abahc", "defect");
    let n = s.pick(a.n, "n", 0)?;
    let range = s.pick(a.range, "range", "-60:60".into())?;
    let pad = s.pick(a.pad, "pad", 30)?;
    let (lo, hi) = parse_range(&range)?;
    let l = load(ctx, "defect", a.common)?;
    let cfg = DefectConfig {
        common: l.cfg.clone(),
        n,
        range,
        pad,
    };
    let mut dir = RunDir::open(&ctx.run_dir("abahc", "defect"))?;
    let p = problem(&l, l.cfg.defect_hz)?;
    let sol = p.solve_center(4)?;
    let levels: Vec<Vec<f64>> = sol.energies.iter().enumerate().map(|(k, e)| vec![k as f64, *e]).collect();
    dir.write_csv("levels.csv", &["k", "energy"], &levels)?;
    let bg_ref = l.cfg.background.display().to_string();
    WindowCheckpoint::from_window(&sol.window, &bg_ref).save(&dir.file("window_n0.ckpt"))?;
    let sites = lo as isize..=hi as isize;
    let tail = 10.0 * l.xi;
    let p0 = defect_profile(&sol.window, sites.clone(), tail)?;
    let mut header = vec!["site", "sz_n0"];
    let mut cols = vec![p0.values.clone()];
    let mut m_results: Vec<(String, serde_json::Value)> = vec![
        ("profile_sum_n0".into(), p0.sum.into()),
        ("asymmetry_n0".into(), p0.asymmetry.into()),
        ("tail_max_n0".into(), p0.tail_max.into()),
    ];
    let mut converged = true;
    if n > 0 {
        let r = p.optimize(n, &sol.tensors[0], &l.tdvp)?;
        converged = r.converged;
        WindowCheckpoint::from_window(&r.state, &bg_ref).save(&dir.file(&format!("window_n{n}.ckpt")))?;
        let pn = defect_profile(&r.state, sites.clone(), tail)?;
        header.push("sz_n");
        cols.push(pn.values.clone());
        m_results.push(("profile_sum_n".into(), pn.sum.into()));
        m_results.push(("asymmetry_n".into(), pn.asymmetry.into()));
        m_results.push(("energy_n".into(), r.energy.into()));
        m_results.push(("steps_n".into(), r.steps.into()));
        m_results.push((
            "max_profile_diff".into(),
            effspin::window::max_abs_diff(&p0.values, &pn.values).into(),
        ));
    }
    let rows: Vec<Vec<f64>> = p0
        .sites
        .iter()
        .enumerate()
        .map(|(k, &i)| std::iter::once(i as f64).chain(cols.iter().map(|c| c[k])).collect())
        .collect();
    dir.write_csv("profile.csv", &header, &rows)?;
    dir.write_plot(
        "profile.svg",
        &LogPlot {
            title: "defect profile |<S^z_i>|".into(),
            x_label: "i".into(),
            y_label: "|<S^z_i>|".into(),
            points: rows.iter().map(|r| (r[0], r[1])).collect(),
            fit: None,
        },
    )?;
    let eps = epsilon_sweep(&p, &sol, pad, l.lambda2, l.xi)?;
    write_sweep(&mut dir, "epsilon", &eps, "epsilon_m")?;
    let mut m = Manifest::new("abahc defect", &cfg)?;
    m.put("xi_bulk", l.xi)?;
    m.put("lambda2_abs", l.lambda2)?;
    m.put("levels", &sol.energies)?;
    for (k, v) in m_results {
        m.put(&k, v)?;
    }
    m.put("epsilon_fit", &eps.fit)?;
    m.put("epsilon_reference_length", eps.reference_length)?;
    m.put("epsilon_length_ratio", eps.length_ratio())?;
    finish_checked(dir, m, converged, "window TDVP did not converge")
}

#[derive(Serialize)]
struct SweepConfig {
    #[serde(flatten)]
    common: CommonConfig,
    n: String,
    n_max: usize,
}

fn cmd_window_sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let s = ctx.config.scope("abahc", "window-sweep");
    let n = s.pick(a.n, "n", "0:10".into())?;
    let n_list = parse_unsigned_range(&n)?;
    let max = *n_list.last().expect("non-empty");
    let n_max = s.pick(a.n_max, "n_max", 2 * max)?;
    if n_max < max {
        return Err(usage(format!("--Nmax {n_max} below the largest N {max}")));
    }
    let l = load(ctx, "window-sweep", a.common)?;
    let mut dir = RunDir::open(&ctx.run_dir("abahc", "window-sweep"))?;
    let p = problem(&l, l.cfg.defect_hz)?;
    let sol = p.solve_center(1)?;
    let sweep = window_sweep(&p, &sol.tensors[0], &n_list, n_max, &l.tdvp, l.xi)?;
    write_sweep(&mut dir, "window_sweep", &sweep, "distance")?;
    let converged = !sweep.warnings.iter().any(|w| w.contains("not converged"));
    let xi = l.xi;
    let cfg = SweepConfig {
        common: l.cfg,
        n,
        n_max,
    };
    let mut m = Manifest::new("abahc window-sweep", &cfg)?;
    m.put("xi_bulk", xi)?;
    put_sweep(&mut m, &sweep)?;
    finish_checked(dir, m, converged, "window TDVP did not converge for every N")
}

#[derive(Serialize)]
struct JeffConfig {
    #[serde(flatten)]
    common: CommonConfig,
    l: String,
    l_max: usize,
    hz: Option<f64>,
    optimize: bool,
    delta_e: f64,
}

fn cmd_jeff(ctx: &Ctx, a: JeffArgs) -> Result<()> {
    let s = ctx.config.scope("abahc", "jeff");
    let l_range = s.pick(a.l, "l", "6:14".into())?;
    let ls = parse_unsigned_range(&l_range)?;
    if ls[0] < 1 {
        return Err(usage("separations start at L = 1"));
    }
    let optimize = a.optimize || s.get::<bool>("optimize")?.unwrap_or(false);
    let hz = s.pick_opt(a.hz, "hz")?;
    let delta_e = s.pick(a.delta_e, "delta_e", 0.145)?;
    if optimize {
        match hz {
            None => return Err(usage("--optimize needs --hz")),
            Some(h) if !(h > 0.0 && h < delta_e) => {
                return Err(usage(format!("--hz {h} must lie in (0, delta_e = {delta_e})")))
            }
            _ => {}
        }
    }
    let l_max_flag = s.pick_opt(a.l_max, "l_max")?;
    let l = load(ctx, "jeff", a.common)?;
    let l_max = l_max_flag.unwrap_or_else(|| l_max_for(&ls, l.xi));
    if l_max <= *ls.last().expect("non-empty") {
        return Err(usage(format!("--Lmax {l_max} must exceed every L")));
    }
    let mut dir = RunDir::open(&ctx.run_dir("abahc", "jeff"))?;
    let p = problem(&l, l.cfg.defect_hz)?;
    let b = p.solve_center(1)?.tensors.remove(0);
    // the man-made energies do not depend on a uniform field: it cancels in the offsets
    let pj = match (optimize, hz) {
        (true, Some(h)) => p.with_field(h, 1e-12)?,
        _ => p.clone(),
    };
    let opts = optimize.then_some(&l.tdvp);
    let sweep = jeff_sweep(&pj, &b, &ls, l_max, opts, l.xi)?;
    write_sweep(&mut dir, "jeff", &sweep, "J_eff")?;
    let mut warnings = Vec::new();
    if let (Some(h), Some(j)) = (hz, sweep.column("jeff")) {
        for (li, jv) in ls.iter().zip(j) {
            if optimize && jv.abs() >= h {
                warnings.push(format!("L={li}: |J_eff| = {jv:.3e} is not below h_z = {h}"));
            }
        }
    }
    let converged = !sweep.warnings.iter().any(|w| w.contains("not converged"));
    let xi = l.xi;
    let cfg = JeffConfig {
        common: l.cfg,
        l: l_range,
        l_max,
        hz,
        optimize,
        delta_e,
    };
    let mut m = Manifest::new("abahc jeff", &cfg)?;
    m.put("xi_bulk", xi)?;
    if let Some(j) = sweep.column("jeff_opt") {
        let ls_f: Vec<f64> = sweep.column("L").unwrap_or_default();
        m.put(
            "fit_optimized",
            effspin::analysis::fit_decay(&ls_f, &j, xi, effspin::analysis::FIT_FLOOR).ok(),
        )?;
    }
    put_sweep(&mut m, &sweep)?;
    m.warnings.extend(warnings);
    finish_checked(dir, m, converged, "window TDVP did not converge for every L")
}
