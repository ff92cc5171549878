use anyhow::Result;
use clap::{Args, Subcommand};
use effspin::aklt::{self, Label, NoGoOptions, SiteField};
use effspin::linalg::dense::{identity, max_abs};
use effspin::ComplexMatrix;
use serde::Serialize;

use crate::output::{LogPlot, Manifest, RunDir};
use crate::{parse_range, usage, Ctx};

#[derive(Subcommand, Debug)]
pub enum AkltCmd {
    /// Single-impurity magnetization profile, closed form and contraction.
    Profile(ProfileArgs),
    /// Gram matrix of the two-impurity basis.
    Gram(SeparationArgs),
    /// Orthonormalizing transform and its coefficients.
    QubitBasis(SeparationArgs),
    /// Effective Zeeman matrix of one or two impurities.
    FieldMatrix(FieldArgs),
    /// Random-field test of a three-spin effective description.
    ThreeSpinTest(NoGoArgs),
    /// Triple-scattering amplitudes against their closed form.
    Scattering(ScatteringArgs),
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// Site range `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
}

#[derive(Args, Debug)]
pub struct SeparationArgs {
    /// Impurity separation.
    #[arg(long = "L")]
    l: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    /// Impurity sites, e.g. `0` or `0,4`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    positions: Option<Vec<isize>>,
    /// Field vector `hx,hy,hz` applied uniformly on `--range`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    field: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
}

#[derive(Args, Debug)]
pub struct NoGoArgs {
    /// Number of random field configurations.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "L-prime")]
    l_prime: Option<usize>,
    /// 3, or 2 for the control run.
    #[arg(long)]
    spins: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScatteringArgs {
    /// Largest `L` and `L''`.
    #[arg(long = "L-max")]
    l_max: Option<usize>,
    #[arg(long = "L-prime")]
    l_prime: Option<usize>,
}

const BASIS: [&str; 4] = ["uu", "ud", "du", "dd"];

fn matrix_rows(m: &ComplexMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| {
            let mut r = vec![i as f64];
            for j in 0..m.ncols() {
                r.push(m[(i, j)].re);
                r.push(m[(i, j)].im);
            }
            r
        })
        .collect()
}

fn matrix_header(labels: &[&str]) -> Vec<String> {
    let mut h = vec!["row".to_string()];
    for l in labels {
        h.push(format!("{l}_re"));
        h.push(format!("{l}_im"));
    }
    h
}

fn write_matrix(dir: &mut RunDir, name: &str, labels: &[&str], m: &ComplexMatrix) -> Result<()> {
    let header = matrix_header(labels);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.write_csv(name, &header, &matrix_rows(m))
}

pub fn run(ctx: &Ctx, cmd: AkltCmd) -> Result<()> {
    match cmd {
        AkltCmd::Profile(a) => profile(ctx, a),
        AkltCmd::Gram(a) => gram(ctx, a),
        AkltCmd::QubitBasis(a) => qubit(ctx, a),
        AkltCmd::FieldMatrix(a) => field_matrix(ctx, a),
        AkltCmd::ThreeSpinTest(a) => no_go(ctx, a),
        AkltCmd::Scattering(a) => scattering(ctx, a),
    }
}

#[derive(Serialize)]
struct ProfileConfig {
    range: String,
}

fn profile(ctx: &Ctx, a: ProfileArgs) -> Result<()> {
    let s = ctx.config.scope("aklt", "profile");
    let cfg = ProfileConfig {
        range: s.pick(a.range, "range", "-10:10".into())?,
    };
    let (lo, hi) = parse_range(&cfg.range)?;
    let (lo, hi) = (lo as isize, hi as isize);
    let bg = aklt::background();
    let w = aklt::impurity_state(&bg, &[(0, Label::Up)])?;
    let contraction = w.sz_profile(lo..=hi)?;
    let rows: Vec<Vec<f64>> = (lo..=hi)
        .zip(&contraction)
        .map(|(i, c)| vec![i as f64, aklt::single_impurity_profile(i), *c])
        .collect();
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "profile"))?;
    dir.write_csv("profile.csv", &["i", "f", "contraction"], &rows)?;
    dir.write_plot(
        "profile.svg",
        &LogPlot {
            title: "single-impurity profile |f(i)|".into(),
            x_label: "i".into(),
            y_label: "|f(i)|".into(),
            points: rows.iter().map(|r| (r[0], r[1])).collect(),
            fit: None,
        },
    )?;
    let mut m = Manifest::new("aklt profile", &cfg)?;
    let peak = rows.iter().max_by(|x, y| x[1].total_cmp(&y[1])).map(|r| (r[0], r[1]));
    m.put("peak", peak)?;
    m.put("sum", rows.iter().map(|r| r[1]).sum::<f64>())?;
    m.put(
        "max_contraction_error",
        rows.iter().map(|r| (r[1] - r[2]).abs()).fold(0.0, f64::max),
    )?;
    dir.finish(m)
}

#[derive(Serialize)]
struct SeparationConfig {
    l: usize,
}

fn separation(ctx: &Ctx, cmd: &str, l: Option<usize>, default: usize) -> Result<SeparationConfig> {
    let l = ctx.config.scope("aklt", cmd).pick(l, "l", default)?;
    if l < 2 {
        return Err(usage(format!("--L must be at least 2, got {l}")));
    }
    Ok(SeparationConfig { l })
}

fn gram(ctx: &Ctx, a: SeparationArgs) -> Result<()> {
    let cfg = separation(ctx, "gram", a.l, 2)?;
    let g = aklt::gram_matrix(cfg.l)?;
    let basis = aklt::manifold_basis(&aklt::background(), &[0, cfg.l as isize])?;
    let gc = aklt::gram_by_contraction(&basis)?;
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "gram"))?;
    write_matrix(&mut dir, "gram.csv", &BASIS, &g)?;
    write_matrix(&mut dir, "gram_contraction.csv", &BASIS, &gc)?;
    let mut m = Manifest::new("aklt gram", &cfg)?;
    m.put("delta", aklt::delta(cfg.l))?;
    m.put("max_contraction_error", max_abs((&g - &gc).as_ref()))?;
    dir.finish(m)
}

fn qubit(ctx: &Ctx, a: SeparationArgs) -> Result<()> {
    let cfg = separation(ctx, "qubit-basis", a.l, 3)?;
    let q = aklt::qubit_basis(cfg.l)?;
    let g = aklt::gram_matrix(cfg.l)?;
    let err = max_abs((q.transform.adjoint() * &g * &q.transform - identity(4)).as_ref());
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "qubit-basis"))?;
    write_matrix(&mut dir, "transform.csv", &BASIS, &q.transform)?;
    let mut m = Manifest::new("aklt qubit-basis", &cfg)?;
    m.put("delta", q.delta)?;
    m.put("beta_plus", q.beta_plus)?;
    m.put("beta_minus", q.beta_minus)?;
    m.put("orthonormality_error", err)?;
    dir.finish(m)
}

#[derive(Serialize)]
struct FieldConfig {
    positions: Vec<isize>,
    field: Vec<f64>,
    range: String,
}

fn field_matrix(ctx: &Ctx, a: FieldArgs) -> Result<()> {
    let s = ctx.config.scope("aklt", "field-matrix");
    let cfg = FieldConfig {
        positions: s.pick(a.positions, "positions", vec![0])?,
        field: s.pick(a.field, "field", vec![0.0, 0.0, 1.0])?,
        range: s.pick(a.range, "range", "-40:40".into())?,
    };
    let h: [f64; 3] = cfg
        .field
        .clone()
        .try_into()
        .map_err(|_| usage("--field needs three components"))?;
    let (lo, hi) = parse_range(&cfg.range)?;
    let fields: Vec<SiteField> = (lo as isize..=hi as isize).map(|i| (i, h)).collect();
    let closed = aklt::effective_field_matrix(&fields, &cfg.positions).map_err(|e| usage(e.to_string()))?;
    let basis = aklt::manifold_basis(&aklt::background(), &cfg.positions)?;
    let contraction = aklt::field_matrix_by_contraction(&basis, &fields)?;
    let labels: &[&str] = if cfg.positions.len() == 1 { &["u", "d"] } else { &BASIS };
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "field-matrix"))?;
    write_matrix(&mut dir, "field_matrix.csv", labels, &closed)?;
    write_matrix(&mut dir, "field_matrix_contraction.csv", labels, &contraction)?;
    let mut m = Manifest::new("aklt field-matrix", &cfg)?;
    if cfg.positions.len() == 1 {
        m.put("effective_field", aklt::effective_field(&fields, |i| aklt::single_impurity_profile(i - cfg.positions[0])))?;
    }
    m.put("max_contraction_error", max_abs((&closed - &contraction).as_ref()))?;
    dir.finish(m)
}

fn no_go(ctx: &Ctx, a: NoGoArgs) -> Result<()> {
    let s = ctx.config.scope("aklt", "three-spin-test");
    let d = NoGoOptions::default();
    let opts = NoGoOptions {
        configs: s.pick(a.seeds, "seeds", d.configs)?,
        seed: s.pick(a.seed, "seed", d.seed)?,
        l: s.pick(a.l, "l", d.l)?,
        l_prime: s.pick(a.l_prime, "l_prime", d.l_prime)?,
        spins: s.pick(a.spins, "spins", d.spins)?,
        uniform: false,
    };
    if opts.configs < 2 || !(2..=3).contains(&opts.spins) {
        return Err(usage("need --seeds >= 2 and --spins 2 or 3"));
    }
    let report = aklt::three_spin_no_go_test(&opts)?;
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "three-spin-test"))?;
    dir.write_csv(
        "angles.csv",
        &["spins", "configs", "max_subspace_angle", "min_pair_angle", "resampled"],
        &[vec![
            report.spins as f64,
            report.configs as f64,
            report.max_subspace_angle,
            report.min_pair_angle,
            report.resampled as f64,
        ]],
    )?;
    #[derive(Serialize)]
    struct Cfg {
        seeds: usize,
        seed: u64,
        l: usize,
        l_prime: usize,
        spins: usize,
    }
    let mut m = Manifest::new(
        "aklt three-spin-test",
        &Cfg {
            seeds: opts.configs,
            seed: opts.seed,
            l: opts.l,
            l_prime: opts.l_prime,
            spins: opts.spins,
        },
    )?;
    m.put("dependent", report.dependent)?;
    m.put("threshold", aklt::NO_GO_ANGLE_THRESHOLD)?;
    m.put("report", &report)?;
    dir.finish(m)
}

#[derive(Serialize)]
struct ScatteringConfig {
    l_max: usize,
    l_prime: usize,
}

fn scattering(ctx: &Ctx, a: ScatteringArgs) -> Result<()> {
    let s = ctx.config.scope("aklt", "scattering");
    let cfg = ScatteringConfig {
        l_max: s.pick(a.l_max, "l_max", 5)?,
        l_prime: s.pick(a.l_prime, "l_prime", 1)?,
    };
    let mut rows = Vec::new();
    for l in 0..=cfg.l_max {
        for lpp in 0..=cfg.l_max {
            let r = aklt::scattering_amplitude(l, cfg.l_prime, lpp)?;
            rows.push(vec![l as f64, lpp as f64, r.full, r.triple_path, r.closed_form, r.path_product]);
        }
    }
    let mut dir = RunDir::open(&ctx.run_dir("aklt", "scattering"))?;
    dir.write_csv(
        "scattering.csv",
        &["L", "L2", "full", "triple_path", "closed_form", "path_product"],
        &rows,
    )?;
    let mut m = Manifest::new("aklt scattering", &cfg)?;
    m.put("max_closed_form_error", rows.iter().map(|r| (r[3] - r[4]).abs()).fold(0.0, f64::max))?;
    m.put("max_path_product_error", rows.iter().map(|r| (r[3] - r[5]).abs()).fold(0.0, f64::max))?;
    dir.finish(m)
}
