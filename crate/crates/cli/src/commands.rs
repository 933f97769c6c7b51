use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use fastslow::analysis::analyze::chialvo_params;
use fastslow::analysis::euler_study::rows_to_csv;
use fastslow::analysis::regimes::{self, run_regimes_with};
use fastslow::analysis::{run_analyze, run_euler_study, singularity_scan};
use fastslow::config::Config;
use fastslow::io::{csv_row, fmt_num, to_json, SCHEMA_VERSION};
use fastslow::manifold::{self, TransformOptions};
use fastslow::models::chialvo::{self, ChialvoParams, RegimeCase};
use fastslow::models::euler::{self, DiagonalOdeParams};
use fastslow::models::{ModelSpec, Params};
use fastslow::poincare::{self, AveragedSample, CycleRoot, PoincareOptions, SectionSpec};
use fastslow::reduced::{self, FiberRateReport, FixedPointReport, ProbeOptions};
use fastslow::spectral::{self, ChartCurve, SingularityHit, SingularityKind};
use fastslow::{Direction, Error, GraphManifold, Grid, Result, Vector};

use crate::{Ctx, ModelArg, Output};

fn load(ctx: &Ctx, m: &ModelArg) -> Result<Config> {
    let mut cfg = match &ctx.config {
        Some(path) => Config::load(path)?,
        None => Config::for_model(&m.model),
    };
    if let Some(eps) = m.eps {
        cfg.eps = eps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn grid_bounds(grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let axes = grid.axes();
    (
        axes.iter().map(|a| a[0]).collect(),
        axes.iter().map(|a| *a.last().expect("grid axes are nonempty")).collect(),
    )
}

/// Numeric slow manifold, sweeping in the configured direction or the one the spectrum allows.
fn numeric_slow(cfg: &Config, spec: &ModelSpec, critical: &GraphManifold) -> Result<(GraphManifold, Direction, usize)> {
    let direction = match cfg.direction {
        Some(d) => d,
        None => {
            let b = spectral::spectral_bounds(&spec.map, &critical.points(), cfg.tol)?;
            if b.nu_r.is_infinite() {
                Direction::Forward
            } else if b.nu_a == 0.0 {
                Direction::Backward
            } else {
                return Err(Error::Config(
                    "grid mixes attracting and repelling multipliers; set `direction` or narrow `grid`".into(),
                ));
            }
        }
    };
    if cfg.eps == 0.0 {
        return Ok((critical.clone(), direction, 0));
    }
    let (slow, stats) =
        manifold::slow_manifold_numeric_with(&spec.map, critical, cfg.eps, direction, &TransformOptions::default())?;
    Ok((slow, direction, stats.sweeps))
}

pub fn analyze(ctx: &Ctx, m: &ModelArg) -> Result<Output> {
    let cfg = load(ctx, m)?;
    let report = run_analyze(&cfg)?;
    Ok(Output::ok(vec![("analyze.json".into(), to_json(&report))]))
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Fill the distance-to-slow-manifold column.
    #[arg(long)]
    pub annotate: bool,
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Output> {
    let cfg = load(ctx, &a.model)?;
    let spec = cfg.model_spec()?;
    let map = &spec.map;
    let z0 = match (&a.z0, &cfg.simulate) {
        (Some(z), _) => z.clone(),
        (None, Some(s)) => s.z0.clone(),
        (None, None) if spec.name.ends_with("chialvo") => regimes::DEFAULT_Z0.to_vec(),
        (None, None) => {
            let z = spec.critical_point(&spec.sample_x(&vec![0.5; map.k()]))?;
            z.iter().copied().collect()
        }
    };
    if z0.len() != map.n() {
        return Err(Error::Config(format!("z0 has {} entries, model needs {}", z0.len(), map.n())));
    }
    let steps = a.steps.or(cfg.simulate.as_ref().map(|s| s.steps)).unwrap_or(1000);
    let mut traj = map.iterate(&Vector::from_vec(z0), cfg.eps, steps)?;
    if a.annotate {
        let grid = cfg.grid_for(&spec)?;
        let critical = manifold::solve_critical_graph(map, &grid, &spec.y_seed)?;
        let (slow, _, _) = numeric_slow(&cfg, &spec, &critical)?;
        traj.annotate(&slow);
    }
    Ok(Output::ok(vec![("trajectory.csv".into(), traj.to_csv())]))
}

#[derive(Serialize)]
struct SlowManifoldSummary {
    schema: u32,
    model: String,
    params: Params,
    eps: f64,
    direction: Direction,
    sweeps: usize,
    gap_to_first_order: f64,
    invariance_residual: f64,
}

pub fn slow_manifold(ctx: &Ctx, m: &ModelArg) -> Result<Output> {
    let cfg = load(ctx, m)?;
    let spec = cfg.model_spec()?;
    let map = &spec.map;
    let grid = cfg.grid_for(&spec)?;
    let critical = manifold::solve_critical_graph(map, &grid, &spec.y_seed)?;
    let first = manifold::slow_manifold_first_order(map, &critical, cfg.eps)?;
    let (slow, direction, sweeps) = numeric_slow(&cfg, &spec, &critical)?;
    let residuals = slow.invariance_residuals(map, cfg.eps)?;

    let (k, m) = (map.k(), map.m());
    let mut csv = format!("# schema: {SCHEMA_VERSION}\n# model: {}\n# eps: {}\n", cfg.model, fmt_num(cfg.eps));
    let mut header: Vec<String> = (0..k).map(|i| format!("x_{i}")).collect();
    for tag in ["phi0", "phi_eps_firstorder", "phi_eps_numeric"] {
        header.extend((0..m).map(|i| format!("{tag}_{i}")));
    }
    header.push("residual".into());
    csv.push_str(&header.join(","));
    csv.push('\n');
    for i in 0..grid.len() {
        let mut row: Vec<f64> = grid.node(i).iter().copied().collect();
        for g in [&critical, &first, &slow] {
            row.extend(g.values()[i].iter());
        }
        csv.push_str(&csv_row(&row));
        csv.push(',');
        if let Some(r) = residuals[i] {
            csv.push_str(&fmt_num(r));
        }
        csv.push('\n');
    }
    let summary = SlowManifoldSummary {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        params: cfg.params.clone(),
        eps: cfg.eps,
        direction,
        sweeps,
        gap_to_first_order: slow.sup_distance(&first),
        invariance_residual: slow.max_invariance_residual(map, cfg.eps)?,
    };
    Ok(Output::ok(vec![
        ("slow_manifold.csv".into(), csv),
        ("slow_manifold.json".into(), to_json(&summary)),
    ]))
}

#[derive(Serialize)]
struct SingularityReport {
    schema: u32,
    model: String,
    parameter_table: Params,
    hits: Vec<SingularityHit>,
}

pub fn singularities(ctx: &Ctx, m: &ModelArg) -> Result<Output> {
    let cfg = load(ctx, m)?;
    let spec = cfg.model_spec()?;
    let hits = singularity_scan(&cfg, &spec)?;
    let mut csv = format!("# schema: {SCHEMA_VERSION}\ncoord,kind,mu_re,mu_im\n");
    for h in &hits {
        csv.push_str(&format!(
            "{},{:?},{},{}\n",
            fmt_num(h.coord),
            h.kind,
            fmt_num(h.mu_re),
            fmt_num(h.mu_im)
        ));
    }
    let report = SingularityReport {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        parameter_table: cfg.params.clone(),
        hits,
    };
    Ok(Output::ok(vec![
        ("singularities.json".into(), to_json(&report)),
        ("singularities.csv".into(), csv),
    ]))
}

#[derive(Args, Debug)]
pub struct ReducedArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Steps of the full map per reduced step.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Reduced steps per trajectory.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Evenly spaced base points per chart axis.
    #[arg(long, default_value_t = 5)]
    pub base_grid: usize,
    /// Extra base points drawn uniformly with --seed.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    /// Iterations tracked by each fiber-rate probe.
    #[arg(long, default_value_t = 20)]
    pub probe_steps: usize,
    /// Size of the fiber offset of each probe.
    #[arg(long, default_value_t = 1e-4)]
    pub offset: f64,
}

#[derive(Serialize)]
struct ReducedReport {
    schema: u32,
    model: String,
    params: Params,
    eps: f64,
    m: usize,
    steps: usize,
    seed: u64,
    bases: Vec<Vec<f64>>,
    fiber_rates: Vec<Option<FiberRateReport>>,
    notes: Vec<String>,
}

pub fn reduced(ctx: &Ctx, a: &ReducedArgs) -> Result<Output> {
    let cfg = load(ctx, &a.model)?;
    if a.m == 0 || cfg.eps * a.m as f64 > reduced::EPS_M_CAP {
        return Err(Error::ParamOutOfRange(format!(
            "need m >= 1 and eps * m <= {}, got m = {}, eps = {}",
            reduced::EPS_M_CAP,
            a.m,
            cfg.eps
        )));
    }
    if a.base_grid == 0 && a.random == 0 {
        return Err(Error::Config("no base points: set --base-grid or --random".into()));
    }
    if !(a.offset > 0.0) {
        return Err(Error::Config("--offset must be positive".into()));
    }
    let spec = cfg.model_spec()?;
    let map = &spec.map;
    let grid = cfg.grid_for(&spec)?;
    let (lo, hi) = grid_bounds(&grid);
    let k = map.k();

    let mut bases: Vec<Vector> = Vec::new();
    if a.base_grid > 0 {
        let g = Grid::new(lo.clone(), hi.clone(), vec![a.base_grid; k])?;
        bases.extend((0..g.len()).map(|i| g.node(i)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    for _ in 0..a.random {
        bases.push(Vector::from_iterator(k, (0..k).map(|i| rng.gen_range(lo[i]..=hi[i]))));
    }

    let mut notes = Vec::new();
    let runs: Vec<(Vec<Vector>, Option<String>)> = bases
        .par_iter()
        .map(|x| {
            let mut pts = Vec::new();
            let mut z = match spec.critical_point(x) {
                Ok(z) => z,
                Err(e) => return (pts, Some(e.to_string())),
            };
            pts.push(z.clone());
            for _ in 0..a.steps {
                let next = reduced::mth_iterate_reduced(map, &z, cfg.eps, a.m)
                    .and_then(|q| manifold::retract_to_critical(map, &q));
                match next {
                    Ok(q) if grid.contains(&map.chart().x_of(&q)) => {
                        z = q;
                        pts.push(z.clone());
                    }
                    Ok(_) => return (pts, Some("left the grid".into())),
                    Err(e) => return (pts, Some(e.to_string())),
                }
            }
            (pts, None)
        })
        .collect();

    let mut csv = format!("# schema: {SCHEMA_VERSION}\n# model: {}\n# eps: {}\n# m: {}\nbase,step", cfg.model, fmt_num(cfg.eps), a.m);
    for i in 0..map.n() {
        csv.push_str(&format!(",z_{i}"));
    }
    csv.push('\n');
    for (b, (pts, stop)) in runs.iter().enumerate() {
        for (s, p) in pts.iter().enumerate() {
            csv.push_str(&format!("{b},{s},{}\n", csv_row(p.as_slice())));
        }
        if let Some(why) = stop {
            notes.push(format!("base {b}: reduced trajectory stopped after {} points: {why}", pts.len()));
        }
    }

    let fiber_rates = match grid_slow(&cfg, &spec, &grid) {
        Err(e) => {
            notes.push(format!("fiber rates: {e}"));
            vec![None; bases.len()]
        }
        Ok(slow) => {
            let probes: Vec<Result<FiberRateReport>> = bases
                .par_iter()
                .map(|x| probe(map, &slow, x, a.offset, a.probe_steps, cfg.eps))
                .collect();
            probes
                .into_iter()
                .enumerate()
                .map(|(b, r)| match r {
                    Ok(r) => Some(r),
                    Err(e) => {
                        notes.push(format!("base {b}: fiber rate: {e}"));
                        None
                    }
                })
                .collect()
        }
    };

    let report = ReducedReport {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        params: cfg.params.clone(),
        eps: cfg.eps,
        m: a.m,
        steps: a.steps,
        seed: ctx.seed,
        bases: bases.iter().map(|x| x.iter().copied().collect()).collect(),
        fiber_rates,
        notes,
    };
    Ok(Output::ok(vec![
        ("reduced.csv".into(), csv),
        ("reduced.json".into(), to_json(&report)),
    ]))
}

fn grid_slow(cfg: &Config, spec: &ModelSpec, grid: &Grid) -> Result<GraphManifold> {
    let critical = manifold::solve_critical_graph(&spec.map, grid, &spec.y_seed)?;
    Ok(numeric_slow(cfg, spec, &critical)?.0)
}

/// Offset along the first fast fiber direction; repelling fibers are probed backwards.
fn probe(
    map: &fastslow::FastSlowMap,
    slow: &GraphManifold,
    x: &Vector,
    size: f64,
    steps: usize,
    eps: f64,
) -> Result<FiberRateReport> {
    let z_eps = slow.point(x);
    let z0 = manifold::retract_to_critical(map, &z_eps)?;
    let inverse = spectral::nontrivial_multipliers(map, &z0)?.iter().all(|mu| mu.norm() > 1.0);
    let n = map.n_matrix(&z_eps)?;
    let dir = n.column(0).into_owned();
    let offset = &dir * (size / dir.norm());
    reduced::fiber_rate_probe(map, slow, &z_eps, &offset, steps, inverse, eps, &ProbeOptions::default())
}

#[derive(Args, Debug)]
pub struct RegimesArgs {
    /// I, II, III, IV or all.
    #[arg(long, default_value = "all")]
    pub case: String,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = regimes::DEFAULT_STEPS)]
    pub steps: usize,
}

pub fn regimes(ctx: &Ctx, a: &RegimesArgs) -> Result<Output> {
    let cfg_eps = match &ctx.config {
        Some(path) => Some(Config::load(path)?.eps),
        None => None,
    };
    let eps = a.eps.or(cfg_eps).unwrap_or(1e-3);
    let cases: Vec<RegimeCase> = if a.case.eq_ignore_ascii_case("all") {
        RegimeCase::ALL.to_vec()
    } else {
        vec![RegimeCase::parse(&a.case)
            .ok_or_else(|| Error::Config(format!("unknown case '{}' (I, II, III, IV or all)", a.case)))?]
    };
    let runs = cases
        .par_iter()
        .map(|&c| {
            let (mut rep, traj) = run_regimes_with(ChialvoParams::regime(c), eps, regimes::DEFAULT_Z0, a.steps)?;
            rep.case = Some(c);
            Ok((c, rep, traj))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    for (c, rep, traj) in runs {
        files.push((format!("regime_{c:?}.json"), to_json(&rep)));
        files.push((format!("regime_{c:?}.csv"), traj.to_csv()));
    }
    Ok(Output::ok(files))
}

#[derive(Args, Debug)]
pub struct EulerStudyArgs {
    /// Test system; only `diagonal` has a closed-form slow manifold.
    #[arg(long, default_value = "diagonal")]
    pub ode: String,
    #[arg(long, value_delimiter = ',', default_value = "0,0.04,0.02,0.01")]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
    pub h: Vec<f64>,
    /// Nodes of the slow-variable grid on [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid_n: usize,
}

pub fn euler_study(ctx: &Ctx, a: &EulerStudyArgs) -> Result<Output> {
    if a.ode != "diagonal" {
        return Err(Error::Config(format!("unknown test ODE '{}' (only 'diagonal')", a.ode)));
    }
    let mut p = DiagonalOdeParams::default();
    if let Some(path) = &ctx.config {
        let cfg = Config::load(path)?;
        if cfg.model != "euler:diagonal" {
            return Err(Error::Config(format!("euler-study needs model 'euler:diagonal', got '{}'", cfg.model)));
        }
        cfg.model_spec()?;
        let get = |k: &str, d: f64| cfg.params.get(k).copied().unwrap_or(d);
        p = DiagonalOdeParams {
            lambda1: get("lambda1", p.lambda1),
            lambda2: get("lambda2", p.lambda2),
            eta1: get("eta1", p.eta1),
            eta2: get("eta2", p.eta2),
        };
    }
    if let Some(&e) = a.eps.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::ParamOutOfRange(format!("eps = {e} must be non-negative")));
    }
    let rows = run_euler_study(p, &a.eps, &a.h, &Grid::line(0.0, 1.0, a.grid_n)?)?;
    Ok(Output::ok(vec![("euler_study.csv".into(), rows_to_csv(&rows))]))
}

#[derive(Args, Debug)]
pub struct PoincareArgs {
    #[arg(long, default_value = "hopf")]
    pub ode: String,
    /// Target radius squared of the slow drift `a_g - (x^2 + y^2)`.
    #[arg(long)]
    pub a_g: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    pub alpha_range: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Samples of the critical curve and averaged equation.
    #[arg(long, default_value_t = 21)]
    pub samples: usize,
}

#[derive(Serialize)]
struct CurvePoint {
    alpha: f64,
    x: Vec<f64>,
    multiplier: f64,
}

#[derive(Serialize)]
struct PoincareReport {
    schema: u32,
    ode: String,
    a_g: f64,
    eps: f64,
    alpha_range: (f64, f64),
    critical_curve: Vec<CurvePoint>,
    averaged_g_samples: Vec<AveragedSample>,
    roots: Vec<CycleRoot>,
    fixed_points: Vec<FixedPointReport>,
    notes: Vec<String>,
}

pub fn poincare(ctx: &Ctx, a: &PoincareArgs) -> Result<Output> {
    if a.ode != "hopf" {
        return Err(Error::Config(format!("unknown ODE '{}' (only 'hopf')", a.ode)));
    }
    let mut a_g = 0.5;
    if let Some(path) = &ctx.config {
        let cfg = Config::load(path)?;
        if cfg.model != "poincare:hopf" {
            return Err(Error::Config(format!("poincare needs model 'poincare:hopf', got '{}'", cfg.model)));
        }
        cfg.model_spec()?;
        a_g = cfg.params.get("a_g").copied().unwrap_or(a_g);
    }
    let a_g = a.a_g.unwrap_or(a_g);
    let (lo, hi) = match a.alpha_range[..] {
        [lo, hi] if lo < hi => (lo, hi),
        _ => return Err(Error::Config("--alpha-range needs two increasing values".into())),
    };
    if a.samples < 2 {
        return Err(Error::Config("--samples must be at least 2".into()));
    }
    if !(0.0..=1e-2).contains(&a.eps) {
        return Err(Error::ParamOutOfRange(format!("eps = {} outside [0, 1e-2]", a.eps)));
    }
    let ode = poincare::hopf(a_g);
    let section = SectionSpec::hopf_default();
    let opts = PoincareOptions::default();
    let map = poincare::build_poincare_map(&ode, &section, &opts)?;
    let alphas = linspace(lo, hi, a.samples);
    let curve = poincare::critical_curve(&map, &section, &alphas)?;
    let averaged = alphas
        .par_iter()
        .map(|&al| poincare::averaged_g_sample(&ode, &section, al, &opts))
        .collect::<Result<Vec<_>>>()?;
    let roots = poincare::limit_cycle_condition(&ode, &section, (lo, hi), a.samples, &opts)?;
    let mut notes = Vec::new();
    let mut fixed_points = Vec::new();
    for r in &roots {
        let found = poincare::cycle_point(&map, &section, r.alpha)
            .and_then(|z| reduced::find_fixed_point(&map, &z, a.eps));
        match found {
            Ok(f) => fixed_points.push(f),
            Err(e) => notes.push(format!("fixed point near alpha = {}: {e}", r.alpha)),
        }
    }

    let dim = curve.first().map_or(0, |c| c.1.len());
    let mut csv = format!("# schema: {SCHEMA_VERSION}\nalpha");
    for i in 0..dim {
        csv.push_str(&format!(",x_{i}"));
    }
    csv.push_str(",multiplier,period,averaged_g\n");
    for ((al, x, mu), s) in curve.iter().zip(&averaged) {
        let mut row = vec![*al];
        row.extend(x);
        row.extend([*mu, s.period, s.g]);
        csv.push_str(&csv_row(&row));
        csv.push('\n');
    }
    let report = PoincareReport {
        schema: SCHEMA_VERSION,
        ode: a.ode.clone(),
        a_g,
        eps: a.eps,
        alpha_range: (lo, hi),
        critical_curve: curve
            .into_iter()
            .map(|(alpha, x, multiplier)| CurvePoint { alpha, x, multiplier })
            .collect(),
        averaged_g_samples: averaged,
        roots,
        fixed_points,
        notes,
    };
    Ok(Output::ok(vec![
        ("poincare.json".into(), to_json(&report)),
        ("poincare_cycles.csv".into(), csv),
    ]))
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    max_error: f64,
    tol: f64,
    pass: bool,
}

impl Check {
    fn new(name: &'static str, max_error: f64, tol: f64) -> Self {
        Check {
            name,
            max_error,
            tol,
            pass: max_error <= tol,
        }
    }
}

#[derive(Serialize)]
struct OracleReport {
    schema: u32,
    model: String,
    params: Params,
    eps: f64,
    pass: bool,
    checks: Vec<Check>,
}

pub fn oracle(ctx: &Ctx, m: &ModelArg) -> Result<Output> {
    let cfg = load(ctx, m)?;
    let spec = cfg.model_spec()?;
    let checks = match cfg.model.as_str() {
        "chialvo" => chialvo_checks(&cfg, &spec)?,
        "euler:diagonal" => diagonal_checks(&cfg, &spec)?,
        other => return Err(Error::Config(format!("no closed-form oracle for model '{other}'"))),
    };
    let pass = checks.iter().all(|c| c.pass);
    let report = OracleReport {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        params: cfg.params.clone(),
        eps: cfg.eps,
        pass,
        checks,
    };
    let failed = (!pass).then(|| {
        let names: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        format!("oracle checks failed: {}", names.join(", "))
    });
    Ok(Output {
        files: vec![("oracle.json".into(), to_json(&report))],
        failed,
    })
}

fn chialvo_checks(cfg: &Config, spec: &ModelSpec) -> Result<Vec<Check>> {
    let p = chialvo_params(&cfg.params)?;
    let map = &spec.map;
    let mut checks = Vec::new();

    let mut err: f64 = 0.0;
    let mut layer: f64 = 0.0;
    for v in linspace(p.k + 0.01, 5.0, 1000) {
        let z = chialvo::critical_point(&p, v);
        let mu = spectral::nontrivial_multipliers(map, &z)?;
        err = err.max((mu[0].re - chialvo::mu(&p, v)).abs().max(mu[0].im.abs()));
        layer = layer.max((map.evaluate(&z, 0.0)? - &z).amax());
    }
    checks.push(Check::new("multipliers", err, 1e-10));
    checks.push(Check::new("layer_map_fixes_critical_manifold", layer, 1e-12));

    let grid = Grid::line(1.1, 4.5, 341)?;
    let critical = manifold::solve_critical_graph(map, &grid, &spec.y_seed)?;
    let first = manifold::slow_manifold_first_order(map, &critical, cfg.eps)?;
    let (mut phi0, mut phi1, mut red): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        let v = grid.node(i)[0];
        phi0 = phi0.max((critical.values()[i][0] - chialvo::phi0(&p, v)).abs());
        if chialvo::fold_points(p.k).iter().all(|f| (v - f).abs() > 0.05) && (v - chialvo::flip_point(p.k)).abs() > 0.05 {
            phi1 = phi1.max((first.values()[i][0] - chialvo::slow_manifold_first_order(&p, v, cfg.eps)).abs());
            let step = reduced::reduced_step(map, &critical.node_point(i), cfg.eps)?;
            red = red.max((step[1] - chialvo::reduced_v_step(&p, v, cfg.eps)).abs());
        }
    }
    checks.push(Check::new("critical_graph", phi0, 1e-12));
    checks.push(Check::new("first_order_slow_manifold", phi1, 1e-10));
    checks.push(Check::new("reduced_step", red, 1e-12));

    let lo = if p.k == 0.0 { 1e-3 } else { p.k + 1e-3 };
    let ts = linspace(lo, 5.0, 4000);
    let hits = spectral::locate_singularities(map, &ChartCurve { map }, &ts, &chialvo::critical_point(&p, lo), 1e-12)?;
    let folds: Vec<f64> = hits.iter().filter(|h| h.kind == SingularityKind::Fold).map(|h| h.coord).collect();
    let flips: Vec<f64> = hits.iter().filter(|h| h.kind == SingularityKind::Flip).map(|h| h.coord).collect();
    let want = chialvo::fold_points(p.k);
    let loc = if folds.len() == want.len() && flips.len() == 1 {
        folds
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold((flips[0] - chialvo::flip_point(p.k)).abs(), f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(Check::new("fold_and_flip_locations", loc, 1e-8));
    Ok(checks)
}

fn diagonal_checks(cfg: &Config, spec: &ModelSpec) -> Result<Vec<Check>> {
    let get = |k: &str, d: f64| cfg.params.get(k).copied().unwrap_or(d);
    let d = DiagonalOdeParams::default();
    let p = DiagonalOdeParams {
        lambda1: get("lambda1", d.lambda1),
        lambda2: get("lambda2", d.lambda2),
        eta1: get("eta1", d.eta1),
        eta2: get("eta2", d.eta2),
    };
    let h = get("h", 0.2);
    let grid = cfg.grid_for(spec)?;
    let critical = manifold::solve_critical_graph(&spec.map, &grid, &spec.y_seed)?;
    let (slow, _, _) = numeric_slow(cfg, spec, &critical)?;
    let mut ode_gap: f64 = 0.0;
    let mut map_gap: f64 = 0.0;
    for i in 0..grid.len() {
        let x = grid.node(i)[0];
        let ode_y = euler::diagonal_ode_slow_manifold(&p, x, cfg.eps);
        let map_y = euler::diagonal_map_slow_manifold(&p, x, cfg.eps, h);
        for c in 0..2 {
            ode_gap = ode_gap.max((slow.values()[i][c] - ode_y[c]).abs());
            map_gap = map_gap.max((slow.values()[i][c] - map_y[c]).abs());
        }
    }
    // The continuous manifold is only O(eps^2 h) away; allow a generous constant.
    let scale = cfg.eps * cfg.eps * h;
    Ok(vec![
        Check::new("numeric_vs_closed_form_map_manifold", map_gap, 1e-9),
        Check::new("distance_to_ode_manifold", ode_gap, 10.0 * scale + 1e-9),
    ])
}
