//! Subcommand definitions and implementations.

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use gexitlab::bounds::{
    bhattacharyya_fp_lower, bsc_bhattacharyya, fixed_point_rectangles, uniqueness_bound,
};
use gexitlab::codes::{
    bp_correctness_bound_check, code_points, dual_gexit_curve, LinearCode, MapMode,
};
use gexitlab::de::{bp_points, bp_threshold, de_fixed_point, matching_chart_for, DeOptions};
use gexitlab::ebp::{ebp_area, ebp_curve, map_threshold_upper_bound, maxwell_construction, EbpOptions};
use gexitlab::{h2, ChannelFamily, ChannelKind, ChannelSpec, DegreeDistribution, GexitKernel, Grid};

use crate::output::{write_out, Artifact, Cell, Format};
use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "gexitlab", version, about = "EXIT/GEXIT analysis of iterative coding over BMS channels")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// |D|-domain GEXIT kernel of a channel family at entropy h.
    Kernel(KernelArgs),
    /// Per-bit EXIT curve of a linear code.
    Exit(CodeCurveArgs),
    /// Per-bit GEXIT curve (or dual GEXIT curve) of a linear code.
    Gexit(GexitArgs),
    /// BP density evolution: a fixed point at h or the BP GEXIT curve.
    De(DeCmdArgs),
    /// Extended BP GEXIT curve from fixed-entropy density evolution.
    Ebp(EbpCmdArgs),
    /// Maxwell construction on the EBP curve.
    Maxwell(EbpCmdArgs),
    /// BP threshold and MAP threshold upper bound.
    Threshold(ThresholdArgs),
    /// Component GEXIT matching chart.
    Match(MatchArgs),
    /// BP-versus-MAP gap on a small code.
    Bpmap(BpmapArgs),
    /// Fixed-point rectangles or Bhattacharyya diagnostics.
    Bounds(BoundsArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: String,
    /// Output format; curves default to CSV, summaries to JSON.
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub format: Option<Format>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, env = "GEXITLAB_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// key=value file whose entries mirror the long flags; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Number of grid bins (odd).
    #[arg(long, default_value_t = gexitlab::density::DEFAULT_N_BINS)]
    pub bins: usize,
    /// Largest finite LLR magnitude of the grid.
    #[arg(long, default_value_t = gexitlab::density::DEFAULT_L_MAX)]
    pub l_max: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid, Failure> {
        Ok(Grid::new(self.l_max, self.bins)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeArgs {
    /// Convergence tolerance on successive densities.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
}

impl DeArgs {
    fn options(&self) -> Result<DeOptions, Failure> {
        positive("tol", self.tol)?;
        Ok(DeOptions { tol: self.tol, max_iters: self.max_iters, ..DeOptions::default() })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    /// Channel spec, e.g. `bec`, `bsc:eps=0.1`, `bawgn:sigma=0.9`.
    #[arg(long)]
    pub channel: String,
    /// Channel entropy; overrides a parameter in the channel spec.
    #[arg(long)]
    pub h: Option<f64>,
    /// Number of uniform points in s = [0, 1].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CodeCurveArgs {
    /// Code spec: `rep:n`, `spc:n`, `hamming74`, `simplex73`, `gen:...`, `parity:...`.
    #[arg(long)]
    pub code: String,
    #[arg(long)]
    pub channel: String,
    /// Number of uniform points in h = [0, 1].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

impl CodeCurveArgs {
    fn mode(&self) -> MapMode {
        match self.mode {
            ModeArg::Exact => MapMode::Exact,
            ModeArg::Mc => MapMode::MonteCarlo { samples: self.samples, seed: self.seed },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GexitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub curve: CodeCurveArgs,
    /// Emit the dual GEXIT curve instead.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub dual: bool,
    /// Half-width of the central differences of the dual curve.
    #[arg(long, default_value_t = 1e-4)]
    pub dh: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeCmdArgs {
    /// Ensemble spec: `(3,6)` or `l=x^2,r=x^5`.
    #[arg(long)]
    pub ensemble: String,
    #[arg(long)]
    pub channel: String,
    /// Single channel entropy; without it the BP curve is emitted.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub de: DeArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EbpCmdArgs {
    #[arg(long)]
    pub ensemble: String,
    #[arg(long)]
    pub channel: String,
    /// Uniform x-grid size before refinement.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

impl EbpCmdArgs {
    fn options(&self) -> Result<EbpOptions, Failure> {
        positive("tol", self.tol)?;
        Ok(EbpOptions { tol: self.tol, max_iters: self.max_iters, grid_points: self.points, ..EbpOptions::default() })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub ensemble: String,
    #[arg(long)]
    pub channel: String,
    /// Width of the final BP threshold bracket.
    #[arg(long, default_value_t = 1e-4)]
    pub bracket: f64,
    /// Step of the downward h-sweep for the MAP bound.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub de: DeArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatchArgs {
    #[arg(long)]
    pub ensemble: String,
    /// Channel spec including its operating point, e.g. `bsc:eps=0.07`.
    #[arg(long)]
    pub channel: String,
    #[arg(long)]
    pub h: Option<f64>,
    /// α-grid points per unit interval.
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BpmapArgs {
    #[arg(long)]
    pub code: String,
    /// Channel spec including its operating point, e.g. `bsc:eps=0.3`.
    #[arg(long)]
    pub channel: String,
    #[arg(long)]
    pub h: Option<f64>,
    /// Largest number of BP iterations; every ℓ from one up is reported.
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsWhat {
    Rectangles,
    Bhattacharyya,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub ensemble: String,
    #[arg(long, value_enum, default_value_t = BoundsWhat::Rectangles)]
    pub what: BoundsWhat,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Smallest crossover probability of the Bhattacharyya sweep.
    #[arg(long, default_value_t = 0.01)]
    pub eps_min: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub de: DeArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

fn usage(msg: String) -> Failure {
    Failure::Usage(anyhow!(msg))
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn uniform(points: usize) -> Result<Vec<f64>, Failure> {
    if points < 2 {
        return Err(usage(format!("--points must be at least 2, got {points}")));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn channel(spec: &str) -> Result<ChannelSpec, Failure> {
    Ok(spec.parse::<ChannelSpec>()?)
}

fn operating_point(spec: &ChannelSpec, h: Option<f64>) -> Result<f64, Failure> {
    let h = h.or(spec.h).ok_or_else(|| usage(format!("channel '{spec}' needs an operating point (--h or a parameter)")))?;
    if !(0.0..=1.0).contains(&h) {
        return Err(usage(format!("h = {h} not in [0, 1]")));
    }
    Ok(h)
}

fn ensemble(spec: &str) -> Result<DegreeDistribution, Failure> {
    Ok(spec.parse::<DegreeDistribution>()?)
}

fn code(spec: &str) -> Result<LinearCode, Failure> {
    Ok(spec.parse::<LinearCode>()?)
}

fn config_json<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("config serializes")
}

fn setup_threads(n: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = n {
        if n == 0 {
            return Err(usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Exit(_) => "exit",
            Command::Gexit(_) => "gexit",
            Command::De(_) => "de",
            Command::Ebp(_) => "ebp",
            Command::Maxwell(_) => "maxwell",
            Command::Threshold(_) => "threshold",
            Command::Match(_) => "match",
            Command::Bpmap(_) => "bpmap",
            Command::Bounds(_) => "bounds",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Kernel(a) => &a.common,
            Command::Exit(a) => &a.common,
            Command::Gexit(a) => &a.curve.common,
            Command::De(a) => &a.common,
            Command::Ebp(a) | Command::Maxwell(a) => &a.common,
            Command::Threshold(a) => &a.common,
            Command::Match(a) => &a.common,
            Command::Bpmap(a) => &a.common,
            Command::Bounds(a) => &a.common,
        }
    }

    /// The resolved configuration embedded in every artifact.
    fn config(&self) -> Value {
        match self {
            Command::Kernel(a) => config_json(a),
            Command::Exit(a) => config_json(a),
            Command::Gexit(a) => config_json(a),
            Command::De(a) => config_json(a),
            Command::Ebp(a) | Command::Maxwell(a) => config_json(a),
            Command::Threshold(a) => config_json(a),
            Command::Match(a) => config_json(a),
            Command::Bpmap(a) => config_json(a),
            Command::Bounds(a) => config_json(a),
        }
    }

    fn execute(&self) -> Result<Artifact, Failure> {
        match self {
            Command::Kernel(a) => cmd_kernel(a),
            Command::Exit(a) => cmd_exit(a),
            Command::Gexit(a) => cmd_gexit(a),
            Command::De(a) => cmd_de(a),
            Command::Ebp(a) => cmd_ebp(a),
            Command::Maxwell(a) => cmd_maxwell(a),
            Command::Threshold(a) => cmd_threshold(a),
            Command::Match(a) => cmd_match(a),
            Command::Bpmap(a) => cmd_bpmap(a),
            Command::Bounds(a) => cmd_bounds(a),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let cmd = &cli.command;
    let common = cmd.common();
    setup_threads(common.threads)?;
    let artifact = cmd.execute()?;
    let mut config = cmd.config();
    config["command"] = json!(cmd.name());
    let text = artifact.render(cmd.name(), &config, common.format);
    write_out(&common.out, &text)?;
    if artifact.complete {
        Ok(())
    } else {
        Err(Failure::Numeric(anyhow!("{}: some fixed points did not converge (partial output written)", cmd.name())))
    }
}

pub fn cmd_kernel(a: &KernelArgs) -> Result<Artifact, Failure> {
    let spec = channel(&a.channel)?;
    let h = operating_point(&spec, a.h)?;
    let k = GexitKernel::new(spec.kind, h)?;
    let rows = uniform(a.points)?.into_iter().map(|s| vec![Cell::from(s), Cell::from(k.abs_d(s))]).collect();
    Ok(Artifact::table(vec!["s", "kappa"], rows, json!({ "channel": spec.kind, "h": h })))
}

pub fn cmd_exit(a: &CodeCurveArgs) -> Result<Artifact, Failure> {
    code_curve(a, false)
}

fn code_curve(a: &CodeCurveArgs, gexit: bool) -> Result<Artifact, Failure> {
    let c = code(&a.code)?;
    let spec = channel(&a.channel)?;
    let hs = uniform(a.points)?;
    let pts = code_points(&c, spec.kind, &hs, a.mode())?;
    let rows = pts
        .iter()
        .map(|p| {
            let e = if gexit { p.gexit } else { p.exit };
            vec![Cell::from(p.h), Cell::from(e.value), Cell::from(e.std_err)]
        })
        .collect();
    let col = if gexit { "gexit" } else { "exit" };
    Ok(Artifact::table(
        vec!["h", col, "std_err"],
        rows,
        json!({ "code": c.name(), "n": c.n(), "k": c.k(), "rate": c.rate(), "channel": spec.kind }),
    ))
}

pub fn cmd_gexit(a: &GexitArgs) -> Result<Artifact, Failure> {
    if !a.dual {
        return code_curve(&a.curve, true);
    }
    positive("dh", a.dh)?;
    let c = code(&a.curve.code)?;
    let spec = channel(&a.curve.channel)?;
    let hs: Vec<f64> = uniform(a.curve.points)?.into_iter().filter(|&h| h - a.dh > 0.0 && h + a.dh < 1.0).collect();
    let curve = dual_gexit_curve(&c, spec.kind, &hs, a.dh)?;
    let rows = curve.points.iter().map(|&(g, h)| vec![Cell::from(g), Cell::from(h)]).collect();
    Ok(Artifact::table(
        vec!["dual_gexit", "extrinsic_entropy"],
        rows,
        json!({ "code": c.name(), "rate": c.rate(), "channel": spec.kind, "area": curve.area().abs() }),
    ))
}

pub fn cmd_de(a: &DeCmdArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    let spec = channel(&a.channel)?;
    let fam = ChannelFamily::new(spec.kind, a.grid.grid()?);
    let opts = a.de.options()?;
    if let Some(h) = a.h.or(spec.h) {
        let st = de_fixed_point(&d, &fam, h, &opts)?;
        let rep = st.density.report();
        let art = Artifact::summary(json!({
            "h": h,
            "iterations": st.iters,
            "converged": st.converged,
            "oscillating": st.oscillating,
            "fixed_point": rep,
            "bp_gexit": gexitlab::kernels::gexit_functional(spec.kind, h, &st.density)?,
        }));
        return Ok(art.incomplete_if(!st.converged));
    }
    let hs = uniform(a.points)?;
    let pts = bp_points(&d, &fam, &hs, &opts)?;
    let failed = pts.iter().any(|p| !p.converged);
    let rows = pts
        .iter()
        .map(|p| vec![p.h.into(), p.gexit.into(), p.exit.into(), p.iterations.into(), p.converged.into()])
        .collect();
    Ok(Artifact::table(
        vec!["h", "gexit", "exit", "iterations", "converged"],
        rows,
        json!({ "ensemble": a.ensemble, "design_rate": d.design_rate(), "channel": spec.kind }),
    )
    .incomplete_if(failed))
}

pub fn cmd_ebp(a: &EbpCmdArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    let spec = channel(&a.channel)?;
    let fam = ChannelFamily::new(spec.kind, a.grid.grid()?);
    let curve = ebp_curve(&d, &fam, &a.options()?)?;
    let failed = curve.points.iter().any(|p| !p.converged);
    let rows = curve
        .points
        .iter()
        .map(|p| {
            vec![p.x.into(), p.h.into(), p.gexit.into(), p.exit.into(), p.entropy_residual.into(), p.iters.into(), p.converged.into()]
        })
        .collect();
    Ok(Artifact::table(
        vec!["x", "h", "gexit", "exit", "entropy_residual", "iterations", "converged"],
        rows,
        json!({
            "area": ebp_area(&curve),
            "design_rate": d.design_rate(),
            "x_min": curve.x_min,
            "s_regions": curve.s_regions,
            "diagnostics": curve.diagnostics,
        }),
    )
    .incomplete_if(failed))
}

pub fn cmd_maxwell(a: &EbpCmdArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    let spec = channel(&a.channel)?;
    let fam = ChannelFamily::new(spec.kind, a.grid.grid()?);
    let curve = ebp_curve(&d, &fam, &a.options()?)?;
    let failed = curve.points.iter().any(|p| !p.converged);
    let m = maxwell_construction(&curve, &d);
    let rows = m.map_curve.points.iter().map(|&(h, g)| vec![Cell::from(h), Cell::from(g)]).collect();
    let mut art = Artifact::table(
        vec!["h", "map_gexit"],
        rows,
        json!({
            "cuts": m.cuts,
            "map_threshold": m.cuts.first().map(|c| c.h),
            "design_rate": d.design_rate(),
            "diagnostics": m.diagnostics,
        }),
    );
    art.default_format = Format::Json;
    Ok(art.incomplete_if(failed))
}

pub fn cmd_threshold(a: &ThresholdArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    let spec = channel(&a.channel)?;
    positive("bracket", a.bracket)?;
    let fam = ChannelFamily::new(spec.kind, a.grid.grid()?);
    let opts = a.de.options()?;
    let h_bp = bp_threshold(&d, &fam, a.bracket, &opts)?;
    let bound = map_threshold_upper_bound(&d, &fam, a.step, &opts)?;
    let rate = d.design_rate();
    Ok(Artifact::summary(json!({
        "ensemble": a.ensemble,
        "channel": spec.kind,
        "design_rate": rate,
        "h_bp": h_bp,
        "h_bar": bound.h_bar,
        "h_shannon": 1.0 - rate,
    })))
}

pub fn cmd_match(a: &MatchArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    let spec = channel(&a.channel)?;
    let h = operating_point(&spec, a.h)?;
    if a.steps == 0 {
        return Err(usage("--steps must be positive".into()));
    }
    let fam = ChannelFamily::new(spec.kind, a.grid.grid()?);
    let m = matching_chart_for(&d, &fam, h, a.steps)?;
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    for (name, c) in [("check", &m.check), ("variable", &m.variable)] {
        rows.extend(c.points.iter().map(|&(x, y)| vec![Cell::from(name), Cell::from(x), Cell::from(y)]));
    }
    Ok(Artifact::table(
        vec!["curve", "h", "gexit"],
        rows,
        json!({
            "h": h,
            "check_area": m.check_area(),
            "variable_left_area": m.variable_left_area(),
            "min_gap": m.min_gap,
            "complete": m.complete,
        }),
    )
    .incomplete_if(!m.complete))
}

pub fn cmd_bpmap(a: &BpmapArgs) -> Result<Artifact, Failure> {
    let c = code(&a.code)?;
    let spec = channel(&a.channel)?;
    let h = operating_point(&spec, a.h)?;
    if a.iters == 0 {
        return Err(usage("--iters must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for l in 1..=a.iters {
        let r = bp_correctness_bound_check(&c, spec.kind, h, l, a.samples, a.seed)?;
        rows.push(vec![
            l.into(),
            r.lhs.into(),
            r.report.delta.std_err.into(),
            r.rhs.into(),
            r.report.bp_gexit.value.into(),
            r.report.map_gexit.value.into(),
            r.short_cycle_fraction.into(),
            r.holds.into(),
        ]);
        reports.push(r);
    }
    let mut art = Artifact::table(
        vec!["iters", "delta", "delta_std_err", "bound", "bp_gexit", "map_gexit", "short_cycle_fraction", "holds"],
        rows,
        json!({ "code": c.name(), "channel": spec.kind, "h": h, "reports": reports }),
    );
    art.default_format = Format::Json;
    Ok(art)
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<Artifact, Failure> {
    let d = ensemble(&a.ensemble)?;
    match a.what {
        BoundsWhat::Rectangles => {
            let xs = uniform(a.points)?;
            let reg = fixed_point_rectangles(&d, &xs)?;
            let rows = reg
                .rects
                .iter()
                .map(|r| vec![r.x.into(), r.h_lo.into(), r.h_hi.into(), r.g_lo.into(), r.g_hi.into()])
                .collect();
            Ok(Artifact::table(
                vec!["x", "h_lo", "h_hi", "g_lo", "g_hi"],
                rows,
                json!({ "ensemble": a.ensemble, "design_rate": d.design_rate() }),
            ))
        }
        BoundsWhat::Bhattacharyya => {
            if !(a.eps_min > 0.0 && a.eps_min < 0.5) {
                return Err(usage(format!("--eps-min must lie in (0, 0.5), got {}", a.eps_min)));
            }
            let fam = ChannelFamily::new(ChannelKind::Bsc, a.grid.grid()?);
            let opts = a.de.options()?;
            let mut rows = Vec::new();
            let mut failed = false;
            for t in uniform(a.points)? {
                let eps = a.eps_min + (0.5 - a.eps_min) * t;
                let bh = bsc_bhattacharyya(eps);
                let st = de_fixed_point(&d, &fam, h2(eps), &opts)?;
                failed |= !st.converged;
                rows.push(vec![
                    eps.into(),
                    bh.into(),
                    st.density.battacharyya().into(),
                    bhattacharyya_fp_lower(&d, bh)?.into(),
                    uniqueness_bound(&d, bh).into(),
                ]);
            }
            Ok(Artifact::table(
                vec!["eps", "b_channel", "b_fixed_point", "b_lower_bound", "b_uniqueness"],
                rows,
                json!({ "ensemble": a.ensemble, "channel": "bsc" }),
            )
            .incomplete_if(failed))
        }
    }
}
