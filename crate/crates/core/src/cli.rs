//! Command-line runner: `sheetgame <subcommand> --config FILE [--out DIR]`.
//!
//! Exit status: 0 all checks pass, 1 a check failed, 2 bad arguments or
//! configuration, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{require, ExperimentConfig, GameChoice};
use crate::error::{Error, Result};
use crate::game::{check_nash, Direction, NashReport};
use crate::grid::{GridSpec, Point, SheetEnsemble};
use crate::identities::{bspde_wellposedness, ibp_check, ito_formula_check, ItoReport, SmoothFn};
use crate::pollution::{solve_example1, solve_example2, symmetric_case_report, EquilibriumSolution, SolveOptions};
use crate::stats::MeanStat;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Paths per batch when streaming large sheet ensembles.
const SHEET_BATCH: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "sheetgame", version, about = "Brownian-sheet calculus checks and pollution-game solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `run.out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true, env = "SHEETGAME_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sample the sheet and check its covariance.
    SimulateSheet,
    /// Monte Carlo check of the plane Itô formula.
    VerifyIto,
    /// Monte Carlo check of the product rule.
    VerifyIbp,
    /// Lipschitz-constant sweep for the adjoint equation.
    Wellposedness,
    /// Unilateral-deviation check of a solved example.
    CheckNash {
        /// Perturbation magnitude (repeatable).
        #[arg(long = "magnitude")]
        magnitudes: Vec<f64>,
        /// Rectangle corner as `t,x` fractions of the domain (repeatable).
        #[arg(long = "corner", value_parser = parse_pair)]
        corners: Vec<[f64; 2]>,
    },
    SolveExample1,
    SolveExample2,
    SymmetricReport,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateSheet => "simulate-sheet",
            Command::VerifyIto => "verify-ito",
            Command::VerifyIbp => "verify-ibp",
            Command::Wellposedness => "wellposedness",
            Command::CheckNash { .. } => "check-nash",
            Command::SolveExample1 => "solve-example1",
            Command::SolveExample2 => "solve-example2",
            Command::SymmetricReport => "symmetric-report",
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `t,x`, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([p(a)?, p(b)?])
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) => EXIT_PARSE,
        _ => EXIT_NUMERICAL,
    }
}

/// Fixed-width positional decimal with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return format!("{:.16}", 0.0);
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        let rec: Vec<String> = row
            .into_iter()
            .map(|c| match c {
                Cell::Num(v) => fmt_num(v),
                Cell::Text(s) => s,
            })
            .collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

struct Outcome {
    pass: bool,
    files: Vec<PathBuf>,
    summary: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, files: Vec::new(), summary: Vec::new() }
    }

    fn check(&mut self, name: &str, pass: bool) {
        self.pass &= pass;
        self.summary.push(format!("{name}: {}", if pass { "PASS" } else { "FAIL" }));
    }

    fn note(&mut self, s: String) {
        self.summary.push(s);
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    grid: GridSpec,
    out: PathBuf,
}

impl Ctx {
    fn file(&self, o: &mut Outcome, name: &str) -> PathBuf {
        let p = self.out.join(name);
        o.files.push(p.clone());
        p
    }

    fn solve_options(&self, nash: bool) -> Result<SolveOptions> {
        let nash = if nash {
            Some(self.cfg.nash.clone().unwrap_or_default().options()?)
        } else {
            None
        };
        Ok(SolveOptions { picard: self.cfg.picard.options()?, nash })
    }
}

/// Parse arguments, run, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(o) => {
            if o.pass {
                EXIT_OK
            } else {
                eprintln!("check failed; see {}", o.files.last().map(|p| p.display().to_string()).unwrap_or_default());
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(p) = cli.paths {
        cfg.run.paths = p;
    }
    if cli.workers.is_some() {
        cfg.run.workers = cli.workers;
    }
    if cfg.run.paths == 0 {
        return Err(Error::Config("run.paths must be >= 1".into()));
    }
    let out = cli.out.clone().or_else(|| cfg.run.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let workers = cfg.run.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let grid = cfg.grid();
    let ctx = Ctx { cfg, grid, out };
    let mut o = pool.install(|| dispatch(&cli.command, &ctx))?;
    write_manifest(&ctx, cli.command.name(), pool.current_num_threads(), &mut o)?;
    Ok(o)
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Outcome> {
    match cmd {
        Command::SimulateSheet => simulate_sheet(ctx),
        Command::VerifyIto => verify_ito(ctx),
        Command::VerifyIbp => verify_ibp(ctx),
        Command::Wellposedness => wellposedness(ctx),
        Command::CheckNash { magnitudes, corners } => run_check_nash(ctx, magnitudes, corners),
        Command::SolveExample1 => solve(ctx, GameChoice::Example1),
        Command::SolveExample2 => solve(ctx, GameChoice::Example2),
        Command::SymmetricReport => symmetric(ctx),
    }
}

fn write_manifest(ctx: &Ctx, command: &str, workers: usize, o: &mut Outcome) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("sheetgame {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("command = {command}\n"));
    s.push_str(&format!("seed = {}\n", ctx.cfg.run.seed));
    s.push_str(&format!("paths = {}\n", ctx.cfg.run.paths));
    s.push_str(&format!("workers = {workers}\n"));
    s.push_str(&format!("status = {}\n", if o.pass { "PASS" } else { "FAIL" }));
    for line in &o.summary {
        s.push_str(&format!("# {line}\n"));
    }
    for f in &o.files {
        s.push_str(&format!("output = {}\n", f.display()));
    }
    let ts = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    s.push_str(&format!("timestamp = {ts}\n"));
    s.push_str("\n[config]\n");
    s.push_str(&ctx.cfg.to_toml());
    let p = ctx.out.join("manifest.txt");
    fs::write(&p, s)?;
    o.files.push(p);
    Ok(())
}

fn simulate_sheet(ctx: &Ctx) -> Result<Outcome> {
    let sc = ctx.cfg.sheet.clone().unwrap_or_default();
    let g = ctx.grid;
    let pairs = sc
        .pairs
        .iter()
        .map(|[a, b]| Ok((g.locate(Point::new(a[0], a[1]))?, g.locate(Point::new(b[0], b[1]))?)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Config(format!("sheet.pairs: {e}")))?;
    let n = ctx.cfg.run.paths;
    let mut prods = vec![Vec::with_capacity(n); pairs.len()];
    let mut first = 0usize;
    let mut path0 = Vec::new();
    while first < n {
        let m = SHEET_BATCH.min(n - first);
        let ens = SheetEnsemble::sample_range(g, ctx.cfg.run.seed, first as u64, m)?;
        if first == 0 {
            path0 = ens.values(0).to_vec();
        }
        for (k, (a, b)) in pairs.iter().enumerate() {
            prods[k].extend((0..m).map(|p| ens.value_unchecked(p, *a) * ens.value_unchecked(p, *b)));
        }
        first += m;
    }
    let mut o = Outcome::new();
    let mut rows = Vec::new();
    for (k, (a, b)) in pairs.iter().enumerate() {
        let (pa, pb) = (g.point(*a), g.point(*b));
        let exact = pa.t.min(pb.t) * pa.x.min(pb.x);
        let m = MeanStat::from_samples(&prods[k]);
        let pass = m.within(exact, sc.k_sigma);
        o.check(&format!("cov[({}, {}), ({}, {})]", pa.t, pa.x, pb.t, pb.x), pass);
        rows.push(vec![pa.t.into(), pa.x.into(), pb.t.into(), pb.x.into(), m.mean.into(), m.stderr.into(), exact.into(), pass.into()]);
    }
    let f = ctx.file(&mut o, "sheet_covariance.csv");
    write_csv(&f, &["t1", "x1", "t2", "x2", "estimate", "stderr", "exact", "pass"], rows)?;
    let f = ctx.file(&mut o, "sheet_path0.csv");
    write_csv(
        &f,
        &["t", "x", "b"],
        g.nodes().map(|z| {
            let p = g.point(z);
            vec![p.t.into(), p.x.into(), path0[g.node(z.i, z.j)].into()]
        }),
    )?;
    Ok(o)
}

fn report_rows(r: &ItoReport) -> Vec<Vec<Cell>> {
    let mut rows: Vec<Vec<Cell>> = vec![
        vec!["lhs".into(), r.lhs.into(), r.lhs_stderr.into()],
        vec!["rhs".into(), r.rhs.into(), f64::NAN.into()],
        vec!["rhs_full".into(), r.rhs_full.into(), f64::NAN.into()],
        vec!["diff".into(), r.diff.into(), r.diff_stderr.into()],
        vec!["allowance".into(), r.allowance.into(), f64::NAN.into()],
        vec!["max_path_rel_err".into(), r.max_path_rel_err.into(), f64::NAN.into()],
    ];
    for gr in &r.groups {
        rows.push(vec![format!("group:{}", gr.name).into(), gr.mean.into(), gr.stderr.into()]);
    }
    rows
}

fn verify_ito(ctx: &Ctx) -> Result<Outcome> {
    let ic = require(&ctx.cfg.ito, "ito")?;
    let f = SmoothFn::by_name(&ic.function).map_err(|e| Error::Config(e.to_string()))?;
    let z = ctx.cfg.node(ic.point)?;
    let ens = SheetEnsemble::sample(ctx.grid, ctx.cfg.run.seed, ctx.cfg.run.paths)?;
    let r = ito_formula_check(&f, &ic.process.spec(), z, &ens, ic.options())?;
    let mut o = Outcome::new();
    o.check(&format!("ito[{}]", ic.function), r.pass);
    o.note(format!("lhs {} rhs {} diff {} +- {}", r.lhs, r.rhs, r.diff, r.diff_stderr));
    let p = ctx.file(&mut o, "ito_report.csv");
    write_csv(&p, &["quantity", "value", "stderr"], report_rows(&r))?;
    Ok(o)
}

fn verify_ibp(ctx: &Ctx) -> Result<Outcome> {
    let ic = require(&ctx.cfg.ibp, "ibp")?;
    let z = ctx.cfg.node(ic.point)?;
    let ens = SheetEnsemble::sample(ctx.grid, ctx.cfg.run.seed, ctx.cfg.run.paths)?;
    let r = ibp_check(&ic.y1.spec(), &ic.y2.spec(), z, &ens, ic.k_sigma)?;
    let mut o = Outcome::new();
    o.check("ibp", r.pass);
    o.note(format!("E[Y1 Y2] {} expansion {}", r.lhs, r.rhs));
    let p = ctx.file(&mut o, "ibp_report.csv");
    write_csv(&p, &["quantity", "value", "stderr"], report_rows(&r))?;
    Ok(o)
}

fn wellposedness(ctx: &Ctx) -> Result<Outcome> {
    let wc = require(&ctx.cfg.wellposedness, "wellposedness")?;
    let area = wc.area.unwrap_or(ctx.grid.t_max * ctx.grid.x_max);
    let mut rows = Vec::new();
    let mut o = Outcome::new();
    for &k1 in &wc.k1 {
        for &k2 in &wc.k2 {
            let w = bspde_wellposedness(k1, k2, area).map_err(|e| Error::Config(e.to_string()))?;
            rows.push(vec![k1.into(), k2.into(), area.into(), w.r0.into(), w.margin_k1.into(), w.margin_k2.into(), w.well_posed.into()]);
        }
    }
    o.note(format!("r0 = {}", crate::identities::bessel_r0()));
    let p = ctx.file(&mut o, "wellposedness.csv");
    write_csv(&p, &["k1", "k2", "area", "r0", "margin_k1", "margin_k2", "well_posed"], rows)?;
    Ok(o)
}

fn solve_choice(ctx: &Ctx, game: GameChoice, nash: bool) -> Result<(EquilibriumSolution, Box<dyn crate::game::GameModel>)> {
    let opts = ctx.solve_options(nash)?;
    let (seed, paths) = (ctx.cfg.run.seed, ctx.cfg.run.paths);
    match game {
        GameChoice::Example1 => {
            let c = require(&ctx.cfg.example1, "example1")?;
            let p = c.params();
            p.validate()?;
            let s = solve_example1(&p, c.strategy, ctx.grid, seed, paths, &opts)?;
            Ok((s, Box::new(crate::pollution::Example1Model(p))))
        }
        GameChoice::Example2 => {
            let c = require(&ctx.cfg.example2, "example2")?;
            let p = c.params();
            p.validate()?;
            let s = solve_example2(&p, c.variant, ctx.grid, seed, paths, &opts)?;
            Ok((s, Box::new(crate::pollution::Example2Model(p))))
        }
    }
}

fn write_nash(ctx: &Ctx, o: &mut Outcome, r: &NashReport) -> Result<()> {
    let p = ctx.file(o, "nash_report.csv");
    write_csv(
        &p,
        &["player", "direction_id", "epsilon", "delta_J", "stderr", "pass"],
        r.entries.iter().map(|e| {
            vec![e.player.to_string().into(), e.direction.clone().into(), e.epsilon.into(), e.delta_j.into(), e.stderr.into(), e.pass.into()]
        }),
    )?;
    let p = ctx.file(o, "stationarity.csv");
    write_csv(
        &p,
        &["player", "direction_id", "derivative", "stderr", "pass"],
        r.stationarity.iter().map(|e| {
            vec![e.player.to_string().into(), e.direction.clone().into(), e.derivative.into(), e.stderr.into(), e.pass.into()]
        }),
    )?;
    o.check("nash", r.pass);
    if let Some(w) = r.worst() {
        o.note(format!("worst deviation: player {} along {} eps {} dJ {}", w.player, w.direction, w.epsilon, w.delta_j));
    }
    Ok(())
}

fn solve(ctx: &Ctx, game: GameChoice) -> Result<Outcome> {
    let (s, _) = solve_choice(ctx, game, ctx.cfg.run.check_nash)?;
    let mut o = Outcome::new();
    o.note(format!("picard iterations {} residual {:e}", s.trace.iterations, s.trace.final_residual()));
    o.note(format!("J1 = {} +- {}, J2 = {} +- {}", s.costs[0].mean, s.costs[0].stderr, s.costs[1].mean, s.costs[1].stderr));
    let p = ctx.file(&mut o, "solution.csv");
    write_csv(
        &p,
        &["t", "x", "mean_u1", "mean_u2", "mean_Y", "mean_p1", "mean_p2"],
        s.solution_rows().into_iter().map(|r| r.iter().map(|v| Cell::Num(*v)).collect()),
    )?;
    let p = ctx.file(&mut o, "diagnostics.csv");
    write_csv(
        &p,
        &["iteration", "residual"],
        s.trace.residuals.iter().enumerate().map(|(k, r)| vec![k.into(), (*r).into()]),
    )?;
    if let Some(r) = &s.nash {
        write_nash(ctx, &mut o, r)?;
    }
    Ok(o)
}

fn run_check_nash(ctx: &Ctx, magnitudes: &[f64], corners: &[[f64; 2]]) -> Result<Outcome> {
    let mut nc = ctx.cfg.nash.clone().unwrap_or_default();
    if !magnitudes.is_empty() {
        nc.magnitudes = magnitudes.to_vec();
    }
    if !corners.is_empty() {
        nc.corners = corners.to_vec();
    }
    let opts = nc.options()?;
    let g = ctx.grid;
    let mut dirs = vec![Direction::constant(g)];
    dirs.extend(nc.corner_points(&g)?.into_iter().map(|z| Direction::rectangle(g, z)));
    let (s, model) = solve_choice(ctx, nc.game, false)?;
    let ens = SheetEnsemble::sample(g, ctx.cfg.run.seed, ctx.cfg.run.paths)?;
    let r = check_nash(model.as_ref(), &s.controls(), &dirs, &ens, &opts)?;
    let mut o = Outcome::new();
    write_nash(ctx, &mut o, &r)?;
    Ok(o)
}

fn symmetric(ctx: &Ctx) -> Result<Outcome> {
    let c = require(&ctx.cfg.example2, "example2")?;
    let opts = ctx.solve_options(false)?;
    let r = symmetric_case_report(&c.params(), c.variant, ctx.grid, ctx.cfg.run.seed, ctx.cfg.run.paths, &opts)?;
    let mut o = Outcome::new();
    o.check("symmetric", r.pass);
    let p = ctx.file(&mut o, "symmetric_report.csv");
    let mut rows: Vec<Vec<Cell>> = vec![
        vec!["symmetric_params".into(), r.symmetric_params.into()],
        vec!["max_deviation".into(), r.max_deviation.into()],
        vec!["max_deviation_t".into(), ctx.grid.t(r.at.i).into()],
        vec!["max_deviation_x".into(), ctx.grid.x(r.at.j).into()],
        vec!["J1".into(), r.costs[0].mean.into()],
        vec!["J1_stderr".into(), r.costs[0].stderr.into()],
        vec!["J2".into(), r.costs[1].mean.into()],
        vec!["J2_stderr".into(), r.costs[1].stderr.into()],
        vec!["mean_Y_corner".into(), r.mean_y_corner.into()],
    ];
    if let Some(s) = r.superposition_residual {
        rows.push(vec!["superposition_residual".into(), s.into()]);
    }
    rows.push(vec!["pass".into(), r.pass.into()]);
    write_csv(&p, &["quantity", "value"], rows)?;
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(-0.4), "-0.40000000000000002");
        assert_eq!(fmt_num(0.0), "0.0000000000000000");
        assert_eq!(fmt_num(1234.5), "1234.5000000000000");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_num(3.0e-7).parse::<f64>().unwrap(), 3.0e-7);
    }

    #[test]
    fn pair_parser() {
        assert_eq!(parse_pair("0.25, 0.5").unwrap(), [0.25, 0.5]);
        assert!(parse_pair("0.25").is_err());
    }
}
