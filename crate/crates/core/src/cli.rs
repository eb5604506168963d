//! Command line front end.
//!
//! Every numeric output starts with a provenance header: the tool version, the
//! resolved configuration and, when a surface is involved, `(rho0, lambda0, T)`.
//! Floats are printed with 17 significant digits (JSON uses the shortest
//! representation that round-trips, which carries the same information).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mesh::{self, MeshOptions};
use crate::params::SurfaceParams;
use crate::periods::{self, PeriodSolution};
use crate::quadrature::{Method, QuadratureSpec};
use crate::torus::PathName;
use crate::verify::{self, VerifyOptions};
use crate::weierstrass::{Surface, DEFAULT_CUTOFF};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "helicoid",
    version,
    about = "Singly periodic genus-one helicoid: periods, mesh, checks"
)]
pub struct Cli {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_level: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Scan points for the sign change of `H`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub root_tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    TanhSinh,
    Graded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Obj,
    Ply,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the period problem and print the parameters as JSON.
    Solve(OutArg),
    /// Tabulate `Lambda(rho)`, `F` and `G` on a uniform grid.
    Periods {
        #[arg(long)]
        rho_grid: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Write a mesh of one or more vertical periods.
    Mesh(MeshArgs),
    /// Sample a named torus path with its image under the immersion.
    Curves(CurveArgs),
    /// Run every check; JSON report to `--out`, table to standard output.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Use this `rho` instead of solving (requires `--lambda`).
    #[arg(long, requires = "lambda")]
    pub rho: Option<f64>,
    #[arg(long, requires = "rho")]
    pub lambda: Option<f64>,
    /// Distance in `z` at which paths stop short of the puncture.
    #[arg(long)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Number of stacked fundamental domains.
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub cap_levels: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the boundary curves as CSV.
    #[arg(long)]
    pub curves_out: Option<PathBuf>,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// One of I, II, E, E_hat, C, H1, H2, alpha, alpha1, beta, B, D_cut.
    #[arg(long)]
    pub path: String,
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Omit check timings so reports are byte-identical across runs.
    #[arg(long)]
    pub no_timings: bool,
    #[command(flatten)]
    pub out: OutArg,
}

/// Configuration after merging the config file, flags and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: QuadratureSpec,
    pub grid: usize,
    pub root_tol: f64,
    pub threads: Option<usize>,
    pub seed: u64,
    pub resolution: usize,
    pub copies: usize,
    pub cap_levels: usize,
    pub cutoff: f64,
    pub format: Format,
    pub rho_grid: usize,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: QuadratureSpec::precise(),
            grid: periods::DEFAULT_GRID,
            root_tol: periods::DEFAULT_ROOT_TOL,
            threads: None,
            seed: VerifyOptions::default().seed,
            resolution: MeshOptions::default().resolution,
            copies: 1,
            cap_levels: 0,
            cutoff: DEFAULT_CUTOFF,
            format: Format::Obj,
            rho_grid: 32,
            samples: 201,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "rel_tol",
    "abs_tol",
    "max_level",
    "method",
    "grid",
    "root_tol",
    "threads",
    "seed",
    "resolution",
    "copies",
    "cap_levels",
    "cutoff",
    "format",
    "rho_grid",
    "samples",
];

/// Parse a flat `key = value` file; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
        let key = key.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key {key}", k + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value for {key}: {v}")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T> {
    T::from_str(v, true).map_err(|_| Error::Config(format!("invalid value for {key}: {v}")))
}

impl RunConfig {
    /// Apply file values, then flags.
    pub fn resolve(cli: &Cli, file: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in file {
            match k.as_str() {
                "rel_tol" => c.spec.rel_tol = parse_value(k, v)?,
                "abs_tol" => c.spec.abs_tol = parse_value(k, v)?,
                "max_level" => c.spec.max_level = parse_value(k, v)?,
                "method" => c.spec.method = parse_enum::<MethodArg>(k, v)?.into(),
                "grid" => c.grid = parse_value(k, v)?,
                "root_tol" => c.root_tol = parse_value(k, v)?,
                "threads" => c.threads = Some(parse_value(k, v)?),
                "seed" => c.seed = parse_value(k, v)?,
                "resolution" => c.resolution = parse_value(k, v)?,
                "copies" => c.copies = parse_value(k, v)?,
                "cap_levels" => c.cap_levels = parse_value(k, v)?,
                "cutoff" => c.cutoff = parse_value(k, v)?,
                "format" => c.format = parse_enum(k, v)?,
                "rho_grid" => c.rho_grid = parse_value(k, v)?,
                "samples" => c.samples = parse_value(k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k}"))),
            }
        }
        set(&mut c.spec.rel_tol, cli.rel_tol);
        set(&mut c.spec.abs_tol, cli.abs_tol);
        set(&mut c.spec.max_level, cli.max_level);
        set(&mut c.spec.method, cli.method.map(Method::from));
        set(&mut c.grid, cli.grid);
        set(&mut c.root_tol, cli.root_tol);
        set(&mut c.seed, cli.seed);
        if cli.threads.is_some() {
            c.threads = cli.threads;
        }
        match &cli.command {
            Command::Periods { rho_grid, .. } => set(&mut c.rho_grid, *rho_grid),
            Command::Mesh(m) => {
                set(&mut c.resolution, m.resolution);
                set(&mut c.copies, m.copies);
                set(&mut c.cap_levels, m.cap_levels);
                set(&mut c.format, m.format);
                set(&mut c.cutoff, m.surface.cutoff);
            }
            Command::Curves(a) => {
                set(&mut c.samples, a.samples);
                set(&mut c.cutoff, a.surface.cutoff);
            }
            Command::Verify(v) => set(&mut c.resolution, v.resolution),
            Command::Solve(_) => {}
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.root_tol > 0.0) || !(self.cutoff > 0.0) {
            return Err(Error::Config("tolerances and cutoff must be positive".into()));
        }
        if self.grid < 2 || self.rho_grid < 1 || self.samples < 2 {
            return Err(Error::Config(
                "grid >= 2, rho_grid >= 1 and samples >= 2 are required".into(),
            ));
        }
        if self.resolution < 2 || self.copies < 1 {
            return Err(Error::Config("resolution >= 2 and copies >= 1 are required".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// The configuration as ordered key-value pairs for provenance headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let method = match self.spec.method {
            Method::TanhSinh => "tanh-sinh",
            Method::GradedMesh => "graded",
        };
        let format = match self.format {
            Format::Obj => "obj",
            Format::Ply => "ply",
        };
        [
            ("rel_tol", format!("{:e}", self.spec.rel_tol)),
            ("abs_tol", format!("{:e}", self.spec.abs_tol)),
            ("max_level", self.spec.max_level.to_string()),
            ("method", method.to_string()),
            ("grid", self.grid.to_string()),
            ("root_tol", format!("{:e}", self.root_tol)),
            ("seed", self.seed.to_string()),
            ("resolution", self.resolution.to_string()),
            ("copies", self.copies.to_string()),
            ("cap_levels", self.cap_levels.to_string()),
            ("cutoff", format!("{:e}", self.cutoff)),
            ("format", format.to_string()),
            ("rho_grid", self.rho_grid.to_string()),
            ("samples", self.samples.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TanhSinh => Method::TanhSinh,
            MethodArg::Graded => Method::GradedMesh,
        }
    }
}

/// Seventeen significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn provenance_json(cfg: &RunConfig, params: Option<&SurfaceParams>) -> Value {
    let config: serde_json::Map<String, Value> = cfg.echo().into_iter().map(|(k, v)| (k, Value::String(v))).collect();
    let mut p = json!({
        "generator": format!("helicoid {}", env!("CARGO_PKG_VERSION")),
        "config": config,
    });
    if let Some(s) = params {
        p["rho0"] = json!(s.rho);
        p["lambda0"] = json!(s.lambda);
        p["T"] = json!(s.t);
    }
    p
}

fn provenance_lines(cfg: &RunConfig, params: Option<&SurfaceParams>) -> String {
    let mut s = format!("# generator: helicoid {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.echo() {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    if let Some(p) = params {
        s.push_str(&format!(
            "# rho0: {}\n# lambda0: {}\n# T: {}\n",
            fmt17(p.rho),
            fmt17(p.lambda),
            fmt17(p.t)
        ));
    }
    s
}

fn solve(cfg: &RunConfig) -> Result<PeriodSolution> {
    periods::solve_period_problem(&cfg.spec, cfg.grid, cfg.root_tol)
}

/// `solve` output.
pub fn solve_json(cfg: &RunConfig, sol: &PeriodSolution) -> Value {
    let p = &sol.params;
    json!({
        "provenance": provenance_json(cfg, Some(p)),
        "rho0": p.rho,
        "lambda0": p.lambda,
        "Lambda0": p.big_lambda,
        "r": p.r,
        "R": p.big_r,
        "T": p.t,
        "residual_F": sol.residual_f,
        "residual_G": sol.residual_g,
        "sign_changes": sol.sign_changes,
    })
}

/// `periods` output: one row per grid point.
pub fn periods_csv(cfg: &RunConfig) -> Result<String> {
    let rows = periods::rho_grid(cfg.rho_grid)
        .par_iter()
        .map(|&rho| {
            let l = periods::solve_lambda_of_rho(rho, &cfg.spec, cfg.root_tol)?;
            let f = periods::f_integral(rho, l, &cfg.spec)?;
            let g = periods::g_integral(rho, l, &cfg.spec)?;
            Ok(format!("{},{},{},{}\n", fmt17(rho), fmt17(l), fmt17(f), fmt17(g)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = provenance_lines(cfg, None);
    s.push_str("rho,Lambda,F,G\n");
    s.extend(rows);
    Ok(s)
}

fn surface_for(cfg: &RunConfig, args: &SurfaceArgs) -> Result<Surface> {
    let params = match (args.rho, args.lambda) {
        (Some(rho), Some(lambda)) => SurfaceParams::new(rho, lambda)?,
        _ => solve(cfg)?.params,
    };
    Surface::new(params, &cfg.spec)?.with_cutoff(cfg.cutoff)
}

/// `curves` output for one path.
pub fn curves_csv(cfg: &RunConfig, surface: &Surface, name: PathName) -> Result<String> {
    let xs = surface.integrate_x(name, cfg.samples)?;
    let mut s = provenance_lines(cfg, Some(&surface.params));
    s.push_str(&format!("# path: {name}\n"));
    s.push_str("index,u_re,u_im,z_re,z_im,w_re,w_im,x1,x2,x3\n");
    for (k, p) in xs.iter().enumerate() {
        let b = &p.base;
        let cols = [b.u.re, b.u.im, b.z.re, b.z.im, b.w.re, b.w.im, p.x[0], p.x[1], p.x[2]];
        let cols: Vec<String> = cols.iter().map(|v| fmt17(*v)).collect();
        s.push_str(&format!("{k},{}\n", cols.join(",")));
    }
    Ok(s)
}

fn run_mesh(cfg: &RunConfig, args: &MeshArgs) -> Result<String> {
    let surface = surface_for(cfg, &args.surface)?;
    let opts = MeshOptions {
        resolution: cfg.resolution,
        cap_levels: cfg.cap_levels,
    };
    let patch = mesh::mesh_patch_d(&surface, &opts)?;
    let fd = mesh::assemble_fundamental_domain(&patch)?;
    let out = mesh::stack_periods(&fd.mesh, cfg.copies)?.mesh;
    let extra = cfg.echo();
    match cfg.format {
        Format::Obj => mesh::export_obj(&out, &args.out, &extra)?,
        Format::Ply => mesh::export_ply(&out, &args.out, &extra)?,
    }
    if let Some(path) = &args.curves_out {
        mesh::export_curves_csv(&out, path, &extra)?;
    }
    Ok(format!(
        "wrote {} vertices, {} faces to {} (seam gap {:.2e})\n",
        out.vertices.len(),
        out.faces.len(),
        args.out.display(),
        fd.max_gap
    ))
}

/// Runs `verify`; returns the JSON report, the table and whether every
/// non-diagnostic check passed.
pub fn run_verify(cfg: &RunConfig, timings: bool) -> Result<(Value, String, bool)> {
    let opts = VerifyOptions {
        spec: cfg.spec,
        mesh: MeshOptions {
            resolution: cfg.resolution,
            cap_levels: cfg.cap_levels,
        },
        seed: cfg.seed,
        timings,
        ..VerifyOptions::default()
    };
    let sol = solve(cfg)?;
    let ctx = verify::Context::build(sol, opts)?;
    let rep = verify::run_all(&ctx);
    let ok = rep.checks.iter().all(|c| c.passed || c.diagnostic);
    let mut v = serde_json::to_value(&rep).map_err(|e| Error::Config(e.to_string()))?;
    v["provenance"] = provenance_json(cfg, Some(&rep.params));
    Ok((v, rep.table(), ok))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("writing standard output", e)),
    }
}

fn write_text(p: &FsPath, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::io(format!("writing {}", p.display()), e))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

fn dispatch(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Solve(o) => {
            let sol = solve(cfg)?;
            emit(&o.out, &pretty(&solve_json(cfg, &sol)), stdout)?;
        }
        Command::Periods { out, .. } => emit(&out.out, &periods_csv(cfg)?, stdout)?,
        Command::Mesh(m) => {
            let msg = run_mesh(cfg, m)?;
            stdout
                .write_all(msg.as_bytes())
                .map_err(|e| Error::io("writing standard output", e))?;
        }
        Command::Curves(a) => {
            let name: PathName = a.path.parse()?;
            let surface = surface_for(cfg, &a.surface)?;
            emit(&a.out.out, &curves_csv(cfg, &surface, name)?, stdout)?;
        }
        Command::Verify(v) => {
            let (json, table, ok) = run_verify(cfg, !v.no_timings)?;
            if let Some(p) = &v.out.out {
                write_text(p, &pretty(&json))?;
            }
            stdout
                .write_all(table.as_bytes())
                .map_err(|e| Error::io("writing standard output", e))?;
            if !ok {
                return Ok(EXIT_NUMERIC);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let file = match &cli.config {
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => parse_config(&t),
            Err(e) => Err(Error::io(format!("reading {}", p.display()), e)),
        },
        None => Ok(BTreeMap::new()),
    };
    let cfg = match file.and_then(|f| RunConfig::resolve(&cli, &f)) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let mut buf = Vec::new();
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli, &cfg, &mut buf)),
        Err(e) => Err(Error::Config(e.to_string())),
    };
    let _ = stdout.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_NUMERIC,
            }
        }
    }
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("helicoid").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("rel_tol = 1e-9\ngrid = 16 # coarse\n\nformat = ply\n").unwrap();
        let c = RunConfig::resolve(&cli(&["--grid", "20", "periods"]), &file).unwrap();
        assert_eq!(c.spec.rel_tol, 1e-9);
        assert_eq!(c.grid, 20);
        assert_eq!(c.format, Format::Ply);
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("rel_tol").is_err());
        let file = parse_config("grid = many").unwrap();
        assert!(RunConfig::resolve(&cli(&["solve"]), &file).is_err());
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        assert!(RunConfig::resolve(&cli(&["--rel-tol", "0", "solve"]), &BTreeMap::new()).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["helicoid", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(
            run_with(["helicoid", "mesh", "--rho", "0.5", "--out", "x.obj"], &mut o, &mut e),
            EXIT_USAGE
        );
        assert_eq!(run_with(["helicoid", "--help"], &mut o, &mut e), EXIT_OK);
    }

    #[test]
    fn fmt17_round_trips() {
        for x in [std::f64::consts::PI, -1.0e-300, 2.550_339_768_118_049_3] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }
}
