//! Command-line front end.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, LevelMap, SweepConfig};
use crate::approx::{self, Method};
use crate::eigensolve::{self, converged_spectrum, ConvergenceOptions, Spectrum};
use crate::error::Error;
use crate::exec::Execution;
use crate::hamiltonian::{Builder, ModelParams};
use crate::special_fn;
use crate::spin::SpinSector;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "cavity-spectra", version, about = "Rabi and Dicke model spectra in the Coulomb gauge")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Converged numerical spectrum at one coupling
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Write the assembled matrix as CSV (row, col, value)
        #[arg(long, value_name = "PATH")]
        dump_matrix: Option<PathBuf>,
    },
    /// Operator-method approximations at one coupling
    Approx {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        methods: MethodArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Numerics and approximations over a coupling grid
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        methods: MethodArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Dipole against Coulomb gauge along a doubling cutoff schedule (N = 1)
    CompareGauges {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        coupling: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare E(N1, .) with (N1/N2) E(N2, .) in the maximal sectors
    ScalingCheck {
        #[arg(long, default_value_t = 10)]
        n1: u32,
        #[arg(long, default_value_t = 20)]
        n2: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        delta: f64,
        /// Level pairing: manifold or sorted
        #[arg(long, default_value = "manifold")]
        map: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Overlap table S_kn for 0 <= k, n <= size
    OverlapTable {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        coupling: f64,
        #[arg(long, default_value_t = 20)]
        size: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Distance of the lowest levels from integers at large coupling
    DeepStrong {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    n_atoms: u32,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    coupling: f64,
    /// Total spin sectors, comma separated (default: N/2)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    j: Vec<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    f_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    f_max: f64,
    #[arg(long, default_value_t = 11)]
    points: usize,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// diag0, pair0, multi0, pairwise_quad, second_order (comma separated)
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Levels reported per parity sector
    #[arg(long, default_value_t = 8)]
    levels: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 32)]
    n_max_start: usize,
    #[arg(long, default_value_t = 1024)]
    n_max_cap: usize,
    /// Fail with exit code 3 if the cutoff cap stops convergence
    #[arg(long)]
    strict: bool,
    /// Worker threads (1 runs sequentially)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// CSV destination (default: stdout)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Print the resolved configuration and exit
    #[arg(long)]
    dump_config: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Approx,
    Sweep,
    CompareGauges,
    ScalingCheck,
    OverlapTable,
    DeepStrong,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Approx => "approx",
            Command::Sweep => "sweep",
            Command::CompareGauges => "compare-gauges",
            Command::ScalingCheck => "scaling-check",
            Command::OverlapTable => "overlap-table",
            Command::DeepStrong => "deep-strong",
        }
    }
}

/// Fully validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n_atoms: u32,
    pub delta: f64,
    pub coupling: f64,
    pub sectors: Vec<SpinSector>,
    pub f_grid: Option<(f64, f64, usize)>,
    pub methods: Vec<Method>,
    pub levels: usize,
    pub tol: f64,
    pub n_max_start: usize,
    pub n_max_cap: usize,
    pub strict: bool,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub dump_config: bool,
    pub dump_matrix: Option<PathBuf>,
    pub n1: u32,
    pub n2: u32,
    pub map: LevelMap,
    pub size: usize,
}

impl RunConfig {
    fn base(command: Command) -> Self {
        Self {
            command,
            n_atoms: 1,
            delta: 1.0,
            coupling: 0.0,
            sectors: vec![SpinSector::HALF],
            f_grid: None,
            methods: Vec::new(),
            levels: 8,
            tol: 1e-8,
            n_max_start: 32,
            n_max_cap: 1024,
            strict: false,
            threads: None,
            output: None,
            dump_config: false,
            dump_matrix: None,
            n1: 10,
            n2: 20,
            map: LevelMap::Manifold,
            size: 20,
        }
    }

    /// Couplings to evaluate, in order.
    pub fn couplings(&self) -> Vec<f64> {
        match self.f_grid {
            Some((lo, hi, points)) => analysis::linspace(lo, hi, points),
            None => vec![self.coupling],
        }
    }

    pub fn convergence(&self) -> ConvergenceOptions {
        ConvergenceOptions {
            watch: self.levels.max(1),
            tol: self.tol,
            n_max_start: self.n_max_start,
            n_max_cap: self.n_max_cap,
            keep_vectors: false,
            exec: self.execution(),
        }
    }

    pub fn execution(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// One-line `key=value` description used in CSV headers and `--dump-config`.
    pub fn describe(&self) -> String {
        let mut s = format!("command={}", self.command.name());
        let sectors: Vec<String> = self.sectors.iter().map(|s| s.to_string()).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        match self.command {
            Command::OverlapTable => {
                let _ = write!(s, " coupling={} size={}", fmt_num(self.coupling), self.size);
                return s;
            }
            Command::ScalingCheck => {
                let _ = write!(s, " n1={} n2={} delta={} map={:?}", self.n1, self.n2, fmt_num(self.delta), self.map);
            }
            Command::CompareGauges => {
                let _ = write!(s, " n_atoms=1 delta={} coupling={}", fmt_num(self.delta), fmt_num(self.coupling));
            }
            _ => {
                let _ = write!(s, " n_atoms={} delta={} j={}", self.n_atoms, fmt_num(self.delta), sectors.join(","));
            }
        }
        match self.f_grid {
            Some((lo, hi, n)) => {
                let _ = write!(s, " f_min={} f_max={} points={n}", fmt_num(lo), fmt_num(hi));
            }
            None if self.command != Command::ScalingCheck && self.command != Command::CompareGauges => {
                let _ = write!(s, " coupling={}", fmt_num(self.coupling));
            }
            None => {}
        }
        let _ = write!(
            s,
            " levels={} tol={} n_max_start={} n_max_cap={}",
            self.levels,
            fmt_num(self.tol),
            self.n_max_start,
            self.n_max_cap
        );
        if !methods.is_empty() {
            let _ = write!(s, " methods={}", methods.join(","));
        }
        s
    }
}

/// Usage error naming the offending flag.
#[derive(Debug)]
pub struct UsageError {
    pub message: String,
    /// Set for `--help` and `--version`, which are not errors.
    pub informational: bool,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn usage(message: impl Into<String>) -> UsageError {
    UsageError { message: message.into(), informational: false }
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>, UsageError> {
    let mut out = Vec::new();
    for r in raw {
        let m: Method = r.trim().parse().map_err(|e: Error| usage(format!("--methods: {e}")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) -> Result<(), UsageError> {
    cfg.n_atoms = m.n_atoms;
    cfg.delta = m.delta;
    cfg.coupling = m.coupling;
    cfg.sectors = if m.j.is_empty() {
        vec![SpinSector::maximal(m.n_atoms)]
    } else {
        let mut sectors = Vec::new();
        for &j in &m.j {
            let s = SpinSector::from_j(j).map_err(|e| usage(format!("--j: {e}")))?;
            if !sectors.contains(&s) {
                sectors.push(s);
            }
        }
        sectors
    };
    if m.n_atoms == 0 {
        return Err(usage("--n-atoms: must be at least 1"));
    }
    check_delta(m.delta)?;
    check_coupling("--coupling", m.coupling)?;
    for &s in &cfg.sectors {
        ModelParams::with_spin(m.n_atoms, m.delta, m.coupling, s).map_err(|e| usage(format!("--j: {e}")))?;
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<(), UsageError> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(usage(format!("--delta: must be a finite value > 0, got {delta}")));
    }
    Ok(())
}

fn check_coupling(flag: &str, f: f64) -> Result<(), UsageError> {
    if !f.is_finite() || f < 0.0 {
        return Err(usage(format!("{flag}: must be a finite value >= 0, got {f}")));
    }
    Ok(())
}

fn apply_grid(cfg: &mut RunConfig, g: &GridArgs) -> Result<(), UsageError> {
    check_coupling("--f-min", g.f_min)?;
    check_coupling("--f-max", g.f_max)?;
    if g.f_min > g.f_max {
        return Err(usage(format!("--f-max: must be >= --f-min ({} > {})", g.f_min, g.f_max)));
    }
    if g.points == 0 {
        return Err(usage("--points: must be at least 1"));
    }
    if g.points > 1 && g.f_min == g.f_max {
        return Err(usage("--points: several points need --f-max > --f-min"));
    }
    cfg.f_grid = Some((g.f_min, g.f_max, g.points));
    Ok(())
}

fn apply_solver(cfg: &mut RunConfig, s: &SolverArgs) -> Result<(), UsageError> {
    if s.levels == 0 {
        return Err(usage("--levels: must be at least 1"));
    }
    if s.tol.is_nan() || s.tol <= 0.0 || s.tol.is_infinite() {
        return Err(usage(format!("--tol: must be > 0, got {}", s.tol)));
    }
    if s.n_max_start == 0 {
        return Err(usage("--n-max-start: must be at least 1"));
    }
    if s.n_max_cap < s.n_max_start {
        return Err(usage("--n-max-cap: must be >= --n-max-start"));
    }
    if s.n_max_cap > special_fn::DEFAULT_K_MAX {
        return Err(usage(format!("--n-max-cap: at most {}", special_fn::DEFAULT_K_MAX)));
    }
    if s.threads == Some(0) {
        return Err(usage("--threads: must be at least 1"));
    }
    cfg.levels = s.levels;
    cfg.tol = s.tol;
    cfg.n_max_start = s.n_max_start;
    cfg.n_max_cap = s.n_max_cap;
    cfg.strict = s.strict;
    cfg.threads = s.threads;
    Ok(())
}

fn apply_output(cfg: &mut RunConfig, o: &OutputArgs) {
    cfg.output = o.output.clone();
    cfg.dump_config = o.dump_config;
}

fn check_methods_apply(cfg: &RunConfig) -> Result<(), UsageError> {
    for m in &cfg.methods {
        for s in &cfg.sectors {
            if !m.applies_to(*s) {
                return Err(usage(format!("--methods: {m} does not apply to J = {s}")));
            }
        }
    }
    Ok(())
}

/// Parse and validate `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError {
        message: e.to_string(),
        informational: !e.use_stderr(),
    })?;
    let cfg = match cli.command {
        Cmd::Spectrum { model, solver, out, dump_matrix } => {
            let mut cfg = RunConfig::base(Command::Spectrum);
            apply_model(&mut cfg, &model)?;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg.dump_matrix = dump_matrix;
            cfg
        }
        Cmd::Approx { model, methods, solver, out } => {
            let mut cfg = RunConfig::base(Command::Approx);
            apply_model(&mut cfg, &model)?;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg.methods = parse_methods(&methods.methods)?;
            if cfg.methods.is_empty() {
                cfg.methods = Method::ALL
                    .iter()
                    .copied()
                    .filter(|m| cfg.sectors.iter().all(|s| m.applies_to(*s)))
                    .collect();
            }
            check_methods_apply(&cfg)?;
            cfg
        }
        Cmd::Sweep { model, grid, methods, solver, out } => {
            let mut cfg = RunConfig::base(Command::Sweep);
            apply_model(&mut cfg, &model)?;
            apply_grid(&mut cfg, &grid)?;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg.methods = parse_methods(&methods.methods)?;
            check_methods_apply(&cfg)?;
            cfg
        }
        Cmd::CompareGauges { delta, coupling, solver, out } => {
            let mut cfg = RunConfig::base(Command::CompareGauges);
            check_delta(delta)?;
            check_coupling("--coupling", coupling)?;
            cfg.delta = delta;
            cfg.coupling = coupling;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg
        }
        Cmd::ScalingCheck { n1, n2, delta, map, grid, solver, out } => {
            let mut cfg = RunConfig::base(Command::ScalingCheck);
            check_delta(delta)?;
            if n1 == 0 || n2 == 0 {
                return Err(usage("--n1/--n2: must be at least 1"));
            }
            cfg.map = map.parse().map_err(|e: Error| usage(format!("--map: {e}")))?;
            let (big, small) = (n1.max(n2), n1.min(n2));
            if big % small != 0 {
                return Err(usage(format!("--n2: {n2} and --n1 {n1} must be integer multiples")));
            }
            if cfg.map == LevelMap::Manifold && n2 < n1 {
                return Err(usage("--map: the manifold map needs --n2 >= --n1"));
            }
            cfg.n1 = n1;
            cfg.n2 = n2;
            cfg.n_atoms = n1;
            cfg.delta = delta;
            cfg.sectors = vec![SpinSector::maximal(n1)];
            apply_grid(&mut cfg, &grid)?;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg
        }
        Cmd::OverlapTable { coupling, size, out } => {
            let mut cfg = RunConfig::base(Command::OverlapTable);
            check_coupling("--coupling", coupling)?;
            if size == 0 || size > special_fn::DEFAULT_K_MAX {
                return Err(usage(format!("--size: must be in 1..={}", special_fn::DEFAULT_K_MAX)));
            }
            cfg.coupling = coupling;
            cfg.size = size;
            apply_output(&mut cfg, &out);
            cfg
        }
        Cmd::DeepStrong { model, solver, out } => {
            let mut cfg = RunConfig::base(Command::DeepStrong);
            apply_model(&mut cfg, &model)?;
            apply_solver(&mut cfg, &solver)?;
            apply_output(&mut cfg, &out);
            cfg
        }
    };
    Ok(cfg)
}

/// `%.12g`-style formatting; negative zero prints as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug)]
enum RunError {
    Usage(String),
    Convergence(String),
    Io(io::Error),
    Failed(Error),
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::InvalidParams(_) | Error::Resource(_) => RunError::Usage(e.to_string()),
            other => RunError::Failed(other),
        }
    }
}

fn create(path: &std::path::Path) -> io::Result<File> {
    File::create(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

struct Report {
    csv: Box<dyn Write + Send>,
    summary: Box<dyn Write + Send>,
    unconverged: Vec<String>,
}

impl Report {
    fn open(cfg: &RunConfig) -> io::Result<Self> {
        Ok(match &cfg.output {
            Some(path) => Self {
                csv: Box::new(BufWriter::new(create(path)?)),
                summary: Box::new(io::stdout()),
                unconverged: Vec::new(),
            },
            None => Self {
                csv: Box::new(BufWriter::new(io::stdout())),
                summary: Box::new(io::stderr()),
                unconverged: Vec::new(),
            },
        })
    }

    fn header(&mut self, cfg: &RunConfig, columns: &str) -> io::Result<()> {
        writeln!(self.csv, "# cavity-spectra v{} params: {}", env!("CARGO_PKG_VERSION"), cfg.describe())?;
        writeln!(self.csv, "{columns}")
    }

    fn row(&mut self, f: f64, spin: SpinSector, parity: i8, index: usize, method: &str, energy: f64) -> io::Result<()> {
        writeln!(self.csv, "{},{spin},{parity},{index},{method},{}", fmt_num(f), fmt_num(energy))
    }

    fn spectrum_rows(&mut self, f: f64, s: &Spectrum, levels: usize, method: &str) -> io::Result<()> {
        for parity in [1i8, -1] {
            for (i, e) in s.lowest_in_sector(parity, levels).into_iter().enumerate() {
                self.row(f, s.spin, parity, i, method, e)?;
            }
        }
        Ok(())
    }

    fn note_convergence(&mut self, what: String, s: &Spectrum) {
        if !s.converged {
            self.unconverged.push(format!("{what} (n_max {}, last shift {:e})", s.n_max_used, s.max_shift));
        }
    }
}

const ENERGY_COLUMNS: &str = "f,sector_J,parity,level_index,method,energy";

fn numeric(cfg: &RunConfig, params: &ModelParams) -> Result<Spectrum, RunError> {
    Ok(converged_spectrum(analysis::coulomb_builder(params), params, &cfg.convergence())?)
}

fn run_spectrum(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, ENERGY_COLUMNS)?;
    for &spin in &cfg.sectors {
        let p = ModelParams::with_spin(cfg.n_atoms, cfg.delta, cfg.coupling, spin)?;
        let s = numeric(cfg, &p)?;
        rep.spectrum_rows(cfg.coupling, &s, cfg.levels, "numeric")?;
        rep.note_convergence(format!("J = {spin}"), &s);
        writeln!(
            rep.summary,
            "J = {spin}: ground {}  n_max {}  converged {}",
            fmt_num(s.ground_energy()),
            s.n_max_used,
            s.converged
        )?;
        if let Some(path) = &cfg.dump_matrix {
            let h = analysis::coulomb_builder(&p).build(&p, s.n_max_used)?;
            let path = if cfg.sectors.len() > 1 {
                path.with_extension(format!("J{}.csv", spin.twice_j()))
            } else {
                path.clone()
            };
            h.write_csv(BufWriter::new(create(&path)?))?;
        }
    }
    Ok(())
}

fn run_approx(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, ENERGY_COLUMNS)?;
    for &spin in &cfg.sectors {
        let p = ModelParams::with_spin(cfg.n_atoms, cfg.delta, cfg.coupling, spin)?;
        for &m in &cfg.methods {
            let r = approx::approximate_spectrum(&p, m, cfg.levels, cfg.n_max_start)?;
            for parity in [1i8, -1] {
                for (i, e) in r.sector(parity).into_iter().take(cfg.levels).enumerate() {
                    rep.row(cfg.coupling, spin, parity, i, m.name(), e)?;
                }
            }
        }
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, ENERGY_COLUMNS)?;
    let grid = cfg.couplings();
    for &spin in &cfg.sectors {
        let p = ModelParams::with_spin(cfg.n_atoms, cfg.delta, grid[0], spin)?;
        let sc = SweepConfig {
            methods: cfg.methods.clone(),
            levels: cfg.levels,
            convergence: cfg.convergence(),
            exec: cfg.execution(),
        };
        let result = analysis::sweep(&p, &grid, &sc)?;
        writeln!(rep.summary, "J = {spin}: max |approx - numeric| over the lowest {} levels per parity", cfg.levels)?;
        for point in &result.points {
            let f = point.coupling;
            rep.spectrum_rows(f, &point.spectrum, cfg.levels, "numeric")?;
            rep.note_convergence(format!("J = {spin}, f = {}", fmt_num(f)), &point.spectrum);
            for a in &point.approx {
                for parity in [1i8, -1] {
                    for (i, e) in a.sector(parity).into_iter().take(cfg.levels).enumerate() {
                        rep.row(f, spin, parity, i, a.method.name(), e)?;
                    }
                }
            }
            let mut line = format!("  f = {:<10}", fmt_num(f));
            for &m in &result.methods {
                let err = point.max_error(m).map_or("-".to_string(), |e| format!("{e:.3e}"));
                let _ = write!(line, "  {}: {err}", m.name());
            }
            writeln!(rep.summary, "{}", line.trim_end())?;
        }
    }
    Ok(())
}

fn run_compare_gauges(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, ENERGY_COLUMNS)?;
    let p = ModelParams::rabi(cfg.delta, cfg.coupling)?;
    let schedule = analysis::doubling_schedule(cfg.n_max_start, cfg.n_max_cap);
    let report = analysis::gauge_equivalence(&p, &schedule, cfg.levels, cfg.execution())?;
    let last = *schedule.last().expect("non-empty schedule");
    for (builder, name) in [(Builder::RabiDipole, "dipole"), (Builder::RabiCoulomb, "coulomb")] {
        let h = builder.build(&p, last)?;
        let s = eigensolve::spectrum_of(&h, false, cfg.execution())?;
        rep.spectrum_rows(cfg.coupling, &s, cfg.levels, name)?;
    }
    for (n_max, dev) in &report.schedule {
        writeln!(rep.summary, "n_max {n_max:>5}  max deviation {dev:.3e}")?;
    }
    writeln!(
        rep.summary,
        "f = {}: max deviation {:.3e} over the lowest {} levels, non-increasing {}",
        fmt_num(cfg.coupling),
        report.final_deviation(),
        cfg.levels,
        report.is_non_increasing(1e-12)
    )?;
    Ok(())
}

fn run_scaling(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, "f,n,lhs,rhs,abs_deviation,rel_deviation")?;
    let grid = cfg.couplings();
    let opts = cfg.convergence();
    let table =
        analysis::scaling_check(cfg.delta, cfg.n1, cfg.n2, &grid, cfg.map, cfg.levels, &opts, cfg.execution())?;
    for r in &table.rows {
        writeln!(
            rep.csv,
            "{},{},{},{},{},{}",
            fmt_num(r.coupling),
            r.n,
            fmt_num(r.lhs),
            fmt_num(r.rhs),
            fmt_num(r.abs_deviation),
            fmt_num(r.rel_deviation)
        )?;
    }
    for &f in &grid {
        writeln!(rep.summary, "f = {:<10} max |deviation| {:.3e}", fmt_num(f), table.max_abs_deviation_at(f))?;
    }
    for f in &table.unconverged {
        rep.unconverged.push(format!("scaling check at f = {}", fmt_num(*f)));
    }
    Ok(())
}

fn run_overlap(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, "k,n,S_kn")?;
    let t = special_fn::build_overlap_table_with(cfg.coupling, cfg.size, special_fn::DEFAULT_K_MAX, cfg.execution())?;
    for k in 0..=cfg.size {
        for n in 0..=cfg.size {
            writeln!(rep.csv, "{k},{n},{}", fmt_num(t.get(k, n)))?;
        }
    }
    Ok(())
}

fn run_deep_strong(cfg: &RunConfig, rep: &mut Report) -> Result<(), RunError> {
    rep.header(cfg, ENERGY_COLUMNS)?;
    for &spin in &cfg.sectors {
        let p = ModelParams::with_spin(cfg.n_atoms, cfg.delta, cfg.coupling, spin)?;
        let o = cfg.convergence();
        let r = analysis::deep_strong_asymptote(&p, cfg.levels, &o)?;
        let s = numeric(cfg, &p)?;
        rep.spectrum_rows(cfg.coupling, &s, cfg.levels, "numeric")?;
        rep.note_convergence(format!("J = {spin}"), &s);
        writeln!(
            rep.summary,
            "J = {spin}, f = {}: lowest {} levels lie within {:.3e} of integers",
            fmt_num(cfg.coupling),
            cfg.levels,
            r.max_distance
        )?;
    }
    Ok(())
}

fn dispatch(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut rep = Report::open(cfg)?;
    match cfg.command {
        Command::Spectrum => run_spectrum(cfg, &mut rep)?,
        Command::Approx => run_approx(cfg, &mut rep)?,
        Command::Sweep => run_sweep(cfg, &mut rep)?,
        Command::CompareGauges => run_compare_gauges(cfg, &mut rep)?,
        Command::ScalingCheck => run_scaling(cfg, &mut rep)?,
        Command::OverlapTable => run_overlap(cfg, &mut rep)?,
        Command::DeepStrong => run_deep_strong(cfg, &mut rep)?,
    }
    rep.csv.flush()?;
    Ok(rep)
}

/// Execute a validated configuration and return the process exit code.
pub fn run(cfg: &RunConfig) -> ExitCode {
    if cfg.dump_config {
        println!("{}", cfg.describe().replace(' ', "\n"));
        return ExitCode::SUCCESS;
    }
    let outcome = match cfg.threads {
        #[cfg(feature = "parallel")]
        Some(n) if n > 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cfg)),
            Err(e) => Err(RunError::Usage(format!("--threads: {e}"))),
        },
        _ => dispatch(cfg),
    };
    let outcome = outcome.and_then(|mut rep| {
        if rep.unconverged.is_empty() {
            return Ok(());
        }
        for u in &rep.unconverged {
            let _ = writeln!(rep.summary, "warning: not converged at cutoff cap: {u}");
        }
        if cfg.strict {
            Err(RunError::Convergence(format!("{} computation(s) hit --n-max-cap", rep.unconverged.len())))
        } else {
            Ok(())
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(RunError::Convergence(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONVERGENCE)
        }
        Err(RunError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(RunError::Failed(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Parse `argv` and run.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cfg) => run(&cfg),
        Err(e) if e.informational => {
            print!("{e}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> Result<RunConfig, UsageError> {
        parse_args(std::iter::once("cavity-spectra").chain(args.split_whitespace()))
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.5), "-0.5");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1e-8), "1e-08");
        assert_eq!(fmt_num(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_num(1e15), "1e+15");
        assert_eq!(fmt_num(0.0001), "0.0001");
    }

    #[test]
    fn spectrum_example() {
        let c = parse("spectrum --n-atoms 1 --delta 1.0 --coupling 0.5").unwrap();
        assert_eq!(c.command, Command::Spectrum);
        assert_eq!(c.sectors, vec![SpinSector::HALF]);
        assert_eq!(c.coupling, 0.5);
    }

    #[test]
    fn sweep_example() {
        let c = parse("sweep --n-atoms 2 --j 1 --f-min 0 --f-max 1.5 --points 60 --methods multi0,pairwise_quad")
            .unwrap();
        assert_eq!(c.sectors, vec![SpinSector::from_twice(2)]);
        assert_eq!(c.methods, vec![Method::Multi0, Method::PairwiseQuad]);
        assert_eq!(c.couplings().len(), 60);
    }

    #[test]
    fn usage_errors_name_the_flag() {
        for (args, flag) in [
            ("spectrum --coupling -1", "--coupling"),
            ("spectrum --delta 0", "--delta"),
            ("spectrum --n-atoms 2 --j 0.5", "--j"),
            ("sweep --f-min 1 --f-max 0.5", "--f-max"),
            ("sweep --points 0", "--points"),
            ("sweep --n-atoms 2 --methods pair0", "--methods"),
            ("sweep --methods bogus", "--methods"),
            ("spectrum --levels 0", "--levels"),
            ("spectrum --n-max-start 64 --n-max-cap 32", "--n-max-cap"),
            ("scaling-check --n1 3 --n2 4", "--n2"),
            ("scaling-check --map other", "--map"),
        ] {
            let e = parse(args).unwrap_err();
            assert!(e.message.contains(flag), "{args}: {}", e.message);
        }
        assert!(parse("spectrum --bogus 1").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn approx_defaults_to_applicable_methods() {
        let c = parse("approx --n-atoms 2 --coupling 0.3").unwrap();
        assert!(!c.methods.contains(&Method::Pair0));
        let c = parse("approx --coupling 0.3").unwrap();
        assert_eq!(c.methods.len(), Method::ALL.len());
    }

    #[test]
    fn describe_is_stable() {
        let c = parse("sweep --n-atoms 2 --j 0,1 --f-max 1.5 --points 4").unwrap();
        assert_eq!(
            c.describe(),
            "command=sweep n_atoms=2 delta=1 j=0,1 f_min=0 f_max=1.5 points=4 levels=8 tol=1e-08 n_max_start=32 n_max_cap=1024"
        );
    }
}
