//! Command-line front end. Every command builds a table (and optionally an
//! SVG dataset) and writes it with a metadata header.

pub mod export;
pub mod format;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::fitkit::{self, Init, ModelSpec};
use crate::floquet::{self, StabilityTag};
use crate::fracmde::{self, FractalVersion};
use crate::linemde::{self, CurveLabel, Family, MatrixKind, Trig};
use crate::sgspec::{self, DecimationPath, EigenfunctionCache, SGFunction, Series, Sign};
use export::{Dataset, Metadata, Table};
use format::{parse_ints, parse_positive, parse_reals, parse_span};

/// Output directory used for relative `--output` paths.
pub const OUTPUT_DIR_ENV: &str = "MATHIEU_SG_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "mathieu-sg", about = "Mathieu equation stability, transition curves and fractal analogues")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (stdout if absent).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutFormat>,
    #[command(subcommand)]
    pub cmd: Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug)]
pub enum Top {
    /// Line Mathieu equation.
    Line {
        #[command(subcommand)]
        cmd: LineCmd,
    },
    /// Floquet stability.
    Stab {
        #[command(subcommand)]
        cmd: StabCmd,
    },
    /// Sierpinski gasket spectrum.
    Sg {
        #[command(subcommand)]
        cmd: SgCmd,
    },
    /// Fractal Mathieu matrices.
    Fractal {
        #[command(subcommand)]
        cmd: FractalCmd,
    },
    /// Curve fitting.
    Fit {
        #[command(subcommand)]
        cmd: FitCmd,
    },
}

#[derive(Subcommand, Debug)]
pub enum LineCmd {
    /// Transition curves of A, B, C or D.
    Curves {
        #[arg(long, default_value = "A")]
        matrix: String,
        #[arg(long, default_value = "1")]
        k: String,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
    },
    /// Periodic solution on a transition curve.
    Solution {
        #[arg(long, default_value = "A")]
        matrix: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = 40)]
        terms: usize,
        #[arg(long, default_value_t = linemde::DEFAULT_GRID)]
        grid: usize,
    },
    /// Location of the maximum of the solution along a curve.
    ExtremaTrack {
        #[arg(long, default_value = "A")]
        matrix: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        #[arg(long, default_value_t = 40)]
        terms: usize,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Widths of stable bands.
    BandWidth {
        #[arg(long, default_value = "1..5")]
        band: String,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
    },
    /// Transition curves for period 2N*pi solutions.
    PeriodN {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 2)]
        form: u8,
        #[arg(long, value_enum, default_value = "cos")]
        trig: TrigArg,
        #[arg(long, default_value = "1..4")]
        index: String,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
    },
    /// Crossing point of a transition curve with the line delta = eps.
    Alpha {
        #[arg(long, value_enum, default_value = "cos-k")]
        family: FamilyArg,
        #[arg(long, default_value = "0..4")]
        k: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrigArg {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    CosK,
    SinK,
    CosHalf,
    SinHalf,
}

#[derive(Subcommand, Debug)]
pub enum StabCmd {
    /// Stability classification on a (delta, eps) grid.
    Grid {
        #[arg(long, default_value = "-5:25", allow_hyphen_values = true)]
        delta: String,
        #[arg(long, default_value = "0:30", allow_hyphen_values = true)]
        eps: String,
        #[arg(long, default_value_t = 200)]
        nx: usize,
        #[arg(long, default_value_t = 150)]
        ny: usize,
        /// Overlay the A and B curves with these indices (SVG only).
        #[arg(long)]
        overlay: Option<String>,
    },
    /// Stable fraction of the triangles R_w.
    Probability {
        #[arg(long, default_value = "1..18")]
        i: String,
        #[arg(long, default_value_t = 1200)]
        samples: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SeriesArgs {
    #[arg(long, default_value_t = 5)]
    series: u32,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    m0: i32,
}

#[derive(Subcommand, Debug)]
pub enum SgCmd {
    /// Ordered eigenvalues of one series.
    Eigenvalues {
        #[command(flatten)]
        s: SeriesArgs,
        #[arg(long, default_value_t = 64)]
        count: usize,
    },
    /// Eigenfunction of a decimation path on V_m.
    Eigenfunction {
        #[arg(long, default_value_t = 5)]
        series: u32,
        /// Rank index d(e).
        #[arg(long, conflicts_with = "path")]
        index: Option<u64>,
        /// Path as a string over {+,-}, e.g. "+-+".
        #[arg(long, allow_hyphen_values = true)]
        path: Option<String>,
        #[arg(long, default_value_t = 5)]
        level: usize,
    },
    /// Eigenvalue counting function.
    Counting {
        #[command(flatten)]
        s: SeriesArgs,
        #[arg(long)]
        x: String,
    },
}

#[derive(Args, Debug, Clone)]
pub struct VersionArgs {
    #[arg(long = "version", default_value_t = 1)]
    v: u8,
    #[command(flatten)]
    s: SeriesArgs,
}

#[derive(Subcommand, Debug)]
pub enum FractalCmd {
    /// Transition curves of M_1..M_4.
    Curves {
        #[command(flatten)]
        fv: VersionArgs,
        #[arg(long, default_value = "1")]
        k: String,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
    },
    /// Solution field u = sum c_j phi_j on V_m.
    Solution {
        #[command(flatten)]
        fv: VersionArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = fracmde::DEFAULT_RENDER_LEVEL)]
        level: usize,
    },
    /// Strict local maxima of solution fields.
    Peaks {
        #[command(flatten)]
        fv: VersionArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        #[arg(long, default_value_t = fracmde::DEFAULT_RENDER_LEVEL)]
        level: usize,
    },
    /// delta/eps along a curve at large |eps|.
    Asymptote {
        #[command(flatten)]
        fv: VersionArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, allow_hyphen_values = true, default_value = "1000,10000,100000")]
        eps: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum FitCmd {
    /// Fit a model to two CSV columns.
    Run {
        #[arg(long)]
        model: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "eps")]
        x: String,
        #[arg(long, default_value = "delta")]
        y: String,
        /// Keep only rows with x in lo:hi.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        /// Comma-separated starting parameters (multi-start if absent).
        #[arg(long, allow_hyphen_values = true)]
        init: Option<String>,
    },
    /// Analytic vs finite-difference Jacobian.
    Check {
        #[arg(long)]
        model: String,
        #[arg(long, allow_hyphen_values = true)]
        params: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0,1,2")]
        x: String,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

fn usage<T>(r: std::result::Result<T, String>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

type Res<T> = std::result::Result<T, Failure>;

enum Output {
    Table { meta: Metadata, table: Table, svg: Option<Dataset> },
    Report(serde_json::Value),
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cmdline = std::iter::once("mathieu-sg".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join(" ");
    let result = match cli.threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, &cmdline)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        Some(_) => Err(Failure::Usage("--threads must be positive".into())),
        None => execute(&cli, &cmdline),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            eprintln!("run with --help for usage");
            2
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {}: {e}", e.name());
            1
        }
    }
}

fn execute(cli: &Cli, cmdline: &str) -> Res<()> {
    let mut meta = Metadata::default();
    meta.push("command", cmdline);
    meta.push("version", env!("CARGO_PKG_VERSION"));
    let out = match &cli.cmd {
        Top::Line { cmd } => line(cmd, meta)?,
        Top::Stab { cmd } => stab(cmd, meta)?,
        Top::Sg { cmd } => sg(cmd, meta)?,
        Top::Fractal { cmd } => fractal(cmd, meta)?,
        Top::Fit { cmd } => fit(cmd, meta)?,
    };
    let text = match out {
        Output::Table { meta, table, svg } => match cli.format.unwrap_or(OutFormat::Csv) {
            OutFormat::Csv => export::to_csv(&meta, &table)?,
            OutFormat::Json => export::to_json(&meta, &table)?,
            OutFormat::Svg => match svg {
                Some(d) => export::export_svg(&meta, &d),
                None => return Err(Error::UnknownDatasetKind(command_name(&cli.cmd)).into()),
            },
        },
        Output::Report(v) => match cli.format.unwrap_or(OutFormat::Json) {
            OutFormat::Json => serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))? + "\n",
            _ => return Err(Error::UnknownDatasetKind(command_name(&cli.cmd)).into()),
        },
    };
    write_output(cli.output.as_ref(), &text)
}

fn command_name(t: &Top) -> String {
    match t {
        Top::Line { .. } => "line",
        Top::Stab { .. } => "stab",
        Top::Sg { .. } => "sg",
        Top::Fractal { .. } => "fractal",
        Top::Fit { .. } => "fit report",
    }
    .to_string()
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Res<()> {
    match path {
        None => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(Error::from)?;
            Ok(())
        }
        Some(p) => {
            let p = match std::env::var_os(OUTPUT_DIR_ENV) {
                Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
                _ => p.clone(),
            };
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(Error::from)?;
            }
            std::fs::write(&p, text).map_err(Error::from)?;
            Ok(())
        }
    }
}

fn table_out(meta: Metadata, table: Table, svg: Option<Dataset>) -> Output {
    Output::Table { meta, table, svg }
}

fn matrix(s: &str) -> Res<MatrixKind> {
    MatrixKind::parse(s).map_err(|e| Failure::Usage(e.to_string()))
}

fn line(cmd: &LineCmd, mut meta: Metadata) -> Res<Output> {
    meta.push("eigen_tolerance", "bisection to machine precision; adaptive truncation estimate < 1e-8");
    match cmd {
        LineCmd::Curves { matrix: m, k, eps } => {
            let kind = matrix(m)?;
            let ks = usage(parse_positive(k))?;
            let grid = usage(parse_reals(eps))?;
            let mut t = Table::new(&["eps", "delta", "k", "matrix", "m_used"]);
            let mut series = Vec::new();
            let mut mmax = 0;
            for &k in &ks {
                let c = linemde::transition_curve(CurveLabel::new(kind, k)?, &grid)?;
                for p in &c.points {
                    mmax = mmax.max(p.m_used);
                    t.push(vec![p.eps.into(), p.delta.into(), k.into(), kind.name().into(), p.m_used.into()]);
                }
                series.push((format!("{} k={k}", kind.name()), c.points.iter().map(|p| (p.eps, p.delta)).collect()));
            }
            meta.push("truncation_m_max", mmax);
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "delta".into(), series })))
        }
        LineCmd::Solution { matrix: m, k, eps, terms, grid } => {
            let label = CurveLabel::new(matrix(m)?, *k)?;
            let sol = linemde::solution(label, *eps, *terms, *grid)?;
            meta.push("delta", format::fmt_data(sol.delta));
            meta.push("truncation_m", sol.m_used);
            meta.push("residual", format::fmt_data(sol.residual));
            let mut t = Table::new(&["t", "u"]);
            for &(x, u) in &sol.samples {
                t.push(vec![x.into(), u.into()]);
            }
            let series = vec![(label.matrix.name(), sol.samples.clone())];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "t".into(), ylabel: "u".into(), series })))
        }
        LineCmd::ExtremaTrack { matrix: m, k, eps, terms, grid } => {
            let label = CurveLabel::new(matrix(m)?, *k)?;
            let eps = usage(parse_reals(eps))?;
            let mut t = Table::new(&["eps", "delta", "t_max", "u_max", "n_max", "n_min"]);
            let mut pts = Vec::new();
            for &e in &eps {
                let sol = linemde::solution(label, e, *terms, *grid)?;
                let ex = linemde::find_extrema(&sol);
                let nmax = ex.iter().filter(|x| x.kind == linemde::ExtremumKind::Max).count();
                let tm = linemde::max_location(&sol);
                t.push(vec![e.into(), sol.delta.into(), tm.into(), sol.eval(tm).into(), nmax.into(), (ex.len() - nmax).into()]);
                pts.push((e, tm));
            }
            let series = vec![("t_max".to_string(), pts)];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "t_max".into(), series })))
        }
        LineCmd::BandWidth { band, eps } => {
            let bands = usage(parse_positive(band))?;
            let eps = usage(parse_reals(eps))?;
            let mut t = Table::new(&["eps", "band", "width"]);
            let mut series = Vec::new();
            for &b in &bands {
                let mut pts = Vec::new();
                for &e in &eps {
                    let w = linemde::band_width(b, e)?;
                    t.push(vec![e.into(), b.into(), w.into()]);
                    pts.push((e, w));
                }
                series.push((format!("band {b}"), pts));
            }
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "width".into(), series })))
        }
        LineCmd::PeriodN { n, k, form, trig, index, eps } => {
            let trig = match trig {
                TrigArg::Cos => Trig::Cos,
                TrigArg::Sin => Trig::Sin,
            };
            let kind = MatrixKind::PeriodN { n: *n, k: *k, trig, form: *form };
            kind.validate()?;
            let idx = usage(parse_positive(index))?;
            let eps = usage(parse_reals(eps))?;
            meta.push("floquet_tolerance", floquet::TRANSITION_TOL);
            let mut t = Table::new(&["eps", "delta", "index", "matrix", "m_used", "trace_n"]);
            let mut series = Vec::new();
            for &i in &idx {
                let c = linemde::transition_curve(CurveLabel::new(kind, i)?, &eps)?;
                for p in &c.points {
                    let tr = floquet::classify_periods(p.delta, p.eps, *n, floquet::TRANSITION_TOL).trace;
                    t.push(vec![p.eps.into(), p.delta.into(), i.into(), kind.name().into(), p.m_used.into(), tr.into()]);
                }
                series.push((format!("{} #{i}", kind.name()), c.points.iter().map(|p| (p.eps, p.delta)).collect()));
            }
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "delta".into(), series })))
        }
        LineCmd::Alpha { family, k } => {
            let (fam, name) = match family {
                FamilyArg::CosK => (Family::CosK, "cos-k"),
                FamilyArg::SinK => (Family::SinK, "sin-k"),
                FamilyArg::CosHalf => (Family::CosHalf, "cos-half"),
                FamilyArg::SinHalf => (Family::SinHalf, "sin-half"),
            };
            let ks = usage(parse_ints(k))?;
            let mut t = Table::new(&["family", "k", "alpha"]);
            let mut pts = Vec::new();
            for &k in &ks {
                if k < 0 {
                    return Err(Failure::Usage(format!("k must be >= 0, got {k}")));
                }
                let a = linemde::critical_alpha(CurveLabel::from_family(fam, k as usize)?)?;
                t.push(vec![name.into(), k.into(), a.into()]);
                pts.push((k as f64, a));
            }
            let series = vec![(name.to_string(), pts)];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "k".into(), ylabel: "alpha".into(), series })))
        }
    }
}

fn stab(cmd: &StabCmd, mut meta: Metadata) -> Res<Output> {
    meta.push("integrator", "4th-order symplectic, half-period map with reflection");
    meta.push("transition_tolerance", floquet::TRANSITION_TOL);
    match cmd {
        StabCmd::Grid { delta, eps, nx, ny, overlay } => {
            let dr = usage(parse_span(delta))?;
            let er = usage(parse_span(eps))?;
            if *nx == 0 || *ny == 0 {
                return Err(Failure::Usage("grid dimensions must be positive".into()));
            }
            let g = floquet::stability_grid(dr, er, *nx, *ny);
            let mut t = Table::new(&["delta", "eps", "trace", "tag"]);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let c = g.cell(i, j);
                    let tag = match c.tag {
                        StabilityTag::Stable => "stable",
                        StabilityTag::Unstable => "unstable",
                        StabilityTag::Transitional => "transitional",
                    };
                    t.push(vec![g.delta_at(i).into(), g.eps_at(j).into(), c.trace.into(), tag.into()]);
                }
            }
            let mut curves = Vec::new();
            if let Some(o) = overlay {
                let ks = usage(parse_positive(o))?;
                let n = 200;
                let grid: Vec<f64> = (0..=n).map(|i| er.0.max(0.0) + (er.1 - er.0.max(0.0)) * i as f64 / n as f64).collect();
                for kind in [MatrixKind::A, MatrixKind::B, MatrixKind::C, MatrixKind::D] {
                    for &k in &ks {
                        let c = linemde::transition_curve(CurveLabel::new(kind, k)?, &grid)?;
                        curves.push(c.points.iter().filter(|p| p.delta >= dr.0 && p.delta <= dr.1).map(|p| (p.delta, p.eps)).collect());
                    }
                }
            }
            let stable = g.cells.iter().map(|c| c.tag == StabilityTag::Stable).collect();
            let svg = Dataset::Grid { x_range: dr, y_range: er, nx: g.nx, ny: g.ny, stable, overlay: curves };
            Ok(table_out(meta, t, Some(svg)))
        }
        StabCmd::Probability { i, samples } => {
            let is = usage(parse_positive(i))?;
            meta.push("rows", samples);
            let all = floquet::triangle_probabilities_subset(&is, *samples);
            let mut t = Table::new(&["i", "P_i", "w"]);
            let mut pts = Vec::new();
            for p in &all {
                t.push(vec![p.i.into(), p.p.into(), p.w.into()]);
                pts.push((p.i as f64, p.p));
            }
            let series = vec![("P_i".to_string(), pts)];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "i".into(), ylabel: "P_i".into(), series })))
        }
    }
}

fn series(v: u32) -> Res<Series> {
    Series::from_value(v).map_err(|e| Failure::Usage(e.to_string()))
}

fn parse_path(s: &str) -> Res<Vec<Sign>> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(Sign::Plus),
            '-' => Ok(Sign::Minus),
            _ => Err(Failure::Usage(format!("path symbols must be + or -, got '{c}'"))),
        })
        .collect()
}

fn field_table(f: &SGFunction) -> (Table, Dataset) {
    let lv = &f.level;
    let mut t = Table::new(&["x", "y", "value", "word"]);
    for v in 0..lv.len() {
        t.push(vec![lv.points[v][0].into(), lv.points[v][1].into(), f.values[v].into(), lv.words[v].clone().into()]);
    }
    let triangles = lv
        .cells
        .iter()
        .map(|c| {
            let tri = [lv.points[c[0]], lv.points[c[1]], lv.points[c[2]]];
            (tri, (f.values[c[0]] + f.values[c[1]] + f.values[c[2]]) / 3.0)
        })
        .collect();
    (t, Dataset::Field { triangles })
}

fn sg(cmd: &SgCmd, mut meta: Metadata) -> Res<Output> {
    meta.push("psi_tolerance", "relative 1e-13, at most 60 iterations");
    match cmd {
        SgCmd::Eigenvalues { s, count } => {
            let ser = series(s.series)?;
            let v = sgspec::ordered_eigenvalues(s.m0, ser, *count)?;
            let mut t = Table::new(&["n", "d", "path", "lambda"]);
            for (i, &l) in v.iter().enumerate() {
                let p = DecimationPath::from_index(s.m0, ser, i as u64);
                t.push(vec![(i + 1).into(), i.into(), p.symbols().into(), l.into()]);
            }
            let series = vec![("lambda_n".to_string(), v.iter().enumerate().map(|(i, &l)| ((i + 1) as f64, l)).collect())];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "n".into(), ylabel: "lambda".into(), series })))
        }
        SgCmd::Eigenfunction { series: sv, index, path, level } => {
            let ser = series(*sv)?;
            let e = match (index, path) {
                (Some(d), _) => sgspec::path_of_index(*d),
                (None, Some(p)) => parse_path(p)?,
                (None, None) => Vec::new(),
            };
            let p = DecimationPath::new(2, ser, e)?;
            let cache = EigenfunctionCache::new();
            let f = cache.get(&p, *level)?;
            meta.push("generation_of_birth", 2);
            meta.push("path", if p.e.is_empty() { "(empty)".to_string() } else { p.symbols() });
            meta.push("lambda", format::fmt_data(sgspec::lambda_of_path(&p)));
            meta.push("initial_pattern", pattern_note(ser));
            let (t, svg) = field_table(&f);
            Ok(table_out(meta, t, Some(svg)))
        }
        SgCmd::Counting { s, x } => {
            let ser = series(s.series)?;
            let xs = usage(parse_reals(x))?;
            let pw = 2f64.ln() / 5f64.ln();
            let mut t = Table::new(&["x", "rho", "rho_over_power"]);
            let mut pts = Vec::new();
            for &x in &xs {
                if x < 0.0 {
                    return Err(Failure::Usage("x must be nonnegative".into()));
                }
                let r = sgspec::counting_function(s.m0, ser, x);
                let g = if x > 0.0 { r as f64 / x.powf(pw) } else { 0.0 };
                t.push(vec![x.into(), r.into(), g.into()]);
                pts.push((x, r as f64));
            }
            let series = vec![("rho".to_string(), pts)];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "x".into(), ylabel: "rho".into(), series })))
        }
    }
}

fn pattern_note(s: Series) -> &'static str {
    match s {
        Series::Five => "projection of +-1 alternating on the outer six boundary quarter points",
        Series::Six => "projection of +1 on level-1 midpoints and -1 on central-hole edge midpoints",
    }
}

fn version(a: &VersionArgs, meta: &mut Metadata) -> Res<FractalVersion> {
    let fv = FractalVersion::new(a.v, series(a.s.series)?, a.s.m0).map_err(|e| match e {
        Error::InvalidInput(m) => Failure::Usage(m),
        e => Failure::Numeric(e),
    })?;
    meta.push("lambda_0", "0 (prepended to the ordered eigenvalues)");
    Ok(fv)
}

fn fractal(cmd: &FractalCmd, mut meta: Metadata) -> Res<Output> {
    meta.push("eigen_tolerance", "bisection to machine precision; adaptive truncation estimate < 1e-8");
    match cmd {
        FractalCmd::Curves { fv, k, eps } => {
            let ver = version(fv, &mut meta)?;
            let ks = usage(parse_positive(k))?;
            let grid = usage(parse_reals(eps))?;
            let curves: Vec<crate::error::Result<fracmde::FractalCurve>> = {
                use rayon::prelude::*;
                ks.par_iter().map(|&k| fracmde::fractal_transition_curve(&ver, k, &grid)).collect()
            };
            let mut t = Table::new(&["eps", "delta", "k", "version", "series", "m0", "m_used"]);
            let mut series = Vec::new();
            let mut mmax = 0;
            for c in curves {
                let c = c?;
                for p in &c.points {
                    mmax = mmax.max(p.m_used);
                    t.push(vec![
                        p.eps.into(),
                        p.delta.into(),
                        c.k.into(),
                        (ver.v as i64).into(),
                        (ver.series.value() as i64).into(),
                        ver.m0.into(),
                        p.m_used.into(),
                    ]);
                }
                series.push((format!("k={}", c.k), c.points.iter().map(|p| (p.eps, p.delta)).collect()));
            }
            meta.push("truncation_m_max", mmax);
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "delta".into(), series })))
        }
        FractalCmd::Solution { fv, k, eps, level } => {
            let ver = version(fv, &mut meta)?;
            let cache = EigenfunctionCache::new();
            let sol = fracmde::fractal_solution(&ver, *k, *eps, *level, &cache)?;
            meta.push("delta", format::fmt_data(sol.delta));
            meta.push("truncation_m", sol.m_used);
            meta.push("terms", sol.n_terms);
            meta.push("render_generation_of_birth", 2);
            meta.push("initial_pattern", pattern_note(ver.series));
            let (t, svg) = field_table(&sol.field);
            Ok(table_out(meta, t, Some(svg)))
        }
        FractalCmd::Peaks { fv, k, eps, level } => {
            let ver = version(fv, &mut meta)?;
            let eps = usage(parse_reals(eps))?;
            let cache = EigenfunctionCache::new();
            let mut t = Table::new(&["eps", "rank", "vertex", "x", "y", "value"]);
            let mut counts = Vec::new();
            for &e in &eps {
                let sol = fracmde::fractal_solution(&ver, *k, e, *level, &cache)?;
                let peaks = fracmde::find_peaks_on_sg(&sol.field);
                for (r, &(v, val)) in peaks.iter().enumerate() {
                    let pt = sol.field.level.points[v];
                    t.push(vec![e.into(), (r + 1).into(), v.into(), pt[0].into(), pt[1].into(), val.into()]);
                }
                counts.push((e, peaks.len() as f64));
            }
            let series = vec![("peak count".to_string(), counts)];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "peaks".into(), series })))
        }
        FractalCmd::Asymptote { fv, k, eps } => {
            let ver = version(fv, &mut meta)?;
            let eps = usage(parse_reals(eps))?;
            let r = fracmde::asymptote_ratio(&ver, *k, &eps)?;
            meta.push("last_ratio", format::fmt_data(r.last));
            meta.push("slope_vs_inv_sqrt_eps", format::fmt_data(r.slope));
            let mut t = Table::new(&["eps", "ratio"]);
            for (e, q) in r.eps.iter().zip(&r.ratios) {
                t.push(vec![(*e).into(), (*q).into()]);
            }
            let series = vec![("delta/eps".to_string(), r.eps.iter().copied().zip(r.ratios.iter().copied()).collect())];
            Ok(table_out(meta, t, Some(Dataset::Curves { xlabel: "eps".into(), ylabel: "delta/eps".into(), series })))
        }
    }
}

fn model(s: &str) -> Res<ModelSpec> {
    ModelSpec::parse(s).map_err(|e| Failure::Usage(e.to_string()))
}

fn fit(cmd: &FitCmd, meta: Metadata) -> Res<Output> {
    match cmd {
        FitCmd::Run { model: m, input, x, y, range, init } => {
            let model = model(m)?;
            let text = std::fs::read_to_string(input).map_err(Error::from)?;
            let cols = export::read_columns(&text, &[x, y])?;
            let span = match range {
                Some(r) => Some(usage(parse_span(r))?),
                None => None,
            };
            let data: Vec<(f64, f64)> = cols[0]
                .iter()
                .copied()
                .zip(cols[1].iter().copied())
                .filter(|(xv, _)| span.is_none_or(|(a, b)| *xv >= a && *xv <= b))
                .collect();
            let init = match init {
                Some(s) => Init::Given(usage(parse_reals(s))?),
                None => Init::Auto,
            };
            let r = fitkit::fit(model, &data, &init)?;
            let meta: serde_json::Map<String, serde_json::Value> = meta.0.into_iter().map(|(k, v)| (k, json!(v))).collect();
            Ok(Output::Report(json!({
                "metadata": meta,
                "model": model.id(),
                "params": r.params,
                "rms": r.rms_residual,
                "iterations": r.iterations,
                "converged": r.converged,
                "gradient_norm": r.gradient_norm,
                "rank_deficient": r.rank_deficient,
                "points": data.len(),
            })))
        }
        FitCmd::Check { model: m, params, x } => {
            let model = model(m)?;
            let p = usage(parse_reals(params))?;
            if p.len() != model.param_count() {
                return Err(Failure::Usage(format!("{} expects {} parameters", model.id(), model.param_count())));
            }
            let xs = usage(parse_reals(x))?;
            let dev = fitkit::jacobian_check(model, &p, &xs);
            let meta: serde_json::Map<String, serde_json::Value> = meta.0.into_iter().map(|(k, v)| (k, json!(v))).collect();
            Ok(Output::Report(json!({ "metadata": meta, "model": model.id(), "params": p, "max_relative_deviation": dev })))
        }
    }
}
