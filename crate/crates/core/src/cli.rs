//! Command-line front end.
//!
//! ```text
//! biphoton-qudit-sim <prepare|scan|interfere|map|analyze> [--config FILE] [overrides…] [--out DIR] [--plot]
//! ```
//!
//! Every config field has an override flag; flags win over `BQS_SEED`, which
//! wins over the config file. Exit codes: 0 success, 2 config or validation
//! error, 3 numerical failure, 4 input file error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::diagnostics::{conditionality_witness, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::experiment::{
    default_scan_grid, fidelity, near_field_scan, probability_table, reconstruct_state, simulate_all_scans, CountKind,
    FidelityConvention, ScanRecord,
};
use crate::far_field::{coincidence_map, fringe_slice, DetectorWindow, FarFieldModel, FringeSlice, RateSource};
use crate::geometry::{ExperimentGeometry, SlitIndex};
use crate::io;
use crate::state_prep::{
    classically_correlated_state, ideal_entangled_state, project_biphoton, CorrelatedMixture, PumpProfile,
    QuditPureState,
};
use crate::svg::{heatmap, LinePlot, Series};

#[derive(Debug, Parser)]
#[command(name = "biphoton-qudit-sim", version, about = "Spatial qudits from down-converted photon pairs through multi-slit apertures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the two-photon state or the classically correlated mixture.
    Prepare(PrepareArgs),
    /// Simulate near-field scans of D2 with D1 fixed behind a slit.
    Scan(ScanArgs),
    /// Far-field coincidence fringes versus x1 at fixed x2 positions.
    Interfere(InterfereArgs),
    /// Far-field coincidence rate on an x1 × x2 grid.
    Map(MapArgs),
    /// Histogram, reconstruction, fidelity and entanglement diagnostics.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrepareMode {
    Ideal,
    Numeric,
    Cc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    State,
    Cc,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG figures.
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Config overrides. All lengths in meters.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, help_heading = "Geometry")]
    pub wavelength: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub dimension: Option<usize>,
    #[arg(long, help_heading = "Geometry")]
    pub slit_half_width: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub slit_spacing: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub z_aperture: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub detector_near_offset: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub detector_slit_width: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub lens_focal: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub lens_position: Option<f64>,
    #[arg(long, help_heading = "Geometry")]
    pub detector_far_plane: Option<f64>,

    /// Gaussian pump waist; replaces a tabulated pump.
    #[arg(long, help_heading = "Pump")]
    pub pump_waist: Option<f64>,
    #[arg(long, help_heading = "Pump", allow_negative_numbers = true)]
    pub pump_center: Option<f64>,

    #[arg(long, env = "BQS_SEED", help_heading = "Noise")]
    pub seed: Option<u64>,
    /// Mean pair flux (pairs/s).
    #[arg(long, help_heading = "Noise")]
    pub flux: Option<f64>,
    #[arg(long, help_heading = "Noise")]
    pub singles_ratio: Option<f64>,
    /// Acquisition time per scan point (s).
    #[arg(long, help_heading = "Noise")]
    pub acquisition: Option<f64>,

    #[arg(long, help_heading = "Grids")]
    pub scan_step: Option<f64>,
    #[arg(long, help_heading = "Grids", allow_negative_numbers = true)]
    pub fringe_min: Option<f64>,
    #[arg(long, help_heading = "Grids", allow_negative_numbers = true)]
    pub fringe_max: Option<f64>,
    #[arg(long, help_heading = "Grids")]
    pub fringe_points: Option<usize>,
    /// Fixed D2 positions for fringe slices, comma separated.
    #[arg(long, help_heading = "Grids", value_delimiter = ',', allow_negative_numbers = true)]
    pub x2: Option<Vec<f64>>,
    #[arg(long, help_heading = "Grids", allow_negative_numbers = true)]
    pub map_min: Option<f64>,
    #[arg(long, help_heading = "Grids", allow_negative_numbers = true)]
    pub map_max: Option<f64>,
    #[arg(long, help_heading = "Grids")]
    pub map_points: Option<usize>,
    #[arg(long, help_heading = "Grids")]
    pub window_points: Option<usize>,

    #[arg(long, help_heading = "Thresholds")]
    pub score_threshold: Option<f64>,
    #[arg(long, help_heading = "Thresholds")]
    pub visibility_threshold: Option<f64>,

    #[arg(long, help_heading = "Quadrature")]
    pub quad_order: Option<usize>,
    #[arg(long, help_heading = "Quadrature")]
    pub quad_tol: Option<f64>,
    #[arg(long, help_heading = "Quadrature")]
    pub quad_depth: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        let g = &mut cfg.geometry;
        set(&mut g.wavelength, &self.wavelength);
        set(&mut g.dimension, &self.dimension);
        set(&mut g.slit_half_width, &self.slit_half_width);
        set(&mut g.slit_spacing, &self.slit_spacing);
        set(&mut g.z_aperture, &self.z_aperture);
        set(&mut g.detector_near_offset, &self.detector_near_offset);
        set(&mut g.detector_slit_width, &self.detector_slit_width);
        set(&mut g.lens_focal, &self.lens_focal);
        set(&mut g.lens_position, &self.lens_position);
        set(&mut g.detector_far_plane, &self.detector_far_plane);

        if self.pump_waist.is_some() || self.pump_center.is_some() {
            let (waist, center) = match cfg.pump.0 {
                PumpProfile::Gaussian { waist, center } => (waist, center),
                _ => (crate::config::DEFAULT_PUMP_WAIST, 0.0),
            };
            cfg.pump.0 = PumpProfile::gaussian(self.pump_waist.unwrap_or(waist), self.pump_center.unwrap_or(center));
        }

        let n = &mut cfg.noise;
        set(&mut n.seed, &self.seed);
        set(&mut n.mean_pair_flux, &self.flux);
        set(&mut n.singles_ratio, &self.singles_ratio);
        set(&mut n.acquisition, &self.acquisition);

        let gr = &mut cfg.grids;
        set(&mut gr.scan_step, &self.scan_step);
        set(&mut gr.fringe_min, &self.fringe_min);
        set(&mut gr.fringe_max, &self.fringe_max);
        set(&mut gr.fringe_points, &self.fringe_points);
        set(&mut gr.x2_slices, &self.x2);
        set(&mut gr.map_min, &self.map_min);
        set(&mut gr.map_max, &self.map_max);
        set(&mut gr.map_points, &self.map_points);
        set(&mut gr.window_points, &self.window_points);

        set(&mut cfg.thresholds.score, &self.score_threshold);
        set(&mut cfg.thresholds.visibility, &self.visibility_threshold);

        set(&mut cfg.quadrature.base_order, &self.quad_order);
        set(&mut cfg.quadrature.rel_tol, &self.quad_tol);
        set(&mut cfg.quadrature.max_depth, &self.quad_depth);
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, value_enum, default_value_t = PrepareMode::Ideal)]
    pub mode: PrepareMode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// State CSV; defaults to the ideal state (or `--mode numeric`).
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// State to prepare inline when no file is given.
    #[arg(long, value_enum, default_value_t = PrepareMode::Ideal, conflicts_with = "state")]
    pub mode: PrepareMode,
    /// Slit behind D1, e.g. `+1/2` or `-3/2`.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "all", conflicts_with = "all")]
    pub fixed_slit: Option<String>,
    /// One scan per slit.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum, default_value_t = SourceKind::State)]
    pub source: SourceKind,
    /// State CSV; defaults to the ideal state in closed form.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Mixture CSV for `--source cc`; defaults to uniform weights.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    /// Average over the finite detector slit width.
    #[arg(long)]
    pub smoothed: bool,
}

#[derive(Debug, Args)]
pub struct InterfereArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Scan CSVs, one per fixed slit.
    #[arg(long, num_args = 1..)]
    pub scans: Vec<PathBuf>,
    /// Probability table CSV, used instead of scans.
    #[arg(long, conflicts_with = "scans")]
    pub table: Option<PathBuf>,
    /// State CSV to diagnose; defaults to the reconstruction.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Mixture CSV to diagnose.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    /// Fringe slice CSVs for the conditionality witness.
    #[arg(long, num_args = 1..)]
    pub slices: Vec<PathBuf>,
    /// Renormalize the reconstruction before taking the fidelity.
    #[arg(long)]
    pub renormalize: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Geometry(_)
        | Error::DimensionBelowTwo(_)
        | Error::InvalidSlit { .. }
        | Error::SlitLabel(_)
        | Error::Pump(_)
        | Error::Config(_) => 2,
        Error::Quadrature { .. } | Error::DegenerateImaging | Error::PumpVanishes => 3,
        _ => 4,
    }
}

pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Scan(a) => scan(a),
        Command::Interfere(a) => interfere(a),
        Command::Map(a) => map(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn load(common: &Common) -> Result<(RunConfig, ExperimentGeometry)> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    common.overrides.apply(&mut cfg);
    let geometry = cfg.validate()?;
    Ok((cfg, geometry))
}

fn emit(common: &Common, name: &str, contents: &str) -> Result<PathBuf> {
    let path = common.out.join(name);
    io::write_file(&path, contents)?;
    Ok(path)
}

fn read_state(path: &Path, geometry: &ExperimentGeometry) -> Result<QuditPureState> {
    io::parse_state(&io::read_file(path)?, geometry.dimension(), &path.display().to_string())
}

fn read_mixture(path: &Path, geometry: &ExperimentGeometry) -> Result<CorrelatedMixture> {
    io::parse_mixture(&io::read_file(path)?, geometry.dimension(), &path.display().to_string())
}

fn state_for(mode: PrepareMode, cfg: &RunConfig, geometry: &ExperimentGeometry) -> Result<QuditPureState> {
    match mode {
        PrepareMode::Ideal => Ok(ideal_entangled_state(geometry)),
        PrepareMode::Numeric => project_biphoton(geometry, &cfg.pump.0, &cfg.quadrature_spec()),
        PrepareMode::Cc => Err(Error::Config("the mixture has no pure-state amplitudes to scan".into())),
    }
}

fn prepare(args: PrepareArgs) -> Result<()> {
    let (cfg, geometry) = load(&args.common)?;
    let dim = geometry.dimension();
    if args.mode == PrepareMode::Cc {
        let mixture = classically_correlated_state(&geometry);
        let path = emit(&args.common, "mixture.csv", &io::mixture_csv(&mixture))?;
        println!("wrote {} ({dim} weights)", path.display());
        return Ok(());
    }
    let state = state_for(args.mode, &cfg, &geometry)?;
    let path = emit(&args.common, "state.csv", &io::state_csv(&state))?;
    println!("wrote {}", path.display());
    println!("norm^2 = {:.12}", state.norm_sqr());
    println!("nonzero entries = {}", state.nonzero_count(io::AMPLITUDE_CUTOFF));
    if args.common.plot {
        let labels: Vec<f64> = geometry.slits().iter().map(|l| l.l()).collect();
        let mags: Vec<f64> = geometry.slits().iter().map(|&l| state.get(l, l.mirrored()).norm()).collect();
        let svg = LinePlot::new("anti-diagonal amplitudes", "l (photon 1 slit)", "|c(l, -l)|")
            .with(Series::new("|c|", labels, mags))
            .render();
        emit(&args.common, "state.svg", &svg)?;
    }
    Ok(())
}

fn scan_name(slit: SlitIndex, ext: &str) -> String {
    format!("scan_twice_l{:+}.{ext}", slit.twice_l())
}

fn scan(args: ScanArgs) -> Result<()> {
    let (cfg, geometry) = load(&args.common)?;
    let state = match &args.state {
        Some(path) => read_state(path, &geometry)?,
        None => state_for(args.mode, &cfg, &geometry)?,
    };
    let grid = default_scan_grid(&geometry, cfg.grids.scan_step);
    let noise = cfg.noise_settings();
    let records = if args.all {
        simulate_all_scans(&state, &grid, &noise, &geometry)?
    } else {
        let label = args.fixed_slit.as_deref().unwrap_or_default();
        let slit = SlitIndex::parse(label, geometry.dimension())?;
        vec![near_field_scan(&state, slit, &grid, &noise, &geometry)?]
    };
    for record in &records {
        let path = emit(&args.common, &scan_name(record.fixed_slit, "csv"), &io::scan_csv(record))?;
        let total: u64 = record.coincidences.iter().sum();
        let peak = peak_position(record);
        let peak = if peak.is_nan() { "no peak".to_string() } else { format!("peak at x2 = {:+.3} mm", peak * 1e3) };
        println!("D1 behind {:>4}: {total} coincidences, {peak} -> {}", record.fixed_slit.to_string(), path.display());
        if !record.covers_aperture {
            eprintln!("warning: scan grid does not cover the whole aperture");
        }
        if args.common.plot {
            let x: Vec<f64> = record.positions.iter().map(|x| x * 1e3).collect();
            let svg = LinePlot::new(format!("D1 fixed behind slit {}", record.fixed_slit), "x2 (mm)", "counts")
                .with(Series::new("singles", x.clone(), record.singles.iter().map(|&c| c as f64).collect()))
                .with(Series::new("coincidences", x, record.coincidences.iter().map(|&c| c as f64).collect()))
                .render();
            emit(&args.common, &scan_name(record.fixed_slit, "svg"), &svg)?;
        }
    }
    Ok(())
}

/// Middle of the flat top of the expected coincidence profile.
fn peak_position(record: &ScanRecord) -> f64 {
    let max = record.expected_coincidences.iter().copied().fold(0.0, f64::max);
    let top: Vec<f64> = record
        .positions
        .iter()
        .zip(&record.expected_coincidences)
        .filter(|(_, &c)| max > 0.0 && c >= max * (1.0 - 1e-9))
        .map(|(&x, _)| x)
        .collect();
    match (top.first(), top.last()) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        _ => f64::NAN,
    }
}

/// Owned inputs behind a [`RateSource`].
enum Loaded {
    Closed,
    Pure(QuditPureState),
    Mixture(CorrelatedMixture),
}

impl Loaded {
    fn source(&self) -> RateSource<'_> {
        match self {
            Loaded::Closed => RateSource::ClosedForm,
            Loaded::Pure(s) => RateSource::Pure(s),
            Loaded::Mixture(m) => RateSource::Correlated(m),
        }
    }
}

fn load_source(args: &SourceArgs, geometry: &ExperimentGeometry) -> Result<Loaded> {
    Ok(match args.source {
        SourceKind::State => match &args.state {
            Some(path) => Loaded::Pure(read_state(path, geometry)?),
            None => Loaded::Closed,
        },
        SourceKind::Cc => match &args.mixture {
            Some(path) => Loaded::Mixture(read_mixture(path, geometry)?),
            None => Loaded::Mixture(classically_correlated_state(geometry)),
        },
    })
}

fn window(args: &SourceArgs, cfg: &RunConfig, geometry: &ExperimentGeometry) -> Result<Option<DetectorWindow>> {
    if args.smoothed {
        Ok(Some(DetectorWindow::new(geometry.detector_slit_width(), cfg.grids.window_points)?))
    } else {
        Ok(None)
    }
}

fn interfere(args: InterfereArgs) -> Result<()> {
    let (cfg, geometry) = load(&args.common)?;
    let model = FarFieldModel::new(&geometry)?;
    let loaded = load_source(&args.source, &geometry)?;
    let source = loaded.source();
    let window = window(&args.source, &cfg, &geometry)?;
    let grid = cfg.grids.fringe_grid();
    let p = model.params();
    println!(
        "beta = {:.2} 1/m, adjacent-slit period = {:.4} mm, phi = {:.2} um",
        p.beta,
        p.adjacent_period() * 1e3,
        p.phi * 1e6
    );
    let mut slices: Vec<FringeSlice> = Vec::new();
    for (i, &x2) in cfg.grids.x2_slices.iter().enumerate() {
        let slice = fringe_slice(&model, &source, x2, &grid, window.as_ref())?;
        let path = emit(&args.common, &format!("slice_{i}.csv"), &io::slice_csv(&slice))?;
        println!("x2 = {:+.3} mm: visibility = {:.4} -> {}", x2 * 1e3, slice.visibility, path.display());
        slices.push(slice);
    }
    if args.common.plot && !slices.is_empty() {
        let mut plot = LinePlot::new(format!("fourth-order fringes ({})", source.provenance()), "x1 (mm)", "normalized rate");
        for s in &slices {
            let x: Vec<f64> = s.x1.iter().map(|x| x * 1e3).collect();
            plot = plot.with(Series::new(format!("x2 = {:.3} mm", s.x2 * 1e3), x, s.normalized()));
        }
        emit(&args.common, "fringes.svg", &plot.render())?;
    }
    Ok(())
}

fn map(args: MapArgs) -> Result<()> {
    let (cfg, geometry) = load(&args.common)?;
    let model = FarFieldModel::new(&geometry)?;
    let loaded = load_source(&args.source, &geometry)?;
    let window = window(&args.source, &cfg, &geometry)?;
    let grid = cfg.grids.map_grid();
    let map = coincidence_map(&model, &loaded.source(), &grid, &grid, window.as_ref())?;
    let path = emit(&args.common, "map.csv", &io::map_csv(&map))?;
    println!("wrote {} ({} x {} points)", path.display(), grid.len(), grid.len());
    if map.clamping_significant() {
        eprintln!("warning: closed form went negative by {:.2e} of the maximum and was clamped", map.clamped);
    }
    if args.common.plot {
        let mm: Vec<f64> = grid.iter().map(|x| x * 1e3).collect();
        let svg = heatmap("coincidence rate", "x1 (mm)", "x2 (mm)", &mm, &mm, &map.rates);
        emit(&args.common, "map.svg", &svg)?;
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let (cfg, geometry) = load(&args.common)?;
    let dim = geometry.dimension();
    let mut report = DiagnosticsReport::default();
    report.push("dimension", dim);

    let table = if let Some(path) = &args.table {
        Some(io::parse_histogram(&io::read_file(path)?, dim, &path.display().to_string())?)
    } else if !args.scans.is_empty() {
        let records = args
            .scans
            .iter()
            .map(|p| io::parse_scan(&io::read_file(p)?, dim, &p.display().to_string()))
            .collect::<Result<Vec<_>>>()?;
        let table = probability_table(&records, &geometry, CountKind::Sampled)?;
        emit(&args.common, "histogram.csv", &io::histogram_csv(&table))?;
        Some(table)
    } else {
        None
    };

    let mut reconstruction = None;
    if let Some(table) = &table {
        let candidate = reconstruct_state(table, &geometry)?;
        emit(&args.common, "reconstruction.csv", &io::state_csv(&candidate))?;
        let convention = if args.renormalize { FidelityConvention::Renormalized } else { FidelityConvention::Raw };
        report.push("fidelity", fidelity(&candidate, &ideal_entangled_state(&geometry), convention)?);
        report.push("table_total", table.total());
        reconstruction = Some(candidate);
    }

    let state = match &args.state {
        Some(path) => Some(read_state(path, &geometry)?),
        None => reconstruction,
    };
    if let Some(state) = &state {
        report.add_pure_state(state)?;
    }
    if let Some(path) = &args.mixture {
        let mixture = read_mixture(path, &geometry)?;
        report.add_mixture(&mixture)?;
    }
    if !args.slices.is_empty() {
        let slices = args
            .slices
            .iter()
            .map(|p| io::parse_slice(&io::read_file(p)?, &p.display().to_string()))
            .collect::<Result<Vec<_>>>()?;
        let witness = conditionality_witness(&slices, &cfg.witness_thresholds())?;
        report.add_witness(&witness);
    }
    if report.entries.len() == 1 {
        return Err(Error::InvalidInput("nothing to analyze: give --scans, --table, --state, --mixture or --slices".into()));
    }
    emit(&args.common, "report.csv", &io::report_csv(&report))?;
    let text = io::report_text(&report);
    emit(&args.common, "report.txt", &text)?;
    print!("{text}");
    Ok(())
}
