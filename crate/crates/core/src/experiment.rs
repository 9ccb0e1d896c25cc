//! End-to-end sweep: forward data, noise, reconstruction and error metrics for
//! every `(ε, seed)` cell, plus the CSV and JSON artifacts describing a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::apply_forward;
use crate::grid::SpatialGrid;
use crate::kernel::{find_zeros, KernelProfile, KernelZero};
use crate::metrics::{
    fit_rate_unsaturated, instability_sequence, l2_error, relative_error, ExperimentReport, GridDescriptor,
    InstabilityWitness, RateFit,
};
use crate::perturb::{perturb_data, perturb_source, NoiseModel, NoiseSpec, NoiseTarget};
use crate::regularize::{reconstruct, AlphaChoice, AlphaRule, Filter, RegularizationConfig, RuleTag};
use crate::source::{PsiKind, SpatialShape, SpatialSource, TemporalSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
    pub len: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { a: -10.0, b: 10.0, len: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub f: SpatialShape<f64>,
    pub psi: PsiKind<f64>,
    pub horizon: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            f: SpatialShape::Gaussian { amplitude: 1.0, width: 1.0 },
            psi: PsiKind::Constant { c: 1.0 },
            horizon: 1.0,
            sigma: 1.0,
            gamma: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub model: NoiseModel,
    pub eps: Vec<f64>,
    /// Explicit seeds; when empty, `seed_base .. seed_base + seed_count`.
    pub seeds: Vec<u64>,
    pub seed_base: u64,
    pub seed_count: u64,
    pub target: NoiseTarget,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            model: NoiseModel::Pointwise,
            eps: Vec::new(),
            seeds: Vec::new(),
            seed_base: 0,
            seed_count: 1,
            target: NoiseTarget::DataH,
        }
    }
}

impl NoiseConfig {
    pub fn resolved_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (self.seed_base..self.seed_base + self.seed_count).collect()
        } else {
            self.seeds.clone()
        }
    }
}

/// Regularization keys; σ, θ and γ come from the source section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegSection {
    pub filter: Filter,
    pub alpha: AlphaChoice,
    pub s: f64,
    pub beta: f64,
    pub q: f64,
}

impl Default for RegSection {
    fn default() -> Self {
        let d = RegularizationConfig::default();
        Self { filter: d.filter, alpha: d.alpha, s: d.s, beta: d.beta, q: d.q }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub emit_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, emit_fields: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub source: SourceConfig,
    pub noise: NoiseConfig,
    pub reg: RegSection,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Gaussian source `e^{-x²}`, ψ = 1, T = σ = 1 on `[-10, 10]` with 65536
    /// nodes, ε ∈ {1e-1, …, 1e-4}, ten seeds and the default rule α = ε^0.8.
    pub fn gaussian_benchmark() -> Self {
        Self {
            domain: DomainConfig { a: -10.0, b: 10.0, len: 65536 },
            noise: NoiseConfig { eps: vec![1e-1, 1e-2, 1e-3, 1e-4], seed_count: 10, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn grid(&self) -> Result<SpatialGrid<f64>> {
        SpatialGrid::new(self.domain.a, self.domain.b, self.domain.len)
            .map_err(|e| Error::Config(format!("domain: {e}")))
    }

    pub fn temporal_source(&self) -> Result<TemporalSource<f64>> {
        TemporalSource::new(self.source.horizon, self.source.psi.clone())
            .map_err(|e| Error::Config(format!("source.psi: {e}")))
    }

    pub fn spatial_source(&self) -> Result<SpatialSource<f64>> {
        let gamma = self.source.gamma;
        let built = match &self.source.f {
            SpatialShape::Gaussian { amplitude, width } => SpatialSource::gaussian(*amplitude, *width, gamma),
            SpatialShape::Sampled { values } => SpatialSource::sampled(values.clone(), gamma),
        };
        built.map_err(|e| Error::Config(format!("source.f: {e}")))
    }

    /// Full regularization configuration with σ, θ, γ taken from the source.
    pub fn regularization(&self) -> Result<RegularizationConfig> {
        let psi = self.temporal_source()?;
        let cfg = RegularizationConfig {
            filter: self.reg.filter,
            alpha: self.reg.alpha,
            s: self.reg.s,
            sigma: self.source.sigma,
            theta: psi.theta(),
            gamma: self.source.gamma,
            beta: self.reg.beta,
            q: self.reg.q,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.spatial_source()?;
        let reg = self.regularization()?;
        if self.noise.eps.is_empty() {
            return Err(Error::Config("noise.eps must list at least one noise level".into()));
        }
        if let Some(bad) = self.noise.eps.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Config(format!("noise.eps entries must be > 0, got {bad}")));
        }
        if self.resolved_seeds().is_empty() {
            return Err(Error::Config("noise.seed_count must be ≥ 1".into()));
        }
        if reg.alpha == AlphaChoice::Rule(RuleTag::Rule) {
            AlphaRule::new(&reg).map_err(|e| Error::Config(format!("reg: {e}")))?;
        }
        Ok(())
    }

    pub fn resolved_seeds(&self) -> Vec<u64> {
        self.noise.resolved_seeds()
    }

    /// α used for noise level ε.
    pub fn alpha_for(&self, epsilon: f64) -> Result<f64> {
        match self.reg.alpha {
            AlphaChoice::Fixed(a) => Ok(a),
            AlphaChoice::Rule(_) => Ok(AlphaRule::new(&self.regularization()?)?.alpha(epsilon)),
        }
    }

    /// Copy with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.noise.seeds = self.resolved_seeds();
        out
    }
}

/// Samples of the exact and reconstructed source for one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub epsilon: f64,
    pub seed: u64,
    pub f_rec: Vec<f64>,
}

/// Per-ε aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSummary {
    pub epsilon: f64,
    pub alpha: f64,
    pub median_e_abs: f64,
    pub median_e_rel: f64,
    pub seeds: usize,
}

/// Quantities derived from the configuration before any noise is drawn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub dx: f64,
    pub dz: f64,
    pub max_frequency: f64,
    pub psi_l1: f64,
    pub theta: f64,
    pub p_t: f64,
    pub max_abs_h: f64,
    pub h0: f64,
    pub c1: f64,
    pub f_norm: f64,
    /// Present when α follows the rule.
    pub rule: Option<AlphaRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub reports: Vec<ExperimentReport>,
    pub summary: Vec<RowSummary>,
    /// Slope of the median `E_abs` against ε; `None` with fewer than 3 rows.
    pub rate: Option<RateFit>,
    pub x: Vec<f64>,
    pub f_exact: Vec<f64>,
    pub h_true: Vec<f64>,
    /// Noisy data of the first ε and first seed.
    pub h_noisy: Vec<f64>,
    pub fields: Vec<FieldSnapshot>,
    pub profile: KernelProfile<f64>,
}

struct Cell {
    report: ExperimentReport,
    f_rec: Vec<f64>,
    h_noisy: Vec<f64>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let config = config.resolved();
    let grid = config.grid()?;
    let psi = config.temporal_source()?;
    let f_exact = config.spatial_source()?.sample(&grid)?;
    let reg = config.regularization()?;
    let sigma = config.source.sigma;
    let profile = KernelProfile::build(&psi, &grid, sigma)?;
    let h_true = apply_forward(&f_exact, &profile, &grid)?;
    let seeds = config.resolved_seeds();

    let cells: Vec<(usize, f64, u64)> = config
        .noise
        .eps
        .iter()
        .enumerate()
        .flat_map(|(row, &eps)| seeds.iter().map(move |&seed| (row, eps, seed)))
        .collect();

    let run_cell = |&(row, epsilon, seed): &(usize, f64, u64)| -> Result<Cell> {
        let spec = NoiseSpec::new(epsilon, seed, config.noise.target)?.with_row(row as u64);
        let h_noisy = perturb_data(&h_true, &spec, config.noise.model, grid.dx());
        let (psi_tilde, source_noise_l1) = perturb_source(&psi, &spec)?;
        let rebuilt;
        let profile_tilde = if spec.target.includes_source() {
            rebuilt = KernelProfile::build(&psi_tilde, &grid, sigma)?;
            &rebuilt
        } else {
            &profile
        };
        let alpha = config.alpha_for(epsilon)?;
        let rec = reconstruct(reg.filter, &h_noisy, profile_tilde, alpha, &grid)?;
        let report = ExperimentReport {
            epsilon,
            alpha,
            seed,
            e_abs: l2_error(&f_exact, &rec.field, grid.dx())?,
            e_rel: relative_error(&f_exact, &rec.field, grid.dx())?,
            filter: reg.filter,
            grid: GridDescriptor::from(&grid),
            mask_size: rec.mask_size,
            data_noise_l2: l2_error(&h_true, &h_noisy, grid.dx())?,
            source_noise_l1,
        };
        Ok(Cell { report, f_rec: rec.field, h_noisy })
    };
    let mut done: Vec<Cell> = cells.par_iter().map(run_cell).collect::<Result<_>>()?;

    let h_noisy = std::mem::take(&mut done[0].h_noisy);
    let mut fields = Vec::new();
    let mut reports = Vec::with_capacity(done.len());
    for (i, cell) in done.into_iter().enumerate() {
        // first seed of each row
        if i % seeds.len() == 0 && config.output.emit_fields {
            fields.push(FieldSnapshot { epsilon: cell.report.epsilon, seed: cell.report.seed, f_rec: cell.f_rec });
        }
        reports.push(cell.report);
    }

    let summary: Vec<RowSummary> = reports
        .chunks(seeds.len())
        .map(|rows| RowSummary {
            epsilon: rows[0].epsilon,
            alpha: rows[0].alpha,
            median_e_abs: median(rows.iter().map(|r| r.e_abs).collect()),
            median_e_rel: median(rows.iter().map(|r| r.e_rel).collect()),
            seeds: rows.len(),
        })
        .collect();
    let rate = (summary.len() >= 3)
        .then(|| {
            let eps: Vec<f64> = summary.iter().map(|r| r.epsilon).collect();
            let e_abs: Vec<f64> = summary.iter().map(|r| r.median_e_abs).collect();
            let e_rel: Vec<f64> = summary.iter().map(|r| r.median_e_rel).collect();
            fit_rate_unsaturated(&eps, &e_abs, &e_rel).ok()
        })
        .flatten();

    let derived = Derived {
        dx: grid.dx(),
        dz: grid.dz(),
        max_frequency: grid.max_frequency(),
        psi_l1: profile.psi_l1(),
        theta: profile.theta(),
        p_t: profile.p_t(),
        max_abs_h: profile.max_abs(),
        h0: profile.choose_h0(),
        c1: profile.c1_constant(),
        f_norm: crate::grid::spatial_l2_norm(&f_exact, grid.dx()),
        rule: match reg.alpha {
            AlphaChoice::Rule(_) => Some(AlphaRule::new(&reg)?),
            AlphaChoice::Fixed(_) => None,
        },
    };

    Ok(ExperimentOutput {
        config,
        derived,
        reports,
        summary,
        rate,
        x: grid.nodes(),
        f_exact,
        h_true,
        h_noisy,
        fields,
        profile,
    })
}

/// Median; the mean of the middle pair for an even count.
pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

pub const RESULTS_HEADER: [&str; 7] = ["epsilon", "alpha", "seed", "E_abs", "E_rel", "filter", "mask_size"];

pub fn write_results(reports: &[ExperimentReport], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in reports {
        w.write_record([
            num(r.epsilon),
            num(r.alpha),
            r.seed.to_string(),
            num(r.e_abs),
            num(r.e_rel),
            r.filter.name().to_string(),
            r.mask_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one block of `(epsilon, seed, x, f_exact, f_rec)` rows per ε.
pub fn write_fields(x: &[f64], f_exact: &[f64], fields: &[FieldSnapshot], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "seed", "x", "f_exact", "f_rec"])?;
    for snap in fields {
        for ((&xj, &fj), &rj) in x.iter().zip(f_exact).zip(&snap.f_rec) {
            w.write_record([num(snap.epsilon), snap.seed.to_string(), num(xj), num(fj), num(rj)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_data(x: &[f64], h_true: &[f64], h_noisy: &[f64], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "h_true", "h_noisy"])?;
    for ((&xj, &a), &b) in x.iter().zip(h_true).zip(h_noisy) {
        w.write_record([num(xj), num(a), num(b)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per distinct `|z|` with `ν ≤ nu_max`, ascending in ν; membership in
/// ω(α) and π(α) at the given α.
pub fn write_kernel(profile: &KernelProfile<f64>, alpha: f64, nu_max: f64, path: &Path) -> Result<()> {
    let grid = profile.grid();
    let mut rows: Vec<(f64, f64)> = (0..grid.len())
        .filter(|&i| grid.freq_index(i) >= 0)
        .map(|i| (profile.nu()[i], profile.values()[i]))
        .filter(|&(nu, _)| nu <= nu_max)
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = writer(path)?;
    w.write_record(["nu", "H", "in_omega", "in_pi"])?;
    for (nu, h) in rows {
        let inside = h.abs() > alpha;
        w.write_record([num(nu), num(h), u8::from(inside).to_string(), u8::from(!inside).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_zeros(zeros: &[KernelZero<f64>], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["nu", "confirmed"])?;
    for z in zeros {
        w.write_record([num(z.nu), z.confirmed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_witness(x: &[f64], witness: &InstabilityWitness<f64>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "f_n", "h_n"])?;
    for ((&xj, &f), &h) in x.iter().zip(&witness.f).zip(&witness.h) {
        w.write_record([num(xj), num(f), num(h)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a ExperimentConfig,
    derived: &'a Derived,
    summary: &'a [RowSummary],
    rate: &'a Option<RateFit>,
    cells: &'a [ExperimentReport],
}

pub fn report_json(out: &ExperimentOutput) -> Result<String> {
    let doc = ReportJson {
        config: &out.config,
        derived: &out.derived,
        summary: &out.summary,
        rate: &out.rate,
        cells: &out.reports,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Writes results.csv, kernel.csv, data.csv, report.json and, when enabled,
/// fields.csv into `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results(&out.reports, &dir.join("results.csv"))?;
    if out.config.output.emit_fields {
        write_fields(&out.x, &out.f_exact, &out.fields, &dir.join("fields.csv"))?;
    }
    write_data(&out.x, &out.h_true, &out.h_noisy, &dir.join("data.csv"))?;
    let alpha = out.summary.first().map_or(f64::INFINITY, |r| r.alpha);
    write_kernel(&out.profile, alpha, f64::INFINITY, &dir.join("kernel.csv"))?;
    let mut f = fs::File::create(dir.join("report.json"))?;
    f.write_all(report_json(out)?.as_bytes())?;
    Ok(())
}

/// Profile and zeros of `H_ψ` for the configured source.
pub struct KernelDump {
    pub profile: KernelProfile<f64>,
    pub alpha: f64,
    pub zeros: Vec<KernelZero<f64>>,
}

pub fn kernel_dump(config: &ExperimentConfig, nu_max: f64) -> Result<KernelDump> {
    if !(nu_max > 0.0) {
        return Err(Error::Config(format!("--nu-max must be > 0, got {nu_max}")));
    }
    let grid = config.grid()?;
    let psi = config.temporal_source()?;
    let profile = KernelProfile::build(&psi, &grid, config.source.sigma)?;
    let alpha = match config.noise.eps.first() {
        Some(&eps) => config.alpha_for(eps)?,
        None => match config.reg.alpha {
            AlphaChoice::Fixed(a) => a,
            AlphaChoice::Rule(_) => f64::NAN,
        },
    };
    let zeros = find_zeros(&psi, nu_max)?;
    Ok(KernelDump { profile, alpha, zeros })
}

pub fn instability_witness(config: &ExperimentConfig, n: u64) -> Result<InstabilityWitness<f64>> {
    let grid = config.grid()?;
    let psi = config.temporal_source()?;
    let profile = KernelProfile::build(&psi, &grid, config.source.sigma)?;
    instability_sequence(n, &profile, &grid)
}
