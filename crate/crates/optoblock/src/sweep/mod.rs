//! Sweep engine: solve a configured system over a detuning, thermal or
//! delay grid and emit machine-readable tables.
//!
//! Sweep points are embarrassingly parallel; rows are produced in input
//! order regardless of scheduling, and a failed point is recorded in its
//! row instead of aborting the run.

pub mod config;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::io::Write;

pub use config::{
    apply_overrides, canonical_config_string, config_from_key_values, parse_config,
    parse_key_values, preset, preset_names, BaseSpec, CouplingSource, DeltaMRule, OutputColumn,
    SweepConfig, SweepVariable,
};

use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian, steady_state_detailed, EvolveOptions};
use crate::model::{OpticalMode, System};
use crate::observables::{evaluate_transport, g2_tau, TransportObservable};

/// Run identification carried in the CSV comment header. Excluded from the
/// determinism contract: two runs of one config produce identical data rows
/// and identical `config_sha256`, but fresh timestamps.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_sha256: String,
    pub version: String,
    pub generated_utc: String,
}

impl Provenance {
    fn new(config_hash: String) -> Self {
        Self {
            config_sha256: config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// Hash of the canonical (sorted key = value) form of a configuration.
pub fn config_hash(kvs: &[(String, String)]) -> String {
    let canonical = canonical_config_string(kvs);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// One row of sweep output. `values` parallels the configured output
/// columns; failed rows carry NaN values and the failure message.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub values: Vec<f64>,
    pub cutoff_photon: usize,
    pub cutoff_phonon: usize,
    pub residual_21: Option<f64>,
    pub residual_12: Option<f64>,
    pub status: RowStatus,
}

/// A complete sweep: provenance, column names, and one row per grid point.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub variable: SweepVariable,
    pub output_columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.status != RowStatus::Ok).count()
    }

    /// Look up a row by sweep value (within `tol`).
    pub fn row_at(&self, value: f64, tol: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.sweep_value - value).abs() <= tol)
    }

    /// Column values by name for rows that solved.
    pub fn column(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let idx = self.output_columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .filter(|r| r.status == RowStatus::Ok)
                .map(|r| (r.sweep_value, r.values[idx]))
                .collect(),
        )
    }

    /// Write the table as CSV: `#`-prefixed provenance comments, one header
    /// row, then the data rows ('.' decimal, UTF-8).
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# config_sha256: {}", self.provenance.config_sha256)?;
        writeln!(w, "# version: {}", self.provenance.version)?;
        writeln!(w, "# generated_utc: {}", self.provenance.generated_utc)?;
        write!(w, "sweep_value")?;
        for c in &self.output_columns {
            write!(w, ",{c}")?;
        }
        writeln!(w, ",cutoff_photon,cutoff_phonon,residual_21,residual_12,status")?;
        for row in &self.rows {
            write!(w, "{}", fmt_f64(row.sweep_value))?;
            for v in &row.values {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            write!(w, ",{},{}", row.cutoff_photon, row.cutoff_phonon)?;
            match row.residual_21 {
                Some(r) => write!(w, ",{}", fmt_f64(r))?,
                None => write!(w, ",")?,
            }
            match row.residual_12 {
                Some(r) => write!(w, ",{}", fmt_f64(r))?,
                None => write!(w, ",")?,
            }
            match &row.status {
                RowStatus::Ok => writeln!(w, ",ok")?,
                RowStatus::Failed(msg) => writeln!(w, ",{}", csv_quote(msg))?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

/// Shortest round-trip form, scientific for extreme magnitudes; complex
/// diagnostics would serialize as `re+imi` / `re-imi` via [`fmt_complex`].
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e15) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `re+imi` / `re-imi` serialization for complex-valued diagnostics.
pub fn fmt_complex(v: num_complex::Complex64) -> String {
    if v.im >= 0.0 {
        format!("{}+{}i", fmt_f64(v.re), fmt_f64(v.im))
    } else {
        format!("{}-{}i", fmt_f64(v.re), fmt_f64(-v.im))
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Progress callback: (completed, total).
pub type ProgressFn<'a> = dyn Fn(usize, usize) + Sync + 'a;

/// Solve every grid point of a detuning or thermal sweep (one steady-state
/// solve per probe direction per point) and assemble the table in grid
/// order.
pub fn run_sweep(cfg: &SweepConfig, kvs: &[(String, String)]) -> Result<SweepResult> {
    run_sweep_with_progress(cfg, kvs, None)
}

pub fn run_sweep_with_progress(
    cfg: &SweepConfig,
    kvs: &[(String, String)],
    progress: Option<&ProgressFn>,
) -> Result<SweepResult> {
    if cfg.variable == SweepVariable::Tau {
        return run_g2_delay_with_progress(cfg, kvs, progress);
    }
    let scalar_outputs: Vec<TransportObservable> = cfg
        .outputs
        .iter()
        .map(|o| match o {
            OutputColumn::Scalar(obs) => Ok(*obs),
            other => Err(Error::Config(format!(
                "output {} not available in a scalar sweep",
                other.column()
            ))),
        })
        .collect::<Result<_>>()?;
    let grid = cfg.grid();
    let total = grid.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&v| {
            let row = match cfg.params_at(v).and_then(|p| evaluate_transport(&p)) {
                Ok(eval) => SweepRow {
                    sweep_value: v,
                    values: scalar_outputs.iter().map(|o| o.extract(&eval.result)).collect(),
                    cutoff_photon: cfg.base.cutoff_photon,
                    cutoff_phonon: cfg.base.cutoff_phonon,
                    residual_21: Some(eval.residual_rel_21),
                    residual_12: Some(eval.residual_rel_12),
                    status: RowStatus::Ok,
                },
                Err(e) => SweepRow {
                    sweep_value: v,
                    values: vec![f64::NAN; scalar_outputs.len()],
                    cutoff_photon: cfg.base.cutoff_photon,
                    cutoff_phonon: cfg.base.cutoff_phonon,
                    residual_21: None,
                    residual_12: None,
                    status: RowStatus::Failed(e.to_string()),
                },
            };
            if let Some(p) = progress {
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                p(k, total);
            }
            row
        })
        .collect();
    Ok(SweepResult {
        provenance: Provenance::new(config_hash(kvs)),
        variable: cfg.variable,
        output_columns: cfg.outputs.iter().map(|o| o.column().to_string()).collect(),
        rows,
    })
}

/// Delay sweep: one steady-state solve per requested path, then a single
/// forward propagation of the conditioned state over the whole tau grid.
pub fn run_g2_delay(cfg: &SweepConfig, kvs: &[(String, String)]) -> Result<SweepResult> {
    run_g2_delay_with_progress(cfg, kvs, None)
}

fn run_g2_delay_with_progress(
    cfg: &SweepConfig,
    kvs: &[(String, String)],
    progress: Option<&ProgressFn>,
) -> Result<SweepResult> {
    if cfg.variable != SweepVariable::Tau {
        return Err(Error::Config("delay runs need sweep.variable = tau".into()));
    }
    let params = cfg.params_at(0.0)?;
    let grid = cfg.grid();
    // Grid is declared in units of 2 pi / gamma_c.
    let taus: Vec<f64> = grid.iter().map(|v| v * 2.0 * std::f64::consts::PI).collect();
    let mut opts = EvolveOptions::default();
    if let Some(rtol) = cfg.evolve_rtol {
        opts.rtol = rtol;
    }

    let mut per_output: Vec<(Vec<f64>, f64)> = Vec::new();
    for (k, out) in cfg.outputs.iter().enumerate() {
        let (sys, mode) = match out {
            OutputColumn::G2Tau21 => (System::port1(&params)?, OpticalMode::Left),
            OutputColumn::G2Tau12 => (System::port2(&params)?, OpticalMode::Right),
            OutputColumn::Scalar(o) => {
                return Err(Error::Config(format!(
                    "output {} not available in a tau sweep",
                    o.column()
                )))
            }
        };
        let l = build_liouvillian(&sys.hamiltonian, &sys.channels)?;
        let sol = steady_state_detailed(&l)?;
        let g2 = g2_tau(&sys, &l, &sol.rho, mode, &taus, &opts)?;
        if let Some(p) = progress {
            p(k + 1, cfg.outputs.len());
        }
        per_output.push((g2, sol.relative_residual));
    }

    let rows: Vec<SweepRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &v)| SweepRow {
            sweep_value: v,
            values: per_output.iter().map(|(g2, _)| g2[i]).collect(),
            cutoff_photon: cfg.base.cutoff_photon,
            cutoff_phonon: cfg.base.cutoff_phonon,
            residual_21: cfg
                .outputs
                .iter()
                .position(|o| *o == OutputColumn::G2Tau21)
                .map(|k| per_output[k].1),
            residual_12: cfg
                .outputs
                .iter()
                .position(|o| *o == OutputColumn::G2Tau12)
                .map(|k| per_output[k].1),
            status: RowStatus::Ok,
        })
        .collect();
    Ok(SweepResult {
        provenance: Provenance::new(config_hash(kvs)),
        variable: cfg.variable,
        output_columns: cfg.outputs.iter().map(|o| o.column().to_string()).collect(),
        rows,
    })
}

/// A located extremum of a swept column.
#[derive(Debug, Clone, Copy)]
pub struct Extremum {
    pub sweep_value: f64,
    pub value: f64,
    pub is_maximum: bool,
}

/// Strict interior extrema of `(x, y)` data.
pub fn find_extrema(points: &[(f64, f64)]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..points.len().saturating_sub(1) {
        let (x, y) = points[i];
        let prev = points[i - 1].1;
        let next = points[i + 1].1;
        if y > prev && y > next {
            out.push(Extremum { sweep_value: x, value: y, is_maximum: true });
        } else if y < prev && y < next {
            out.push(Extremum { sweep_value: x, value: y, is_maximum: false });
        }
    }
    out
}

/// One line of the resonance-prediction report.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub extremum: Extremum,
    /// Nearest predicted detuning, in units of G.
    pub predicted: f64,
    /// |detected - predicted| in units of G.
    pub deviation: f64,
}

/// Dressed-ladder predictions next to sweep-detected extrema.
#[derive(Debug, Clone)]
pub struct PredictionReport {
    pub predicted_detunings: Vec<f64>,
    pub rows: Vec<PredictionRow>,
    pub sweep: SweepResult,
}

impl PredictionReport {
    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("predicted detunings (units of G): ");
        s.push_str(
            &self
                .predicted_detunings
                .iter()
                .map(|v| format!("{v:+.6}"))
                .collect::<Vec<_>>()
                .join(", "),
        );
        s.push('\n');
        s.push_str("kind      Delta/G      T21           nearest     deviation\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}   {:+9.4}   {:11.5e}   {:+9.4}   {:9.2e}\n",
                if r.extremum.is_maximum { "maximum" } else { "minimum" },
                r.extremum.sweep_value,
                r.extremum.value,
                r.predicted,
                r.deviation
            ));
        }
        s
    }
}

/// Run (or reuse) a T21 detuning sweep and line its extrema up against the
/// dressed-ladder prediction set.
pub fn predict_resonances(cfg: &SweepConfig, kvs: &[(String, String)]) -> Result<PredictionReport> {
    if cfg.variable != SweepVariable::Delta {
        return Err(Error::Config("resonance prediction needs a Delta sweep".into()));
    }
    let predicted = crate::dressed::predicted_detuning_set(
        cfg.max_pair,
        cfg.base.cutoff_photon,
        cfg.base.cutoff_phonon,
    )?;
    // The detection sweep needs T21 regardless of the configured outputs.
    let mut detect_cfg = cfg.clone();
    if !detect_cfg.outputs.contains(&OutputColumn::Scalar(TransportObservable::T21)) {
        detect_cfg.outputs.push(OutputColumn::Scalar(TransportObservable::T21));
    }
    let sweep = run_sweep(&detect_cfg, kvs)?;
    let t21 = sweep
        .column("T21")
        .ok_or_else(|| Error::Config("sweep produced no T21 column".into()))?;
    let rows = find_extrema(&t21)
        .into_iter()
        .map(|e| {
            let (predicted_at, deviation) = predicted
                .iter()
                .map(|&p| (p, (p - e.sweep_value).abs()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .expect("prediction set is never empty");
            PredictionRow { extremum: e, predicted: predicted_at, deviation }
        })
        .collect();
    Ok(PredictionReport { predicted_detunings: predicted, rows, sweep })
}
