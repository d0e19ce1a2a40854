//! Transport observables evaluated on steady states: directional
//! transmission, isolation, and second-order photon correlations.
//!
//! Transmission uses `T = gamma_c^2 / (4 eps^2) <a^dag a>`. The
//! input-output normalization `|a_in|^2 = 2 eps^2 / gamma_c` fixes the
//! `eps^2` in the denominator; this is what makes the linear path peak at
//! exactly T = 1 on resonance. (A variant with a bare `eps` in the
//! denominator circulates, but it is dimensionally inconsistent with that
//! same normalization and does not reproduce the unit resonance peak.)

use crate::error::{Error, Result};
use crate::liouvillian::{
    converge_cutoffs, evolve_on_grid, steady_state_detailed, ConvergencePolicy,
    ConvergenceReport, DensityMatrix, EvolveOptions, Superoperator,
};
use crate::model::{Layout, OpticalMode, ProbePort, System, SystemParams};

/// Transport direction: `OneToTwo` is the port-1 -> port-2 path carried by
/// the pumped mode `a_L`; `TwoToOne` is the reverse path carried by `a_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    OneToTwo,
    TwoToOne,
}

impl Direction {
    pub fn mode(self) -> OpticalMode {
        match self {
            Direction::OneToTwo => OpticalMode::Left,
            Direction::TwoToOne => OpticalMode::Right,
        }
    }
}

/// All scalar transport observables at one operating point.
#[derive(Debug, Clone, Copy)]
pub struct TransportResult {
    pub t21: f64,
    pub t12: f64,
    /// `10 log10(T21 / T12)`; +inf/-inf when exactly one side vanishes.
    pub isolation_db: f64,
    pub g2_21_zero: f64,
    pub g2_12_zero: f64,
    pub n_l: f64,
    pub n_r: f64,
}

impl TransportResult {
    /// Non-negativity of every transmission/occupation/correlation, and a
    /// finite isolation whenever both transmissions are positive.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("T21", self.t21),
            ("T12", self.t12),
            ("g2_21(0)", self.g2_21_zero),
            ("g2_12(0)", self.g2_12_zero),
            ("n_L", self.n_l),
            ("n_R", self.n_r),
        ];
        for (name, v) in named {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        if self.t21 > 0.0 && self.t12 > 0.0 && !self.isolation_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "isolation {} not finite despite positive transmissions",
                self.isolation_db
            )));
        }
        Ok(())
    }
}

fn check_direction(sys: &System, direction: Direction) -> Result<()> {
    let ok = matches!(
        (sys.layout, direction),
        (Layout::PortOneFactorized, Direction::OneToTwo)
            | (Layout::PortTwoFactorized, Direction::TwoToOne)
            | (Layout::FullThreeMode { probe: ProbePort::One }, Direction::OneToTwo)
            | (Layout::FullThreeMode { probe: ProbePort::Two }, Direction::TwoToOne)
    );
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "steady state probed on layout {:?} does not match direction {:?}",
            sys.layout, direction
        )))
    }
}

/// Transmission coefficient `gamma_c^2/(4 eps^2) <a^dag a>` for the probe
/// direction the steady state was solved with.
pub fn transmission(sys: &System, rho: &DensityMatrix, direction: Direction) -> Result<f64> {
    if sys.params.probe_amplitude == 0.0 {
        return Err(Error::UndefinedTransmission);
    }
    check_direction(sys, direction)?;
    let a = sys.optical_annihilation(direction.mode())?;
    let n = rho.expectation(&a.adjoint().try_mul(&a)?)?.re;
    let gc = sys.params.optical_damping;
    let eps = sys.params.probe_amplitude;
    Ok(gc * gc / (4.0 * eps * eps) * n)
}

/// Isolation `10 log10(t21 / t12)` in dB, signed toward the 1 -> 2
/// direction. Exactly one vanishing transmission yields the infinite
/// sentinel of the matching sign; two vanishing transmissions yield NaN.
pub fn isolation(t21: f64, t12: f64) -> f64 {
    if t12 == 0.0 {
        return if t21 == 0.0 { f64::NAN } else { f64::INFINITY };
    }
    if t21 == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (t21 / t12).log10()
}

/// Equal-time second-order correlation `<a^dag a^dag a a> / <a^dag a>^2`.
pub fn g2_zero(sys: &System, rho: &DensityMatrix, mode: OpticalMode) -> Result<f64> {
    let a = sys.optical_annihilation(mode)?;
    let n = rho.expectation(&a.adjoint().try_mul(&a)?)?.re;
    if n <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let a2 = a.try_mul(&a)?;
    let num = rho.expectation(&a2.adjoint().try_mul(&a2)?)?.re;
    Ok(num / (n * n))
}

/// Delayed second-order correlation `g2(tau)` over an ascending `taus` grid
/// (units of 1/gamma_c), from one forward propagation of the conditioned
/// state `a rho_ss a^dag` under the quantum regression theorem.
pub fn g2_tau(
    sys: &System,
    l: &Superoperator,
    rho_ss: &DensityMatrix,
    mode: OpticalMode,
    taus: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<f64>> {
    let a = sys.optical_annihilation(mode)?;
    let n_op = a.adjoint().try_mul(&a)?;
    let nbar = rho_ss.expectation(&n_op)?.re;
    if nbar <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let conditioned = rho_ss.conditioned(&a)?;
    let mut out = vec![f64::NAN; taus.len()];
    evolve_on_grid(l, &conditioned, taus, opts, |idx, y| {
        out[idx] = n_op.expectation(y).re / (nbar * nbar);
    })?;
    Ok(out)
}

/// Transport observables bundled with their solve diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TransportEvaluation {
    pub result: TransportResult,
    /// Relative steady-state residual of the port-1 solve.
    pub residual_rel_21: f64,
    /// Relative steady-state residual of the port-2 solve.
    pub residual_rel_12: f64,
}

/// Minimum photon levels used for the single-mode linear-path solve inside
/// [`evaluate_transport`]. That solve is 64x64 at 8 levels and costs
/// nothing, while the coherent-path correlations need the headroom to sit
/// at their asymptote to better than 1e-6 (at 5 levels the truncated
/// coherent state reads g2 = 1 - 1.2e-5 on resonance).
pub const LINEAR_PATH_MIN_CUTOFF: usize = 8;

/// Solve both probe directions at the given operating point and evaluate
/// the full transport set (two factorized steady-state solves). The
/// nonlinear port-1 space runs at the declared cutoffs; the linear port-2
/// space is padded to [`LINEAR_PATH_MIN_CUTOFF`] levels.
pub fn evaluate_transport(params: &SystemParams) -> Result<TransportEvaluation> {
    let sys1 = System::port1(params)?;
    let l1 = crate::liouvillian::build_liouvillian(&sys1.hamiltonian, &sys1.channels)?;
    let sol1 = steady_state_detailed(&l1)?;
    let t21 = transmission(&sys1, &sol1.rho, Direction::OneToTwo)?;
    let g2_21 = g2_zero(&sys1, &sol1.rho, OpticalMode::Left)?;
    let a_l = sys1.optical_annihilation(OpticalMode::Left)?;
    let n_l = sol1.rho.expectation(&a_l.adjoint().try_mul(&a_l)?)?.re;

    let mut params2 = params.clone();
    params2.cutoff_photon = params.cutoff_photon.max(LINEAR_PATH_MIN_CUTOFF);
    let sys2 = System::port2(&params2)?;
    let l2 = crate::liouvillian::build_liouvillian(&sys2.hamiltonian, &sys2.channels)?;
    let sol2 = steady_state_detailed(&l2)?;
    let t12 = transmission(&sys2, &sol2.rho, Direction::TwoToOne)?;
    let g2_12 = g2_zero(&sys2, &sol2.rho, OpticalMode::Right)?;
    let a_r = sys2.optical_annihilation(OpticalMode::Right)?;
    let n_r = sol2.rho.expectation(&a_r.adjoint().try_mul(&a_r)?)?.re;

    let result = TransportResult {
        t21,
        t12,
        isolation_db: isolation(t21, t12),
        g2_21_zero: g2_21,
        g2_12_zero: g2_12,
        n_l,
        n_r,
    };
    result.validate()?;
    Ok(TransportEvaluation {
        result,
        residual_rel_21: sol1.relative_residual,
        residual_rel_12: sol2.relative_residual,
    })
}

/// Scalar observables the sweep engine and the convergence ladder know how
/// to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportObservable {
    T21,
    T12,
    IsolationDb,
    G2Of21,
    G2Of12,
    NL,
    NR,
}

impl TransportObservable {
    pub fn extract(self, r: &TransportResult) -> f64 {
        match self {
            TransportObservable::T21 => r.t21,
            TransportObservable::T12 => r.t12,
            TransportObservable::IsolationDb => r.isolation_db,
            TransportObservable::G2Of21 => r.g2_21_zero,
            TransportObservable::G2Of12 => r.g2_12_zero,
            TransportObservable::NL => r.n_l,
            TransportObservable::NR => r.n_r,
        }
    }

    /// Column name in emitted tables.
    pub fn column(self) -> &'static str {
        match self {
            TransportObservable::T21 => "T21",
            TransportObservable::T12 => "T12",
            TransportObservable::IsolationDb => "isolation_db",
            TransportObservable::G2Of21 => "g2_21_zero",
            TransportObservable::G2Of12 => "g2_12_zero",
            TransportObservable::NL => "n_L",
            TransportObservable::NR => "n_R",
        }
    }
}

/// Certify truncation cutoffs for the requested transport observables at
/// one operating point.
pub fn converge_transport_cutoffs(
    params: &SystemParams,
    observables: &[TransportObservable],
    policy: &ConvergencePolicy,
) -> Result<ConvergenceReport> {
    if observables.is_empty() {
        return Err(Error::InvalidParameter("empty observable set".into()));
    }
    converge_cutoffs(params, policy, |p| {
        let eval = evaluate_transport(p)?;
        Ok(observables.iter().map(|o| o.extract(&eval.result)).collect())
    })
}
