//! Physical parameters of the effective model, the bare-to-effective
//! parameter maps, and the builders for the Hamiltonian and collapse
//! channels.
//!
//! All rates and detunings are in units of the optical damping rate
//! `gamma_c` unless a function says otherwise. The effective Hamiltonian is
//!
//! ```text
//! H = Delta n_L + Delta n_R + Delta_m n_b
//!     + G (a_L^dag b^2 + a_L b^dag^2) + eps (a_probe^dag + a_probe)
//! ```
//!
//! with the pair-exchange coupling G made real and non-negative by absorbing
//! the pump phase into `a_L`. Since nothing couples `a_R` to `(a_L, b)`, the
//! default solvers work on factorized layouts: port-1 probing on the
//! two-mode space `a_L (x) b`, port-2 probing on the single-mode `a_R`
//! space. The full three-mode layout is retained for cross-validation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{annihilation, embed, number, HilbertSpec, Operator};

/// Reduced Planck constant (J s).
const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
const BOLTZMANN: f64 = 1.380_649e-23;

/// Parameters of the bare two-resonator model, used to derive the effective
/// ones. All rates in units of `optical_damping` unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationParams {
    /// Bare optical resonance frequency omega_0.
    pub optical_freq: f64,
    /// Inter-resonator tunneling amplitude J (nonzero).
    pub tunneling: f64,
    /// Linear optomechanical coupling g_0.
    pub linear_coupling: f64,
    /// Mechanical frequency omega_m.
    pub mech_freq: f64,
    /// Pump amplitude Omega.
    pub pump_amplitude: f64,
    /// Pump detuning Delta_a = omega_a - omega_d.
    pub pump_detuning: f64,
    /// Optical damping rate gamma_c (the reference unit).
    pub optical_damping: f64,
    /// Dimensionless displacement range probed in eigen-sweeps.
    pub q_probe_range: f64,
}

/// Regime-validity flags for the quasi-static / expansion / strong-pump
/// approximations behind the effective model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidityFlags {
    /// |J| large against the mechanical frequency.
    pub quasi_static_ok: bool,
    /// |J| large against the largest linear shift g_0 |q|.
    pub expansion_ok: bool,
    /// Pump amplitude large against the optical damping.
    pub strong_pump_ok: bool,
}

impl DerivationParams {
    pub fn validate(&self) -> Result<()> {
        if self.tunneling == 0.0 {
            return Err(Error::DegenerateTunneling);
        }
        if self.optical_damping <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "optical damping must be positive, got {}",
                self.optical_damping
            )));
        }
        if self.q_probe_range < 0.0 {
            return Err(Error::InvalidParameter("q_probe_range must be >= 0".into()));
        }
        Ok(())
    }

    /// Validity flags at the default 10x separation threshold.
    pub fn validity(&self) -> ValidityFlags {
        self.validity_with_ratio(10.0)
    }

    /// Validity flags with a caller-chosen separation threshold.
    pub fn validity_with_ratio(&self, ratio: f64) -> ValidityFlags {
        let j = self.tunneling.abs();
        ValidityFlags {
            quasi_static_ok: j >= ratio * self.mech_freq.abs(),
            expansion_ok: j >= ratio * (self.linear_coupling * self.q_probe_range).abs(),
            strong_pump_ok: self.pump_amplitude >= ratio * self.optical_damping,
        }
    }

    /// Map the bare model onto effective parameters for a probe at offset
    /// `probe_offset` (the probe-pump detuning delta = omega_p - omega_d)
    /// with amplitude `probe_amplitude`.
    pub fn to_system_params(
        &self,
        probe_offset: f64,
        probe_amplitude: f64,
        cutoff_photon: usize,
        cutoff_phonon: usize,
        mech_damping: f64,
        thermal_phonons: f64,
    ) -> Result<SystemParams> {
        self.validate()?;
        let g = quadratic_coupling(self.linear_coupling, self.tunneling)?;
        let alpha = pump_displacement(self.pump_amplitude, self.optical_damping, self.pump_detuning)?;
        let coupling = effective_coupling(g, alpha);
        let mech_eff = effective_mech_freq(self.mech_freq, g, alpha);
        let params = SystemParams {
            detuning: self.pump_detuning - probe_offset,
            mech_detuning: mech_eff - probe_offset / 2.0,
            coupling,
            probe_amplitude,
            optical_damping: self.optical_damping,
            mech_damping,
            thermal_phonons,
            cutoff_photon,
            cutoff_phonon,
        };
        params.validate()?;
        Ok(params)
    }
}

/// All rates and detunings of the effective model, in units of
/// `optical_damping` (gamma_c).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Probe-pump detuning Delta = Delta_a - delta.
    pub detuning: f64,
    /// Mechanical detuning Delta_m.
    pub mech_detuning: f64,
    /// Effective pair-exchange coupling G (real, >= 0 by phase convention).
    pub coupling: f64,
    /// Probe amplitude eps.
    pub probe_amplitude: f64,
    /// Optical damping gamma_c.
    pub optical_damping: f64,
    /// Mechanical damping gamma_m.
    pub mech_damping: f64,
    /// Mean thermal phonon number n_th of the mechanical bath.
    pub thermal_phonons: f64,
    /// Photon-mode truncation dimension.
    pub cutoff_photon: usize,
    /// Phonon-mode truncation dimension.
    pub cutoff_phonon: usize,
}

impl SystemParams {
    /// The studied parameter set: G = 3, eps = 1/10, gamma_m = 1/100,
    /// n_th = 0 (all in units of gamma_c), with the mechanical detuning
    /// locked to Delta/2 and default cutoffs (5, 12).
    pub fn blockade_base(detuning: f64) -> Self {
        Self::with_half_mech_detuning(detuning, 3.0, 0.1, 0.01, 0.0, 5, 12)
    }

    /// Convenience constructor enforcing the `Delta_m = Delta/2` resonance
    /// constraint used by every detuning sweep.
    pub fn with_half_mech_detuning(
        detuning: f64,
        coupling: f64,
        probe_amplitude: f64,
        mech_damping: f64,
        thermal_phonons: f64,
        cutoff_photon: usize,
        cutoff_phonon: usize,
    ) -> Self {
        Self {
            detuning,
            mech_detuning: detuning / 2.0,
            coupling,
            probe_amplitude,
            optical_damping: 1.0,
            mech_damping,
            thermal_phonons,
            cutoff_photon,
            cutoff_phonon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.optical_damping <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "optical damping must be positive, got {}",
                self.optical_damping
            )));
        }
        if self.mech_damping < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mechanical damping must be >= 0, got {}",
                self.mech_damping
            )));
        }
        if self.thermal_phonons < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "thermal phonon number must be >= 0, got {}",
                self.thermal_phonons
            )));
        }
        if self.probe_amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "probe amplitude must be >= 0, got {}",
                self.probe_amplitude
            )));
        }
        if self.coupling < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling must be >= 0 by phase convention, got {}",
                self.coupling
            )));
        }
        if self.cutoff_photon < 2 {
            return Err(Error::InvalidDimension { dim: self.cutoff_photon });
        }
        if self.cutoff_phonon < 2 {
            return Err(Error::InvalidDimension { dim: self.cutoff_phonon });
        }
        if !self.detuning.is_finite() || !self.mech_detuning.is_finite() {
            return Err(Error::InvalidParameter("detunings must be finite".into()));
        }
        Ok(())
    }

    /// Probe regime flag: eps <= gamma_c / 4. Solvers warn outside it.
    pub fn is_weak_probe(&self) -> bool {
        self.probe_amplitude <= self.optical_damping / 4.0
    }
}

/// Exact normal-mode frequencies at displacement `q`:
/// `omega_pm(q) = omega_0 +- sqrt(J^2 + (g_0 q)^2)`.
pub fn normal_mode_frequencies(params: &DerivationParams, q: f64) -> (f64, f64) {
    let split = (params.tunneling.powi(2) + (params.linear_coupling * q).powi(2)).sqrt();
    (params.optical_freq + split, params.optical_freq - split)
}

/// Exact vs quadratic-in-`q` frequencies and their absolute differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModeExpansion {
    pub exact: (f64, f64),
    pub quadratic: (f64, f64),
    pub abs_error: (f64, f64),
}

/// Quadratic (Taylor) approximation `omega_pm +- g q^2` against the exact
/// dispersion, with `g = g_0^2 / (2J)`.
pub fn normal_mode_expansion(params: &DerivationParams, q: f64) -> Result<NormalModeExpansion> {
    let exact = normal_mode_frequencies(params, q);
    let g = quadratic_coupling(params.linear_coupling, params.tunneling)?;
    let plus = params.optical_freq + params.tunneling + g * q * q;
    let minus = params.optical_freq - params.tunneling - g * q * q;
    Ok(NormalModeExpansion {
        exact,
        quadratic: (plus, minus),
        abs_error: ((exact.0 - plus).abs(), (exact.1 - minus).abs()),
    })
}

/// Quadratic optomechanical coupling `g = g_0^2 / (2J)`.
pub fn quadratic_coupling(linear_coupling: f64, tunneling: f64) -> Result<f64> {
    if tunneling == 0.0 {
        return Err(Error::DegenerateTunneling);
    }
    Ok(linear_coupling * linear_coupling / (2.0 * tunneling))
}

/// Steady pump displacement of the driven mode:
/// `alpha_L = -2i Omega / (gamma_c + 2i Delta_a)`.
///
/// The undriven mode and the mechanical steady values vanish
/// (`alpha_R = q_s = p_s = 0`), so only `alpha_L` is returned.
pub fn pump_displacement(
    pump_amplitude: f64,
    optical_damping: f64,
    pump_detuning: f64,
) -> Result<Complex64> {
    if optical_damping == 0.0 && pump_detuning == 0.0 {
        return Err(Error::SingularPump);
    }
    let num = Complex64::new(0.0, -2.0 * pump_amplitude);
    let den = Complex64::new(optical_damping, 2.0 * pump_detuning);
    Ok(num / den)
}

/// Effective pair-exchange coupling `G = g alpha_L / 2`, rotated real and
/// non-negative (the pump phase is absorbed into the optical mode and is
/// unobservable in every reported quantity).
pub fn effective_coupling(quad_coupling: f64, pump_disp: Complex64) -> f64 {
    (quad_coupling * pump_disp).norm() / 2.0
}

/// Effective mechanical frequency `omega_m' = omega_m + g |alpha_L|^2`.
pub fn effective_mech_freq(mech_freq: f64, quad_coupling: f64, pump_disp: Complex64) -> f64 {
    mech_freq + quad_coupling * pump_disp.norm_sqr()
}

/// Bose-Einstein occupation `n_th = 1 / (exp(hbar omega / k_B T) - 1)` for a
/// mechanical frequency in rad/s and a bath temperature in kelvin.
pub fn thermal_occupation(mech_freq_rad_s: f64, temperature_k: f64) -> Result<f64> {
    if mech_freq_rad_s <= 0.0 {
        return Err(Error::InvalidFrequency { omega: mech_freq_rad_s });
    }
    if temperature_k < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be >= 0, got {temperature_k}"
        )));
    }
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * mech_freq_rad_s / (BOLTZMANN * temperature_k);
    Ok(1.0 / x.exp_m1())
}

/// Which port the weak probe enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbePort {
    One,
    Two,
}

/// Which optical mode an observable refers to: `Left` carries port-1 -> 2
/// transport, `Right` carries port-2 -> 1 transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpticalMode {
    Left,
    Right,
}

/// Simulation layout of the Hilbert space.
///
/// The effective Hamiltonian has no term coupling `a_R` to `(a_L, b)`, so
/// the factorized layouts are exact, not approximate; the full three-mode
/// layout exists to validate that claim numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `a_L (x) b`, for port-1 probing.
    PortOneFactorized,
    /// `a_R` alone, for port-2 probing.
    PortTwoFactorized,
    /// `a_L (x) a_R (x) b`.
    FullThreeMode { probe: ProbePort },
}

/// A collapse operator with its rate (units of gamma_c).
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub op: Operator,
    pub rate: f64,
}

fn check_phonon_cutoff(params: &SystemParams) -> Result<()> {
    // b^2 acts trivially on the reachable space below 3 phonon levels.
    if params.cutoff_phonon < 3 {
        return Err(Error::CutoffTooSmall { cutoff: params.cutoff_phonon });
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Effective Hamiltonian on the full three-mode space
/// `a_L (x) a_R (x) b`, probed from the chosen port.
pub fn build_hamiltonian(params: &SystemParams, probe_port: ProbePort) -> Result<Operator> {
    params.validate()?;
    check_phonon_cutoff(params)?;
    let space = HilbertSpec::new(&[params.cutoff_photon, params.cutoff_photon, params.cutoff_phonon])?;
    let a_l = embed(&annihilation(params.cutoff_photon)?, &space, 0)?;
    let a_r = embed(&annihilation(params.cutoff_photon)?, &space, 1)?;
    let b = embed(&annihilation(params.cutoff_phonon)?, &space, 2)?;
    let n_l = embed(&number(params.cutoff_photon)?, &space, 0)?;
    let n_r = embed(&number(params.cutoff_photon)?, &space, 1)?;
    let n_b = embed(&number(params.cutoff_phonon)?, &space, 2)?;
    let probe_mode = match probe_port {
        ProbePort::One => &a_l,
        ProbePort::Two => &a_r,
    };
    let pair = a_l.adjoint().try_mul(&b.try_mul(&b)?)?;
    Operator::linear_combination(&[
        (real(params.detuning), &n_l),
        (real(params.detuning), &n_r),
        (real(params.mech_detuning), &n_b),
        (real(params.coupling), &pair),
        (real(params.coupling), &pair.adjoint()),
        (real(params.probe_amplitude), probe_mode),
        (real(params.probe_amplitude), &probe_mode.adjoint()),
    ])
}

/// Effective Hamiltonian on the factorized port-1 space `a_L (x) b`.
pub fn build_hamiltonian_port1(params: &SystemParams) -> Result<Operator> {
    params.validate()?;
    check_phonon_cutoff(params)?;
    let space = HilbertSpec::new(&[params.cutoff_photon, params.cutoff_phonon])?;
    let a_l = embed(&annihilation(params.cutoff_photon)?, &space, 0)?;
    let b = embed(&annihilation(params.cutoff_phonon)?, &space, 1)?;
    let n_l = embed(&number(params.cutoff_photon)?, &space, 0)?;
    let n_b = embed(&number(params.cutoff_phonon)?, &space, 1)?;
    let pair = a_l.adjoint().try_mul(&b.try_mul(&b)?)?;
    Operator::linear_combination(&[
        (real(params.detuning), &n_l),
        (real(params.mech_detuning), &n_b),
        (real(params.coupling), &pair),
        (real(params.coupling), &pair.adjoint()),
        (real(params.probe_amplitude), &a_l),
        (real(params.probe_amplitude), &a_l.adjoint()),
    ])
}

/// Effective Hamiltonian on the factorized port-2 space (`a_R` alone): a
/// driven, damped linear cavity.
pub fn build_hamiltonian_port2(params: &SystemParams) -> Result<Operator> {
    params.validate()?;
    let a_r = annihilation(params.cutoff_photon)?;
    let n_r = number(params.cutoff_photon)?;
    Operator::linear_combination(&[
        (real(params.detuning), &n_r),
        (real(params.probe_amplitude), &a_r),
        (real(params.probe_amplitude), &a_r.adjoint()),
    ])
}

fn phonon_channels(b: &Operator, params: &SystemParams) -> Vec<CollapseChannel> {
    let mut chans = vec![CollapseChannel {
        op: b.clone(),
        rate: params.mech_damping * (params.thermal_phonons + 1.0),
    }];
    if params.thermal_phonons > 0.0 {
        chans.push(CollapseChannel {
            op: b.adjoint(),
            rate: params.mech_damping * params.thermal_phonons,
        });
    }
    chans
}

/// Collapse channels on the full three-mode space: photon loss on both
/// optical modes at `gamma_c`, phonon decay at `gamma_m (n_th + 1)` and, for
/// a thermal bath, phonon pumping at `gamma_m n_th` (omitted at n_th = 0).
pub fn collapse_operators(params: &SystemParams) -> Result<Vec<CollapseChannel>> {
    params.validate()?;
    let space = HilbertSpec::new(&[params.cutoff_photon, params.cutoff_photon, params.cutoff_phonon])?;
    let a_l = embed(&annihilation(params.cutoff_photon)?, &space, 0)?;
    let a_r = embed(&annihilation(params.cutoff_photon)?, &space, 1)?;
    let b = embed(&annihilation(params.cutoff_phonon)?, &space, 2)?;
    let mut chans = vec![
        CollapseChannel { op: a_l, rate: params.optical_damping },
        CollapseChannel { op: a_r, rate: params.optical_damping },
    ];
    chans.extend(phonon_channels(&b, params));
    Ok(chans)
}

/// Collapse channels on the factorized port-1 space.
pub fn collapse_operators_port1(params: &SystemParams) -> Result<Vec<CollapseChannel>> {
    params.validate()?;
    let space = HilbertSpec::new(&[params.cutoff_photon, params.cutoff_phonon])?;
    let a_l = embed(&annihilation(params.cutoff_photon)?, &space, 0)?;
    let b = embed(&annihilation(params.cutoff_phonon)?, &space, 1)?;
    let mut chans = vec![CollapseChannel { op: a_l, rate: params.optical_damping }];
    chans.extend(phonon_channels(&b, params));
    Ok(chans)
}

/// Collapse channels on the factorized port-2 space.
pub fn collapse_operators_port2(params: &SystemParams) -> Result<Vec<CollapseChannel>> {
    params.validate()?;
    Ok(vec![CollapseChannel { op: annihilation(params.cutoff_photon)?, rate: params.optical_damping }])
}

/// Pre-rotating-wave Hamiltonian on the port-1 space, for error-budget
/// studies of the pair-exchange approximation. Includes the terms the
/// effective model drops: the number-conditioned `(b + b^dag)^2` shift and
/// the counter-rotating pieces of the pump-enhanced coupling. Stated in the
/// pump frame (detunings `Delta_a`, bare `omega_m`), with no probe drive.
pub fn build_hamiltonian_pre_rwa(
    pump_detuning: f64,
    mech_freq: f64,
    quad_coupling: f64,
    pump_disp: Complex64,
    cutoff_photon: usize,
    cutoff_phonon: usize,
) -> Result<Operator> {
    if cutoff_phonon < 3 {
        return Err(Error::CutoffTooSmall { cutoff: cutoff_phonon });
    }
    let space = HilbertSpec::new(&[cutoff_photon, cutoff_phonon])?;
    let a_l = embed(&annihilation(cutoff_photon)?, &space, 0)?;
    let b = embed(&annihilation(cutoff_phonon)?, &space, 1)?;
    let n_l = embed(&number(cutoff_photon)?, &space, 0)?;
    let n_b = embed(&number(cutoff_phonon)?, &space, 1)?;
    // (b + b^dag)^2
    let bsum = b.try_add(&b.adjoint())?;
    let bsum_sq = bsum.try_mul(&bsum)?;
    let half_g = 0.5 * quad_coupling;
    // (g/2)(|alpha|^2 + n_L)(b + b^dag)^2
    let shift = n_l
        .try_add(&Operator::identity(space.clone()).scale(real(pump_disp.norm_sqr())))?
        .try_mul(&bsum_sq)?
        .scale(real(half_g));
    // (g/2)(alpha a_L^dag + alpha^* a_L)(b + b^dag)^2
    let drive_op = a_l
        .adjoint()
        .scale(pump_disp * half_g)
        .try_add(&a_l.scale(pump_disp.conj() * half_g))?
        .try_mul(&bsum_sq)?;
    let sym = drive_op.try_add(&drive_op.adjoint())?.scale(real(0.5));
    Operator::linear_combination(&[
        (real(pump_detuning), &n_l),
        (real(mech_freq), &n_b),
        (real(1.0), &shift),
        (real(1.0), &sym),
    ])
}

/// A fully assembled dissipative system: Hamiltonian plus collapse channels
/// on a declared layout.
#[derive(Debug, Clone)]
pub struct System {
    pub params: SystemParams,
    pub layout: Layout,
    pub space: HilbertSpec,
    pub hamiltonian: Operator,
    pub channels: Vec<CollapseChannel>,
}

impl System {
    /// Factorized port-1 system (`a_L (x) b`), for T21 / g2_21 observables.
    pub fn port1(params: &SystemParams) -> Result<Self> {
        if !params.is_weak_probe() {
            log::warn!(
                "probe amplitude {} exceeds gamma_c/4 = {}; outside the weak-probe regime",
                params.probe_amplitude,
                params.optical_damping / 4.0
            );
        }
        let hamiltonian = build_hamiltonian_port1(params)?;
        Ok(Self {
            params: params.clone(),
            layout: Layout::PortOneFactorized,
            space: hamiltonian.space().clone(),
            channels: collapse_operators_port1(params)?,
            hamiltonian,
        })
    }

    /// Factorized port-2 system (`a_R`), for T12 / g2_12 observables.
    pub fn port2(params: &SystemParams) -> Result<Self> {
        if !params.is_weak_probe() {
            log::warn!(
                "probe amplitude {} exceeds gamma_c/4 = {}; outside the weak-probe regime",
                params.probe_amplitude,
                params.optical_damping / 4.0
            );
        }
        let hamiltonian = build_hamiltonian_port2(params)?;
        Ok(Self {
            params: params.clone(),
            layout: Layout::PortTwoFactorized,
            space: hamiltonian.space().clone(),
            channels: collapse_operators_port2(params)?,
            hamiltonian,
        })
    }

    /// Full three-mode system, for cross-validating the factorization.
    pub fn full(params: &SystemParams, probe: ProbePort) -> Result<Self> {
        let hamiltonian = build_hamiltonian(params, probe)?;
        Ok(Self {
            params: params.clone(),
            layout: Layout::FullThreeMode { probe },
            space: hamiltonian.space().clone(),
            channels: collapse_operators(params)?,
            hamiltonian,
        })
    }

    /// Annihilation operator of the requested optical mode, embedded on this
    /// layout's space. Errors when the mode does not live on this layout.
    pub fn optical_annihilation(&self, mode: OpticalMode) -> Result<Operator> {
        let photon = annihilation(self.params.cutoff_photon)?;
        match (self.layout, mode) {
            (Layout::PortOneFactorized, OpticalMode::Left) => embed(&photon, &self.space, 0),
            (Layout::PortTwoFactorized, OpticalMode::Right) => {
                Ok(photon)
            }
            (Layout::FullThreeMode { .. }, OpticalMode::Left) => embed(&photon, &self.space, 0),
            (Layout::FullThreeMode { .. }, OpticalMode::Right) => embed(&photon, &self.space, 1),
            (layout, mode) => Err(Error::InvalidParameter(format!(
                "optical mode {mode:?} does not live on layout {layout:?}"
            ))),
        }
    }

    /// Phonon annihilation operator on this layout's space, when present.
    pub fn phonon_annihilation(&self) -> Result<Operator> {
        let b = annihilation(self.params.cutoff_phonon)?;
        match self.layout {
            Layout::PortOneFactorized => embed(&b, &self.space, 1),
            Layout::FullThreeMode { .. } => embed(&b, &self.space, 2),
            Layout::PortTwoFactorized => Err(Error::InvalidParameter(
                "the factorized port-2 layout carries no phonon mode".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Operator;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn derivation(tunneling: f64, linear_coupling: f64) -> DerivationParams {
        DerivationParams {
            optical_freq: 1.0e5,
            tunneling,
            linear_coupling,
            mech_freq: 20.0,
            pump_amplitude: 100.0,
            pump_detuning: 40.0,
            optical_damping: 1.0,
            q_probe_range: 1.0,
        }
    }

    #[test]
    fn normal_modes_at_zero_displacement() {
        let p = derivation(50.0, 1.0);
        let (plus, minus) = normal_mode_frequencies(&p, 0.0);
        assert_eq!(plus, p.optical_freq + 50.0);
        assert_eq!(minus, p.optical_freq - 50.0);
    }

    #[test]
    fn taylor_error_closed_form() {
        // At g0 q / J = 0.1 the exact-vs-quadratic gap is
        // J (sqrt(1.01) - 1 - 0.005) for either branch.
        let j = 50.0;
        let p = derivation(j, 1.0);
        let q = 0.1 * j; // g0 = 1
        let exp = normal_mode_expansion(&p, q).unwrap();
        let expected = (j * (1.01f64.sqrt() - 1.0 - 0.005)).abs();
        // The subtraction cancels at the optical-frequency scale, leaving
        // ~1e-11 of rounding on the 6.2e-4 gap.
        assert_abs_diff_eq!(exp.abs_error.0, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(exp.abs_error.1, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(expected / j, 1.2437e-5, epsilon = 1e-9);
    }

    #[test]
    fn dispersion_is_even_in_displacement() {
        let p = derivation(37.0, 2.5);
        for q in [0.0, 0.3, 1.7, 42.0] {
            assert_eq!(normal_mode_frequencies(&p, q), normal_mode_frequencies(&p, -q));
        }
    }

    #[test]
    fn quadratic_coupling_closed_form() {
        assert_abs_diff_eq!(quadratic_coupling(1.0, 50.0).unwrap(), 0.01, epsilon = 1e-16);
        assert_eq!(quadratic_coupling(0.0, 7.0).unwrap(), 0.0);
        assert_eq!(
            quadratic_coupling(1.0, -50.0).unwrap(),
            -quadratic_coupling(1.0, 50.0).unwrap()
        );
        assert!(matches!(quadratic_coupling(1.0, 0.0), Err(Error::DegenerateTunneling)));
    }

    #[test]
    fn pump_displacement_limits() {
        // Resonant pump: alpha = -2i Omega / gamma_c.
        let a = pump_displacement(5.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(a.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, -5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.norm(), 2.0 * 5.0 / 2.0, epsilon = 1e-15);
        // Lossless limit: alpha -> -Omega / Delta_a, purely real.
        let b = pump_displacement(5.0, 0.0, 10.0).unwrap();
        assert_abs_diff_eq!(b.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.im, 0.0, epsilon = 1e-15);
        assert!(matches!(pump_displacement(5.0, 0.0, 0.0), Err(Error::SingularPump)));
    }

    #[test]
    fn pump_displacement_magnitude() {
        // |alpha|^2 = 4 Omega^2 / (gamma_c^2 + 4 Delta_a^2), evaluated at
        // Omega = 10, Delta_a = 2 omega_m with omega_m = 20 (gamma_c units).
        let omega_m = 20.0;
        let a = pump_displacement(10.0, 1.0, 2.0 * omega_m).unwrap();
        assert_abs_diff_eq!(a.norm_sqr(), 400.0 / (1.0 + 4.0 * 1600.0), epsilon = 1e-12);
    }

    #[test]
    fn effective_maps() {
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(effective_coupling(0.3, zero), 0.0);
        assert_eq!(effective_mech_freq(20.0, 0.3, zero), 20.0);

        // The operating regime G = 3 gamma_c is reachable: choose the pump
        // so |alpha_L| = 600 at g = 0.01.
        let g = 0.01;
        let delta_a = 40.0;
        let omega = 600.0 * (1.0f64 + 4.0 * delta_a * delta_a).sqrt() / 2.0;
        let alpha = pump_displacement(omega, 1.0, delta_a).unwrap();
        assert_abs_diff_eq!(alpha.norm(), 600.0, epsilon = 1e-9);
        assert_abs_diff_eq!(effective_coupling(g, alpha), 3.0, epsilon = 1e-11);
        // The mechanical shift is non-negative for g >= 0.
        assert!(effective_mech_freq(20.0, g, alpha) - 20.0 >= 0.0);
        assert_abs_diff_eq!(
            effective_mech_freq(20.0, g, alpha) - 20.0,
            g * alpha.norm_sqr(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn parameter_maps_invert() {
        // Target an arbitrary (G, omega_m') pair, invert the maps by hand,
        // and confirm the forward composition reproduces it.
        let (g_target, mech_target) = (2.4, 55.0);
        let quad = 0.02;
        let delta_a = 35.0;
        let alpha_mag = 2.0 * g_target / quad;
        let pump = alpha_mag * (1.0f64 + 4.0 * delta_a * delta_a).sqrt() / 2.0;
        let mech_bare = mech_target - quad * alpha_mag * alpha_mag;
        let alpha = pump_displacement(pump, 1.0, delta_a).unwrap();
        assert_abs_diff_eq!(effective_coupling(quad, alpha), g_target, epsilon = 1e-9);
        assert_abs_diff_eq!(
            effective_mech_freq(mech_bare, quad, alpha),
            mech_target,
            epsilon = 1e-9
        );
    }

    #[test]
    fn derivation_to_system_params_respects_constraint() {
        // Pumping at Delta_a = 2 omega_m' makes Delta_m = Delta / 2 for every
        // probe offset.
        let mut p = derivation(5000.0, 10.0);
        p.mech_freq = 20.0;
        let g = quadratic_coupling(p.linear_coupling, p.tunneling).unwrap();
        // Solve Delta_a = 2 (omega_m + g |alpha(Delta_a)|^2) iteratively; a
        // couple of fixed-point rounds is plenty for the test.
        let mut delta_a = 2.0 * p.mech_freq;
        for _ in 0..60 {
            let alpha = pump_displacement(p.pump_amplitude, 1.0, delta_a).unwrap();
            delta_a = 2.0 * effective_mech_freq(p.mech_freq, g, alpha);
        }
        p.pump_detuning = delta_a;
        let sp = p.to_system_params(delta_a - 1.3, 0.1, 5, 12, 0.01, 0.0).unwrap();
        assert_abs_diff_eq!(sp.detuning, 1.3, epsilon = 1e-9);
        assert_abs_diff_eq!(sp.mech_detuning, sp.detuning / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn validity_flags_thresholds() {
        let p = derivation(300.0, 1.0); // mech_freq 20, pump 100, q range 1
        let v = p.validity();
        assert!(v.quasi_static_ok); // 300 >= 10 * 20
        assert!(v.expansion_ok); // 300 >= 10 * 1
        assert!(v.strong_pump_ok); // 100 >= 10 * 1
        let tight = p.validity_with_ratio(20.0);
        assert!(!tight.quasi_static_ok); // 300 < 20 * 20
    }

    #[test]
    fn thermal_occupation_limits() {
        assert_eq!(thermal_occupation(1.0e9, 0.0).unwrap(), 0.0);
        // hbar omega / k_B T = ln 2 gives exactly one phonon.
        let omega = 2.0e9 * std::f64::consts::PI;
        let t = HBAR * omega / (BOLTZMANN * std::f64::consts::LN_2);
        assert_abs_diff_eq!(thermal_occupation(omega, t).unwrap(), 1.0, epsilon = 1e-12);
        // Rayleigh-Jeans limit: n * (hbar omega / k_B T) -> 1.
        let t_hot = 100.0 * HBAR * omega / BOLTZMANN;
        let x = HBAR * omega / (BOLTZMANN * t_hot);
        let n = thermal_occupation(omega, t_hot).unwrap();
        assert!((n * x - 1.0).abs() < 0.01);
        assert!(matches!(
            thermal_occupation(-1.0, 1.0),
            Err(Error::InvalidFrequency { .. })
        ));
    }

    #[test]
    fn decoupled_hamiltonian_is_diagonal() {
        let mut params = SystemParams::blockade_base(1.7);
        params.coupling = 0.0;
        params.probe_amplitude = 0.0;
        params.cutoff_photon = 3;
        params.cutoff_phonon = 4;
        let h = build_hamiltonian(&params, ProbePort::One).unwrap();
        let space = h.space().clone();
        for idx in 0..space.dim() {
            let occ = space.occupations_of(idx);
            let expect = params.detuning * (occ[0] + occ[1]) as f64
                + params.mech_detuning * occ[2] as f64;
            let got = h.entries().get(idx, idx).copied().unwrap_or_default();
            assert_abs_diff_eq!(got.re, expect, epsilon = 1e-12);
        }
        // Diagonal: nothing off the diagonal.
        let diag_nnz = h
            .entries()
            .iter()
            .filter(|&(_, (i, j))| i != j)
            .count();
        assert_eq!(diag_nnz, 0);
    }

    #[test]
    fn pair_coupling_matrix_element() {
        // <1,0,0| H |0,0,2> = sqrt(2) G
        let params = SystemParams::blockade_base(0.9);
        let h = build_hamiltonian(&params, ProbePort::One).unwrap();
        let space = h.space().clone();
        let row = space.index_of(&[1, 0, 0]).unwrap();
        let col = space.index_of(&[0, 0, 2]).unwrap();
        let v = h.entries().get(row, col).copied().unwrap();
        assert_abs_diff_eq!(v.re, 2f64.sqrt() * params.coupling, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 0.0);
    }

    #[test]
    fn number_commutators_vanish_without_coupling_or_probe() {
        let mut params = SystemParams::blockade_base(0.6);
        params.coupling = 0.0;
        params.probe_amplitude = 0.0;
        params.cutoff_photon = 3;
        params.cutoff_phonon = 4;
        let h = build_hamiltonian(&params, ProbePort::Two).unwrap();
        let space = h.space().clone();
        let nums = [
            embed(&number(3).unwrap(), &space, 0).unwrap(),
            embed(&number(3).unwrap(), &space, 1).unwrap(),
            embed(&number(4).unwrap(), &space, 2).unwrap(),
        ];
        for n in &nums {
            assert_eq!(Operator::commutator(&h, n).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn pairing_number_conserved_without_probe() {
        // [H, 2 n_L + n_b] = 0 exactly when eps = 0.
        let mut params = SystemParams::blockade_base(1.2);
        params.probe_amplitude = 0.0;
        let h = build_hamiltonian_port1(&params).unwrap();
        let space = h.space().clone();
        let n_l = embed(&number(params.cutoff_photon).unwrap(), &space, 0).unwrap();
        let n_b = embed(&number(params.cutoff_phonon).unwrap(), &space, 1).unwrap();
        let pairing = n_l.scale(Complex64::new(2.0, 0.0)).try_add(&n_b).unwrap();
        assert_eq!(Operator::commutator(&h, &pairing).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn collapse_channel_rates() {
        let mut params = SystemParams::blockade_base(0.0);
        let chans = collapse_operators(&params).unwrap();
        assert_eq!(chans.len(), 3); // phonon pump channel omitted at n_th = 0
        assert!(chans.iter().all(|c| c.rate >= 0.0));

        params.thermal_phonons = 1.0;
        let chans = collapse_operators(&params).unwrap();
        assert_eq!(chans.len(), 4);
        assert_abs_diff_eq!(chans[2].rate, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(chans[3].rate, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn phonon_cutoff_floor_enforced() {
        let mut params = SystemParams::blockade_base(0.0);
        params.cutoff_phonon = 2;
        assert!(matches!(
            build_hamiltonian_port1(&params),
            Err(Error::CutoffTooSmall { cutoff: 2 })
        ));
        // The linear port-2 path has no b^2 and accepts any cutoff >= 2.
        assert!(build_hamiltonian_port2(&params).is_ok());
    }

    #[test]
    fn mode_operators_per_layout() {
        let params = SystemParams::blockade_base(1.0);
        let p1 = System::port1(&params).unwrap();
        assert!(p1.optical_annihilation(OpticalMode::Left).is_ok());
        assert!(p1.optical_annihilation(OpticalMode::Right).is_err());
        assert!(p1.phonon_annihilation().is_ok());
        let p2 = System::port2(&params).unwrap();
        assert!(p2.optical_annihilation(OpticalMode::Right).is_ok());
        assert!(p2.optical_annihilation(OpticalMode::Left).is_err());
        assert!(p2.phonon_annihilation().is_err());
        let full = System::full(&params, ProbePort::One).unwrap();
        assert!(full.optical_annihilation(OpticalMode::Left).is_ok());
        assert!(full.optical_annihilation(OpticalMode::Right).is_ok());
    }

    #[test]
    fn pre_rwa_spectrum_approaches_effective_model() {
        // With the mechanical frequency far above every coupling scale
        // (omega_m >> g |alpha|^2 >> G) the pre-RWA spectrum's pair-manifold
        // splitting approaches the effective pair-exchange prediction
        // 2 sqrt(2) G. The counter-rotating |alpha|^2 (b^2 + b^dag^2) term
        // shifts the two-phonon level by ~ (g |alpha|^2)^2 / (2 omega_m), so
        // omega_m must dominate that scale for the budget to close.
        let omega_m = 40_000.0;
        let g_eff = 1.0;
        let quad = 0.2;
        let alpha_mag = 2.0 * g_eff / quad;
        let pump_disp = Complex64::new(alpha_mag, 0.0);
        let mech_eff = effective_mech_freq(omega_m, quad, pump_disp);
        let delta_a = 2.0 * mech_eff;
        let h = build_hamiltonian_pre_rwa(delta_a, omega_m, quad, pump_disp, 3, 8).unwrap();
        assert!(h.hermiticity_error() < 1e-9);
        let dense = h.to_dense_col_major();
        let d = h.dim();
        let mat = faer::Mat::<Complex64>::from_fn(d, d, |i, j| dense[i + d * j]);
        let evs = mat.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        // Reference: the effective model's one-excitation-pair splitting.
        // The pre-RWA corrections scale like G^2/omega_m ~ 2.5e-3.
        let ground = evs[0];
        let split: Vec<f64> = evs.iter().map(|e| e - ground).collect();
        // Look for the pair of levels around 2 Delta_a +- sqrt(2) G (the
        // |1,0> / |0,2> manifold at Delta = 0 reference energy Delta_a*... )
        // In the pump frame the manifold sits at energy ~ Delta_a = 2 omega_m',
        // split by 2 sqrt(2) G.
        let target = delta_a;
        let mut near: Vec<f64> = split
            .iter()
            .copied()
            .filter(|e| (e - target).abs() < 3.0 * g_eff)
            .collect();
        near.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(near.len(), 2, "expected a two-level manifold near the pump detuning");
        let gap = near[1] - near[0];
        assert_abs_diff_eq!(gap, 2.0 * 2f64.sqrt() * g_eff, epsilon = 0.05 * g_eff);
    }

    proptest! {
        #[test]
        fn hamiltonian_is_exactly_hermitian(
            detuning in -10.0f64..10.0,
            coupling in 0.0f64..5.0,
            eps in 0.0f64..0.3,
            nth in 0.0f64..2.0,
        ) {
            let mut params = SystemParams::with_half_mech_detuning(
                detuning, coupling, eps, 0.01, nth, 3, 5,
            );
            params.mech_detuning = detuning / 2.0 + 0.3;
            let h_full = build_hamiltonian(&params, ProbePort::One).unwrap();
            prop_assert_eq!(h_full.hermiticity_error(), 0.0);
            let h1 = build_hamiltonian_port1(&params).unwrap();
            prop_assert_eq!(h1.hermiticity_error(), 0.0);
            let h2 = build_hamiltonian_port2(&params).unwrap();
            prop_assert_eq!(h2.hermiticity_error(), 0.0);
        }
    }
}
