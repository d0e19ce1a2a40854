//! Closed-form dressed-state ladder of the pair-exchange coupling.
//!
//! With the probe off, the coupling `G (a^dag b^2 + a b^dag^2)` conserves
//! the pair number `2 n_photon + n_phonon`. Under the sweep constraint
//! `Delta_m = Delta/2` every state in a fixed-pair sector shares the same
//! diagonal energy, so each sector reduces to a real symmetric tridiagonal
//! matrix in units of G whose eigenvalues predict every transmission and
//! correlation feature: a k-photon probe transition into a sector
//! eigenstate is resonant at `Delta = eigenvalue * G / k`.
//!
//! Ladder states are labelled `(pair, branch)`: `pair` is the conserved
//! quantum number, `branch` indexes the sector eigenvalue (ascending).

use crate::error::{Error, Result};
use crate::fock::HilbertSpec;
use crate::liouvillian::DensityMatrix;
use crate::model::SystemParams;

/// One conserved-pair sector of the coupling, reduced to its tridiagonal
/// matrix in units of G.
#[derive(Debug, Clone)]
pub struct Manifold {
    /// Conserved value of `2 n_photon + n_phonon`.
    pub pair_number: usize,
    /// Basis states `(n_photon, m_phonon)` in descending photon number;
    /// consecutive entries are linked by one pair exchange.
    pub basis: Vec<(usize, usize)>,
    /// Off-diagonal elements `sqrt((n+1) m (m-1))` (units of G) coupling
    /// `basis[k+1] = (n, m)` to `basis[k] = (n+1, m-2)`; the diagonal is
    /// zero in the `Delta_m = Delta/2` convention.
    pub off_diagonal: Vec<f64>,
}

/// Enumerate the sector with `2n + m = pair` below the given truncation
/// cutoffs and build its coupling matrix.
pub fn manifold(pair: usize, cutoff_photon: usize, cutoff_phonon: usize) -> Result<Manifold> {
    if cutoff_photon < 2 || cutoff_phonon < 2 {
        return Err(Error::InvalidDimension { dim: cutoff_photon.min(cutoff_phonon) });
    }
    let mut basis = Vec::new();
    let n_top = (pair / 2).min(cutoff_photon - 1);
    for n in (0..=n_top).rev() {
        let m = pair - 2 * n;
        if m < cutoff_phonon {
            basis.push((n, m));
        }
    }
    let mut off_diagonal = Vec::new();
    for w in basis.windows(2) {
        let (n_hi, m_hi) = w[0];
        let (n_lo, m_lo) = w[1];
        debug_assert_eq!(n_hi, n_lo + 1);
        debug_assert_eq!(m_hi + 2, m_lo);
        off_diagonal.push(((n_lo + 1) as f64 * m_lo as f64 * (m_lo - 1) as f64).sqrt());
    }
    Ok(Manifold { pair_number: pair, basis, off_diagonal })
}

impl Manifold {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Sector eigenvalues in units of G, ascending. Symmetric about zero
    /// (zero diagonal makes the spectrum odd under a sign flip of every
    /// other basis vector).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let k = self.dim();
        if k == 0 {
            return Vec::new();
        }
        if k == 1 {
            return vec![0.0];
        }
        let m = faer::Mat::<f64>::from_fn(k, k, |i, j| {
            if j == i + 1 {
                self.off_diagonal[i]
            } else if i == j + 1 {
                self.off_diagonal[j]
            } else {
                0.0
            }
        });
        m.self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("tridiagonal eigensolve cannot fail")
    }

    /// Number of probe photons that reach this sector: `pair/2` from the
    /// ground state for even sectors, `(pair-1)/2` from the one-phonon
    /// state for odd (thermally activated) sectors.
    pub fn photon_order(&self) -> usize {
        if self.pair_number % 2 == 0 {
            self.pair_number / 2
        } else {
            (self.pair_number - 1) / 2
        }
    }
}

/// Resonant probe detunings contributed by one sector.
#[derive(Debug, Clone)]
pub struct ManifoldResonances {
    pub pair_number: usize,
    pub photon_order: usize,
    /// `Delta / G` values, ascending.
    pub detunings_over_g: Vec<f64>,
}

/// Per-sector k-photon resonance detunings `Delta = eigenvalue * G / k` up
/// to `max_pair`, under the `Delta_m = Delta/2` constraint. Sectors 0 and 1
/// are source states, not transitions, and contribute nothing.
pub fn resonance_detunings(
    max_pair: usize,
    cutoff_photon: usize,
    cutoff_phonon: usize,
) -> Result<Vec<ManifoldResonances>> {
    if max_pair < 2 {
        return Err(Error::InvalidParameter(format!(
            "resonance prediction needs max_pair >= 2, got {max_pair}"
        )));
    }
    let mut out = Vec::new();
    for pair in 2..=max_pair {
        let m = manifold(pair, cutoff_photon, cutoff_phonon)?;
        let k = m.photon_order();
        if k == 0 || m.dim() == 0 {
            continue;
        }
        let detunings: Vec<f64> = m.eigenvalues().iter().map(|ev| ev / k as f64).collect();
        out.push(ManifoldResonances {
            pair_number: pair,
            photon_order: k,
            detunings_over_g: detunings,
        });
    }
    Ok(out)
}

/// Deduplicated ascending set of predicted resonance detunings (in units of
/// G) from every sector up to `max_pair`.
pub fn predicted_detuning_set(
    max_pair: usize,
    cutoff_photon: usize,
    cutoff_phonon: usize,
) -> Result<Vec<f64>> {
    let mut all: Vec<f64> = resonance_detunings(max_pair, cutoff_photon, cutoff_phonon)?
        .into_iter()
        .flat_map(|m| m.detunings_over_g)
        .map(|v| if v.abs() < 1e-12 { 0.0 } else { v })
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(all)
}

/// Eigenvalues of the sector with `2n + m = pair` taken from the full
/// coupling Hamiltonian by dense diagonalization, in units of G. This is
/// the brute-force check the closed-form manifolds are validated against.
pub fn sector_eigenvalues_dense(
    params: &SystemParams,
    pair: usize,
) -> Result<Vec<f64>> {
    let mut p = params.clone();
    p.detuning = 0.0;
    p.mech_detuning = 0.0;
    p.probe_amplitude = 0.0;
    let h = crate::model::build_hamiltonian_port1(&p)?;
    let space: &HilbertSpec = h.space();
    let indices: Vec<usize> = (0..space.dim())
        .filter(|&idx| {
            let occ = space.occupations_of(idx);
            2 * occ[0] + occ[1] == pair
        })
        .collect();
    if indices.is_empty() {
        return Ok(Vec::new());
    }
    let dense = h.to_dense_col_major();
    let d = space.dim();
    let k = indices.len();
    let block = faer::Mat::<num_complex::Complex64>::from_fn(k, k, |i, j| {
        dense[indices[i] + d * indices[j]]
    });
    let evs = block
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::FactorizationFailed(format!("sector eigensolve failed: {e:?}")))?;
    Ok(evs.into_iter().map(|ev| ev / params.coupling).collect())
}

/// Thermal occupation of each pair sector in a steady state, for ranking
/// which thermally activated transitions matter.
pub fn sector_populations(rho: &DensityMatrix, max_pair: usize) -> Vec<f64> {
    let space = rho.space();
    let mut pops = vec![0.0; max_pair + 1];
    for idx in 0..space.dim() {
        let occ = space.occupations_of(idx);
        let pair = 2 * occ[0] + occ[1];
        if pair <= max_pair {
            pops[pair] += rho.get(idx, idx).re;
        }
    }
    pops
}
