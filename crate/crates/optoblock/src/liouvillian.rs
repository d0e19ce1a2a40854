//! Lindblad superoperator assembly, steady-state solve, and time
//! propagation.
//!
//! Vectorization convention: **column stacking**, `vec(rho)[i + d*j] =
//! rho[(i, j)]`, with the identity `vec(A rho B) = (B^T kron A) vec(rho)`.
//! Every routine in this module and every test assumes it.
//!
//! The steady state is found by direct sparse LU after replacing the row of
//! the `(0,0)` matrix element with the trace constraint; dimensions here
//! stay small enough (<= ~3600^2 sparse) that a deterministic direct solve
//! beats any iterative scheme.

use num_complex::Complex64;
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::fock::{HilbertSpec, Operator};
use crate::model::{CollapseChannel, SystemParams};

/// Hermiticity tolerance on density matrices (max entrywise deviation).
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace tolerance on density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Truncation-tolerant positivity floor on the smallest eigenvalue.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Default bound on the steady-state residual relative to the Liouvillian
/// norm.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Hermitian, unit-trace, positive-semidefinite (within tolerances) state on
/// a declared Hilbert space, stored dense column-major.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: HilbertSpec,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// Wrap a dense column-major matrix without enforcing the state
    /// invariants (use [`DensityMatrix::validate`] for that). Conditioned
    /// matrices with non-unit trace are legitimate inputs to [`evolve`].
    pub fn from_col_major(space: HilbertSpec, entries: Vec<Complex64>) -> Result<Self> {
        let d = space.dim();
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: entries.len() });
        }
        Ok(Self { space, entries })
    }

    /// The pure state `|index><index|`.
    pub fn pure(space: HilbertSpec, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::DimensionMismatch { expected: d, actual: index + 1 });
        }
        let mut entries = vec![czero(); d * d];
        entries[index + d * index] = Complex64::new(1.0, 0.0);
        Ok(Self { space, entries })
    }

    /// The vacuum state `|0...0><0...0|`.
    pub fn vacuum(space: HilbertSpec) -> Self {
        Self::pure(space, 0).expect("dim >= 1")
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Column-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i + self.dim() * j]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|k| self.entries[k + d * k]).sum()
    }

    /// Max entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim();
        let m = faer::Mat::<Complex64>::from_fn(d, d, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i).conj())
        });
        let evs = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::FactorizationFailed(format!("eigensolve failed: {e:?}")))?;
        evs.into_iter()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            .ok_or_else(|| Error::InvalidParameter("empty matrix".into()))
    }

    /// Check the state invariants: Hermitian within 1e-10, unit trace within
    /// 1e-10, smallest eigenvalue above the truncation floor -1e-8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix not Hermitian: max deviation {herm:e}"
            )));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} != 1")));
        }
        let min_ev = self.min_eigenvalue()?;
        if min_ev < POSITIVITY_FLOOR {
            return Err(Error::InvalidParameter(format!(
                "density matrix not positive: min eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }

    /// `tr(O rho)`; the operator must live on the same space.
    pub fn expectation(&self, op: &Operator) -> Result<Complex64> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch {
                left: op.space().mode_dims().to_vec(),
                right: self.space.mode_dims().to_vec(),
            });
        }
        Ok(op.expectation(&self.entries))
    }

    /// The conditioned matrix `O rho O^dag` (used by the regression-theorem
    /// correlators; its trace is `<O^dag O>`, not 1).
    pub fn conditioned(&self, op: &Operator) -> Result<DensityMatrix> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch {
                left: op.space().mode_dims().to_vec(),
                right: self.space.mode_dims().to_vec(),
            });
        }
        let tmp = op.mul_dense(&self.entries);
        let out = op.adjoint().dense_mul(&tmp);
        DensityMatrix::from_col_major(self.space.clone(), out)
    }

    /// Reduced state of one mode, tracing out all others.
    pub fn partial_trace(&self, keep_mode: usize) -> Result<DensityMatrix> {
        let n_modes = self.space.n_modes();
        if keep_mode >= n_modes {
            return Err(Error::ModeIndexOutOfRange { index: keep_mode, n_modes });
        }
        let d = self.dim();
        let dk = self.space.mode_dims()[keep_mode];
        let sub = HilbertSpec::single(dk)?;
        let mut out = vec![czero(); dk * dk];
        for j in 0..d {
            let occ_j = self.space.occupations_of(j);
            for i in 0..d {
                let occ_i = self.space.occupations_of(i);
                let rest_match = occ_i
                    .iter()
                    .zip(&occ_j)
                    .enumerate()
                    .all(|(m, (a, b))| m == keep_mode || a == b);
                if rest_match {
                    out[occ_i[keep_mode] + dk * occ_j[keep_mode]] += self.entries[i + d * j];
                }
            }
        }
        DensityMatrix::from_col_major(sub, out)
    }

    fn project_hermitian(&mut self) {
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                let avg = 0.5 * (self.entries[i + d * j] + self.entries[j + d * i].conj());
                self.entries[i + d * j] = avg;
                self.entries[j + d * i] = avg.conj();
            }
        }
    }

    fn scale_in_place(&mut self, z: Complex64) {
        for v in &mut self.entries {
            *v *= z;
        }
    }
}

/// Sparse matrix representation of a Lindblad generator acting on
/// column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    space: HilbertSpec,
    matrix: CsMat<Complex64>,
    norm_inf: f64,
}

impl Superoperator {
    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    /// Hilbert-space dimension d (the matrix is d^2 x d^2).
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &CsMat<Complex64> {
        &self.matrix
    }

    /// Max absolute row sum of the matrix.
    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    /// `L * v` for a vectorized state.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.matrix.rows();
        debug_assert_eq!(v.len(), n);
        let mut out = vec![czero(); n];
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            let mut acc = czero();
            for (j, &val) in row.iter() {
                acc += val * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `-i[H, rho] + sum_k rate_k (o rho o^dag - (o^dag o rho + rho o^dag o)/2)`
    /// applied to a dense state; the direct operator-form route, kept
    /// independent of the matrix representation so tests can pit the two
    /// against each other.
    pub fn direct_action(
        h: &Operator,
        channels: &[CollapseChannel],
        rho: &DensityMatrix,
    ) -> Result<DensityMatrix> {
        let d = rho.dim();
        let minus_i = Complex64::new(0.0, -1.0);
        let h_rho = h.mul_dense(rho.entries());
        let rho_h = h.dense_mul(rho.entries());
        let mut out: Vec<Complex64> =
            h_rho.iter().zip(&rho_h).map(|(a, b)| minus_i * (a - b)).collect();
        for chan in channels {
            let o = &chan.op;
            let odag = o.adjoint();
            let odo = odag.try_mul(o)?;
            let sandwich = odag.dense_mul(&o.mul_dense(rho.entries()));
            let left = odo.mul_dense(rho.entries());
            let right = odo.dense_mul(rho.entries());
            let r = Complex64::new(chan.rate, 0.0);
            let half = Complex64::new(0.5, 0.0);
            for k in 0..d * d {
                out[k] += r * (sandwich[k] - half * (left[k] + right[k]));
            }
        }
        DensityMatrix::from_col_major(rho.space().clone(), out)
    }
}

/// Assemble the sparse matrix of the Lindblad generator for a Hamiltonian
/// and a set of collapse channels sharing one Hilbert space.
pub fn build_liouvillian(h: &Operator, channels: &[CollapseChannel]) -> Result<Superoperator> {
    let space = h.space().clone();
    for chan in channels {
        if chan.op.space() != &space {
            return Err(Error::SpaceMismatch {
                left: chan.op.space().mode_dims().to_vec(),
                right: space.mode_dims().to_vec(),
            });
        }
        if chan.rate < 0.0 {
            return Err(Error::NegativeRate { rate: chan.rate });
        }
    }
    let d = space.dim();
    let eye: CsMat<Complex64> = CsMat::eye(d);
    let minus_i = Complex64::new(0.0, -1.0);
    let h_t = h.entries().transpose_view().to_csr();
    // -i (I (x) H - H^T (x) I)
    let comm = &sprs::kronecker_product(eye.view(), h.entries().view()).map(|v| v * minus_i)
        + &sprs::kronecker_product(h_t.view(), eye.view()).map(|v| v * (-minus_i));
    let mut total = comm;
    for chan in channels {
        let o = chan.op.entries();
        let o_conj = o.map(|v| v.conj());
        let odag = chan.op.adjoint();
        let odo = odag.try_mul(&chan.op)?;
        let odo_t = odo.entries().transpose_view().to_csr();
        let rate = Complex64::new(chan.rate, 0.0);
        let half_rate = Complex64::new(0.5 * chan.rate, 0.0);
        let jump = sprs::kronecker_product(o_conj.view(), o.view()).map(|v| v * rate);
        let left =
            sprs::kronecker_product(eye.view(), odo.entries().view()).map(|v| v * -half_rate);
        let right =
            sprs::kronecker_product(odo_t.view(), eye.view()).map(|v| v * -half_rate);
        total = &(&(&total + &jump) + &left) + &right;
    }
    let norm_inf = total
        .outer_iterator()
        .map(|row| row.iter().map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(Superoperator { space, matrix: total, norm_inf })
}

/// Steady state together with its solve diagnostics.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub rho: DensityMatrix,
    /// 2-norm of `L vec(rho)`.
    pub residual_norm: f64,
    /// Residual divided by the Liouvillian inf-norm.
    pub relative_residual: f64,
}

/// Second-smallest singular value, computed densely; only affordable as a
/// failure diagnostic at small dimensions.
fn second_smallest_singular_value(l: &Superoperator) -> Option<f64> {
    let n = l.matrix.rows();
    if n > 1600 {
        return None;
    }
    let mut dense = faer::Mat::<Complex64>::zeros(n, n);
    for (i, row) in l.matrix.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            dense[(i, j)] = v;
        }
    }
    let svals = dense.singular_values().ok()?;
    if svals.len() < 2 {
        return None;
    }
    let mut sorted = svals;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(sorted[1])
}

/// Solve `L vec(rho) = 0, tr(rho) = 1` by direct sparse LU with the row of
/// the `(0,0)` element replaced by the trace constraint.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_detailed(l).map(|s| s.rho)
}

/// As [`steady_state`], returning residual diagnostics alongside the state.
pub fn steady_state_detailed(l: &Superoperator) -> Result<SteadySolution> {
    use faer::prelude::*;
    use faer::sparse::{SparseColMat, Triplet};

    let d = l.dim();
    let n = d * d;
    let mut trips: Vec<Triplet<usize, usize, Complex64>> = Vec::with_capacity(l.matrix.nnz() + d);
    // Row 0 is the (0,0) element's row: replace it with the trace functional.
    for (i, row) in l.matrix.outer_iterator().enumerate() {
        if i == 0 {
            continue;
        }
        for (j, &v) in row.iter() {
            trips.push(Triplet::new(i, j, v));
        }
    }
    for k in 0..d {
        trips.push(Triplet::new(0, k + d * k, Complex64::new(1.0, 0.0)));
    }
    // A structurally empty row or column means the kernel cannot be
    // one-dimensional; the factorization would only fail later and less
    // clearly.
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    for t in &trips {
        row_seen[t.row] = true;
        col_seen[t.col] = true;
    }
    if !(row_seen.iter().all(|&r| r) && col_seen.iter().all(|&c| c)) {
        return Err(Error::DegenerateSteadyState {
            detail: "structurally singular: empty row or column in the constrained system".into(),
            sigma2: second_smallest_singular_value(l),
        });
    }
    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::FactorizationFailed(format!("assembly failed: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::DegenerateSteadyState {
        detail: format!("sparse LU failed: {e:?}"),
        sigma2: second_smallest_singular_value(l),
    })?;
    let mut rhs = faer::Mat::<Complex64>::zeros(n, 1);
    rhs[(0, 0)] = Complex64::new(1.0, 0.0);
    let x = lu.solve(&rhs);
    let entries: Vec<Complex64> = (0..n).map(|k| x[(k, 0)]).collect();
    let mut rho = DensityMatrix::from_col_major(l.space.clone(), entries)?;
    rho.project_hermitian();
    let tr = rho.trace();
    if tr.norm() < 1e-10 {
        return Err(Error::DegenerateSteadyState {
            detail: format!("kernel vector has trace {tr:e}"),
            sigma2: second_smallest_singular_value(l),
        });
    }
    rho.scale_in_place(Complex64::new(1.0, 0.0) / tr);
    let resid_vec = l.apply(rho.entries());
    let residual_norm = resid_vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let relative_residual = residual_norm / l.norm_inf.max(f64::MIN_POSITIVE);
    // NaN must fail this check, hence the negated comparison.
    if !(relative_residual <= RESIDUAL_TOL) {
        return Err(Error::DegenerateSteadyState {
            detail: format!(
                "steady-state residual {relative_residual:e} exceeds {RESIDUAL_TOL:e}; \
                 the kernel is likely not one-dimensional"
            ),
            sigma2: second_smallest_singular_value(l),
        });
    }
    rho.validate()?;
    Ok(SteadySolution { rho, residual_norm, relative_residual })
}

/// Options for the adaptive propagator.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Relative error tolerance per step.
    pub rtol: f64,
    /// Absolute error tolerance per step.
    pub atol: f64,
    /// Step-count cap before giving up.
    pub max_steps: usize,
    /// Allowed trace drift between input and output.
    pub trace_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, max_steps: 20_000_000, trace_tol: 1e-8 }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B_HAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Propagate `vec(rho0)` under `d/dt v = L v` with an adaptive embedded
/// Runge-Kutta pair, visiting each requested time in ascending order. The
/// generator is time independent, so stage times never enter. A leading 0
/// in `times` visits the initial state exactly.
pub fn evolve_on_grid(
    l: &Superoperator,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
    mut visit: impl FnMut(usize, &[Complex64]),
) -> Result<()> {
    if l.space != *rho0.space() {
        return Err(Error::SpaceMismatch {
            left: l.space.mode_dims().to_vec(),
            right: rho0.space().mode_dims().to_vec(),
        });
    }
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter("output times must be ascending".into()));
        }
    }
    if let Some(&t0) = times.first() {
        if t0 < 0.0 {
            return Err(Error::InvalidParameter("output times must be >= 0".into()));
        }
    }
    let n = rho0.entries().len();
    let trace_in = rho0.trace();
    let mut y: Vec<Complex64> = rho0.entries().to_vec();
    let mut t = 0.0f64;
    let mut out_idx = 0;
    while out_idx < times.len() && times[out_idx] == 0.0 {
        visit(out_idx, &y);
        out_idx += 1;
    }
    if out_idx >= times.len() {
        return Ok(());
    }
    let t_end = *times.last().unwrap();
    let mut k: Vec<Vec<Complex64>> = vec![vec![czero(); n]; 7];
    k[0] = l.apply(&y);
    let mut h = (0.5 / l.norm_inf.max(1e-12)).min(t_end).max(1e-12);
    let mut steps = 0usize;
    let mut y_stage = vec![czero(); n];

    while out_idx < times.len() {
        if steps >= opts.max_steps {
            return Err(Error::IntegratorFailure { achieved: f64::NAN, t });
        }
        steps += 1;
        let t_target = times[out_idx];
        let mut h_step = h.min(t_end - t);
        let mut hit_output = false;
        if t + h_step >= t_target - 1e-14 * t_target.max(1.0) {
            h_step = t_target - t;
            hit_output = true;
        }
        if h_step <= 0.0 {
            visit(out_idx, &y);
            out_idx += 1;
            continue;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = czero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = DP_A[s - 1][j];
                    if a != 0.0 {
                        acc += Complex64::new(a, 0.0) * kj[i];
                    }
                }
                y_stage[i] = y[i] + Complex64::new(h_step, 0.0) * acc;
            }
            k[s] = l.apply(&y_stage);
        }
        // 5th-order update and embedded 4th-order error estimate.
        let mut err_sq = 0.0f64;
        let mut y_new = vec![czero(); n];
        for i in 0..n {
            let mut acc = czero();
            let mut acc_err = czero();
            for s in 0..7 {
                if DP_B[s] != 0.0 {
                    acc += Complex64::new(DP_B[s], 0.0) * k[s][i];
                }
                let diff = DP_B[s] - DP_B_HAT[s];
                if diff != 0.0 {
                    acc_err += Complex64::new(diff, 0.0) * k[s][i];
                }
            }
            let y_next = y[i] + Complex64::new(h_step, 0.0) * acc;
            let scale = opts.atol + opts.rtol * y[i].norm().max(y_next.norm());
            let e = h_step * acc_err.norm();
            err_sq += (e / scale) * (e / scale);
            y_new[i] = y_next;
        }
        let err = (err_sq / n as f64).sqrt();
        if err <= 1.0 {
            t += h_step;
            y = y_new;
            // FSAL: the last stage of an accepted step seeds the next one.
            k[0] = k[6].clone();
            if hit_output {
                visit(out_idx, &y);
                out_idx += 1;
                while out_idx < times.len() && times[out_idx] == t {
                    visit(out_idx, &y);
                    out_idx += 1;
                }
            }
            let factor = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h = (h_step * factor).max(1e-13);
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = h_step * factor;
            if h < 1e-13 {
                return Err(Error::IntegratorFailure { achieved: err, t });
            }
        }
    }
    let d = l.dim();
    let trace_out: Complex64 = (0..d).map(|q| y[q + d * q]).sum();
    let drift = (trace_out - trace_in).norm();
    if drift > opts.trace_tol * trace_in.norm().max(1.0) {
        return Err(Error::IntegratorFailure { achieved: drift, t });
    }
    Ok(())
}

/// `exp(L t)` applied to a (Hermitian, not necessarily unit-trace) matrix.
pub fn evolve(
    l: &Superoperator,
    rho0: &DensityMatrix,
    t: f64,
    opts: &EvolveOptions,
) -> Result<DensityMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidParameter("evolution time must be >= 0".into()));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let mut out = None;
    evolve_on_grid(l, rho0, &[t], opts, |_, y| out = Some(y.to_vec()))?;
    DensityMatrix::from_col_major(l.space.clone(), out.expect("visited final time"))
}

/// Dense matrix exponential by Pade-13 scaling and squaring. Intended for
/// small dimensions; cross-checks the adaptive propagator.
pub fn expm_dense(a: &faer::Mat<Complex64>) -> faer::Mat<Complex64> {
    use faer::prelude::*;

    assert_eq!(a.nrows(), a.ncols());
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    const THETA13: f64 = 5.371920351148152;
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as u32 } else { 0 };
    let scale = Complex64::new(0.5f64.powi(s as i32), 0.0);
    let a_s = faer::Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)] * scale);

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = faer::Mat::<Complex64>::identity(n, n);
    let a2 = &a_s * &a_s;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let coef = |c: f64, m: &faer::Mat<Complex64>| {
        faer::Mat::<Complex64>::from_fn(n, n, |i, j| m[(i, j)] * Complex64::new(c, 0.0))
    };
    let u_inner = &a6 * &(coef(B[13], &a6) + coef(B[11], &a4) + coef(B[9], &a2));
    let u_poly = u_inner + coef(B[7], &a6) + coef(B[5], &a4) + coef(B[3], &a2) + coef(B[1], &id);
    let u = &a_s * &u_poly;
    let v_inner = &a6 * &(coef(B[12], &a6) + coef(B[10], &a4) + coef(B[8], &a2));
    let v = v_inner + coef(B[6], &a6) + coef(B[4], &a4) + coef(B[2], &a2) + coef(B[0], &id);
    let vmu = &v - &u;
    let vpu = &v + &u;
    let lu = vmu.partial_piv_lu();
    let mut r = lu.solve(&vpu);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(L t)` applied via the dense Pade route; errors above the stated
/// dimension cap (the dense superoperator is (d^2)^2).
pub fn evolve_expm(l: &Superoperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let n = l.matrix().rows();
    if n > 4096 {
        return Err(Error::InvalidParameter(format!(
            "dense exponential limited to 4096^2 superoperators, got {n}"
        )));
    }
    if l.space != *rho0.space() {
        return Err(Error::SpaceMismatch {
            left: l.space.mode_dims().to_vec(),
            right: rho0.space().mode_dims().to_vec(),
        });
    }
    let mut dense = faer::Mat::<Complex64>::zeros(n, n);
    for (i, row) in l.matrix.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            dense[(i, j)] = v * Complex64::new(t, 0.0);
        }
    }
    let e = expm_dense(&dense);
    let y0 = rho0.entries();
    let mut out = vec![czero(); n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = czero();
        for j in 0..n {
            acc += e[(i, j)] * y0[j];
        }
        *o = acc;
    }
    DensityMatrix::from_col_major(l.space.clone(), out)
}

/// Policy for the truncation-convergence ladder.
#[derive(Debug, Clone, Copy)]
pub struct ConvergencePolicy {
    pub initial_photon: usize,
    pub initial_phonon: usize,
    pub max_photon: usize,
    pub max_phonon: usize,
    /// Relative change below which successive levels agree.
    pub tol: f64,
    /// Values below this magnitude are compared absolutely.
    pub floor: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        Self {
            initial_photon: 3,
            initial_phonon: 6,
            max_photon: 10,
            max_phonon: 24,
            tol: 1e-6,
            floor: 1e-14,
        }
    }
}

/// One ladder level of the convergence run.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub cutoff_photon: usize,
    pub cutoff_phonon: usize,
    pub values: Vec<f64>,
    /// Max relative change against the previous level (None on the first).
    pub max_rel_change: Option<f64>,
}

/// Full convergence table plus the certified cutoffs.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub certified_photon: usize,
    pub certified_phonon: usize,
}

fn rel_change(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < floor {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Walk the cutoff ladder (photon +1, phonon +2 per level, clamped at the
/// maxima) until every observable produced by `eval` changes by less than
/// `policy.tol` relative between successive levels. The certified cutoffs
/// are the earlier level of the first agreeing pair.
pub fn converge_cutoffs(
    params: &SystemParams,
    policy: &ConvergencePolicy,
    mut eval: impl FnMut(&SystemParams) -> Result<Vec<f64>>,
) -> Result<ConvergenceReport> {
    if policy.initial_photon < 2 || policy.initial_phonon < 2 {
        return Err(Error::InvalidDimension {
            dim: policy.initial_photon.min(policy.initial_phonon),
        });
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut photon = policy.initial_photon;
    let mut phonon = policy.initial_phonon;
    loop {
        let mut level_params = params.clone();
        level_params.cutoff_photon = photon;
        level_params.cutoff_phonon = phonon;
        let values = eval(&level_params)?;
        let max_rel_change = rows.last().map(|prev: &ConvergenceRow| {
            prev.values
                .iter()
                .zip(&values)
                .map(|(&a, &b)| rel_change(a, b, policy.floor))
                .fold(0.0, f64::max)
        });
        rows.push(ConvergenceRow {
            cutoff_photon: photon,
            cutoff_phonon: phonon,
            values,
            max_rel_change,
        });
        if let Some(change) = rows.last().unwrap().max_rel_change {
            if change < policy.tol {
                let prev = &rows[rows.len() - 2];
                return Ok(ConvergenceReport {
                    certified_photon: prev.cutoff_photon,
                    certified_phonon: prev.cutoff_phonon,
                    rows,
                });
            }
        }
        if photon >= policy.max_photon && phonon >= policy.max_phonon {
            let table = rows
                .iter()
                .map(|r| {
                    format!(
                        "({}, {}): {:?} (change {:?})",
                        r.cutoff_photon, r.cutoff_phonon, r.values, r.max_rel_change
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::ConvergenceFailure(format!(
                "no agreement below {:e} before cutoffs ({}, {}); ladder: {table}",
                policy.tol, policy.max_photon, policy.max_phonon
            )));
        }
        photon = (photon + 1).min(policy.max_photon);
        phonon = (phonon + 2).min(policy.max_phonon);
    }
}
