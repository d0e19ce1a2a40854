//! Acceptance gate: every release-blocking claim about the simulator,
//! one test per criterion, each printing a pass line with the measured
//! numbers (run with `--nocapture` to see them).
//!
//! Tolerances are pinned here, not configurable: changing one is a
//! deliberate, reviewable act.

use std::sync::OnceLock;

use optoblock::dressed;
use optoblock::liouvillian::{
    build_liouvillian, steady_state_detailed, ConvergencePolicy, DensityMatrix, Superoperator,
};
use optoblock::model::{OpticalMode, ProbePort, System, SystemParams};
use optoblock::observables::{
    converge_transport_cutoffs, evaluate_transport, g2_zero, transmission, Direction,
    TransportEvaluation, TransportObservable,
};
use optoblock::sweep::{
    self, config_from_key_values, find_extrema, parse_key_values, run_g2_delay, run_sweep,
    RowStatus, SweepResult,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const G: f64 = 3.0;

fn sqrt6() -> f64 {
    6f64.sqrt()
}

/// Direct transport solves at the operating detunings (units of gamma_c),
/// shared across criteria.
fn eval_at(delta: f64, n_th: f64) -> TransportEvaluation {
    let mut params = SystemParams::blockade_base(delta);
    params.thermal_phonons = n_th;
    evaluate_transport(&params).expect("transport solve")
}

fn eval_sqrt2() -> &'static TransportEvaluation {
    static CELL: OnceLock<TransportEvaluation> = OnceLock::new();
    CELL.get_or_init(|| eval_at(SQRT2 * G, 0.0))
}

fn eval_minus_sqrt2() -> &'static TransportEvaluation {
    static CELL: OnceLock<TransportEvaluation> = OnceLock::new();
    CELL.get_or_init(|| eval_at(-SQRT2 * G, 0.0))
}

fn eval_zero() -> &'static TransportEvaluation {
    static CELL: OnceLock<TransportEvaluation> = OnceLock::new();
    CELL.get_or_init(|| eval_at(0.0, 0.0))
}

/// The 241-point detuning sweep of the standard operating point.
fn fig_sweep() -> &'static SweepResult {
    static CELL: OnceLock<SweepResult> = OnceLock::new();
    CELL.get_or_init(|| {
        let kvs = parse_key_values(sweep::preset("isolation").unwrap()).unwrap();
        let cfg = config_from_key_values(&kvs).unwrap();
        let result = run_sweep(&cfg, &kvs).unwrap();
        assert_eq!(result.n_failed(), 0, "sweep points failed");
        result
    })
}

fn preset_sweep(name: &str, overrides: &[(&str, &str)]) -> SweepResult {
    let kvs = parse_key_values(sweep::preset(name).unwrap()).unwrap();
    let ov: Vec<(String, String)> =
        overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let kvs = sweep::apply_overrides(kvs, &ov);
    let cfg = config_from_key_values(&kvs).unwrap();
    let result = run_sweep(&cfg, &kvs).unwrap();
    assert_eq!(result.n_failed(), 0, "sweep points failed");
    result
}

fn column_value(result: &SweepResult, column: &str, sweep_value: f64) -> f64 {
    let data = result.column(column).unwrap_or_else(|| panic!("missing column {column}"));
    data.iter()
        .find(|(x, _)| (x - sweep_value).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no row at {sweep_value}"))
        .1
}

#[test]
fn criterion_1_linear_path_oracle() {
    // T12 matches the analytic Lorentzian within 1e-3 absolute at 41
    // detunings over [-3G, 3G]; unit peak on resonance; coherent
    // correlations at every point.
    let mut worst_t = 0.0f64;
    let mut worst_g2 = 0.0f64;
    for i in 0..41 {
        let delta = -3.0 * G + 6.0 * G * (i as f64) / 40.0;
        let mut params = SystemParams::blockade_base(delta);
        params.cutoff_photon =
            params.cutoff_photon.max(optoblock::observables::LINEAR_PATH_MIN_CUTOFF);
        let sys = System::port2(&params).unwrap();
        let l = build_liouvillian(&sys.hamiltonian, &sys.channels).unwrap();
        let sol = steady_state_detailed(&l).unwrap();
        let t12 = transmission(&sys, &sol.rho, Direction::TwoToOne).unwrap();
        let lorentzian = 0.25 / (0.25 + delta * delta);
        worst_t = worst_t.max((t12 - lorentzian).abs());
        let g2 = g2_zero(&sys, &sol.rho, OpticalMode::Right).unwrap();
        worst_g2 = worst_g2.max((g2 - 1.0).abs());
        if delta == 0.0 {
            assert!((t12 - 1.0).abs() <= 1e-3, "T12(0) = {t12}");
        }
    }
    assert!(worst_t <= 1e-3, "worst Lorentzian deviation {worst_t:e}");
    assert!(worst_g2 <= 1e-6, "worst g2 deviation {worst_g2:e}");
    println!(
        "[PASS] criterion 1: linear path matches the Lorentzian (worst {worst_t:.2e}) with \
         coherent statistics (worst |g2-1| = {worst_g2:.2e})"
    );
}

#[test]
fn criterion_2_blockade_peaks() {
    let sweep = fig_sweep();
    let t21 = sweep.column("T21").unwrap();
    let maxima: Vec<_> = find_extrema(&t21).into_iter().filter(|e| e.is_maximum).collect();
    assert_eq!(maxima.len(), 2, "expected exactly two transmission maxima, got {maxima:?}");
    let neg = maxima.iter().find(|e| e.sweep_value < 0.0).expect("negative-side peak");
    let pos = maxima.iter().find(|e| e.sweep_value > 0.0).expect("positive-side peak");
    for (peak, target) in [(neg, -SQRT2), (pos, SQRT2)] {
        assert!(
            (peak.sweep_value - target).abs() <= 0.05,
            "peak at {} not within 0.05 of {target}",
            peak.sweep_value
        );
        assert!(
            (peak.value - 0.8).abs() <= 0.1,
            "peak height {} outside 0.8 +- 0.1",
            peak.value
        );
    }
    println!(
        "[PASS] criterion 2: transmission peaks at Delta/G = {:.4} and {:.4} with heights \
         {:.4} and {:.4}",
        neg.sweep_value, pos.sweep_value, neg.value, pos.value
    );
}

#[test]
fn criterion_3_interference_dip() {
    let sweep = fig_sweep();
    let dip = column_value(sweep, "T21", 0.0);
    assert!(dip < 1e-5, "T21(0) = {dip:e} not below 1e-5");
    let peak = eval_sqrt2().result.t21;
    let suppression = dip / peak;
    assert!(suppression < 1e-5, "dip/peak = {suppression:e} not a >5-decade suppression");
    println!(
        "[PASS] criterion 3: interference dip T21(0) = {dip:.2e}, suppression vs peak = \
         {suppression:.2e}"
    );
}

#[test]
fn criterion_4_isolation() {
    let plus = eval_sqrt2().result.isolation_db;
    let minus = eval_minus_sqrt2().result.isolation_db;
    assert!(plus > 17.0, "isolation at +sqrt(2)G = {plus} dB");
    assert!(minus > 17.0, "isolation at -sqrt(2)G = {minus} dB");
    let reverse = eval_zero().result.isolation_db;
    assert!(reverse < -70.0, "isolation at Delta = 0 is {reverse} dB, expected < -70 (2 -> 1)");
    println!(
        "[PASS] criterion 4: isolation +{plus:.2} dB at +sqrt(2)G, +{minus:.2} dB at \
         -sqrt(2)G, {reverse:.2} dB at 0 (favoring 2 -> 1)"
    );
}

#[test]
fn criterion_5_antibunching_bunching_map() {
    let anti_plus = eval_sqrt2().result.g2_21_zero;
    let anti_minus = eval_minus_sqrt2().result.g2_21_zero;
    assert!(anti_plus < 0.1, "g2(+sqrt2 G) = {anti_plus}");
    assert!(anti_minus < 0.1, "g2(-sqrt2 G) = {anti_minus}");
    let bunch_zero = eval_zero().result.g2_21_zero;
    assert!(bunch_zero > 10.0, "g2(0) = {bunch_zero}");
    let bunch_plus = eval_at(2.0 * G, 0.0).result.g2_21_zero;
    let bunch_minus = eval_at(-2.0 * G, 0.0).result.g2_21_zero;
    assert!(bunch_plus > 10.0, "g2(+2G) = {bunch_plus}");
    assert!(bunch_minus > 10.0, "g2(-2G) = {bunch_minus}");
    println!(
        "[PASS] criterion 5: g2_21(0) = {anti_plus:.2e} at +sqrt(2)G and {anti_minus:.2e} at \
         -sqrt(2)G; {bunch_zero:.2e} at 0, {bunch_plus:.2} at +2G, {bunch_minus:.2} at -2G"
    );
}

#[test]
fn criterion_6_delay_window() {
    // Preset delay scan at Delta = sqrt(2) G: antibunched throughout the
    // early window, back to coherent statistics by the end of the scan
    // (tau = 20 in units of 2 pi / gamma_c).
    let kvs = parse_key_values(sweep::preset("correlation-delay").unwrap()).unwrap();
    let cfg = config_from_key_values(&kvs).unwrap();
    let result = run_g2_delay(&cfg, &kvs).unwrap();
    assert!(result.rows.iter().all(|r| r.status == RowStatus::Ok));
    let g2 = result.column("g2_21_tau").unwrap();
    let window: Vec<_> =
        g2.iter().filter(|(tau, _)| *tau > 0.0 && *tau <= 0.05 + 1e-12).collect();
    assert!(!window.is_empty(), "no grid points in the early window");
    for (tau, v) in &window {
        assert!(*v < 1.0, "g2({tau}) = {v} >= 1 inside the blockade window");
    }
    // Finer scan through the same window, 20 points.
    let fine_kvs = sweep::apply_overrides(
        parse_key_values(sweep::preset("correlation-delay").unwrap()).unwrap(),
        &[
            ("sweep.min".into(), "0.0025".into()),
            ("sweep.max".into(), "0.05".into()),
            ("sweep.points".into(), "20".into()),
        ],
    );
    let fine_cfg = config_from_key_values(&fine_kvs).unwrap();
    let fine = run_g2_delay(&fine_cfg, &fine_kvs).unwrap();
    for row in &fine.rows {
        assert!(
            row.values[0] < 1.0,
            "g2({}) = {} >= 1 inside the blockade window",
            row.sweep_value,
            row.values[0]
        );
    }
    let terminal = column_value(&result, "g2_21_tau", 20.0);
    assert!(
        (terminal - 1.0).abs() <= 0.02,
        "g2 at the end of the scan = {terminal}, expected 1 +- 0.02"
    );
    println!(
        "[PASS] criterion 6: g2_21(tau) < 1 across the early window (max {:.3e}) and returns \
         to {terminal:.4} by the end of the scan",
        window.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    );
}

#[test]
fn criterion_7_thermal_trends() {
    // (a) The transmission peak moves little between a cold and a hot bath:
    // the unit-normalized T21 at +-sqrt(2) G changes by less than 0.10
    // (ten points of transmission) from n_th = 0 to n_th = 1.
    let overrides_points = ("sweep.points", "11");
    let at_sqrt2 = preset_sweep("thermal-isolation", &[overrides_points]);
    let t_cold = column_value(&at_sqrt2, "T21", 0.0);
    let t_hot = column_value(&at_sqrt2, "T21", 1.0);
    let change = (t_hot - t_cold).abs();
    assert!(change < 0.10, "T21(+sqrt2 G) changed by {change} in transmission units");
    let at_msqrt2 =
        preset_sweep("thermal-isolation", &[overrides_points, ("base.Delta", "-sqrt(2)")]);
    let tm_cold = column_value(&at_msqrt2, "T21", 0.0);
    let tm_hot = column_value(&at_msqrt2, "T21", 1.0);
    let change_m = (tm_hot - tm_cold).abs();
    assert!(change_m < 0.10, "T21(-sqrt2 G) changed by {change_m} in transmission units");

    // (b) The thermally activated peak at +-sqrt(6) G strictly grows.
    let mut sqrt6_growth = (0.0, 0.0);
    for delta_key in ["sqrt(6)", "-sqrt(6)"] {
        let s = preset_sweep("thermal-isolation", &[overrides_points, ("base.Delta", delta_key)]);
        let t0 = column_value(&s, "T21", 0.0);
        let t01 = column_value(&s, "T21", 0.1);
        let t1 = column_value(&s, "T21", 1.0);
        assert!(
            t0 < t01 && t01 < t1,
            "T21({delta_key} G) not strictly increasing: {t0} {t01} {t1}"
        );
        if delta_key == "sqrt(6)" {
            sqrt6_growth = (t0, t1);
        }
    }

    // (c) Antibunching weakens monotonically with bath occupation.
    let corr = preset_sweep("thermal-correlation-trend", &[overrides_points]);
    let g0 = column_value(&corr, "g2_21_zero", 0.0);
    let g01 = column_value(&corr, "g2_21_zero", 0.1);
    let g1 = column_value(&corr, "g2_21_zero", 1.0);
    assert!(g0 < g01 && g01 < g1, "g2 not strictly increasing: {g0} {g01} {g1}");

    // (d) Isolation survives a hot bath.
    let iso_hot = column_value(&at_sqrt2, "isolation_db", 1.0);
    assert!(iso_hot > 10.0, "isolation at n_th = 1 is {iso_hot} dB");

    println!(
        "[PASS] criterion 7: T21(sqrt2 G) changes by {change:.4} (rel {:.2}%) cold -> hot; \
         T21(sqrt6 G) grows {:.2e} -> {:.2e}; g2 grows {g0:.2e} -> {g1:.2e}; isolation stays \
         {iso_hot:.2} dB",
        100.0 * change / t_cold,
        sqrt6_growth.0,
        sqrt6_growth.1,
    );
}

#[test]
fn criterion_8_dressed_spectrum_oracle() {
    let params = SystemParams::blockade_base(0.0);
    let cases: [(usize, Vec<f64>); 3] = [
        (2, vec![-SQRT2, SQRT2]),
        (3, vec![-sqrt6(), sqrt6()]),
        (4, vec![-4.0, 0.0, 4.0]),
    ];
    for (pair, expect) in &cases {
        let closed = dressed::manifold(*pair, params.cutoff_photon, params.cutoff_phonon)
            .unwrap()
            .eigenvalues();
        assert_eq!(closed.len(), expect.len());
        for (c, e) in closed.iter().zip(expect) {
            assert!((c - e).abs() < 1e-12, "sector {pair}: {c} vs {e}");
        }
        let dense = dressed::sector_eigenvalues_dense(&params, *pair).unwrap();
        for (c, d) in closed.iter().zip(&dense) {
            assert!((c - d).abs() < 1e-12, "sector {pair}: closed {c} vs dense {d}");
        }
    }
    println!(
        "[PASS] criterion 8: sector eigenvalues {{+-sqrt2, +-sqrt6, 0/+-4}} G match dense \
         diagonalization to 1e-12"
    );
}

#[test]
fn criterion_9_solver_property_suite() {
    // Residual and state invariants on every solve along the operating
    // curve (steady_state_detailed enforces them; spot-check the numbers).
    let mut worst_residual = 0.0f64;
    for delta in [-2.0 * G, -SQRT2 * G, 0.0, 0.7 * G, SQRT2 * G] {
        let params = SystemParams::blockade_base(delta);
        let sys = System::port1(&params).unwrap();
        let l = build_liouvillian(&sys.hamiltonian, &sys.channels).unwrap();
        let sol = steady_state_detailed(&l).unwrap();
        worst_residual = worst_residual.max(sol.relative_residual);
        sol.rho.validate().unwrap();
    }
    assert!(worst_residual < 1e-10);

    // Superoperator matrix action vs the direct operator form on 20 random
    // triples.
    let worst_action = random_triple_deviation();
    assert!(worst_action < 1e-12, "matrix vs direct action deviation {worst_action:e}");

    // Factorized vs full three-mode agreement at cutoffs (3, 3, 6).
    let worst_split = factorized_vs_full_deviation();
    assert!(worst_split < 1e-8, "factorized vs full deviation {worst_split:e}");

    // Cutoff convergence certifies for every preset at 1e-6.
    let mut certified = Vec::new();
    for name in sweep::preset_names() {
        let kvs = parse_key_values(sweep::preset(name).unwrap()).unwrap();
        let cfg = config_from_key_values(&kvs).unwrap();
        let sweep_value = match cfg.variable {
            sweep::SweepVariable::Delta => cfg.base.delta_over_g.unwrap_or(SQRT2),
            sweep::SweepVariable::ThermalPhonons => cfg.max,
            sweep::SweepVariable::Tau => 0.0,
        };
        let params = cfg.params_at(sweep_value).unwrap();
        let observables: Vec<TransportObservable> = cfg
            .outputs
            .iter()
            .map(|o| match o {
                sweep::OutputColumn::Scalar(obs) => *obs,
                sweep::OutputColumn::G2Tau21 => TransportObservable::G2Of21,
                sweep::OutputColumn::G2Tau12 => TransportObservable::G2Of12,
            })
            .collect();
        let report =
            converge_transport_cutoffs(&params, &observables, &ConvergencePolicy::default())
                .unwrap_or_else(|e| panic!("preset '{name}' failed to certify: {e}"));
        certified.push((name, report.certified_photon, report.certified_phonon));
    }
    println!(
        "[PASS] criterion 9: residuals < 1e-10 (worst {worst_residual:.2e}); action oracle \
         {worst_action:.2e}; factorized-vs-full {worst_split:.2e}; certified cutoffs {certified:?}"
    );
}

fn random_triple_deviation() -> f64 {
    use optoblock::fock::{HilbertSpec, Operator};
    use optoblock::model::CollapseChannel;

    // Small deterministic xorshift so the suite stays dependency-light.
    let mut state = 0x1234_5678_9abc_def0u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let dims: Vec<usize> = if trial % 2 == 0 { vec![3] } else { vec![2, 3] };
        let space = HilbertSpec::new(&dims).unwrap();
        let d = space.dim();
        let mut random_op = |scale: f64| {
            let trips: Vec<(usize, usize, num_complex::Complex64)> = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, num_complex::Complex64::new(next() * scale, next() * scale)))
                .collect();
            Operator::from_triplets(space.clone(), &trips).unwrap()
        };
        let h_raw = random_op(1.0);
        let chan_op_1 = random_op(1.0);
        let chan_op_2 = random_op(0.5);
        let h = h_raw.try_add(&h_raw.adjoint()).unwrap().scale(0.5.into());
        let channels = vec![
            CollapseChannel { op: chan_op_1, rate: next().abs() },
            CollapseChannel { op: chan_op_2, rate: next().abs() * 2.0 },
        ];
        let l = build_liouvillian(&h, &channels).unwrap();
        let mut rho_raw = vec![num_complex::Complex64::default(); d * d];
        for v in rho_raw.iter_mut() {
            *v = num_complex::Complex64::new(next(), next());
        }
        // Hermitian, unit trace.
        let mut rho = vec![num_complex::Complex64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                rho[i + d * j] =
                    0.5 * (rho_raw[i + d * j] + rho_raw[j + d * i].conj());
            }
        }
        let tr: num_complex::Complex64 = (0..d).map(|k| rho[k + d * k]).sum();
        let shift = (num_complex::Complex64::new(1.0, 0.0) - tr) / d as f64;
        for k in 0..d {
            rho[k + d * k] += shift;
        }
        let dm = DensityMatrix::from_col_major(space.clone(), rho).unwrap();
        let via_matrix = l.apply(dm.entries());
        let direct = Superoperator::direct_action(&h, &channels, &dm).unwrap();
        let dev = via_matrix
            .iter()
            .zip(direct.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    worst
}

fn factorized_vs_full_deviation() -> f64 {
    let params = SystemParams::with_half_mech_detuning(SQRT2 * 1.5, 1.5, 0.1, 0.01, 0.3, 3, 6);
    let mut worst = 0.0f64;

    // Port 1 observables both ways.
    let p1 = System::port1(&params).unwrap();
    let l1 = build_liouvillian(&p1.hamiltonian, &p1.channels).unwrap();
    let rho1 = steady_state_detailed(&l1).unwrap().rho;
    let t21_fact = transmission(&p1, &rho1, Direction::OneToTwo).unwrap();
    let g2_21_fact = g2_zero(&p1, &rho1, OpticalMode::Left).unwrap();

    let full1 = System::full(&params, ProbePort::One).unwrap();
    let lf1 = build_liouvillian(&full1.hamiltonian, &full1.channels).unwrap();
    let rho_f1 = steady_state_detailed(&lf1).unwrap().rho;
    let t21_full = transmission(&full1, &rho_f1, Direction::OneToTwo).unwrap();
    let g2_21_full = g2_zero(&full1, &rho_f1, OpticalMode::Left).unwrap();
    worst = worst.max((t21_fact - t21_full).abs());
    worst = worst.max((g2_21_fact - g2_21_full).abs());

    // Port 2 observables both ways.
    let p2 = System::port2(&params).unwrap();
    let l2 = build_liouvillian(&p2.hamiltonian, &p2.channels).unwrap();
    let rho2 = steady_state_detailed(&l2).unwrap().rho;
    let t12_fact = transmission(&p2, &rho2, Direction::TwoToOne).unwrap();
    let g2_12_fact = g2_zero(&p2, &rho2, OpticalMode::Right).unwrap();

    let full2 = System::full(&params, ProbePort::Two).unwrap();
    let lf2 = build_liouvillian(&full2.hamiltonian, &full2.channels).unwrap();
    let rho_f2 = steady_state_detailed(&lf2).unwrap().rho;
    let t12_full = transmission(&full2, &rho_f2, Direction::TwoToOne).unwrap();
    let g2_12_full = g2_zero(&full2, &rho_f2, OpticalMode::Right).unwrap();
    worst = worst.max((t12_fact - t12_full).abs());
    worst = worst.max((g2_12_fact - g2_12_full).abs());
    worst
}
