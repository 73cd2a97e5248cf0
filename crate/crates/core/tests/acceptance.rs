//! Acceptance criteria. Every test writes one `criterion NN PASS|FAIL` line
//! straight to stdout, so the lines appear even when the harness captures
//! output.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::{gaussian_density, gaussian_vector, haar_unitary, product_vector};
use disent_core::bases::pauli;
use disent_core::dynamics::{
    integrate_master, integrate_sle_ensemble, kraus_step_error, steady_state, IntegratorConfig,
    Method, SleModel, SpinDamping, TrajectoryRecord,
};
use disent_core::entangle::{
    delta_measure, entanglement_k, entanglement_l, g_matrix_of_state, q_bloch_operators,
    s_matrix_t2, state_matrix, tau_ab, weyl_t2_expectation, DisentanglementSpec, ThetaBuilder,
    ThetaFamily,
};
use disent_core::bases::weyl_s_matrix;
use disent_core::qcore::{
    c, expectation, herm_eig, kron, projector, trace_product, Factorization,
    QuantumState, StateVector, DEFAULT_LOG_FLOOR,
};
use disent_core::twospin::{
    classify_attractor, experiment_preset, fig3_damping, run_sweep, single_spin_hamiltonian,
    thermal_temperature, AttractorKind, AttractorVerdict, ExperimentPreset, InitialState,
    SweepAxis, SweepGrid, DEFAULT_AMP_THRESHOLD, DEFAULT_TRANSIENT_FRACTION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n:02} {verdict} {name}: {detail}");
    let _ = out.flush();
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn two_qubit(psi: &StateVector) -> QuantumState {
    QuantumState::pure(psi.clone(), Some(Factorization::two_qubits())).unwrap()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Closed-form steady polarization of a driven spin, from T₁, T₂ and P_z0.
fn bloch_oracle(delta: f64, omega1: f64, gamma1: f64, gamma_phi: f64, n0: f64) -> [f64; 3] {
    let p = -1.0 / (2.0 * n0 + 1.0);
    let t1 = -p / gamma1;
    let t2 = -p / (gamma1 / 2.0 + gamma_phi);
    let den = 1.0 + delta * delta * t2 * t2 + omega1 * omega1 * t1 * t2;
    [
        delta * omega1 * t2 * t2 * p / den,
        -omega1 * t2 * p / den,
        (1.0 + delta * delta * t2 * t2) * p / den,
    ]
}

#[test]
fn criterion_01_single_spin_steady_state() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let [sx, sy, sz] = pauli();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let delta = rng.random_range(-2.0..2.0);
        let omega1 = rng.random_range(0.05..2.0);
        let gamma1 = rng.random_range(0.01..1.0);
        let gamma_phi = rng.random_range(0.0..0.5);
        let n0 = rng.random_range(0.0..5.0);
        let s = SpinDamping::new(gamma1, gamma_phi, n0).unwrap();
        let rho = steady_state(&single_spin_hamiltonian(delta, omega1), &s.jump_operators()).unwrap();
        let got = [&sx, &sy, &sz].map(|o| trace_product(&rho, o).re);
        let want = bloch_oracle(delta, omega1, gamma1, gamma_phi, n0);
        worst = worst.max(max_dev(&got, &want));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "analytic single-spin steady state",
        worst <= 1e-9 && secs < 1.0,
        &format!("max |<σ> - oracle| = {worst:.2e} over 20 tuples (tol 1e-9), {secs:.3} s (limit 1 s)"),
    );
}

#[test]
fn criterion_02_entanglement_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut e_tau, mut e_g, mut e_kl, mut e_q) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let psi = gaussian_vector(&mut rng, 4);
        let st = two_qubit(&psi);
        let d = delta_measure(&psi).unwrap();
        e_tau = e_tau.max((tau_ab(&st).unwrap() - 2.0 * d * (1.0 + d / 2.0) / 3.0).abs());
        let g = herm_eig(&g_matrix_of_state(&st).unwrap()).unwrap();
        let r = (1.0 - d).max(0.0).sqrt();
        e_g = e_g.max(max_dev(&g.values, &[0.5 * (1.0 - r), 0.5 * (1.0 + r)]));
        let k = entanglement_k(&st).unwrap();
        let l = entanglement_l(&st).unwrap();
        e_kl = e_kl.max((2.0 * k - l).abs());
        let (qa, qb) = q_bloch_operators(&st, DEFAULT_LOG_FLOOR).unwrap();
        e_q = e_q
            .max((expectation(&st, &qa.matrix).unwrap() - l).abs())
            .max((expectation(&st, &qb.matrix).unwrap() - l).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = e_tau <= 1e-9 && e_g <= 1e-10 && e_kl <= 1e-8 && e_q <= 1e-8 && secs < 5.0;
    report(
        2,
        "entanglement identities",
        pass,
        &format!(
            "200 states: τ-δ {e_tau:.1e} (1e-9), G spectrum {e_g:.1e} (1e-10), 2K-L {e_kl:.1e} (1e-8), <Q_a|b>-L {e_q:.1e} (1e-8), {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_03_local_unitary_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let u = kron(&haar_unitary(&mut rng, 2), &haar_unitary(&mut rng, 2));
        let (before, after) = if k % 2 == 0 {
            let psi = gaussian_vector(&mut rng, 4);
            let moved = &u * &psi;
            (two_qubit(&psi), two_qubit(&moved))
        } else {
            let rho = gaussian_density(&mut rng, 4);
            let moved = &u * &rho * u.adjoint();
            (
                QuantumState::two_qubit_mixed(rho).unwrap(),
                QuantumState::two_qubit_mixed(moved).unwrap(),
            )
        };
        worst = worst.max((tau_ab(&before).unwrap() - tau_ab(&after).unwrap()).abs());
    }
    report(
        3,
        "local-unitary invariance of τ_ab",
        worst <= 1e-9,
        &format!("max |Δτ| = {worst:.2e} over 100 U_a⊗U_b (tol 1e-9)"),
    );
}

const DISENTANGLING: [ThetaFamily; 4] = [
    ThetaFamily::CorrSuppress,
    ThetaFamily::BlochDerankA,
    ThetaFamily::BlochDerankB,
    ThetaFamily::StateMatrixDerank,
];

#[test]
fn criterion_04_product_state_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let builders: Vec<ThetaBuilder> = DISENTANGLING
        .iter()
        .map(|&f| {
            ThetaBuilder::new(
                DisentanglementSpec::new(f, 1.0),
                Factorization::two_qubits(),
                None,
                DEFAULT_LOG_FLOOR,
            )
            .unwrap()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let psi = product_vector(&gaussian_vector(&mut rng, 2), &gaussian_vector(&mut rng, 2));
        for b in &builders {
            let theta = b.build_pure(&psi).unwrap().unwrap();
            worst = worst.max(theta.schrodinger_drift(&psi).norm());
        }
    }
    report(
        4,
        "product-state no-op",
        worst <= 1e-6,
        &format!("max drift norm = {worst:.2e} over 50 states x 4 families at γ_D = 1 (tol 1e-6)"),
    );
}

const FIG2: [&str; 6] = ["fig2-A1", "fig2-A2", "fig2-A3", "fig2-B1", "fig2-B2", "fig2-B3"];

fn preset_initial(p: &ExperimentPreset) -> QuantumState {
    let rho = match p.initial {
        InitialState::SteadyState => p.linear_steady_state().unwrap(),
        InitialState::SteadyStatePure => projector(&p.pure_initial_state().unwrap()),
    };
    QuantumState::two_qubit_mixed(rho).unwrap()
}

fn run_preset(name: &str) -> TrajectoryRecord {
    let p = experiment_preset(name).unwrap();
    integrate_master(&preset_initial(&p), &p.hamiltonian(), &p.disentangle, &p.damping, &p.integrator)
        .unwrap()
}

fn fig2_runs() -> &'static Vec<(&'static str, TrajectoryRecord)> {
    static RUNS: OnceLock<Vec<(&'static str, TrajectoryRecord)>> = OnceLock::new();
    RUNS.get_or_init(|| FIG2.iter().map(|&n| (n, run_preset(n))).collect())
}

#[test]
fn criterion_05_conservation() {
    let (mut tr, mut herm, mut eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for (_, rec) in fig2_runs() {
        tr = tr.max(rec.max_trace_err());
        herm = herm.max(rec.max_herm_err());
        eig = eig.min(rec.min_min_eig());
    }
    report(
        5,
        "conservation along fig2 runs",
        tr <= 1e-8 && herm <= 1e-9 && eig >= -1e-6,
        &format!("|Tr ρ - 1| {tr:.1e} (1e-8), Hermiticity {herm:.1e} (1e-9), min eig {eig:.2e} (>= -1e-6)"),
    );
}

#[test]
fn criterion_06_kraus_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let p = experiment_preset("fig2-A2").unwrap();
    let h = p.hamiltonian();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..20 {
        let rho = gaussian_density(&mut rng, 4);
        let fam = DISENTANGLING[k % 4];
        let theta = ThetaBuilder::new(
            DisentanglementSpec::new(fam, 0.5),
            Factorization::two_qubits(),
            Some(&h),
            DEFAULT_LOG_FLOOR,
        )
        .unwrap()
        .build(&rho)
        .unwrap()
        .unwrap();
        let tau = 1e-3;
        let ratio = kraus_step_error(&rho, &h, &theta, tau).unwrap()
            / kraus_step_error(&rho, &h, &theta, tau / 2.0).unwrap();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    report(
        6,
        "Kraus norm error is O(τ²)",
        (3.5..=4.5).contains(&lo) && (3.5..=4.5).contains(&hi),
        &format!("error(τ)/error(τ/2) in [{lo:.4}, {hi:.4}] over 20 states (accept [3.5, 4.5])"),
    );
}

#[test]
fn criterion_07_unravelling_equivalence() {
    let start = Instant::now();
    let p = experiment_preset("fig3-A").unwrap();
    let h = p.hamiltonian();
    let d = fig3_damping();
    let psi0 = p.pure_initial_state().unwrap();
    let n_traj = 2000;
    let cfg = IntegratorConfig {
        dt: 1e-4,
        t_end: 2.0,
        sample_every: 0.1,
        method: Method::EulerMaruyama,
        seed: 2024,
        ..IntegratorConfig::default()
    };
    let none = DisentanglementSpec::none();
    let model = SleModel::new(&h, &d, &none, Factorization::two_qubits(), DEFAULT_LOG_FLOOR).unwrap();
    let ens = integrate_sle_ensemble(&psi0, &model, &cfg, n_traj, 0).unwrap();
    let master_cfg = IntegratorConfig { method: Method::Rk4, ..cfg };
    let initial = QuantumState::two_qubit_mixed(projector(&psi0)).unwrap();
    let rec = integrate_master(&initial, &h, &none, &d, &master_cfg).unwrap();
    let mean = ens.mean_bloch().unwrap();
    let mut worst: f64 = 0.0;
    for (k, (ka, kb)) in mean.iter().enumerate() {
        worst = worst.max(max_dev(ka, &rec.k_a[k])).max(max_dev(kb, &rec.k_b[k]));
    }
    let tol = 4.0 / (n_traj as f64).sqrt();
    let same_grid = mean.len() == rec.len();
    report(
        7,
        "trajectory ensemble reproduces GKSL",
        same_grid && worst <= tol,
        &format!(
            "max |mean k - GKSL k| = {worst:.3e} at {} samples (tol {tol:.3}), {:.1} s",
            mean.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_weyl_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut e_prod: f64 = 0.0;
    for _ in 0..20 {
        let psi = product_vector(&gaussian_vector(&mut rng, 2), &gaussian_vector(&mut rng, 2));
        e_prod = e_prod.max((s_matrix_t2(&two_qubit(&psi)).unwrap() - 1.0).abs());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = StateVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
    let e_bell = (s_matrix_t2(&two_qubit(&bell)).unwrap() - 0.25).abs();
    let (mut e_t2, mut e_spec) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let psi = gaussian_vector(&mut rng, 4);
        let st = two_qubit(&psi);
        e_t2 = e_t2.max((weyl_t2_expectation(&st).unwrap() - s_matrix_t2(&st).unwrap()).abs());
        let sm = weyl_s_matrix(&st).unwrap();
        let m = state_matrix(&psi, Factorization::two_qubits()).unwrap().0;
        let mm = m.adjoint() * &m;
        let a = herm_eig(&(sm.adjoint() * &sm)).unwrap().values;
        let b = herm_eig(&kron(&mm, &mm)).unwrap().values;
        e_spec = e_spec.max(max_dev(&a, &b));
    }
    let pass = e_prod <= 1e-9 && e_bell <= 1e-9 && e_t2 <= 1e-9 && e_spec <= 1e-10;
    report(
        8,
        "Weyl suite",
        pass,
        &format!(
            "product T2-1 {e_prod:.1e}, Bell T2-1/4 {e_bell:.1e}, <T2>-Tr((S'S)^2) {e_t2:.1e} (1e-9), spectra {e_spec:.1e} (1e-10)"
        ),
    );
}

#[test]
fn criterion_09_fig1_sweep() {
    let start = Instant::now();
    let p = experiment_preset("fig1-sweep").unwrap();
    let grid = p.sweep.unwrap();
    let table = run_sweep(&p.model, &p.damping, &grid).unwrap();
    let (i, j) = table.argmax_tau();
    let near = grid.near_matching_circle(i, j, p.model.omega_a);
    let j07 = grid.omega1.nearest(0.7);
    let t_bath = thermal_temperature(p.damping.a.n0, p.model.omega_a).unwrap();
    let (mut checked, mut wrong) = (0, Vec::new());
    for ii in 0..grid.delta.n {
        let row = table.row(ii, j07);
        if row.delta.abs() < 1e-12 {
            continue;
        }
        checked += 1;
        let diff = row.t_eff - t_bath;
        if !(diff.signum() == -row.delta.signum()) || diff == 0.0 {
            wrong.push(row.delta);
        }
    }
    let r = table.row(i, j);
    report(
        9,
        "fig1 sweep",
        near && wrong.is_empty() && checked > 0,
        &format!(
            "τ argmax at (Δ, ω1) = ({:.3}, {:.3}), ω_R = {:.3}, near circle: {near}; sign(T_eff - T) = -sign(Δ) at {}/{checked} cells on ω1 = {:.3}; {:.1} s",
            r.delta,
            r.omega1,
            r.delta.hypot(r.omega1),
            checked - wrong.len(),
            grid.omega1.value(j07),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_fig2_verdicts() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, rec) in fig2_runs() {
        let v: AttractorVerdict =
            classify_attractor(rec, DEFAULT_TRANSIENT_FRACTION, DEFAULT_AMP_THRESHOLD).unwrap();
        let want = if name.ends_with('1') {
            AttractorKind::FixedPoint
        } else {
            AttractorKind::LimitCycle
        };
        pass &= v.kind == want;
        lines.push(format!("{name} {:?} (want {want:?}, amp {:.1e})", v.kind, v.amplitude));
    }
    report(10, "fig2 attractor verdicts", pass, &lines.join("; "));
}

fn ensemble_bits(threads: usize) -> (Vec<u64>, String) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let p = experiment_preset("fig3-B").unwrap();
        let h = p.hamiltonian();
        let model = SleModel::new(&h, &p.damping, &p.disentangle, Factorization::two_qubits(), DEFAULT_LOG_FLOOR)
            .unwrap();
        let cfg = IntegratorConfig { t_end: 0.2, sample_every: 0.02, seed: 99, ..p.integrator };
        let ens = integrate_sle_ensemble(&p.pure_initial_state().unwrap(), &model, &cfg, 70, 2).unwrap();
        let bits = ens
            .mean_rho
            .iter()
            .flat_map(|m| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
            .collect();
        (bits, serde_json::to_string(&ens.records).unwrap())
    })
}

fn sweep_json(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let p = experiment_preset("fig1-sweep").unwrap();
        let grid = SweepGrid {
            delta: SweepAxis { min: -2.0, max: 2.0, n: 9 },
            omega1: SweepAxis { min: 0.2, max: 1.8, n: 9 },
        };
        serde_json::to_string(&run_sweep(&p.model, &p.damping, &grid).unwrap()).unwrap()
    })
}

#[test]
fn criterion_11_determinism() {
    let master = || {
        let p = experiment_preset("fig2-A2").unwrap();
        let cfg = IntegratorConfig { t_end: 10.0, ..p.integrator };
        let rec = integrate_master(&preset_initial(&p), &p.hamiltonian(), &p.disentangle, &p.damping, &cfg)
            .unwrap();
        serde_json::to_string(&rec).unwrap()
    };
    let master_same = master() == master();
    let e1 = ensemble_bits(1);
    let e3 = ensemble_bits(3);
    let ensemble_same = e1 == e3 && e1 == ensemble_bits(1);
    let sweep_same = sweep_json(1) == sweep_json(4);
    report(
        11,
        "determinism",
        master_same && ensemble_same && sweep_same,
        &format!(
            "master repeat identical: {master_same}; ensemble identical at 1 and 3 threads: {ensemble_same}; sweep identical at 1 and 4 threads: {sweep_same}"
        ),
    );
}
