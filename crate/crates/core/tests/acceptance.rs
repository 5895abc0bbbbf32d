//! Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfring::basis::{enumerate_sector, ExcitonConfig, SiteLabel, SpinMode};
use sfring::dynamics::{propagate_unitary, McwfConfig, PropagatorConfig, TimeGrid};
use sfring::ensemble::{run_ensemble, size_fit, EnsembleConfig, EnsembleStats};
use sfring::hamiltonian::{
    build_exciton_free, build_exciton_hamiltonian, build_h_int, sample_disorder,
    DisorderRealization, ModelParams, SpinfulParams,
};
use sfring::observables::{
    is_steady, resonant_reference, select_initial_state, InitialMethod, InitialStateSpec,
};
use sfring::optimize::{gamma_sweep, EvalConfig, ParameterSpace};
use sfring::oracle::FullSpace;
use sfring::perturbative::{
    fgr_rate, transition_element_1s_2t, transition_element_general, transition_element_spinful,
    BroadeningSpec, EigenDistribution, SpinfulPairAmplitudes, Weighting,
};
use sfring::phonon::PhononParams;
use sfring::simulate::{simulate, OpenSolver, SimulationSpec};
use sfring::validate::{mcwf_outlier_fraction, random_box_params};

fn report(id: u32, name: &str, passed: bool, detail: String) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{name}]: {verdict} {detail}");
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Four Rabi periods of the resonant pair; returns `(max |delta|, eta_bar)`.
fn resonant_run(n: usize, gamma: f64) -> (f64, f64) {
    let spec = SimulationSpec::closed(
        n,
        ModelParams::resonant(1.0, -0.1, gamma),
        InitialStateSpec::default_for(1),
        TimeGrid::new(2.0 * PI / gamma, 801).unwrap(),
    );
    let s = simulate(&spec, &DisorderRealization::zero(n)).unwrap();
    let reference = resonant_reference(gamma, &s.times).unwrap();
    (
        max_abs_diff(&s.n_t, &reference),
        s.time_average().unwrap().mean,
    )
}

#[test]
fn criterion_01_resonant_oracle() {
    let start = Instant::now();
    let (err, eta_bar) = resonant_run(6, 0.05);
    let secs = start.elapsed().as_secs_f64();
    let passed = err <= 1e-8 && (eta_bar - 0.5).abs() <= 1e-6 && secs < 1.0;
    report(
        1,
        "resonant oracle",
        passed,
        format!("max|dN_T| = {err:.2e} (tol 1e-8), eta_bar = {eta_bar:.8} (0.5 +- 1e-6), {secs:.3}s (< 1s)"),
    );
    assert!(passed);
}

#[test]
fn criterion_02_resonant_universality() {
    let start = Instant::now();
    let mut worst_err: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    for n in [4, 8, 12] {
        for gamma in [0.01, 0.1, 0.4] {
            let (err, eta_bar) = resonant_run(n, gamma);
            worst_err = worst_err.max(err);
            worst_eta = worst_eta.max((eta_bar - 0.5).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst_err <= 1e-8 && worst_eta <= 1e-6 && secs < 30.0;
    report(
        2,
        "resonant universality",
        passed,
        format!("N in {{4,8,12}}, gamma in {{0.01,0.1,0.4}}: max|dN_T| = {worst_err:.2e}, max|eta_bar - 0.5| = {worst_eta:.2e}, {secs:.2}s"),
    );
    assert!(passed);
}

#[test]
fn criterion_03_conservation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut charge: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let n0 = rng.random_range(1..=n.min(3));
        let p = random_box_params(&mut rng);
        let spec = SimulationSpec::closed(
            n,
            p,
            InitialStateSpec::default_for(n0),
            TimeGrid::new(50.0, 51).unwrap(),
        );
        let dis = spec.sample_disorder(rng.random()).unwrap();
        let basis = spec.sector().unwrap();
        let psi0 = select_initial_state(&spec.initial, &basis, &p, &dis).unwrap();
        let h = build_exciton_hamiltonian(&basis, &p, None, &dis).unwrap();
        for psi in propagate_unitary(&h, &psi0, &spec.grid, &spec.propagator).unwrap() {
            norm = norm.max((psi.norm() - 1.0).abs());
        }
        charge = charge.max(simulate(&spec, &dis).unwrap().charge_drift());
    }
    let closed_secs = start.elapsed().as_secs_f64();
    let mut open_charge: f64 = 0.0;
    for k in 0..10 {
        let (n, d_ph) = [(2, 3), (3, 3), (4, 2)][k % 3];
        let base = random_box_params(&mut rng);
        let space = ParameterSpace::default_box(base, Some(PhononParams::optimised_dissipative()));
        let u: Vec<f64> = (0..space.dim()).map(|_| rng.random::<f64>()).collect();
        let (model, phonons) = space.materialize(&space.from_unit(&u)).unwrap();
        let mut phonons = phonons.unwrap();
        phonons.d_ph = d_ph;
        let spec = SimulationSpec::open(
            n,
            model,
            phonons,
            InitialStateSpec::default_for(1),
            TimeGrid::new(40.0, 21).unwrap(),
        );
        let dis = spec.sample_disorder(rng.random()).unwrap();
        open_charge = open_charge.max(simulate(&spec, &dis).unwrap().charge_drift());
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = charge <= 1e-10 && norm <= 1e-10 && open_charge <= 1e-10 && secs < 120.0;
    report(
        3,
        "conservation",
        passed,
        format!(
            "closed: max|<C>-C0| = {charge:.2e}, norm drift = {norm:.2e} ({closed_secs:.2}s); open: max|<C>-C0| = {open_charge:.2e}; total {secs:.1}s"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_04_full_space_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for mode in [SpinMode::Spinless, SpinMode::Spinful] {
        for n in 2..=4 {
            let mut p = random_box_params(&mut rng);
            let sp = (mode == SpinMode::Spinful).then(|| {
                p.chi = 0.0;
                p.sigma_chi = 0.0;
                let mut s = SpinfulParams::isotropic(p.j_t);
                s.j_t_mm[0][2] = 0.03;
                s.j_t_mm[2][0] = 0.03;
                s.b = [0.02, 0.01, -0.03];
                s.d = [[0.01, 0.0, 0.004], [0.0, -0.01, 0.0], [0.004, 0.0, 0.05]];
                s.chi_iso = 0.04;
                s
            });
            let dis = sample_disorder(&p, n, rng.random()).unwrap();
            let fs = FullSpace::new(n, mode).unwrap();
            let full = fs.hamiltonian(&p, sp.as_ref(), &dis).to_dense();
            let eig = full.symmetric_eigen();
            for n0 in 1..=n.min(2) {
                let basis = enumerate_sector(n, 2 * n0, mode).unwrap();
                let h = build_exciton_hamiltonian(&basis, &p, sp.as_ref(), &dis).unwrap();
                let psi0 =
                    select_initial_state(&InitialStateSpec::default_for(n0), &basis, &p, &dis)
                        .unwrap();
                let grid = TimeGrid::new(60.0, 13).unwrap();
                let states =
                    propagate_unitary(&h, &psi0, &grid, &PropagatorConfig::default()).unwrap();
                let c =
                    eig.eigenvectors.adjoint() * DVector::from_vec(fs.lift(&basis, &psi0).unwrap());
                for (t, psi) in grid.times().into_iter().zip(&states) {
                    let phased = DVector::from_iterator(
                        c.len(),
                        c.iter()
                            .zip(eig.eigenvalues.iter())
                            .map(|(a, &e)| a * C64::new(0.0, -e * t).exp()),
                    );
                    let full_t = &eig.eigenvectors * phased;
                    let f = DVector::from_vec(fs.lift(&basis, psi).unwrap())
                        .dotc(&full_t)
                        .norm_sqr();
                    worst = worst.max(1.0 - f);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-10 && secs < 60.0;
    report(
        4,
        "full-space equivalence",
        passed,
        format!("N = 2..4 spinless and spinful, n0 = 1, 2: max(1 - fidelity) = {worst:.2e} (tol 1e-10), {secs:.2}s"),
    );
    assert!(passed);
}

#[test]
fn criterion_05_mcwf_unbiasedness() {
    let start = Instant::now();
    // damped single mode: L = a at rate 0.1, initial Fock 1
    use sfring::dynamics::{propagate_mcwf, StateVector};
    use sfring::phonon::{ladder, Jump, LindbladSpec};
    use sfring::sparse::{BasisTag, SparseOperator};
    let tag = BasisTag::sector(1, 0, SpinMode::Spinless).embedded(2);
    let a = ladder(2).map(|x| C64::new(x, 0.0));
    let h = SparseOperator::from_diagonal(tag, &[0.0, 0.25]);
    let jumps = LindbladSpec {
        jumps: vec![Jump {
            label: "a".into(),
            op: SparseOperator::from_dense(tag, &a),
            rate: 0.1,
        }],
    };
    let n_op = SparseOperator::from_diagonal(tag, &[0.0, 1.0]);
    let grid = TimeGrid::new(40.0, 41).unwrap();
    let cfg = PropagatorConfig {
        mcwf: McwfConfig {
            n_traj: 2000,
            seed: 12,
            ..Default::default()
        },
        ..Default::default()
    };
    let ens = propagate_mcwf(
        &h,
        &jumps,
        &StateVector::basis_state(tag, 2, 1),
        &grid,
        &cfg,
        &[&n_op],
    )
    .unwrap();
    let exact: Vec<f64> = grid.times().iter().map(|t| (-0.1 * t).exp()).collect();
    let frac_damped = mcwf_outlier_fraction(&ens.mean[0], &ens.stderr[0], &exact);

    // N = 2 dissipative row against exact Liouville
    let mut phonons = PhononParams::optimised_dissipative();
    phonons.d_ph = 3;
    let model = ModelParams::optimised_dissipative();
    let mut spec = SimulationSpec::open(
        2,
        model,
        phonons,
        InitialStateSpec::default_for(1),
        TimeGrid::new(20.0 / model.gamma, 41).unwrap(),
    );
    spec.propagator.mcwf = McwfConfig {
        n_traj: 2000,
        seed: 5,
        ..Default::default()
    };
    let dis = DisorderRealization::zero(2);
    let exact_series = simulate(&spec, &dis).unwrap();
    spec.open_solver = OpenSolver::Mcwf;
    let traj = simulate(&spec, &dis).unwrap();
    let stderr = traj.stderr.as_ref().unwrap();
    let frac_row = mcwf_outlier_fraction(&traj.eta, &stderr[3], &exact_series.eta);
    let secs = start.elapsed().as_secs_f64();
    let passed = frac_damped <= 0.01 && frac_row <= 0.01 && secs < 300.0;
    report(
        5,
        "MCWF unbiasedness",
        passed,
        format!(
            "points beyond 3 stderr: damped mode {:.1}%, N=2 dissipative row {:.1}% (max 1%), 2000 trajectories, {secs:.1}s",
            100.0 * frac_damped,
            100.0 * frac_row
        ),
    );
    assert!(passed);
}

fn optimised_ensemble(n: usize, model: ModelParams, n_real: usize, seed: u64) -> EnsembleStats {
    let spec = SimulationSpec::closed(
        n,
        model,
        InitialStateSpec::default_for(1),
        TimeGrid::new(1.0, 401).unwrap(),
    );
    let cfg = EnsembleConfig {
        n_realizations: n_real,
        master_seed: seed,
        tau_over_gamma: Some(20.0),
        ..Default::default()
    };
    run_ensemble(&spec, &cfg).unwrap()
}

#[test]
fn criterion_06_non_dissipative_row() {
    let start = Instant::now();
    let stats = optimised_ensemble(10, ModelParams::optimised_closed(), 500, 1);
    let secs = start.elapsed().as_secs_f64();
    let passed =
        (0.80..=0.90).contains(&stats.eta_bar_mean) && stats.eta_bar_std <= 0.08 && secs < 300.0;
    report(
        6,
        "non-dissipative optimized row",
        passed,
        format!(
            "N=10, 500 realizations: eta_bar = {:.4} +- {:.4} (mean in [0.80, 0.90], std <= 0.08), {secs:.1}s",
            stats.eta_bar_mean, stats.eta_bar_std
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_07_size_scaling() {
    let start = Instant::now();
    let sizes = [4, 6, 8, 12, 16];
    let rows: Vec<(usize, f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let s = optimised_ensemble(n, ModelParams::optimised_closed(), 500, 2);
            (n, s.eta_bar_mean, s.eta_bar_std)
        })
        .collect();
    let mut increasing = true;
    for w in rows.windows(2) {
        let combined = (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        increasing &= w[1].1 > w[0].1 - combined;
    }
    let near_fit = rows
        .iter()
        .all(|&(n, m, s)| (m - size_fit(n)).abs() <= 3.0 * s);
    let secs = start.elapsed().as_secs_f64();
    let passed = increasing && near_fit && secs < 900.0;
    let table: Vec<String> = rows
        .iter()
        .map(|(n, m, s)| format!("N={n}: {m:.3}+-{s:.3} (fit {:.3})", size_fit(*n)))
        .collect();
    report(
        7,
        "size scaling",
        passed,
        format!(
            "{}; increasing = {increasing}, within 3 std of fit = {near_fit}, {secs:.1}s",
            table.join(", ")
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_08_disorder_benefit() {
    let start = Instant::now();
    let with = optimised_ensemble(6, ModelParams::optimised_closed(), 300, 3);
    let without = optimised_ensemble(
        6,
        ModelParams {
            sigma_j_t: 0.0,
            ..ModelParams::optimised_closed()
        },
        300,
        3,
    );
    let secs = start.elapsed().as_secs_f64();
    let passed = with.eta_bar_mean > without.eta_bar_mean
        && with.mean_eta_fluctuation < without.mean_eta_fluctuation
        && secs < 300.0;
    report(
        8,
        "disorder benefit",
        passed,
        format!(
            "N=6, 300 realizations: eta_bar {:.4} (sigma_JT=0.114) vs {:.4} (0); time-RMS {:.4} vs {:.4}, {secs:.1}s",
            with.eta_bar_mean, without.eta_bar_mean, with.mean_eta_fluctuation, without.mean_eta_fluctuation
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_09_sf_blockade() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let p = random_box_params(&mut rng);
        let spec = SimulationSpec::closed(
            6,
            p,
            InitialStateSpec {
                n0: 6,
                method: InitialMethod::SectorGroundState,
            },
            TimeGrid::new(100.0, 101).unwrap(),
        );
        let dis = spec.sample_disorder(rng.random()).unwrap();
        let s = simulate(&spec, &dis).unwrap();
        worst = worst.max(s.eta.iter().map(|e| e.abs()).fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-12 && secs < 1.0;
    report(
        9,
        "SF blockade",
        passed,
        format!("n0 = N = 6: max|eta| = {worst:.1e} (tol 1e-12), {secs:.3}s"),
    );
    assert!(passed);
}

fn dissipative_eta(d_ph: usize, gamma: f64) -> (f64, bool) {
    let mut phonons = PhononParams::optimised_dissipative();
    phonons.d_ph = d_ph;
    let model = ModelParams {
        gamma,
        ..ModelParams::optimised_dissipative()
    };
    let spec = SimulationSpec::open(
        2,
        model,
        phonons,
        InitialStateSpec::default_for(1),
        TimeGrid::new(20.0 / gamma, 201).unwrap(),
    );
    let s = simulate(&spec, &DisorderRealization::zero(2)).unwrap();
    (s.final_eta(), is_steady(&s.times, &s.eta, gamma))
}

/// Smallest `d_ph >= 3` whose steady `eta` moves by less than 1e-3 at `d_ph + 2`.
fn converged_d_ph() -> (usize, Vec<(usize, f64)>) {
    let gamma = ModelParams::optimised_dissipative().gamma;
    let mut etas: Vec<(usize, f64)> = Vec::new();
    let eta_at = |d: usize, etas: &mut Vec<(usize, f64)>| -> f64 {
        if let Some(&(_, e)) = etas.iter().find(|(k, _)| *k == d) {
            return e;
        }
        let e = dissipative_eta(d, gamma).0;
        etas.push((d, e));
        e
    };
    let mut d = 3;
    loop {
        let a = eta_at(d, &mut etas);
        let b = eta_at(d + 2, &mut etas);
        if (a - b).abs() < 1e-3 || d >= 6 {
            etas.sort_by_key(|x| x.0);
            return (d, etas);
        }
        d += 1;
    }
}

#[test]
fn criterion_10_dissipative_row() {
    let start = Instant::now();
    let (d_ph, etas) = converged_d_ph();
    let gamma = ModelParams::optimised_dissipative().gamma;
    let (eta, steady) = dissipative_eta(d_ph, gamma);
    let monotone = etas
        .iter()
        .filter(|(d, _)| *d <= d_ph)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 1e-12);
    let secs = start.elapsed().as_secs_f64();
    let passed = eta >= 0.95 && steady && monotone && secs < 300.0;
    let table: Vec<String> = etas
        .iter()
        .map(|(d, e)| format!("d_ph={d}: {e:.5}"))
        .collect();
    report(
        10,
        "dissipative optimized row",
        passed,
        format!(
            "N=2, converged d_ph = {d_ph}: eta(tau) = {eta:.5} (>= 0.95), steady = {steady}, non-decreasing = {monotone} [{}], {secs:.1}s",
            table.join(", ")
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_11_gamma_non_monotonic() {
    let start = Instant::now();
    let base = ModelParams::optimised_dissipative();
    let phonons = PhononParams {
        d_ph: 4,
        ..PhononParams::optimised_dissipative()
    };
    let factors = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
    let gammas: Vec<f64> = factors.iter().map(|f| f * base.gamma).collect();
    let eval = EvalConfig::open(2, 20.0);
    let rows = gamma_sweep(&base, Some(&phonons), &gammas, &eval).unwrap();
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let best_interior = etas[1..etas.len() - 1]
        .iter()
        .copied()
        .fold(f64::MIN, f64::max);
    let passed = best_interior - etas[0] > 0.02 && best_interior - etas[etas.len() - 1] > 0.02;
    let secs = start.elapsed().as_secs_f64();
    let passed = passed && secs < 600.0;
    let table: Vec<String> = factors
        .iter()
        .zip(&etas)
        .map(|(f, e)| format!("{f}x: {e:.4}"))
        .collect();
    report(
        11,
        "gamma non-monotonicity",
        passed,
        format!(
            "N=2, d_ph=4, tau = 20/gamma: [{}]; interior max {best_interior:.4}, {secs:.1}s",
            table.join(", ")
        ),
    );
    assert!(passed);
}

fn random_c(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn config_of(labels: Vec<SiteLabel>) -> ExcitonConfig {
    ExcitonConfig::new(labels)
}

#[test]
fn criterion_12_perturbative_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let g = 0.37;
    let p = ModelParams {
        gamma: g,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut fs_cache: HashMap<(usize, SpinMode), (FullSpace, sfring::oracle::FullOperator)> =
        HashMap::new();
    let mut oracle = |n: usize, mode: SpinMode| {
        fs_cache
            .entry((n, mode))
            .or_insert_with(|| {
                let fs = FullSpace::new(n, mode).unwrap();
                let h = fs.h_int(&p, &DisorderRealization::zero(n));
                (fs, h)
            })
            .clone()
    };
    let single = |n: usize, i: usize, label: SiteLabel| {
        let mut l = vec![SiteLabel::S0; n];
        l[i] = label;
        config_of(l)
    };
    let pair = |n: usize, i: usize, a: SiteLabel, j: usize, b: SiteLabel| {
        let mut l = vec![SiteLabel::S0; n];
        l[i] = a;
        l[j] = b;
        config_of(l)
    };
    let triplets = [SiteLabel::TMinus, SiteLabel::TZero, SiteLabel::TPlus];

    for trial in 0..100 {
        let n = 2 + trial % 4;
        // one singlet to a spinless triplet pair
        let (fs, h) = oracle(n, SpinMode::Spinless);
        let c: Vec<C64> = (0..n).map(|_| random_c(&mut rng)).collect();
        let ct = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(0.0, 0.0)
            } else {
                random_c(&mut rng)
            }
        });
        let mut phi = vec![C64::new(0.0, 0.0); fs.dim()];
        let mut phi_p = vec![C64::new(0.0, 0.0); fs.dim()];
        for i in 0..n {
            phi[fs.index_of(&single(n, i, SiteLabel::S1)).unwrap()] += c[i];
            for j in 0..n {
                if i != j {
                    phi_p[fs
                        .index_of(&pair(n, i, SiteLabel::T1, j, SiteLabel::T1))
                        .unwrap()] += ct[(i, j)];
                }
            }
        }
        let brute = h.element(&phi_p, &phi);
        worst = worst.max((transition_element_1s_2t(&c, &ct, g).unwrap() - brute).norm());

        // general amplitude maps over random spinless configurations
        let mut amp = HashMap::new();
        let mut amp_p = HashMap::new();
        let mut v = vec![C64::new(0.0, 0.0); fs.dim()];
        let mut v_p = vec![C64::new(0.0, 0.0); fs.dim()];
        let labels = [SiteLabel::S0, SiteLabel::S1, SiteLabel::T1];
        for (map, vec) in [(&mut amp, &mut v), (&mut amp_p, &mut v_p)] {
            for _ in 0..8 {
                let cfg = config_of((0..n).map(|_| labels[rng.random_range(0..3)]).collect());
                let a = random_c(&mut rng);
                *map.entry(cfg.clone()).or_insert(C64::new(0.0, 0.0)) += a;
                vec[fs.index_of(&cfg).unwrap()] += a;
            }
        }
        let brute = h.element(&v_p, &v);
        worst = worst.max((transition_element_general(&amp, &amp_p, g).unwrap() - brute).norm());

        // spinful pair channels
        let (fs, h) = oracle(n, SpinMode::Spinful);
        let cts: SpinfulPairAmplitudes = std::array::from_fn(|_| {
            std::array::from_fn(|_| {
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        C64::new(0.0, 0.0)
                    } else {
                        random_c(&mut rng)
                    }
                })
            })
        });
        let mut phi = vec![C64::new(0.0, 0.0); fs.dim()];
        let mut phi_p = vec![C64::new(0.0, 0.0); fs.dim()];
        for i in 0..n {
            phi[fs.index_of(&single(n, i, SiteLabel::S1)).unwrap()] += c[i];
            for j in (0..n).filter(|&j| j != i) {
                for (a, ta) in triplets.iter().enumerate() {
                    for (b, tb) in triplets.iter().enumerate() {
                        phi_p[fs.index_of(&pair(n, i, *ta, j, *tb)).unwrap()] += cts[a][b][(i, j)];
                    }
                }
            }
        }
        let brute = h.element(&phi_p, &phi);
        worst = worst.max((transition_element_spinful(&c, &cts, g).unwrap() - brute).norm());
    }

    // golden-rule rate between the bright singlet and the triplet-pair manifold
    let basis = enumerate_sector(6, 2, SpinMode::Spinless).unwrap();
    let dis = DisorderRealization::zero(6);
    let rate = |gamma: f64| {
        let p = ModelParams::resonant(1.0, -0.1, gamma);
        let h0 = build_exciton_free(&basis, &p, None, &dis).unwrap();
        let h1 = build_h_int(&basis, &p, &dis).unwrap();
        let init =
            EigenDistribution::from_block(&h0, &basis.block_indices(1, 0), Weighting::Ground)
                .unwrap();
        let fin =
            EigenDistribution::from_block(&h0, &basis.block_indices(0, 2), Weighting::Uniform)
                .unwrap();
        fgr_rate(&init, &fin, &h1, &BroadeningSpec::default()).unwrap()
    };
    let ratio = rate(0.1) / rate(0.05);
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-12 && (ratio - 4.0).abs() <= 0.04 && secs < 60.0;
    report(
        12,
        "perturbative oracle",
        passed,
        format!("100 random pairs (N = 2..5): max|element - brute force| = {worst:.2e} (tol 1e-12); rate(2g)/rate(g) = {ratio:.6} (4 +- 1%), {secs:.2}s"),
    );
    assert!(passed);
}

#[test]
fn criterion_13_spinful_reduction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let mut p = random_box_params(&mut rng);
        p.chi = 0.0;
        p.sigma_chi = 0.0;
        p.sigma_j_t = 0.0;
        let grid = TimeGrid::new(60.0, 121).unwrap();
        let spinless = SimulationSpec::closed(4, p, InitialStateSpec::default_for(1), grid);
        let spinful = SimulationSpec {
            spin_mode: SpinMode::Spinful,
            spinful: Some(SpinfulParams::isotropic(p.j_t)),
            ..spinless.clone()
        };
        let dis = spinless.sample_disorder(rng.random()).unwrap();
        let a = simulate(&spinless, &dis).unwrap();
        let b = simulate(&spinful, &dis).unwrap();
        worst = worst.max(max_abs_diff(&a.n_t, &b.n_t));
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-8 && secs < 60.0;
    report(
        13,
        "spinful reduction",
        passed,
        format!("N=4, zero field and ZFS, chi=0: max|dN_T| = {worst:.2e} (tol 1e-8), {secs:.2}s"),
    );
    assert!(passed);
}
