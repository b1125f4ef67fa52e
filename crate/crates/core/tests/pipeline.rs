use std::f64::consts::PI;

use adlab::commutator::{convergence_study, CommutatorNorm, CommutatorStudyConfig, Verdict, WSource};
use adlab::io::{read_scalar, read_vector, write_scalar, write_vector};
use adlab::library::FieldSpec;
use adlab::mollifier::{Mollifier, Profile};
use adlab::regime::{classify, emit_region_map, RegimeQuery};
use adlab::solver::{solve, weak_residual, InitialDatum, SolverConfig, TestFunction, Velocity};
use adlab::{lp_norm, Exponent, TorusGrid};

fn grid(d: usize, n: usize) -> TorusGrid {
    TorusGrid::new(d, n).unwrap()
}

fn run(n: usize) -> Vec<f64> {
    let g = grid(2, n);
    let b = Velocity::from_spec(&FieldSpec::rotation_bump(1.0, 0.35), &g).unwrap();
    let u0 = InitialDatum::Bump { center: vec![0.3, 0.5], radius: 0.2 }.sample(&g).unwrap();
    let traj = solve(&b, &u0, &SolverConfig::cfl(0.05, 0.5)).unwrap();
    traj.final_state().values().to_vec()
}

#[test]
fn repeated_runs_are_bit_identical() {
    assert_eq!(run(64), run(64));
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| run(64));
    let b = four.install(|| run(64));
    assert_eq!(a, b);
}

#[test]
fn solution_round_trips_through_field_files() {
    let g = grid(2, 32);
    let b = Velocity::from_spec(&FieldSpec::taylor_green(1.0), &g).unwrap();
    let u0 = InitialDatum::SmoothRandom { seed: 9, max_mode: 5 }.sample(&g).unwrap();
    let traj = solve(&b, &u0, &SolverConfig::fixed(0.02, 1e-3)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.torf");
    write_scalar(&mut std::fs::File::create(&path).unwrap(), traj.final_state()).unwrap();
    let back = read_scalar(&mut std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(&back, traj.final_state());

    let vpath = dir.path().join("b.torf");
    let field = b.at(0.0).unwrap();
    write_vector(&mut std::fs::File::create(&vpath).unwrap(), &field).unwrap();
    let vb = read_vector(&mut std::fs::File::open(&vpath).unwrap()).unwrap();
    assert_eq!(vb.components(), field.components());
}

#[test]
fn solve_then_study_commutator_along_trajectory() {
    let g = grid(2, 64);
    let spec = FieldSpec::shear(1.0, 1);
    let b = Velocity::from_spec(&spec, &g).unwrap();
    let u0 = InitialDatum::Sine { axis: 1, k: 2, amplitude: 1.0 }.sample(&g).unwrap();
    let mut cfg = SolverConfig::fixed(0.02, 5e-4);
    cfg.record_every = 4;
    let traj = solve(&b, &u0, &cfg).unwrap();
    let study = CommutatorStudyConfig {
        b_spec: spec,
        grid: g,
        w_source: WSource::Trajectory(traj),
        delta0: 0.2,
        levels: 3,
        profile: Profile::BumpCompact,
        norm: CommutatorNorm::L2Hminus1,
        time_samples: 0,
        t_final: 0.02,
    };
    let table = convergence_study(&study).unwrap();
    assert_eq!(table.verdict, Verdict::Decay);
    assert!(table.strictly_decreasing());
}

#[test]
fn mollified_rough_run_satisfies_weak_formulation() {
    let g = grid(2, 64);
    let b = Velocity::from_spec(&FieldSpec::power_singularity(0.5, 1.25), &g).unwrap();
    let u0 = InitialDatum::SmoothRandom { seed: 2, max_mode: 3 }.sample(&g).unwrap();
    let mut cfg = SolverConfig::fixed(0.05, 2.5e-4);
    cfg.mollify_b = Some(Mollifier::gaussian(0.1).unwrap());
    cfg.record_every = 2;
    let traj = solve(&b, &u0, &cfg).unwrap();
    let phi = TestFunction::cosine_mode(0.05, [1, 1, 0], 0.3);
    let r = weak_residual(&traj, &b, &phi).unwrap();
    assert!(r <= 1e-6, "{r}");
}

#[test]
fn three_dimensional_heat_run() {
    let g = grid(3, 16);
    let u0 = InitialDatum::Sine { axis: 3, k: 1, amplitude: 2.0 }.sample(&g).unwrap();
    let traj = solve(&Velocity::zero(g), &u0, &SolverConfig::fixed(0.05, 0.01)).unwrap();
    let expected = u0.scale((-4.0 * PI * PI * 0.05).exp());
    assert!(lp_norm(&(traj.final_state() - &expected), 2.0).unwrap() <= 1e-12);
}

#[test]
fn oracle_and_map_agree() {
    let map = emit_region_map(3, 0.5, 17).unwrap();
    let q = RegimeQuery::from_exponents(3, Exponent(2.0), Exponent(4.0), Exponent(4.0)).unwrap();
    let direct = classify(&q).unwrap();
    // 1/4 = 4/16 is the node (4, 4)
    assert_eq!(map.cell(4, 4).report, direct);
    let mut csv = Vec::new();
    map.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 17 * 17 + 1);
}
