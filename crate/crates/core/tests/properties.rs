//! Invariances and structural properties of the objective and its minimizers.

use proptest::prelude::*;

use blobot::energy::{energies, nonlocal_energy, terminal_penalty_full, total_objective};
use blobot::optimize::{gd_run, init_straight_lines, OptimizerConfig};
use blobot::{
    Circle, Mollifier, ObstacleSet, PointCloud, ProblemSpec, TargetMeasure, TrajectoryField,
};

fn cloud(n: usize, d: usize, v: &[f64]) -> PointCloud {
    PointCloud::new(d, v[..n * d].to_vec()).unwrap()
}

fn field(n: usize, m: usize, d: usize, v: &[f64]) -> TrajectoryField {
    TrajectoryField::from_fn(n, m, d, 1, |i, j| {
        v[(i * m + j) * d..(i * m + j + 1) * d].to_vec()
    })
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn particle_relabeling_leaves_objective_unchanged(
        vals in prop::collection::vec(-2.0f64..2.0, 120),
        n in 1usize..6, m in 2usize..5, d in 1usize..3,
        eps in 0.05f64..2.0, delta in 0.2f64..1.0, rot in 0usize..6,
    ) {
        let t = field(n, m, d, &vals);
        let spec = ProblemSpec::velocity(eps, Mollifier::new(delta, d).unwrap(),
            TargetMeasure::empirical(cloud(n, d, &vals[60..])).unwrap()).unwrap()
            .with_obstacles(ObstacleSet::new(vec![Circle { center: vec![0.3; d], radius: 0.7 }], 3.0).unwrap()).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let a = total_objective(&t, &spec).unwrap();
        let b = total_objective(&t.permuted(&perm), &spec).unwrap();
        prop_assert!(rel(a, b) <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn joint_translation_leaves_objective_unchanged(
        vals in prop::collection::vec(-2.0f64..2.0, 120),
        n in 1usize..6, m in 2usize..5, d in 1usize..3,
        eps in 0.05f64..2.0, delta in 0.2f64..1.0,
        shift in prop::collection::vec(-3.0f64..3.0, 2), gaussian in any::<bool>(),
    ) {
        let shift = &shift[..d];
        let t = field(n, m, d, &vals);
        let target = if gaussian {
            TargetMeasure::gaussian(vec![0.1; d], 0.6).unwrap()
        } else {
            TargetMeasure::empirical(cloud(n, d, &vals[60..])).unwrap()
        };
        let obs = ObstacleSet::new(vec![Circle { center: vec![-0.2; d], radius: 0.9 }], 2.0).unwrap();
        let spec = ProblemSpec::velocity(eps, Mollifier::new(delta, d).unwrap(), target.clone()).unwrap()
            .with_obstacles(obs.clone()).unwrap();
        let moved = ProblemSpec::velocity(eps, Mollifier::new(delta, d).unwrap(), target.translated(shift)).unwrap()
            .with_obstacles(obs.translated(shift)).unwrap();
        let a = total_objective(&t, &spec).unwrap();
        let b = total_objective(&t.translated(shift), &moved).unwrap();
        prop_assert!(rel(a, b) <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn full_penalty_is_nonnegative_and_offset_by_the_constant(
        vals in prop::collection::vec(-2.0f64..2.0, 40),
        n in 1usize..8, d in 1usize..3, eps in 0.05f64..2.0, delta in 0.1f64..1.0, gaussian in any::<bool>(),
    ) {
        let y = cloud(n, d, &vals);
        let target = if gaussian {
            TargetMeasure::gaussian(vec![0.0; d], 0.5).unwrap()
        } else {
            TargetMeasure::empirical(cloud(n, d, &vals[20..])).unwrap()
        };
        let spec = ProblemSpec::velocity(eps, Mollifier::new(delta, d).unwrap(), target).unwrap();
        let full = terminal_penalty_full(&y, &spec).unwrap();
        let ne = nonlocal_energy(&y, &spec).unwrap();
        prop_assert!(full >= -1e-12 * ne.abs().max(1.0));
        let c = spec.penalty_constant() / eps;
        prop_assert!((full - ne - c).abs() <= 1e-10 * c.abs().max(1.0), "{full} {ne} {c}");
    }
}

#[test]
fn full_penalty_vanishes_on_the_target() {
    let w = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.3, 2.0]]).unwrap();
    let spec = ProblemSpec::velocity(
        0.1,
        Mollifier::new(0.4, 2).unwrap(),
        TargetMeasure::empirical(w.clone()).unwrap(),
    )
    .unwrap();
    assert!(terminal_penalty_full(&w, &spec).unwrap().abs() < 1e-12);
}

#[test]
fn optimized_trajectories_are_straight() {
    let source = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let target = PointCloud::from_rows(&[vec![2.0, 1.0], vec![3.0, 2.0], vec![2.5, 3.0]]).unwrap();
    let spec = ProblemSpec::velocity(
        1.0,
        Mollifier::new(0.3, 2).unwrap(),
        TargetMeasure::empirical(target).unwrap(),
    )
    .unwrap();
    // start from bent paths
    let init = init_straight_lines(&source, &spec.target, 6).unwrap();
    let bent = TrajectoryField::from_fn(3, 6, 2, 1, |i, j| {
        let p = init.knot(i, j);
        let bump = if j == 0 || j == 5 {
            0.0
        } else {
            0.3 * (j as f64 * 0.7).sin()
        };
        vec![p[0] + bump, p[1] - bump]
    })
    .unwrap();
    let out = gd_run(&bent, &spec, &OptimizerConfig::new(0.05, 20_000)).unwrap();
    let t = &out.best;
    for i in 0..3 {
        let (a, b) = (t.knot(i, 0), t.knot(i, 5));
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        for j in 1..5 {
            let s = j as f64 / 5.0;
            let p = t.knot(i, j);
            let dev = ((p[0] - a[0] - s * (b[0] - a[0])).powi(2)
                + (p[1] - a[1] - s * (b[1] - a[1])).powi(2))
            .sqrt();
            assert!(
                dev <= 1e-3 * len,
                "particle {i} knot {j}: {dev} vs chord {len}"
            );
        }
    }
    let e = energies(&out.best, &spec).unwrap();
    assert!(e.total < energies(&bent, &spec).unwrap().total);
}
