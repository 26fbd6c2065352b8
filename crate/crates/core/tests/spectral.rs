use conspde::conservative::{build_totally_conservative, duhamel_evolve};
use conspde::degenerate::regularized::regularized_problem;
use conspde::sturm_liouville::{assemble, eigensolve, evolve, steady_state, DiscreteOperator};
use conspde::{BoundaryCoupling, CoefficientField, DegenerateModel, Grid, SLProblem};
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

fn heat_operator(n: usize) -> DiscreteOperator {
    let one = CoefficientField::constant(1.0);
    let grid = Grid::unit(n).unwrap();
    build_totally_conservative(
        &one,
        &CoefficientField::zero(),
        &one,
        &CoefficientField::identity(),
        &grid,
    )
    .unwrap()
    .operator()
    .unwrap()
}

fn dense_spectrum(op: &DiscreteOperator) -> Vec<f64> {
    let n = op.grid().len();
    let m = op.mass();
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.stiffness_apply(&e);
        for i in 0..n {
            b[(i, j)] = col[i] / (m[i] * m[j]).sqrt();
        }
    }
    let b = 0.5 * (&b + b.transpose());
    let mut vals: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

#[test]
fn third_eigenvalue_matches_fine_dense_solve() {
    let coarse = eigensolve(&heat_operator(101), 6).unwrap();
    let fine = dense_spectrum(&heat_operator(401));
    let rel = (coarse.eigenvalues[2] - fine[2]).abs() / fine[2];
    assert!(
        rel < 1e-3,
        "banded {} vs dense {} ({rel:e})",
        coarse.eigenvalues[2],
        fine[2]
    );
    // The continuous value is 4π².
    assert!((fine[2] - 4.0 * PI * PI).abs() / fine[2] < 1e-4);
}

#[test]
fn banded_and_dense_agree_on_the_same_grid() {
    let op = heat_operator(81);
    let banded = eigensolve(&op, 12).unwrap();
    let dense = dense_spectrum(&op);
    for k in 0..12 {
        assert!(
            (banded.eigenvalues[k] - dense[k]).abs() < 1e-8 * dense[k].abs().max(1.0),
            "mode {k}"
        );
    }
}

fn convergence_ratios(make: impl Fn(usize) -> DiscreteOperator) -> Vec<f64> {
    let lams: Vec<Vec<f64>> = [51, 101, 201]
        .iter()
        .map(|&n| eigensolve(&make(n), 6).unwrap().eigenvalues)
        .collect();
    (2..5)
        .map(|k| (lams[0][k] - lams[1][k]) / (lams[1][k] - lams[2][k]))
        .collect()
}

#[test]
fn eigenvalues_converge_at_second_order() {
    for r in convergence_ratios(heat_operator) {
        assert!((3.5..=4.5).contains(&r), "heat ratio {r}");
    }
    let p = CoefficientField::from_expression("1 + x^2").unwrap();
    let w = CoefficientField::from_expression("2 - x").unwrap();
    let neumann = |n: usize| {
        let problem = SLProblem::new(
            p.clone(),
            CoefficientField::zero(),
            w.clone(),
            BoundaryCoupling::neumann(),
        );
        assemble(&problem, &Grid::unit(n).unwrap()).unwrap()
    };
    for r in convergence_ratios(neumann) {
        assert!((3.5..=4.5).contains(&r), "variable-coefficient ratio {r}");
    }
}

#[test]
fn eigenvectors_satisfy_coupling_rows() {
    let op = assemble(
        &regularized_problem(&DegenerateModel::neutral(), 1e-2).unwrap(),
        &Grid::unit(201).unwrap(),
    )
    .unwrap();
    let eig = eigensolve(&op, 40).unwrap();
    assert_eq!(eig.zero_multiplicity, 2);
    assert!(
        eig.bc_residuals.iter().all(|r| *r < 1e-6),
        "{:?}",
        eig.bc_residuals
    );
    for j in 0..eig.len() {
        for k in 0..=j {
            let ip = eig.inner(&eig.eigenvectors[j], &eig.eigenvectors[k]);
            let target = if j == k { 1.0 } else { 0.0 };
            assert!((ip - target).abs() < 1e-8, "⟨w{j}, w{k}⟩ = {ip}");
        }
    }
}

#[test]
fn steady_state_is_long_time_limit() {
    let grid = Grid::unit(201).unwrap();
    let model = DegenerateModel::neutral();
    let problem = regularized_problem(&model, 1e-2).unwrap();
    let op = assemble(&problem, &grid).unwrap();
    let eig = eigensolve(&op, grid.len() - 2).unwrap();
    // v0 from uniform u: v = g_ε / p.
    let v0: Vec<f64> = grid.nodes().iter().map(|x| x * (1.0 - x) + 1e-2).collect();
    let steady = steady_state(&eig, &v0).unwrap();
    let t = 100.0 / eig.eigenvalues[2];
    let late = evolve(&eig, &v0, &[t]).unwrap();
    let gap = steady
        .iter()
        .zip(&late.snapshots[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap:e}");
}

#[test]
fn duhamel_without_source_matches_evolve() {
    let op = heat_operator(101);
    let eig = eigensolve(&op, 99).unwrap();
    let v0: Vec<f64> = op.grid().nodes().iter().map(|x| (3.0 * x).cos() + x).collect();
    let times = [0.0, 0.01, 0.1, 1.0];
    let a = evolve(&eig, &v0, &times).unwrap();
    let zero = |_: f64| vec![0.0; 101];
    let b = duhamel_evolve(&eig, &v0, &zero, &times).unwrap();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        for (x, y) in sa.iter().zip(sb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn duhamel_constant_mode_source() {
    let op = heat_operator(101);
    let eig = eigensolve(&op, 99).unwrap();
    let w3 = eig.eigenvectors[2].clone();
    let lam = eig.eigenvalues[2];
    let src = w3.clone();
    let forcing = move |_: f64| src.clone();
    let t = 0.05;
    let traj = duhamel_evolve(&eig, &vec![0.0; 101], &forcing, &[t]).unwrap();
    let factor = (1.0 - (-lam * t).exp()) / lam;
    for (v, w) in traj.snapshots[0].iter().zip(&w3) {
        assert!((v - factor * w).abs() < 1e-10);
    }
}

fn duhamel_defect(n: usize) -> f64 {
    let op = heat_operator(n);
    let eig = eigensolve(&op, n - 2).unwrap();
    let nodes = op.grid().nodes().to_vec();
    let forcing = {
        let nodes = nodes.clone();
        move |s: f64| {
            nodes
                .iter()
                .map(|x| s.cos() * (PI * x).cos())
                .collect::<Vec<f64>>()
        }
    };
    let w0: Vec<f64> = nodes.iter().map(|x| (2.0 * PI * x).cos()).collect();
    let (t, dt) = (0.3, 1e-4);
    let traj = duhamel_evolve(&eig, &w0, &forcing, &[t - dt, t, t + dt]).unwrap();
    let lw = op.apply_generator(&traj.snapshots[1]);
    let g = forcing(t);
    (1..n - 1)
        .map(|i| ((traj.snapshots[2][i] - traj.snapshots[0][i]) / (2.0 * dt) - lw[i] - g[i]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn duhamel_trajectory_satisfies_the_equation() {
    // Finite differences in t of the Duhamel trajectory match Lw + G up to
    // the spatial truncation, which shrinks like h².
    let d: Vec<f64> = [51, 101, 201].iter().map(|&n| duhamel_defect(n)).collect();
    assert!(d[2] < 1e-4, "{d:?}");
    for w in d.windows(2) {
        assert!(w[0] / w[1] > 3.0, "{d:?}");
    }
}
