use fraclad_core::operator::{
    assemble_stiffness, oracle_gagliardo_extrapolated, oracle_test_vectors, QuadratureConfig,
};
use fraclad_core::Grid;

/// Closed form of the form on hat functions: B(φ_i, φ_j) = 2 ∬ φ_i'(x) φ_j'(y) Φ(x − y)
/// with Φ(r) = −|r|^{1−2s} / (2s(1−2s)), integrated twice more into Ψ.
fn exact_matrix(grid: &Grid, s: f64) -> Vec<Vec<f64>> {
    let h = grid.spacing();
    let n = grid.n_interior();
    let c = -1.0 / (2.0 * s * (1.0 - 2.0 * s) * (2.0 - 2.0 * s) * (3.0 - 2.0 * s));
    let psi = |r: f64| c * r.abs().powf(3.0 - 2.0 * s);
    let x = |i: usize| grid.coordinate(i);
    let w = |a: usize, b: usize| {
        psi(x(a + 1) - x(b)) - psi(x(a) - x(b)) - psi(x(a + 1) - x(b + 1)) + psi(x(a) - x(b + 1))
    };
    let slopes = |i: usize| [(i - 1, 1.0 / h), (i, -1.0 / h)];
    let mut m = vec![vec![0.0; n]; n];
    for i in 1..=n {
        for j in 1..=n {
            let mut v = 0.0;
            for (a, da) in slopes(i) {
                for (b, db) in slopes(j) {
                    v += da * db * w(a, b);
                }
            }
            m[i - 1][j - 1] = 2.0 * v;
        }
    }
    m
}

#[test]
fn matrix_matches_closed_form_on_hats() {
    for s in [0.25, 0.4, 0.75] {
        let g = Grid::new(1.0, 17).unwrap();
        let a = assemble_stiffness(&g, s, &QuadratureConfig::default()).unwrap();
        let e = exact_matrix(&g, s);
        let scale = a.matrix()[(0, 0)].abs();
        for i in 0..17 {
            for j in 0..17 {
                let d = (a.matrix()[(i, j)] - e[i][j]).abs();
                assert!(d < 1e-9 * scale, "s={s} ({i},{j}): {} vs {}", a.matrix()[(i, j)], e[i][j]);
            }
        }
    }
}

#[test]
fn quadratic_form_matches_brute_force_oracle() {
    for n in [33, 65] {
        let g = Grid::new(1.0, n).unwrap();
        for s in [0.25, 0.4, 0.75] {
            let a = assemble_stiffness(&g, s, &QuadratureConfig::default()).unwrap();
            for (_, u) in oracle_test_vectors(&g, 11) {
                let q = a.seminorm_squared(&u);
                let o = oracle_gagliardo_extrapolated(&g, &u, s, 16);
                assert!(((q - o) / o).abs() < 0.01, "n={n} s={s}: {q} vs {o}");
            }
        }
    }
}
