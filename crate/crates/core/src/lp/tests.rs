use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;

fn backends() -> (RevisedSimplex, DenseSimplex) {
    (RevisedSimplex::default(), DenseSimplex::default())
}

#[test]
fn single_variable_lower_bound_row() {
    let mut m = LpModel::new();
    let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
    let r = m.add_row("floor", vec![(x, 1.0)], Relation::Ge, 3.0);
    let (rs, ds) = backends();
    for sol in [rs.solve(&m).unwrap(), ds.solve(&m).unwrap()] {
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 3.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.dual(r) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn detects_infeasible_and_unbounded() {
    let mut m = LpModel::new();
    let x = m.add_var("x", 0.0, 1.0, 1.0);
    m.add_row("r", vec![(x, 1.0)], Relation::Ge, 2.0);
    let (rs, ds) = backends();
    assert_eq!(rs.solve(&m).unwrap().status, LpStatus::Infeasible);
    assert_eq!(ds.solve(&m).unwrap().status, LpStatus::Infeasible);

    let mut m = LpModel::new();
    let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, -1.0);
    let y = m.add_var("y", 0.0, f64::INFINITY, 0.0);
    m.add_row("r", vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
    assert_eq!(rs.solve(&m).unwrap().status, LpStatus::Unbounded);
    assert_eq!(ds.solve(&m).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn rejects_duplicate_tags() {
    let mut m = LpModel::new();
    let x = m.add_var("x", 0.0, 1.0, 1.0);
    m.add_row("r", vec![(x, 1.0)], Relation::Ge, 0.0);
    m.add_row("r", vec![(x, 1.0)], Relation::Le, 1.0);
    assert!(matches!(solve_lp(&m, &RevisedSimplex::default()), Err(Error::InvalidModel(_))));
}

#[test]
fn parallel_rows_get_their_own_duals() {
    // Two copies of the same row with different limits: only the binding one prices.
    let mut m = LpModel::new();
    let x = m.add_var("x", 0.0, 10.0, 2.0);
    let y = m.add_var("y", 0.0, 10.0, 3.0);
    let loose = m.add_row("loose", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
    let tight = m.add_row("tight", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 4.0);
    let cap = m.add_row("cap", vec![(x, 1.0), (y, 1.0)], Relation::Le, 9.0);
    let sol = RevisedSimplex::default().solve(&m).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.objective - 8.0).abs() < 1e-9);
    assert_eq!(sol.dual(loose), 0.0);
    assert!((sol.dual(tight) - 2.0).abs() < 1e-9);
    assert_eq!(sol.dual(cap), 0.0);
    assert!(check_duality(&m, &sol).ok(&Tolerances::default()));
}

#[test]
fn warm_start_reaches_same_optimum_faster() {
    let mut m = LpModel::new();
    let vars: Vec<VarId> = (0..20).map(|i| m.add_var(alloc::format!("x{i}"), 0.0, 5.0, 1.0 + i as f64)).collect();
    m.add_row("demand", vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 37.0);
    for i in 0..19 {
        m.add_row(alloc::format!("pair{i}"), vec![(vars[i], 1.0), (vars[i + 1], 1.0)], Relation::Le, 8.0);
    }
    let rs = RevisedSimplex::default();
    let cold = rs.solve(&m).unwrap();
    let warm = rs.solve_with(&m, cold.basis.as_ref(), &NoInterrupt).unwrap();
    assert!(cold.is_optimal() && warm.is_optimal());
    assert!((cold.objective - warm.objective).abs() < 1e-9);
    assert!(warm.iterations <= 1);
}

#[test]
fn interrupt_stops_the_solve() {
    struct Always;
    impl Interrupt for Always {
        fn should_stop(&self) -> bool {
            true
        }
    }
    let mut m = LpModel::new();
    let x = m.add_var("x", 0.0, 1.0, -1.0);
    m.add_row("r", vec![(x, 1.0)], Relation::Le, 1.0);
    let sol = RevisedSimplex::default().solve_with(&m, None, &Always).unwrap();
    assert_eq!(sol.status, LpStatus::IterationLimit);
}

/// Brute-force optimum over all vertices of a bounded polytope.
fn vertex_oracle(model: &LpModel) -> Option<f64> {
    let n = model.num_vars();
    // Each constraint as (a, b) meaning a'x <= b (equalities give both signs).
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut eq_rows = Vec::new();
    for row in model.rows() {
        let mut a = vec![0.0; n];
        for &(v, c) in &row.coeffs {
            a[v.0] += c;
        }
        match row.relation {
            Relation::Le => cons.push((a, row.rhs)),
            Relation::Ge => cons.push((a.iter().map(|v| -v).collect(), -row.rhs)),
            Relation::Eq => {
                eq_rows.push(cons.len());
                cons.push((a.clone(), row.rhs));
                cons.push((a.iter().map(|v| -v).collect(), -row.rhs));
            }
        }
    }
    for (j, v) in model.vars().iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        cons.push((a.clone(), v.upper));
        a[j] = -1.0;
        cons.push((a, -v.lower));
    }
    let k = cons.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        // Solve the n x n system made tight.
        let mut mat: Vec<Vec<f64>> = idx.iter().map(|&i| {
            let mut r = cons[i].0.clone();
            r.push(cons[i].1);
            r
        }).collect();
        if let Some(x) = gauss(&mut mat, n) {
            let feasible = cons.iter().all(|(a, b)| {
                let s: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
                s <= b + 1e-7 * (1.0 + b.abs())
            });
            if feasible {
                let obj = model.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn gauss(mat: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| mat[a][c].abs().total_cmp(&mat[b][c].abs()))?;
        if mat[p][c].abs() < 1e-9 {
            return None;
        }
        mat.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = mat[r][c] / mat[c][c];
                for k in c..=n {
                    mat[r][k] -= f * mat[c][k];
                }
            }
        }
    }
    Some((0..n).map(|r| mat[r][n] / mat[r][r]).collect())
}

fn arb_lp() -> impl Strategy<Value = LpModel> {
    let var = (-5.0f64..5.0, 0.5f64..6.0, -4.0f64..4.0);
    let row = (prop::collection::vec(-3.0f64..3.0, 3), 0usize..3, -6.0f64..6.0);
    (prop::collection::vec(var, 1..=3), prop::collection::vec(row, 0..=4)).prop_map(|(vars, rows)| {
        let mut m = LpModel::new();
        let ids: Vec<VarId> = vars
            .iter()
            .enumerate()
            .map(|(i, &(lo, w, c))| m.add_var(alloc::format!("x{i}"), lo, lo + w, (c * 4.0).round() / 4.0))
            .collect();
        for (r, (coef, rel, rhs)) in rows.into_iter().enumerate() {
            let coeffs: Vec<(VarId, f64)> =
                ids.iter().zip(coef).map(|(&v, a)| (v, (a * 2.0).round() / 2.0)).filter(|e| e.1 != 0.0).collect();
            let relation = [Relation::Le, Relation::Ge, Relation::Eq][rel];
            m.add_row(alloc::format!("r{r}"), coeffs, relation, rhs);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn backends_agree_with_vertex_enumeration(m in arb_lp()) {
        let oracle = vertex_oracle(&m);
        let (rs, ds) = backends();
        for sol in [rs.solve(&m).unwrap(), ds.solve(&m).unwrap()] {
            match oracle {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!((sol.objective - best).abs() < 1e-6 * (1.0 + best.abs()),
                        "objective {} vs oracle {}", sol.objective, best);
                    let rep = check_duality(&m, &sol);
                    prop_assert!(rep.ok(&Tolerances::default()), "{:?}", rep);
                }
            }
        }
    }

    #[test]
    fn solves_are_deterministic(m in arb_lp()) {
        let rs = RevisedSimplex::default();
        let a = rs.solve(&m).unwrap();
        let b = rs.solve(&m).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert_eq!(a.primal, b.primal);
            prop_assert_eq!(a.row_duals, b.row_duals);
        }
    }
}
