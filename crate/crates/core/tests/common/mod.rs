//! Generators and independent reference implementations shared by the
//! integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockprop::{Constraints, Economy, ShockScenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random economy with strictly positive final demand, hence productive.
pub fn random_economy(rng: &mut ChaCha8Rng, n: usize) -> Economy {
    let p: f64 = rng.random_range(0.2..0.9);
    let z = Array2::from_shape_fn((n, n), |_| {
        if rng.random_bool(p) {
            rng.random_range(0.1..10.0)
        } else {
            0.0
        }
    });
    let f = Array1::from_shape_fn(n, |_| rng.random_range(0.5..10.0));
    Economy::build(z, f).unwrap()
}

/// Random shocks; about a third of industries escape each kind of shock.
pub fn random_scenario(rng: &mut ChaCha8Rng, n: usize) -> ShockScenario {
    let mut draw = |hi: f64| {
        Array1::from_shape_fn(n, |_| {
            if rng.random_bool(0.33) {
                0.0
            } else {
                rng.random_range(0.0..hi)
            }
        })
    };
    let s = draw(1.0);
    let d = draw(0.6);
    ShockScenario::new(s, d).unwrap()
}

pub fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// `A = Z diag(x)^{-1}` straight from the economy's flows.
pub fn technical_coefficients(e: &Economy) -> DMatrix<f64> {
    let z = e.flows();
    let x = e.gross_output();
    DMatrix::from_fn(e.n(), e.n(), |i, j| {
        if x[j] > 0.0 {
            z[[i, j]] / x[j]
        } else {
            0.0
        }
    })
}

pub fn leontief(a: &DMatrix<f64>) -> DMatrix<f64> {
    (DMatrix::identity(a.nrows(), a.ncols()) - a)
        .try_inverse()
        .expect("productive economy")
}

/// Ceilings written out from their definition.
pub fn ceilings(e: &Economy, s: &ShockScenario) -> (Vec<f64>, Vec<f64>) {
    let x_max = (0..e.n())
        .map(|i| (1.0 - s.alpha_supply() * s.eps_supply()[i]) * e.gross_output()[i])
        .collect();
    let f_max = (0..e.n())
        .map(|i| (1.0 - s.alpha_demand() * s.eps_demand()[i]) * e.final_demand()[i])
        .collect();
    (x_max, f_max)
}

/// Maximum of `c'v` subject to `lo <= v <= up`, `rlo <= Gv <= rup` by
/// enumerating every basic solution. `None` when the region is empty.
pub fn vertex_max(
    c: &[f64],
    lo: &[f64],
    up: &[f64],
    g: &DMatrix<f64>,
    rlo: &[f64],
    rup: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    let m = g.nrows();
    // every constraint as a row `a'v = b` when active
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo[j]));
        planes.push((e, up[j]));
    }
    for r in 0..m {
        let row: Vec<f64> = (0..n).map(|j| g[(r, j)]).collect();
        planes.push((row.clone(), rlo[r]));
        planes.push((row, rup[r]));
    }
    let scale = lo
        .iter()
        .chain(up)
        .chain(rlo)
        .chain(rup)
        .fold(1.0_f64, |s, v| s.max(v.abs()));
    let tol = 1e-9 * scale;
    let feasible = |v: &[f64]| {
        (0..n).all(|j| v[j] >= lo[j] - tol && v[j] <= up[j] + tol)
            && (0..m).all(|r| {
                let gv: f64 = (0..n).map(|j| g[(r, j)] * v[j]).sum();
                gv >= rlo[r] - tol && gv <= rup[r] + tol
            })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = vec![0usize; n];
    subsets(planes.len(), n, 0, 0, &mut pick, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |r, j| planes[idx[r]].0[j]);
        let b = DVector::from_fn(n, |r, _| planes[idx[r]].1);
        let Some(v) = a.lu().solve(&b) else { return };
        if v.iter().any(|x| !x.is_finite()) {
            return;
        }
        let v: Vec<f64> = v.iter().copied().collect();
        if !feasible(&v) {
            return;
        }
        let obj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
        if best.as_ref().is_none_or(|(o, _)| obj > *o) {
            best = Some((obj, v));
        }
    });
    best
}

fn subsets(
    total: usize,
    k: usize,
    start: usize,
    depth: usize,
    pick: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if depth == k {
        visit(pick);
        return;
    }
    for i in start..total {
        pick[depth] = i;
        subsets(total, k, i + 1, depth + 1, pick, visit);
    }
}

/// Rationing rule as seen by the reference implementation.
#[derive(Clone, Debug)]
pub enum NaiveRule {
    Proportional,
    Mixed,
    /// Service order per supplier.
    Priority(Vec<Vec<usize>>),
}

/// Largest-first service order computed from the first demand vector.
pub fn largest_first_order(a: &DMatrix<f64>, d: &DVector<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    (0..n)
        .map(|i| {
            let mut ks: Vec<usize> = (0..n).filter(|&k| a[(i, k)] > 0.0).collect();
            // stable sort keeps index order among ties
            ks.sort_by(|&p, &q| (a[(i, q)] * d[q]).partial_cmp(&(a[(i, p)] * d[p])).unwrap());
            ks
        })
        .collect()
}

pub struct NaiveOutcome {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Straightforward transcription of the rationing loop, in nalgebra.
pub fn naive_ration(
    e: &Economy,
    c: &Constraints,
    rule: &NaiveRule,
    tol: f64,
    max_iter: usize,
) -> NaiveOutcome {
    let n = e.n();
    let a = technical_coefficients(e);
    let l = leontief(&a);
    let x_max = DVector::from_vec(c.x_max.to_vec());
    let f_max = DVector::from_vec(c.f_max.to_vec());
    let floor = 1e-12 * e.total_output();
    let mut d = &l * &f_max;
    let mut f = f_max.clone();
    for t in 1..=max_iter {
        let mut s = vec![1.0_f64; n];
        for i in 0..n {
            match rule {
                NaiveRule::Proportional | NaiveRule::Mixed => {
                    let demand = match rule {
                        NaiveRule::Proportional => d[i],
                        _ => (0..n).map(|k| a[(i, k)] * d[k]).sum(),
                    };
                    let r = if demand > 0.0 {
                        (x_max[i] / demand).min(1.0)
                    } else {
                        1.0
                    };
                    for k in 0..n {
                        if a[(i, k)] > 0.0 {
                            s[k] = s[k].min(r);
                        }
                    }
                }
                NaiveRule::Priority(order) => {
                    let mut cum = 0.0;
                    for &k in &order[i] {
                        cum += a[(i, k)] * d[k];
                        let r = if cum > 0.0 {
                            (x_max[i] / cum).min(1.0)
                        } else {
                            1.0
                        };
                        s[k] = s[k].min(r);
                    }
                }
            }
        }
        let x = DVector::from_fn(n, |i, _| x_max[i].min(s[i] * d[i]));
        let ax = &a * &x;
        f = DVector::from_fn(n, |i, _| f_max[i].min((x[i] - ax[i]).max(0.0)));
        let next = &l * &f;
        let res = (0..n)
            .map(|i| (next[i] - d[i]).abs() / d[i].max(floor))
            .fold(0.0, f64::max);
        d = next;
        if res <= tol {
            return NaiveOutcome {
                x: d.iter().copied().collect(),
                f: f.iter().copied().collect(),
                converged: true,
                iterations: t,
            };
        }
    }
    NaiveOutcome {
        x: d.iter().copied().collect(),
        f: f.iter().copied().collect(),
        converged: false,
        iterations: max_iter,
    }
}

/// `x = L f` and the box, graded with a relative tolerance.
pub fn satisfies_recipe(e: &Economy, c: &Constraints, x: &[f64], f: &[f64], rel: f64) -> bool {
    let l = leontief(&technical_coefficients(e));
    let lf = &l * DVector::from_vec(f.to_vec());
    let scale = e.total_output().max(1.0);
    (0..e.n()).all(|i| {
        let slack = rel * scale;
        (x[i] - lf[i]).abs() <= slack
            && x[i] >= -slack
            && x[i] <= c.x_max[i] + slack
            && f[i] >= -slack
            && f[i] <= c.f_max[i] + slack
    })
}
