//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

pub mod lp_oracle {
    use fairrank::lp::LpProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting; `None` when singular.
    pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
            if a[piv][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    if f != 0.0 {
                        for c in col..n {
                            a[r][c] -= f * a[col][c];
                        }
                        b[r] -= f * b[col];
                    }
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }

    /// Minimum objective over all basic feasible solutions, by enumeration.
    /// Requires finite bounds on every variable (bounded polytope).
    pub fn brute_force_optimum(p: &LpProblem<f64>, tol: f64) -> Option<f64> {
        let n = p.objective.len();
        // candidate hyperplanes: (row, rhs)
        let mut optional: Vec<(Vec<f64>, f64)> = Vec::new();
        for (row, h) in p.ineq_matrix.iter().zip(&p.ineq_rhs) {
            optional.push((row.clone(), *h));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            optional.push((e.clone(), p.lower[j]));
            optional.push((e, p.upper[j]));
        }
        let m_eq = p.eq_matrix.len();
        if m_eq > n {
            return None;
        }
        let mut best: Option<f64> = None;
        for combo in combinations(optional.len(), n - m_eq) {
            let mut a: Vec<Vec<f64>> = p.eq_matrix.clone();
            let mut b: Vec<f64> = p.eq_rhs.clone();
            for &c in &combo {
                a.push(optional[c].0.clone());
                b.push(optional[c].1);
            }
            let Some(x) = solve_square(a, b) else { continue };
            let feasible = p.eq_matrix.iter().zip(&p.eq_rhs).all(|(r, b)| (dot(r, &x) - b).abs() <= tol)
                && p.ineq_matrix.iter().zip(&p.ineq_rhs).all(|(r, h)| dot(r, &x) <= h + tol)
                && (0..n).all(|j| x[j] >= p.lower[j] - tol && x[j] <= p.upper[j] + tol);
            if feasible {
                let obj = dot(&p.objective, &x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        best
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Random bounded LP with at most 6 variables and 4 constraints.
    pub fn random_lp(seed: u64) -> LpProblem<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=4);
        let objective: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut p = LpProblem::new(objective);
        for j in 0..n {
            p.lower[j] = if rng.random_bool(0.3) { rng.random_range(-2.0..0.0) } else { 0.0 };
            p.upper[j] = p.lower[j] + rng.random_range(0.5..4.0);
        }
        // a known interior-ish point keeps most instances feasible
        let x0: Vec<f64> = (0..n).map(|j| rng.random_range(p.lower[j]..p.upper[j])).collect();
        for _ in 0..m {
            let mut row: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.8) { rng.random_range(-3.0..3.0) } else { 0.0 }).collect();
            if row.iter().all(|v| *v == 0.0) {
                row[rng.random_range(0..n)] = rng.random_range(0.5..3.0);
            }
            let v = dot(&row, &x0);
            if rng.random_bool(0.3) && p.eq_matrix.len() + 1 < n.max(2) {
                p.add_eq(row, v);
            } else {
                let slack = if rng.random_bool(0.1) { -rng.random_range(0.0..5.0) } else { rng.random_range(0.0..2.0) };
                p.add_le(row, v + slack);
            }
        }
        p
    }
}

pub mod stats {
    use std::collections::BTreeMap;

    use fairrank::records::ImpressionRecord;

    /// Fraction of `sorted` that is `<= v`.
    fn ecdf(sorted: &[f64], v: f64) -> f64 {
        sorted.partition_point(|x| *x <= v) as f64 / sorted.len() as f64
    }

    /// Two-sample KS: both empirical CDFs evaluated at every pooled point.
    pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        a.iter()
            .chain(&b)
            .map(|&v| (ecdf(&a, v) - ecdf(&b, v)).abs())
            .fold(0.0, f64::max)
    }

    /// KS distance between a sample and Uniform[0, 1].
    pub fn ks_uniform(samples: &[f64]) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        s.iter()
            .enumerate()
            .map(|(i, &u)| {
                let u = u.clamp(0.0, 1.0);
                (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Max over group pairs of the KS distance between the score samples
    /// of records with the given label.
    pub fn cross_group_ks(records: &[ImpressionRecord<f64>], label: u32) -> f64 {
        let mut by_group: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.label == label) {
            by_group.entry(r.group.0).or_default().push(r.score);
        }
        let samples: Vec<&Vec<f64>> = by_group.values().collect();
        let mut worst = 0.0f64;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                worst = worst.max(ks_two_sample(samples[i], samples[j]));
            }
        }
        worst
    }

    pub fn logistic(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Interval index of `u` among `bins` equal-width intervals of [0, 1].
    pub fn unit_bin(u: f64, bins: usize) -> usize {
        ((u * bins as f64).floor() as usize).min(bins - 1)
    }
}

pub mod transport {
    /// Cost of the monotone (north-west corner) coupling of two histograms
    /// over equal-width bins, with ground cost `|k - k'| / bins`.
    pub fn monotone_coupling_cost(from: &[f64], to: &[f64]) -> f64 {
        let bins = from.len();
        let (mut i, mut j) = (0, 0);
        let (mut a, mut b) = (from[0], to[0]);
        let mut cost = 0.0;
        while i < bins && j < bins {
            let moved = a.min(b);
            cost += moved * (i as f64 - j as f64).abs() / bins as f64;
            a -= moved;
            b -= moved;
            if a <= 1e-15 {
                i += 1;
                if i < bins {
                    a = from[i];
                }
            }
            if b <= 1e-15 {
                j += 1;
                if j < bins {
                    b = to[j];
                }
            }
        }
        cost
    }

    /// All 3-bin histograms with masses in multiples of `1 / steps`.
    pub fn simplex_grid3(steps: usize) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for i in 0..=steps {
            for j in 0..=steps - i {
                let k = steps - i - j;
                out.push([i as f64 / steps as f64, j as f64 / steps as f64, k as f64 / steps as f64]);
            }
        }
        out
    }
}
