//! Brute-force LP solver: enumerates every vertex of
//! `{x : A_eq x = b_eq, A_in x <= b_in}` (x free) and keeps the cheapest.

pub struct SmallLp {
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
}

pub struct Vertex {
    #[allow(dead_code)]
    pub x: Vec<f64>,
    pub cost: f64,
    /// Indices into `ineq` that define the vertex.
    pub active: Vec<usize>,
    /// Multipliers of the equality rows: d(cost)/d(b_eq).
    pub eq_duals: Vec<f64>,
}

/// Solves `M z = r` for square `M`; `None` when singular.
pub fn solve(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-10 {
            return None;
        }
        m.swap(p, col);
        r.swap(p, col);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

pub fn enumerate(lp: &SmallLp) -> Option<Vertex> {
    let nv = lp.c.len();
    let k = nv - lp.eq.len();
    let mut best: Option<Vertex> = None;
    for s in subsets(lp.ineq.len(), k) {
        let rows: Vec<&(Vec<f64>, f64)> = lp.eq.iter().chain(s.iter().map(|&i| &lp.ineq[i])).collect();
        let m: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let Some(x) = solve(m.clone(), rhs) else { continue };
        let feasible = lp
            .ineq
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
        if !feasible {
            continue;
        }
        let cost: f64 = lp.c.iter().zip(&x).map(|(p, q)| p * q).sum();
        if best.as_ref().is_none_or(|b| cost < b.cost - 1e-9) {
            let mt: Vec<Vec<f64>> = (0..nv).map(|j| m.iter().map(|r| r[j]).collect()).collect();
            let y = solve(mt, lp.c.clone()).expect("vertex basis is nonsingular");
            best = Some(Vertex {
                x,
                cost,
                active: s.clone(),
                eq_duals: y[..lp.eq.len()].to_vec(),
            });
        }
    }
    best
}
