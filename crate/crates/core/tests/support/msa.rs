//! Method of successive averages with label-correcting shortest paths.
//! Shares no code with the library solver.

pub struct Net {
    pub n: usize,
    /// (tail, head, t0, capacity), zero-based node indices.
    pub links: Vec<(usize, usize, f64, f64)>,
}

pub fn bpr(t0: f64, cap: f64, v: f64) -> f64 {
    t0 * (1.0 + 0.15 * (v / cap).powi(4))
}

fn tree(net: &Net, root: usize, cost: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut d = vec![f64::INFINITY; net.n];
    let mut pred = vec![usize::MAX; net.n];
    d[root] = 0.0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut inq = vec![false; net.n];
    inq[root] = true;
    while let Some(u) = queue.pop_front() {
        inq[u] = false;
        for (k, &(a, b, _, _)) in net.links.iter().enumerate() {
            if a == u && d[u] + cost[k] < d[b] {
                d[b] = d[u] + cost[k];
                pred[b] = k;
                if !inq[b] {
                    inq[b] = true;
                    queue.push_back(b);
                }
            }
        }
    }
    (d, pred)
}

/// Loads every OD on its current shortest path; returns (volumes, SPTT).
fn load(net: &Net, od: &[(usize, usize, f64)], cost: &[f64]) -> (Vec<f64>, f64) {
    let mut y = vec![0.0; net.links.len()];
    let mut sptt = 0.0;
    let mut origins: Vec<usize> = od.iter().map(|o| o.0).collect();
    origins.sort();
    origins.dedup();
    for o in origins {
        let (d, pred) = tree(net, o, cost);
        for &(_, dest, q) in od.iter().filter(|x| x.0 == o) {
            sptt += q * d[dest];
            let mut v = dest;
            while v != o {
                let k = pred[v];
                y[k] += q;
                v = net.links[k].0;
            }
        }
    }
    (y, sptt)
}

pub fn gap(net: &Net, od: &[(usize, usize, f64)], x: &[f64]) -> f64 {
    let cost: Vec<f64> = net.links.iter().zip(x).map(|(l, v)| bpr(l.2, l.3, *v)).collect();
    let tstt: f64 = x.iter().zip(&cost).map(|(v, c)| v * c).sum();
    let (_, sptt) = load(net, od, &cost);
    (tstt - sptt) / tstt
}

/// Runs until the relative gap reaches `tol` or `max_iter` is hit; returns
/// volumes, final gap and iteration count.
pub fn msa(net: &Net, od: &[(usize, usize, f64)], tol: f64, max_iter: usize) -> (Vec<f64>, f64, usize) {
    let t0: Vec<f64> = net.links.iter().map(|l| l.2).collect();
    let (mut x, _) = load(net, od, &t0);
    let mut k = 1;
    loop {
        let cost: Vec<f64> = net.links.iter().zip(&x).map(|(l, v)| bpr(l.2, l.3, *v)).collect();
        let tstt: f64 = x.iter().zip(&cost).map(|(v, c)| v * c).sum();
        let (y, sptt) = load(net, od, &cost);
        let g = if tstt > 0.0 { (tstt - sptt) / tstt } else { 0.0 };
        if g <= tol || k >= max_iter {
            return (x, g, k);
        }
        k += 1;
        let step = 1.0 / k as f64;
        for (a, b) in x.iter_mut().zip(&y) {
            *a += step * (b - *a);
        }
    }
}
