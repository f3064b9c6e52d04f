//! Open-path TSP. Small instances are solved exactly by dynamic programming;
//! larger ones use nearest-neighbor construction, then 2-opt and Or-opt.
//!
//! The tour starts at a fixed index and ends anywhere. Internally it is a cycle
//! closed through a virtual terminal that costs nothing to reach from any
//! node, so the closing edge is free and 2-opt may reverse the tail.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense square cost matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Input("cost matrix is not square"));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn validate(&self) -> Result<()> {
        if self.data.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("cost matrix has a non-finite entry"));
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Input("cost matrix is not symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Cost of visiting `order` front to back, without a return leg.
pub fn open_tour_cost(m: &CostMatrix, order: &[usize]) -> f64 {
    order.windows(2).map(|w| m.get(w[0], w[1])).sum()
}

/// Visiting order starting at `start` that covers every index once.
pub fn solve_open_tsp(m: &CostMatrix, start: usize) -> Result<Vec<usize>> {
    if start >= m.len() {
        return Err(Error::Input("start index out of range"));
    }
    m.validate()?;
    if m.len() <= EXACT_LIMIT {
        return Ok(held_karp(m, start));
    }
    let mut order = nearest_neighbor(m, start);
    loop {
        two_opt(m, &mut order);
        if !or_opt(m, &mut order) {
            break;
        }
    }
    Ok(order)
}

/// Largest instance solved exactly.
pub const EXACT_LIMIT: usize = 12;

fn held_karp(m: &CostMatrix, start: usize) -> Vec<usize> {
    let n = m.len();
    if n <= 2 {
        let mut order = vec![start];
        order.extend((0..n).filter(|&i| i != start));
        return order;
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != start).collect();
    let k = others.len();
    let full = (1usize << k) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * k];
    let mut parent = vec![u8::MAX; (full + 1) * k];
    for (j, &v) in others.iter().enumerate() {
        dp[(1 << j) * k + j] = m.get(start, v);
    }
    for mask in 1..=full {
        for j in 0..k {
            let cur = dp[mask * k + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for t in 0..k {
                if mask & (1 << t) != 0 {
                    continue;
                }
                let next = mask | (1 << t);
                let c = cur + m.get(others[j], others[t]);
                if c < dp[next * k + t] {
                    dp[next * k + t] = c;
                    parent[next * k + t] = j as u8;
                }
            }
        }
    }
    let mut last = 0;
    for j in 1..k {
        if dp[full * k + j] < dp[full * k + last] {
            last = j;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        rev.push(others[last]);
        let p = parent[mask * k + last];
        mask &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    rev.push(start);
    rev.reverse();
    rev
}

fn nearest_neighbor(m: &CostMatrix, start: usize) -> Vec<usize> {
    let n = m.len();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    used[start] = true;
    order.push(start);
    let mut cur = start;
    for _ in 1..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if !used[j] && (best == usize::MAX || m.get(cur, j) < m.get(cur, best)) {
                best = j;
            }
        }
        used[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

/// Gain of reversing `order[i..=j]` (positive means shorter); `order[0]` stays put.
#[inline]
fn reversal_gain(m: &CostMatrix, order: &[usize], i: usize, j: usize) -> f64 {
    let n = order.len();
    let (a, b, c) = (order[i - 1], order[i], order[j]);
    let old_in = m.get(a, b);
    let new_in = m.get(a, c);
    // the edge after j leads to the virtual terminal when j is last
    let (old_out, new_out) = if j + 1 < n {
        let d = order[j + 1];
        (m.get(c, d), m.get(b, d))
    } else {
        (0.0, 0.0)
    };
    (old_in + old_out) - (new_in + new_out)
}

fn improvement_eps(m: &CostMatrix) -> f64 {
    let scale = m.data.iter().fold(0.0f64, |s, &c| s.max(c.abs()));
    1e-12 * scale.max(1.0)
}

/// 2-opt to local optimality with the first element fixed.
pub fn two_opt(m: &CostMatrix, order: &mut [usize]) {
    let n = order.len();
    if n < 3 {
        return;
    }
    let eps = improvement_eps(m);
    loop {
        let mut improved = false;
        for i in 1..n - 1 {
            for j in (i + 1)..n {
                if reversal_gain(m, order, i, j) > eps {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

#[inline]
fn leg(m: &CostMatrix, a: usize, b: Option<usize>) -> f64 {
    b.map_or(0.0, |b| m.get(a, b))
}

/// One pass relocating segments of up to three nodes, possibly reversed.
/// Returns whether anything moved.
fn or_opt(m: &CostMatrix, order: &mut Vec<usize>) -> bool {
    let n = order.len();
    let eps = improvement_eps(m);
    let mut moved = false;
    for len in 1..=3usize {
        let mut i = 1;
        while i + len <= n {
            let j = i + len - 1;
            let (prev, first, last) = (order[i - 1], order[i], order[j]);
            let next = order.get(j + 1).copied();
            let removal = m.get(prev, first) + leg(m, last, next) - next.map_or(0.0, |x| m.get(prev, x));
            let mut best: Option<(f64, usize, bool)> = None;
            for k in 0..n {
                if k + 1 >= i && k <= j {
                    continue;
                }
                let u = order[k];
                let v = order.get(k + 1).copied();
                let base = leg(m, u, v);
                for rev in [false, true] {
                    let (a, b) = if rev { (last, first) } else { (first, last) };
                    let gain = removal - (m.get(u, a) + leg(m, b, v) - base);
                    if gain > eps && best.map_or(true, |(g, _, _)| gain > g) {
                        best = Some((gain, k, rev));
                    }
                }
            }
            if let Some((_, k, rev)) = best {
                let mut seg: Vec<usize> = order.drain(i..=j).collect();
                if rev {
                    seg.reverse();
                }
                let at = if k < i { k + 1 } else { k + 1 - len };
                order.splice(at..at, seg);
                moved = true;
            }
            i += 1;
        }
    }
    moved
}

/// True when no segment reversal shortens the open tour by more than `tol`.
pub fn is_two_opt_optimal(m: &CostMatrix, order: &[usize], tol: f64) -> bool {
    let n = order.len();
    for i in 1..n.saturating_sub(1) {
        for j in (i + 1)..n {
            if reversal_gain(m, order, i, j) > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(points: &[(f64, f64)]) -> CostMatrix {
        CostMatrix::from_fn(points.len(), |i, j| {
            libm::hypot(points[i].0 - points[j].0, points[i].1 - points[j].1)
        })
    }

    #[test]
    fn single_target() {
        let m = euclid(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(solve_open_tsp(&m, 0).unwrap(), vec![0, 1]);
        assert_eq!(solve_open_tsp(&m, 1).unwrap(), vec![1, 0]);
    }

    #[test]
    fn collinear_targets_in_line_order() {
        let m = euclid(&[(0.0, 0.0), (4.0, 0.0), (1.0, 0.0), (3.0, 0.0), (2.0, 0.0)]);
        assert_eq!(solve_open_tsp(&m, 0).unwrap(), vec![0, 2, 4, 3, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        let m = CostMatrix::new(2, vec![0.0, f64::NAN, f64::NAN, 0.0]).unwrap();
        assert!(matches!(solve_open_tsp(&m, 0), Err(Error::Input(_))));
        let m = CostMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        assert!(matches!(solve_open_tsp(&m, 0), Err(Error::Input(_))));
        let m = euclid(&[(0.0, 0.0)]);
        assert!(matches!(solve_open_tsp(&m, 3), Err(Error::Input(_))));
        assert!(CostMatrix::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn two_opt_untangles_a_crossing() {
        let m = euclid(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (2.0, 1.0), (2.0, 0.0)]);
        let mut order = vec![0, 1, 2, 3, 4];
        let before = open_tour_cost(&m, &order);
        two_opt(&m, &mut order);
        assert!(open_tour_cost(&m, &order) <= before);
        assert!(is_two_opt_optimal(&m, &order, 1e-9));
        assert_eq!(order[0], 0);
    }
}
