use serde::Serialize;

use crate::error::{input, Result};
use crate::kernel::{KernelModel, LocalProfiles};
use crate::space::{AtomicMeasure, BallTable, ConjugatePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Nondegeneracy {
    /// `N(x, a)`.
    pub tail: f64,
    /// `sup_{r >= a} r^{-q/p} M*(x, r)`.
    pub growth: f64,
    pub growth_radius: f64,
}

/// `sup_{r >= lo} r^{-s} M(y, r)` with `M = A - B/r` on each interval.
fn weighted_m_sup(t: &BallTable, lo: f64, s: f64) -> (f64, f64) {
    let radii = t.radii();
    let mut best = (0.0f64, lo);
    let consider = |r: f64, best: &mut (f64, f64)| {
        let v = r.powf(-s) * t.upper(r);
        if v > best.0 {
            *best = (v, r);
        }
    };
    consider(lo, &mut best);
    // Interval pieces [start, end) intersected with [lo, inf).
    let first = t.count_le(lo);
    let mut starts = vec![lo];
    starts.extend(radii[first..].iter().copied());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let (b, a_) = t.coefficients(start);
        consider(start, &mut best);
        if b > 0.0 {
            // u^s (A - B u) peaks at u = s A / (B (s + 1)).
            let u = s * a_ / (b * (s + 1.0));
            if u > 0.0 {
                let r = 1.0 / u;
                if r > start && r < end {
                    consider(r, &mut best);
                }
            }
        }
    }
    best
}

fn growth_sup(prof: &LocalProfiles<'_>, x: usize, a: f64, s: f64) -> (f64, f64) {
    let space = prof.kernel().space();
    let row = space.rho_row(x);
    let mut best = weighted_m_sup(prof.table(x), a, s);
    for (y, &d) in row.iter().enumerate() {
        if y == x {
            continue;
        }
        let r = weighted_m_sup(prof.table(y), a.max(d), s);
        if r.0 > best.0 {
            best = r;
        }
    }
    best
}

/// `(N(x, a), sup_{r >= a} r^{-q/p} M*(x, r))`.
pub fn nondegeneracy_check(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, x: usize, a: f64) -> Result<Nondegeneracy> {
    let pq = ConjugatePair::from_q(q)?;
    if !(a > 0.0 && a.is_finite()) {
        return input(format!("radius must be positive, got {a}"));
    }
    if x >= kernel.len() {
        return input(format!("point index {x} out of range"));
    }
    let prof = LocalProfiles::new(kernel, sigma, q)?;
    let (growth, growth_radius) = growth_sup(&prof, x, a, pq.q / pq.p);
    Ok(Nondegeneracy {
        tail: prof.table(x).tail(a),
        growth,
        growth_radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PhiBall {
    /// `Phi(x, a)`.
    pub value: f64,
    /// The three summands of `Phi`.
    pub terms: [f64; 3],
    /// `c_j` for `B_j = B_{a 2^{-j}}(x)`.
    pub coefficients: Vec<f64>,
    /// `phi_B` at every point.
    pub phi: Vec<f64>,
    /// `max phi_B / K(chi_B dsigma)`; at most 1 when the minorant holds.
    pub minorant_ratio: f64,
    /// `(s, max phi^{s+1} / ((s + 1) K(phi^s dsigma)))` per exponent.
    pub power_ratios: Vec<(f64, f64)>,
}

/// `Phi(x, a)` and the ball function
/// `phi_B = sum_j (4 k a)^{-1} 2^j |B_j| chi_{B_j}`, with the pointwise
/// checks `K chi_B >= phi_B` and `K phi_B^s >= phi_B^{s+1} / (s + 1)`.
pub fn phi_ball(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, x: usize, a: f64, exponents: &[f64]) -> Result<PhiBall> {
    let pq = ConjugatePair::from_q(q)?;
    let nd = nondegeneracy_check(kernel, sigma, q, x, a)?;
    let prof = LocalProfiles::new(kernel, sigma, q)?;
    let space = kernel.space();
    let mass = prof.table(x).mass(a);
    let r = pq.p / pq.q;
    let r2 = pq.p / (pq.q * pq.q);
    let terms = [
        mass.powf(1.0 / pq.q) * nd.tail.powf(r2),
        prof.m_star(x, a).powf(r),
        mass.powf(1.0 / pq.q) * nd.growth.powf(r2),
    ];

    let n = kernel.len();
    let kappa = kernel.kappa();
    let mut coefficients = Vec::new();
    let mut phi = vec![0.0; n];
    let row = space.rho_row(x);
    for j in 0..1075 {
        let rj = a * 0.5f64.powi(j);
        if !row.iter().any(|&d| d <= rj) {
            break;
        }
        let mj = prof.table(x).mass(rj);
        let c = mj * 2f64.powi(j) / (4.0 * kappa * a);
        coefficients.push(c);
        for (y, &d) in row.iter().enumerate() {
            if d <= rj {
                phi[y] += c;
            }
        }
    }

    let chi: Vec<f64> = row.iter().map(|&d| if d <= a { 1.0 } else { 0.0 }).collect();
    let k_chi = kernel.apply_with(sigma, &chi);
    let ratio = |lhs: &[f64], rhs: &[f64]| -> f64 {
        lhs.iter()
            .zip(rhs)
            .map(|(l, r)| if *l == 0.0 { 0.0 } else { l / r })
            .fold(0.0, f64::max)
    };
    let minorant_ratio = ratio(&phi, &k_chi);
    let mut power_ratios = Vec::new();
    for &s in exponents {
        if !(s > 0.0) {
            return input(format!("exponent s must be positive, got {s}"));
        }
        let ps: Vec<f64> = phi.iter().map(|v| v.powf(s)).collect();
        let lhs = kernel.apply_with(sigma, &ps);
        let rhs: Vec<f64> = phi.iter().map(|v| v.powf(s + 1.0) / (s + 1.0)).collect();
        power_ratios.push((s, ratio(&rhs, &lhs)));
    }
    Ok(PhiBall {
        value: terms.iter().sum(),
        terms,
        coefficients,
        phi,
        minorant_ratio,
        power_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tests::{single_atom, two_point};

    fn unit(n: usize) -> AtomicMeasure {
        AtomicMeasure::uniform(n, 1.0).unwrap()
    }

    #[test]
    fn two_point_tail() {
        let k = two_point();
        let nd = nondegeneracy_check(&k, &unit(2), 2.0, 0, 0.5).unwrap();
        assert!((nd.tail - 2.5).abs() < 1e-14);
        assert!(nd.growth.is_finite() && nd.growth > 0.0);
        let z = nondegeneracy_check(&k, &AtomicMeasure::zero(2), 2.0, 0, 0.5).unwrap();
        assert_eq!((z.tail, z.growth), (0.0, 0.0));
    }

    #[test]
    fn growth_by_scan() {
        let k = two_point();
        let s = unit(2);
        let prof = LocalProfiles::new(&k, &s, 3.0).unwrap();
        let nd = nondegeneracy_check(&k, &s, 3.0, 1, 0.3).unwrap();
        let e = 2.0; // q/p with q = 3
        let mut scan = 0.0f64;
        for i in 0..200_000 {
            let r = 0.3 * (1.0 + i as f64 * 1e-4);
            scan = scan.max(r.powf(-e) * prof.m_star(1, r));
        }
        assert!(nd.growth >= scan * (1.0 - 1e-12));
        assert!(nd.growth <= scan * (1.0 + 1e-6), "{} vs {scan}", nd.growth);
    }

    #[test]
    fn two_point_ball_function() {
        let k = two_point();
        let b = phi_ball(&k, &unit(2), 2.0, 0, 1.0, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(b.coefficients, vec![0.5, 0.5]);
        assert_eq!(b.phi, vec![0.5, 1.0]);
        assert!(b.minorant_ratio <= 1.0);
        for (_, r) in &b.power_ratios {
            assert!(*r <= 1.0);
        }
    }

    #[test]
    fn one_atom_ball() {
        let k = single_atom(2.0);
        let b = phi_ball(&k, &unit(1), 2.0, 0, 0.9, &[1.0, 3.0]).unwrap();
        assert_eq!(b.coefficients.len(), 1);
        assert!(b.minorant_ratio <= 1.0);
        for (_, r) in &b.power_ratios {
            assert!(*r <= 1.0);
        }
    }
}
