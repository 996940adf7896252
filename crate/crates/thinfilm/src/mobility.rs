//! Power-law mobility `f(u) = u^n`, its clamp regularization
//! `f_eps(u) = min(max(eps, f(|u|)), M)`, and the entropy densities
//! `G` and `G_eps` defined by `f G'' = 1` and `f_eps G_eps'' = 1`,
//! anchored so that `G(A) = G'(A) = 0`.
//!
//! Both entropies are evaluated from the identity
//! `G(u) = int_A^u (u - s) / f(s) ds`, integrated in closed form piece by
//! piece across the clamp junctions `|s| = eps^{1/n}` and `|s| = M^{1/n}`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct MobilityModel {
    n: f64,
    eps: f64,
    cap_m: f64,
    anchor: f64,
}

impl MobilityModel {
    pub fn new(n: f64, eps: f64, cap_m: f64, anchor: f64) -> Result<Self> {
        if !(n > 1.0) {
            return Err(Error::InvalidModel(format!("exponent n must be > 1, got {n}")));
        }
        if eps < 0.0 {
            return Err(Error::InvalidModel(format!("eps must be >= 0, got {eps}")));
        }
        if !(cap_m > eps) {
            return Err(Error::InvalidModel(format!(
                "cap M = {cap_m} must exceed eps = {eps}"
            )));
        }
        if !(anchor > 0.0) {
            return Err(Error::InvalidModel(format!("anchor must be > 0, got {anchor}")));
        }
        let r = if eps > 0.0 { eps.powf(1.0 / n) } else { 0.0 };
        let cap_r = cap_m.powf(1.0 / n);
        if !(r < anchor && anchor < cap_r) {
            return Err(Error::InvalidModel(format!(
                "need eps^(1/n) = {r} < anchor = {anchor} < M^(1/n) = {cap_r}"
            )));
        }
        Ok(Self {
            n,
            eps,
            cap_m,
            anchor,
        })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cap_m(&self) -> f64 {
        self.cap_m
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Lower clamp junction `eps^{1/n}`.
    pub fn clamp_radius(&self) -> f64 {
        if self.eps > 0.0 {
            self.eps.powf(1.0 / self.n)
        } else {
            0.0
        }
    }

    /// Upper clamp junction `M^{1/n}`.
    pub fn cap_radius(&self) -> f64 {
        self.cap_m.powf(1.0 / self.n)
    }

    /// Unregularized mobility `u^n`; rejects negative input.
    pub fn f(&self, u: f64) -> Result<f64> {
        power_mobility(u, self.n)
    }

    /// Clamped even extension `min(max(eps, |u|^n), M)`.
    pub fn f_eps(&self, u: f64) -> f64 {
        u.abs().powf(self.n).max(self.eps).min(self.cap_m)
    }

    /// Almost-everywhere derivative of `f_eps`: zero on the clamped
    /// branches, `n |u|^{n-1} sign(u)` in between.
    pub fn f_eps_prime(&self, u: f64) -> f64 {
        let a = u.abs();
        let fu = a.powf(self.n);
        if fu <= self.eps || fu >= self.cap_m {
            0.0
        } else {
            self.n * a.powf(self.n - 1.0) * u.signum()
        }
    }

    /// Unregularized entropy density G with the model's anchor.
    pub fn entropy_g(&self, u: f64) -> Result<f64> {
        entropy_density(u, self.n, self.anchor)
    }

    /// Regularized entropy density: `int_A^u (u - s) / f_eps(s) ds`.
    ///
    /// Defined on all of R, non-negative, convex and C^1 across the clamp
    /// junctions. For eps = 0 the value is +inf for u <= 0 when n >= 2.
    pub fn entropy_g_eps(&self, u: f64) -> f64 {
        if self.eps == 0.0 && u <= 0.0 {
            return if self.n >= 2.0 {
                f64::INFINITY
            } else {
                self.double_integral(u)
            };
        }
        self.double_integral(u)
    }

    fn double_integral(&self, u: f64) -> f64 {
        let a = self.anchor;
        if u == a {
            return 0.0;
        }
        let r = self.clamp_radius();
        let cap_r = self.cap_radius();
        let mut pts = vec![a];
        let (lo, hi) = if u < a { (u, a) } else { (a, u) };
        for b in [-cap_r, -r, r, cap_r] {
            if b > lo && b < hi {
                pts.push(b);
            }
        }
        pts.push(u);
        pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        if u < a {
            pts.reverse();
        }
        // dedupe the anchor/endpoint against clamp junctions
        pts.dedup();

        let mut acc = 0.0;
        for w in pts.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            if s0 == s1 {
                continue;
            }
            let mid = 0.5 * (s0 + s1);
            acc += self.segment_contribution(u, s0, s1, mid);
        }
        acc
    }

    /// Closed-form `int_{s0}^{s1} (u - s) psi(s) ds` with `psi = 1/f_eps`
    /// constant-branch or power-branch according to the midpoint.
    fn segment_contribution(&self, u: f64, s0: f64, s1: f64, mid: f64) -> f64 {
        let n = self.n;
        let am = mid.abs();
        let r = self.clamp_radius();
        let cap_r = self.cap_radius();
        if am <= r {
            let c = 1.0 / self.eps;
            u * c * (s1 - s0) - 0.5 * c * (s1 * s1 - s0 * s0)
        } else if am >= cap_r {
            let c = 1.0 / self.cap_m;
            u * c * (s1 - s0) - 0.5 * c * (s1 * s1 - s0 * s0)
        } else if mid > 0.0 {
            // psi = s^{-n}
            let p0 = |s: f64| s.powf(1.0 - n) / (1.0 - n);
            let p1: Box<dyn Fn(f64) -> f64> = if (n - 2.0).abs() < 1e-12 {
                Box::new(|s: f64| s.ln())
            } else {
                Box::new(move |s: f64| s.powf(2.0 - n) / (2.0 - n))
            };
            u * (p0(s1) - p0(s0)) - (p1(s1) - p1(s0))
        } else {
            // psi = (-s)^{-n}
            let p0 = |s: f64| (-s).powf(1.0 - n) / (n - 1.0);
            let p1: Box<dyn Fn(f64) -> f64> = if (n - 2.0).abs() < 1e-12 {
                Box::new(|s: f64| (-s).ln())
            } else {
                Box::new(move |s: f64| (-s).powf(2.0 - n) / (2.0 - n))
            };
            u * (p0(s1) - p0(s0)) - (p1(s1) - p1(s0))
        }
    }
}

/// `f(u) = u^n` for u >= 0.
pub fn power_mobility(u: f64, n: f64) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::NegativeMobility(u));
    }
    Ok(u.powf(n))
}

/// Closed-form entropy density with `G''(u) = u^{-n}`, `G(anchor) = G'(anchor) = 0`.
///
/// For n != 2: `G(u) = u^{2-n} / ((1-n)(2-n)) + C1 u + C2` with the two
/// constants fixed by the anchor conditions; for n = 2 the logarithmic
/// branch `G(u) = -ln(u / A) + u / A - 1`.
pub fn entropy_density(u: f64, n: f64, anchor: f64) -> Result<f64> {
    if u <= 0.0 {
        return Err(Error::NonPositiveSample(u));
    }
    if !(n > 1.0) {
        return Err(Error::InvalidModel(format!("exponent n must be > 1, got {n}")));
    }
    if (n - 2.0).abs() < 1e-12 {
        return Ok(-(u / anchor).ln() + u / anchor - 1.0);
    }
    let c1 = -anchor.powf(1.0 - n) / (1.0 - n);
    let lead = |s: f64| s.powf(2.0 - n) / ((1.0 - n) * (2.0 - n));
    let c2 = -lead(anchor) - c1 * anchor;
    Ok(lead(u) + c1 * u + c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: f64, eps: f64, cap_m: f64) -> MobilityModel {
        MobilityModel::new(n, eps, cap_m, 1.0).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn construction_constraints() {
        assert!(MobilityModel::new(1.0, 1e-3, 100.0, 1.0).is_err());
        assert!(MobilityModel::new(3.0, 0.1, 0.05, 1.0).is_err());
        // anchor must sit between the clamp radii
        assert!(MobilityModel::new(3.0, 1e-3, 100.0, 0.05).is_err());
        assert!(MobilityModel::new(3.0, 1e-3, 100.0, 10.0).is_err());
        assert!(MobilityModel::new(3.0, 1e-3, 100.0, 1.0).is_ok());
    }

    #[test]
    fn plain_mobility() {
        assert_close(power_mobility(2.0, 3.0).unwrap(), 8.0, 0.0);
        assert_close(power_mobility(0.0, 3.0).unwrap(), 0.0, 0.0);
        assert_close(power_mobility(4.0, 1.5).unwrap(), 8.0, 1e-14);
        assert!(power_mobility(-0.1, 3.0).is_err());
    }

    #[test]
    fn clamped_mobility() {
        let m = model(3.0, 1e-3, 100.0);
        assert_close(m.f_eps(-0.05), 1e-3, 0.0); // |u|^3 = 1.25e-4 < eps
        assert_close(m.f_eps(2.0), 8.0, 1e-14);
        assert_close(m.f_eps(10.0), 100.0, 0.0); // 1000 capped at M
        assert_close(m.f_eps(-2.0), m.f_eps(2.0), 0.0); // even
        for &u in &[-5.0, -0.3, 0.0, 0.4, 1.7, 8.0] {
            let v = m.f_eps(u);
            assert!((1e-3..=100.0).contains(&v));
        }
    }

    #[test]
    fn entropy_closed_forms() {
        // n = 3, A = 1: G(u) = u^{-1}/2 + u/2 - 1
        assert_close(entropy_density(2.0, 3.0, 1.0).unwrap(), 0.25, 1e-14);
        assert_close(entropy_density(1.0, 3.0, 1.0).unwrap(), 0.0, 1e-14);
        // n = 2 logarithmic branch at u = e
        let e = std::f64::consts::E;
        assert_close(entropy_density(e, 2.0, 1.0).unwrap(), e - 2.0, 1e-14);
        assert!(entropy_density(0.0, 3.0, 1.0).is_err());
        assert!(entropy_density(-1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn entropy_anchor_conditions() {
        for &n in &[1.5, 2.0, 2.5, 3.0, 4.0] {
            let g0 = entropy_density(1.0, n, 1.0).unwrap();
            assert_close(g0, 0.0, 1e-14);
            let h = 1e-6;
            let slope = (entropy_density(1.0 + h, n, 1.0).unwrap()
                - entropy_density(1.0 - h, n, 1.0).unwrap())
                / (2.0 * h);
            assert_close(slope, 0.0, 1e-8);
        }
    }

    #[test]
    fn entropy_divergence_split_at_exponent_two() {
        // n >= 2 blows up at 0; 1 < n < 2 stays bounded
        let near_zero = 1e-9;
        // G ~ u^{-1/2} / 0.75 for n = 5/2, so roughly 4.2e4 at u = 1e-9
        assert!(entropy_density(near_zero, 2.5, 1.0).unwrap() > 1e4);
        assert!(entropy_density(near_zero, 2.0, 1.0).unwrap() > 10.0);
        let b = entropy_density(near_zero, 1.5, 1.0).unwrap();
        // closed form limit at 0 for n = 3/2, A = 1: u^{1/2}/(1/2 * ...) terms -> 4 - 2 = finite
        assert!(b.is_finite() && b < 10.0);
    }

    #[test]
    fn regularized_entropy_anchor_and_ode() {
        let m = model(3.0, 1e-3, 100.0);
        assert_close(m.entropy_g_eps(1.0), 0.0, 1e-14);
        // defining ODE f_eps * G_eps'' = 1 by second difference quotient
        let h = 1e-4;
        for &u in &[0.5, 2.0] {
            let dd = (m.entropy_g_eps(u + h) - 2.0 * m.entropy_g_eps(u) + m.entropy_g_eps(u - h))
                / (h * h);
            assert_close(dd * m.f_eps(u), 1.0, 1e-4);
        }
    }

    #[test]
    fn regularized_entropy_matches_bruteforce_quadrature() {
        // G_eps(0) against nested quadrature of int_A^0 (0 - s)/f_eps(s) ds
        let m = model(3.0, 1e-3, 100.0);
        let steps = 400_000;
        let (a, b) = (0.0, 1.0);
        let dh = (b - a) / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let s = a + (i as f64 + 0.5) * dh;
            acc += (0.0 - s) / m.f_eps(s) * (-dh); // path from A=1 down to 0
        }
        let oracle = acc;
        assert!(
            (m.entropy_g_eps(0.0) - oracle).abs() < 1e-8,
            "closed form {} vs oracle {}",
            m.entropy_g_eps(0.0),
            oracle
        );
    }

    #[test]
    fn regularized_entropy_quadratic_well_below_clamp() {
        // inside |u| < eps^{1/n} the density is quadratic with curvature 1/eps
        let m = model(3.0, 1e-3, 100.0);
        let r = m.clamp_radius();
        let h = r / 10.0;
        let dd = (m.entropy_g_eps(h) - 2.0 * m.entropy_g_eps(0.0) + m.entropy_g_eps(-h)) / (h * h);
        assert_close(dd, 1.0 / 1e-3, 1e-4 / 1e-3);
    }

    #[test]
    fn regularized_entropy_nonnegative_convex() {
        let m = model(2.5, 1e-4, 50.0);
        let mut prev_dd = None;
        for i in 0..200 {
            let u = -2.0 + 4.0 * i as f64 / 200.0;
            let g = m.entropy_g_eps(u);
            assert!(g >= -1e-12, "G_eps({u}) = {g}");
            let h = 1e-3;
            let dd =
                (m.entropy_g_eps(u + h) - 2.0 * g + m.entropy_g_eps(u - h)) / (h * h);
            assert!(dd >= -1e-6, "convexity fails at {u}: {dd}");
            prev_dd = Some(dd);
        }
        let _ = prev_dd;
    }

    #[test]
    fn eps_to_zero_convergence_and_monotonicity() {
        // f_eps -> f on compacts of (0, M^{1/n})
        for &eps in &[1e-2, 1e-4, 1e-6] {
            let m = model(3.0, eps, 100.0);
            for &u in &[0.3, 0.7, 1.5, 3.0] {
                let err = (m.f_eps(u) - u.powf(3.0)).abs();
                assert!(err <= eps, "eps = {eps}, u = {u}, err = {err}");
            }
        }
        // G_eps(0) grows as eps shrinks
        let g_coarse = model(3.0, 1e-2, 100.0).entropy_g_eps(0.0);
        let g_fine = model(3.0, 1e-4, 100.0).entropy_g_eps(0.0);
        assert!(g_coarse <= g_fine);
    }

    #[test]
    fn c1_across_clamp_junctions() {
        let m = model(3.0, 1e-3, 100.0);
        for &b in &[m.clamp_radius(), m.cap_radius(), -m.clamp_radius()] {
            let h = 1e-7;
            let left = (m.entropy_g_eps(b) - m.entropy_g_eps(b - h)) / h;
            let right = (m.entropy_g_eps(b + h) - m.entropy_g_eps(b)) / h;
            assert!(
                (left - right).abs() < 1e-4,
                "kink at {b}: {left} vs {right}"
            );
        }
    }
}
