//! Closed-form regret bounds, confidence radii and concentration tails.
//!
//! Natural logarithms throughout unless a base is named. Every evaluator
//! takes the norm bound `S` explicitly and reduces to the `S = 1` forms.

use serde::Serialize;

use crate::error::{Error, Result};

/// `ceil(b^e)` that treats values within a few ulps of an integer as that
/// integer, so `2^3` does not become 9 through rounding noise.
pub fn ceil_pow(b: f64, e: f64) -> f64 {
    let v = b.powf(e);
    let r = v.round();
    if (v - r).abs() <= 1e-13 * r.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// `g(b) = 1/(b-1) + 1/ln b`.
pub fn g(b: f64) -> f64 {
    1.0 / (b - 1.0) + 1.0 / b.ln()
}

/// `h_{b,T} = b (1 + (T-1)(b-1))`.
pub fn h(b: f64, t: u64) -> f64 {
    b * (1.0 + (t as f64 - 1.0) * (b - 1.0))
}

/// Confidence radius after `n` plays:
/// `S sqrt(lambda) + sqrt(2 ln(1/delta) + m ln(1 + n/(lambda m)))`.
pub fn beta(delta: f64, m: usize, lambda: f64, n: u64, s: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be positive".into()));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidConfig(format!("S must be >= 0, got {s}")));
    }
    let mf = m as f64;
    let inner = 2.0 * (1.0 / delta).ln() + mf * (n as f64 / (lambda * mf)).ln_1p();
    Ok(s * lambda.sqrt() + inner.max(0.0).sqrt())
}

/// Projected LinUCB regret bound
/// `sqrt(8 m T beta_T^2 ln(1 + T/(m lambda)))` with `beta_T` built from
/// `T - 1` plays.
pub fn projected_linucb_bound(t: u64, m: usize, lambda: f64, delta: f64, s: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidConfig("T must be >= 1".into()));
    }
    let bt = beta(delta, m, lambda, t - 1, s)?;
    let (tf, mf) = (t as f64, m as f64);
    Ok((8.0 * mf * tf * bt * bt * (tf / (mf * lambda)).ln_1p()).sqrt())
}

/// Scanned `tau_0` together with the analytic ceiling it must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tau0 {
    pub tau0: u64,
    pub upper_bound: f64,
}

impl Tau0 {
    pub fn within_bound(&self) -> bool {
        self.tau0 as f64 <= self.upper_bound
    }
}

/// Smallest phase `j` from which `ceil(b^{j'-1}) >= 8 m (K/N + 2) ceil(b^{(j'-1)/2})`
/// holds for every `j' >= j`.
///
/// The condition is certain once `b^{(j-1)/2} >= 16 m (K/N + 2)`; the scan
/// starts there and walks down while it still holds.
pub fn tau0(b: f64, m: usize, k: usize, n: usize) -> Result<Tau0> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("b must be > 1, got {b}")));
    }
    if m == 0 || n == 0 || k % n != 0 {
        return Err(Error::InvalidConfig(format!("need m >= 1 and N | K, got m={m}, K={k}, N={n}")));
    }
    let c = 8.0 * m as f64 * ((k / n) as f64 + 2.0);
    let holds = |j: u64| ceil_pow(b, (j - 1) as f64) >= c * ceil_pow(b, (j - 1) as f64 / 2.0);
    let upper_bound = 2.0 * (2.0 * c).ln() / b.ln() + 1.0;
    let mut j = 1u64;
    while b.powf((j - 1) as f64 / 2.0) < 2.0 * c {
        j += 1;
    }
    while j > 1 && holds(j - 1) {
        j -= 1;
    }
    Ok(Tau0 { tau0: j, upper_bound })
}

/// Inputs shared by the multi-agent and single-agent bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub t: u64,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub b: f64,
    pub lambda: f64,
    pub delta: f64,
    pub s: f64,
    pub gap: f64,
    /// `E[b^{2 tau_spr}]` for the gossip graph.
    pub spread_moment: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.t == 0 {
            return bad("T must be >= 1".into());
        }
        if !(self.b > 1.0 && self.b.is_finite()) {
            return bad(format!("b must be > 1, got {}", self.b));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 1 for the bounds, got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.gap > 0.0) {
            return bad(format!("gap must be > 0, got {}", self.gap));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("S must be > 0, got {}", self.s));
        }
        if self.m == 0 || self.k == 0 || self.n == 0 || self.k % self.n != 0 {
            return bad(format!("need m, K, N >= 1 and N | K, got m={}, K={}, N={}", self.m, self.k, self.n));
        }
        if !(self.spread_moment >= 1.0 && self.spread_moment.is_finite()) {
            return bad(format!("spread moment must be finite and >= 1, got {}", self.spread_moment));
        }
        Ok(())
    }

    fn proj_term(&self) -> Result<f64> {
        Ok(projected_linucb_bound(self.t, self.m, self.lambda, self.delta, self.s)? + 2.0 * self.s)
    }

    /// `log_b h + (sqrt h - 1)/(sqrt b - 1)`.
    fn explore_factor(&self) -> f64 {
        let hh = h(self.b, self.t);
        hh.ln() / self.b.ln() + (hh.sqrt() - 1.0) / (self.b.sqrt() - 1.0)
    }
}

/// A bound split into its three additive parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundBreakdown {
    /// Projected LinUCB regret on the right subspace.
    pub projected_linucb: f64,
    /// Constant cost of communication (multi-agent) or of the subspace
    /// search (single agent).
    pub constant: f64,
    /// Cost of subspace exploration.
    pub exploration: f64,
    pub total: f64,
}

impl BoundBreakdown {
    fn new(projected_linucb: f64, constant: f64, exploration: f64) -> Self {
        BoundBreakdown {
            projected_linucb,
            constant,
            exploration,
            total: projected_linucb + constant + exploration,
        }
    }
}

/// Expected per-agent regret bound for the multi-agent algorithm.
pub fn theorem1_bound(inp: &BoundInputs, tau0: u64) -> Result<BoundBreakdown> {
    inp.validate()?;
    let (b, mf, s) = (inp.b, inp.m as f64, inp.s);
    let constant = 2.0
        * s
        * g(b)
        * (ceil_pow(b, 2.0 * tau0 as f64)
            + 48.0 * b.powi(3) / b.ln() * mf.powi(4) * inp.n as f64 / inp.gap.powi(6)
            + b * inp.spread_moment);
    let per_agent = (inp.k / inp.n) as f64 + 2.0;
    let exploration = 16.0 * mf * s * per_agent * inp.explore_factor();
    Ok(BoundBreakdown::new(inp.proj_term()?, constant, exploration))
}

/// Expected regret bound for one agent searching all `K` subspaces alone.
/// Ignores `N` and `spread_moment`.
pub fn single_agent_bound(inp: &BoundInputs) -> Result<BoundBreakdown> {
    let inp = BoundInputs {
        n: 1,
        spread_moment: 1.0,
        ..*inp
    };
    inp.validate()?;
    let (b, mf, kf, s) = (inp.b, inp.m as f64, inp.k as f64, inp.s);
    let constant = 2.0 * s * g(b) * ((b * (16.0 * mf * kf).powi(2)).ceil() + 8.0 * b * b / b.ln() * mf * mf / inp.gap.powi(2));
    let exploration = 16.0 * mf * kf * s * inp.explore_factor();
    Ok(BoundBreakdown::new(inp.proj_term()?, constant, exploration))
}

/// Upper-bound ratio between solo and collaborative regret in the
/// high-dimensional regime `K = N = d/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollaborationRatio {
    pub r_single: f64,
    pub r_multi: f64,
    pub ratio: f64,
}

/// `r_S / r_M` with `delta = 1/T` and `S = 1`. `alpha` is the constant in
/// the complete-graph spread-moment estimate `alpha * N^{...}`, entering as
/// `alpha * d / m`.
pub fn collaboration_ratio(t: u64, d: usize, m: usize, b: f64, lambda: f64, gap: f64, alpha: f64) -> Result<CollaborationRatio> {
    if m == 0 || d % m != 0 {
        return Err(Error::InvalidConfig(format!("d must be a multiple of m, got d={d}, m={m}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
    }
    let inp = BoundInputs {
        t,
        d,
        m,
        k: d / m,
        n: d / m,
        b,
        lambda,
        delta: 1.0 / t.max(2) as f64,
        s: 1.0,
        gap,
        spread_moment: 1.0,
    };
    inp.validate()?;
    let (df, mf) = (d as f64, m as f64);
    let proj = inp.proj_term()?;
    let ef = inp.explore_factor();
    let r_single = proj
        + 2.0 * g(b) * ((b * (16.0 * df).powi(2)).ceil() + 8.0 * b * b / b.ln() * mf * mf / gap.powi(2))
        + 16.0 * df * ef;
    let r_multi = proj
        + 2.0 * g(b) * ((b * b * (48.0 * mf).powi(4)).ceil() + 48.0 * b.powi(3) / b.ln() * mf.powi(3) * df / gap.powi(6) + alpha * df / mf)
        + 48.0 * mf * ef;
    Ok(CollaborationRatio {
        r_single,
        r_multi,
        ratio: r_single / r_multi,
    })
}

/// Tail of the explore estimate after `n` samples of the subspace:
/// `P(||theta_tilde - P theta*|| > eps) <= 2m exp(-eps^2 n / (2 m^2))`.
pub fn lemma2_tail_count(eps: f64, m: usize, n: u64) -> f64 {
    let mf = m as f64;
    2.0 * mf * (-eps * eps * n as f64 / (2.0 * mf * mf)).exp()
}

/// Same tail at the start of phase `j`: `2m exp(-(4 eps^2/m) b^{(j-1)/2})`.
pub fn lemma2_tail_phase(eps: f64, m: usize, b: f64, j: u64) -> f64 {
    let mf = m as f64;
    2.0 * mf * (-(4.0 * eps * eps / mf) * b.powf((j as f64 - 1.0) / 2.0)).exp()
}

/// Probability that a wrong subspace looks at least as good as the true
/// one in phase `j`: `4m exp(-(gap^2/m) b^{(j-1)/2})`.
pub fn lemma3_tail(gap: f64, m: usize, b: f64, j: u64) -> f64 {
    let mf = m as f64;
    4.0 * mf * (-(gap * gap / mf) * b.powf((j as f64 - 1.0) / 2.0)).exp()
}

/// Both phase-indexed tails at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaTails {
    pub lemma2: f64,
    pub lemma3: f64,
}

pub fn lemma_tails(eps: f64, gap: f64, m: usize, b: f64, j: u64) -> Result<LemmaTails> {
    if !(eps > 0.0) || !(gap > 0.0) {
        return Err(Error::InvalidConfig(format!("eps and gap must be > 0, got {eps}, {gap}")));
    }
    if !(b > 1.0) || j == 0 || m == 0 {
        return Err(Error::InvalidConfig(format!("need b > 1, j >= 1, m >= 1; got b={b}, j={j}, m={m}")));
    }
    Ok(LemmaTails {
        lemma2: lemma2_tail_phase(eps, m, b, j),
        lemma3: lemma3_tail(gap, m, b, j),
    })
}
