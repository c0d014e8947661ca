//! The M/G/1 queue-length process as a regenerative process.
//!
//! Cycles are idle period + busy period. Everything the bounds need is
//! obtained from the embedded chain at service completions:
//!
//! * `d_k`, the probability of `k` arrivals during one service, and its
//!   tail `D_k = Σ_{i>k} d_i`;
//! * the taboo probabilities `q_{k,u}` of reaching `u` before `0` from `k`,
//!   with `q(u) = q_{1,u}`;
//! * the taboo hitting means from `1`, giving `m̂₁⁺` and `m₁⁻`;
//! * the light-tail constants (Cramér root, busy-period decay rate).
//!
//! Level-`u` hitting times come on two clocks. The *embedded* clock stops at
//! the end of the service during which the level is reached; the
//! *continuous* clock stops at the arrival that reaches it. The continuous
//! clock is the one the first-passage time `𝔗_Q(u)` uses.

use serde::{Deserialize, Serialize};

use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::linsolve::DenseSystem;
use crate::numeric::{bracketed_newton, integrate_relative};
use crate::report::{build_report, ExactSplit, Provenance, StatementOptions, StatementReport};

/// Poisson(λ) arrivals served by a single server with i.i.d. service times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MG1Model {
    lambda: f64,
    service: ServiceDistribution,
}

impl MG1Model {
    pub fn new(lambda: f64, service: ServiceDistribution) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        service.validate()?;
        let rho = lambda * service.mean();
        if !(rho < 1.0) {
            return Err(Error::invalid(
                "lambda",
                format!("load rho = {rho} must be < 1"),
            ));
        }
        Ok(MG1Model { lambda, service })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn service(&self) -> &ServiceDistribution {
        &self.service
    }

    /// `ρ = λ b₁`
    pub fn rho(&self) -> f64 {
        self.lambda * self.service.mean()
    }
}

/// Which epoch ends a level-`u` hitting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    /// The arrival that brings the queue to `u`.
    #[default]
    Continuous,
    /// The completion of the service during which `u` was reached.
    Embedded,
}

/// Distribution of the number `ν` of arrivals during one service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCounts {
    lambda: f64,
    /// `d_k = P(ν = k)`, `k = 0..=K`
    pub d: Vec<f64>,
    /// `D_k = P(ν > k)`
    pub tail: Vec<f64>,
    /// `E[η; ν ≥ j] = (1/λ) Σ_{m > j} m d_m`
    weighted_tail: Vec<f64>,
}

/// Relative size below which complements are replaced by direct tail sums.
const COMPLEMENT_FLOOR: f64 = 1e-3;
const MAX_TERMS: usize = 2_000_000;

impl ArrivalCounts {
    /// Truncation index `K`.
    pub fn truncation(&self) -> usize {
        self.d.len() - 1
    }

    pub fn d(&self, k: usize) -> f64 {
        self.d.get(k).copied().unwrap_or(0.0)
    }

    /// `D_k`
    pub fn tail(&self, k: usize) -> f64 {
        self.tail.get(k).copied().unwrap_or(0.0)
    }

    /// `E[η; ν = k] = (k+1) d_{k+1} / λ`
    pub fn weight(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.d(k + 1) / self.lambda
    }

    /// `E[η; ν ≥ j]`
    pub fn weighted_tail(&self, j: usize) -> f64 {
        self.weighted_tail.get(j).copied().unwrap_or(0.0)
    }

    /// `E[Γ_j; Γ_j ≤ η] = (j/λ) D_j`, where `Γ_j` is the `j`-th arrival
    /// epoch after the service started.
    pub fn arrival_tail(&self, j: usize) -> f64 {
        j as f64 / self.lambda * self.tail(j)
    }

    /// The hitting-time tail term for the given clock.
    pub fn clock_tail(&self, clock: Clock, j: usize) -> f64 {
        match clock {
            Clock::Embedded => self.weighted_tail(j),
            Clock::Continuous => self.arrival_tail(j),
        }
    }
}

/// Iterates `d_k` for each service family.
enum Pmf {
    Geometric {
        p: f64,
    },
    Poisson {
        a: f64,
        log_a: f64,
        log_fact: f64,
    },
    NegBinomial {
        log_b: f64,
        shape: f64,
        log_d: f64,
    },
    Mixture {
        parts: Vec<(f64, f64)>,
    },
    Quadrature {
        lambda: f64,
        lo: f64,
        hi: f64,
        tol: f64,
        log_fact: f64,
    },
}

impl Pmf {
    fn term(&mut self, k: usize) -> Result<f64> {
        let kf = k as f64;
        Ok(match self {
            Pmf::Geometric { p } => (1.0 - *p) * p.powi(k as i32),
            Pmf::Poisson { a, log_a, log_fact } => {
                if k > 0 {
                    *log_fact += kf.ln();
                }
                (kf * *log_a - *a - *log_fact).exp()
            }
            Pmf::NegBinomial {
                log_b,
                shape,
                log_d,
            } => {
                if k > 0 {
                    *log_d += *log_b + ((kf + *shape - 1.0) / kf).ln();
                }
                log_d.exp()
            }
            Pmf::Mixture { parts } => parts
                .iter()
                .map(|(w, p)| w * (1.0 - p) * p.powi(k as i32))
                .sum(),
            Pmf::Quadrature {
                lambda,
                lo,
                hi,
                tol,
                log_fact,
            } => {
                if k > 0 {
                    *log_fact += kf.ln();
                }
                uniform_term(*lambda, *lo, *hi, k, *log_fact, *tol)?
            }
        })
    }
}

/// `(1/(hi−lo)) ∫_lo^hi e^{−λx} (λx)^k / k! dx`, split around the peak at
/// `x = k/λ` so that each piece is smooth on its own scale.
fn uniform_term(lambda: f64, lo: f64, hi: f64, k: usize, log_fact: f64, tol: f64) -> Result<f64> {
    let kf = k as f64;
    let f = |x: f64| {
        if k == 0 {
            (-lambda * x).exp()
        } else if x <= 0.0 {
            0.0
        } else {
            (kf * (lambda * x).ln() - lambda * x - log_fact).exp()
        }
    };
    let peak = kf / lambda;
    let width = (kf + 1.0).sqrt() / lambda;
    let mut cuts = vec![lo];
    for c in [-8.0, -2.0, 0.0, 2.0, 8.0] {
        let x = peak + c * width;
        if x > lo && x < hi {
            cuts.push(x);
        }
    }
    cuts.push(hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_relative("arrivals_per_service", f, w[0], w[1], tol)?;
    }
    Ok(total / (hi - lo))
}

/// Computes `d_k`, `D_k` and the weighted tails.
///
/// The series is extended past `k_min` (at least
/// `u + ⌈50 + 10 λ b₁⌉` is a good choice) until the complement
/// `1 − Σ_{i≤K} d_i` is below `1e-12` and the remaining tail is negligible
/// relative to `d_{k_min}`. Tails that the complement would compute with
/// cancellation are summed backwards from `K` instead.
pub fn arrivals_per_service(model: &MG1Model, k_min: usize, tol: f64) -> Result<ArrivalCounts> {
    let op = "arrivals_per_service";
    if !(tol > 0.0) {
        return Err(Error::domain(op, format!("tol = {tol} must be > 0")));
    }
    let lambda = model.lambda;
    let mut pmf = match &model.service {
        ServiceDistribution::Exponential { rate } => Pmf::Geometric {
            p: lambda / (lambda + rate),
        },
        ServiceDistribution::Deterministic { value } => {
            let a = lambda * value;
            Pmf::Poisson {
                a,
                log_a: a.ln(),
                log_fact: 0.0,
            }
        }
        ServiceDistribution::Erlang { shape, rate } => {
            let s = *shape as f64;
            Pmf::NegBinomial {
                log_b: (lambda / (rate + lambda)).ln(),
                shape: s,
                log_d: s * (rate / (rate + lambda)).ln(),
            }
        }
        ServiceDistribution::HyperExponential { weights, rates } => Pmf::Mixture {
            parts: weights
                .iter()
                .zip(rates)
                .map(|(w, r)| (*w, lambda / (lambda + r)))
                .collect(),
        },
        ServiceDistribution::Uniform { lo, hi } => Pmf::Quadrature {
            lambda,
            lo: *lo,
            hi: *hi,
            tol: tol.min(1e-12),
            log_fact: 0.0,
        },
    };

    let mut d = Vec::with_capacity(k_min + 64);
    let mut partial = 0.0;
    let mut k = 0usize;
    let remainder = loop {
        let dk = pmf.term(k)?;
        d.push(dk);
        partial += dk;
        if k >= k_min.max(2) {
            let reference = d[k_min].max(f64::MIN_POSITIVE);
            if dk == 0.0 {
                break 0.0;
            }
            let r = dk / d[k - 1];
            if r < 1.0 && 1.0 - partial < 1e-12 {
                // geometric bound on the unseen tail, with a safety factor
                let rem = 4.0 * dk * r / (1.0 - r);
                if rem <= 1e-17 * reference {
                    break rem;
                }
            }
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Resource {
                op,
                detail: format!("arrival-count series did not converge within {MAX_TERMS} terms"),
            });
        }
    };

    let kmax = d.len() - 1;
    // backward sums of d_i and i d_i over i > k
    let mut back = vec![0.0; kmax + 1];
    let mut back_w = vec![0.0; kmax + 1];
    let mut acc = remainder;
    let mut acc_w = remainder * (kmax + 1) as f64;
    for i in (0..=kmax).rev() {
        back[i] = acc;
        back_w[i] = acc_w;
        acc += d[i];
        acc_w += i as f64 * d[i];
    }
    let mut tail = Vec::with_capacity(kmax + 1);
    let mut cum = 0.0;
    for (i, &di) in d.iter().enumerate() {
        cum += di;
        let complement = 1.0 - cum;
        tail.push(if complement >= COMPLEMENT_FLOOR {
            complement
        } else {
            back[i]
        });
    }
    // Σ_m m d_m = E ν = λ b₁
    let mean_count = lambda * model.service.mean();
    let mut weighted_tail = Vec::with_capacity(kmax + 1);
    let mut cum_w = 0.0;
    for j in 0..=kmax {
        // E[η; ν ≥ j] = (1/λ) Σ_{m ≥ j+1} m d_m
        cum_w += j as f64 * d[j];
        let complement = mean_count - cum_w;
        let v = if complement >= COMPLEMENT_FLOOR * mean_count {
            complement
        } else {
            back_w[j]
        };
        weighted_tail.push(v / lambda);
    }
    Ok(ArrivalCounts {
        lambda,
        d,
        tail,
        weighted_tail,
    })
}

/// Default truncation floor `u + ⌈50 + 10 λ b₁⌉`.
pub fn default_truncation(model: &MG1Model, u: usize) -> usize {
    u + (50.0 + 10.0 * model.rho()).ceil() as usize
}

/// Taboo probabilities of reaching `u` before `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub u: usize,
    /// `q_{k,u}` for `k = 1..=max(u−2, 1)`; empty for `u = 1`.
    pub q_ku: Vec<f64>,
    /// `q(u) = q_{1,u}`
    pub q_u: f64,
}

impl Exceedance {
    /// `q_{s,u}` with `q_{0,u} = 0`.
    fn at(&self, s: usize) -> f64 {
        if s == 0 {
            0.0
        } else {
            self.q_ku[s - 1]
        }
    }
}

/// Matrix `I − [d_k at column i+k−1]` shared by all three systems.
fn taboo_matrix(counts: &ArrivalCounts, u: usize) -> DenseSystem {
    let n = (u - 2).max(1);
    let mut a = DenseSystem::zeros(n);
    for i in 1..=n {
        *a.a_mut(i - 1, i - 1) += 1.0;
        for k in 0..(u - i) {
            let s = i + k - 1;
            if (1..=u - 2).contains(&s) {
                *a.a_mut(i - 1, s - 1) -= counts.d(k);
            }
        }
    }
    a
}

fn check_u(op: &'static str, u: usize) -> Result<()> {
    if u == 0 {
        return Err(Error::domain(op, "level u must be >= 1"));
    }
    Ok(())
}

/// Solves `q_k = D_{u−k−1} + Σ_{i=0}^{u−k−1} d_i q_{k−1+i}` with `q_0 = 0`.
pub fn solve_exceedance(counts: &ArrivalCounts, u: usize) -> Result<Exceedance> {
    let op = "solve_exceedance";
    check_u(op, u)?;
    if u == 1 {
        return Ok(Exceedance {
            u,
            q_ku: Vec::new(),
            q_u: 1.0,
        });
    }
    let a = taboo_matrix(counts, u);
    let n = a.order();
    let rhs: Vec<f64> = (1..=n).map(|k| counts.tail(u - k - 1)).collect();
    let mut q = a.solve_many(op, &[rhs])?.remove(0);
    q.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(Exceedance {
        u,
        q_u: q[0],
        q_ku: q,
    })
}

/// Taboo hitting means on both clocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachMeans {
    /// `₀m_{i,u}` (embedded clock), `i = 1..=max(u−2, 1)`
    pub embedded: Vec<f64>,
    /// The same with the continuous clock.
    pub continuous: Vec<f64>,
    pub m_hat1_plus_embedded: f64,
    pub m_hat1_plus_continuous: f64,
}

impl ReachMeans {
    pub fn m_hat1_plus(&self, clock: Clock) -> f64 {
        match clock {
            Clock::Embedded => self.m_hat1_plus_embedded,
            Clock::Continuous => self.m_hat1_plus_continuous,
        }
    }
}

/// Solves `₀m_i = E[η; ν ≥ u−i] + Σ_{k=0}^{u−i−1} (E[η; ν=k] q_{i+k−1} + d_k ₀m_{i+k−1})`
/// and returns `m̂₁⁺ = 1/λ + ₀m_1 / q(u)` for both clocks.
pub fn solve_reach_means(counts: &ArrivalCounts, exceed: &Exceedance) -> Result<ReachMeans> {
    let op = "solve_reach_means";
    let u = exceed.u;
    let inv_lambda = 1.0 / counts.lambda;
    if u == 1 {
        return Ok(ReachMeans {
            embedded: Vec::new(),
            continuous: Vec::new(),
            m_hat1_plus_embedded: inv_lambda,
            m_hat1_plus_continuous: inv_lambda,
        });
    }
    let a = taboo_matrix(counts, u);
    let n = a.order();
    let mut emb = vec![0.0; n];
    let mut cont = vec![0.0; n];
    for i in 1..=n {
        let carried: f64 = (0..(u - i))
            .map(|k| counts.weight(k) * exceed.at(i + k - 1))
            .sum();
        emb[i - 1] = counts.clock_tail(Clock::Embedded, u - i) + carried;
        cont[i - 1] = counts.clock_tail(Clock::Continuous, u - i) + carried;
    }
    let mut sol = a.solve_many(op, &[emb, cont])?;
    let continuous = sol.pop().expect("two right-hand sides");
    let embedded = sol.pop().expect("two right-hand sides");
    let q = exceed.q_u;
    Ok(ReachMeans {
        m_hat1_plus_embedded: inv_lambda + embedded[0] / q,
        m_hat1_plus_continuous: inv_lambda + continuous[0] / q,
        embedded,
        continuous,
    })
}

/// Taboo return means to `0` avoiding `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMeans {
    /// `ᵤm_{i,0}`, `i = 1..=max(u−2, 1)`
    pub means: Vec<f64>,
    /// `m₁⁻ = 1/λ + ᵤm_{1,0} / (1 − q(u))`
    pub m1_minus: f64,
}

/// Solves `ᵤm_i = Σ_{k=0}^{u−i−1} (E[η; ν=k](1 − q_{i+k−1}) + d_k ᵤm_{i+k−1})`.
///
/// Undefined for `u = 1`, where every cycle reaches the level.
pub fn solve_return_means(counts: &ArrivalCounts, exceed: &Exceedance) -> Result<ReturnMeans> {
    let op = "solve_return_means";
    let u = exceed.u;
    if u == 1 {
        return Err(Error::domain(op, "u = 1: no cycle stays below the level"));
    }
    let a = taboo_matrix(counts, u);
    let n = a.order();
    let rhs: Vec<f64> = (1..=n)
        .map(|i| {
            (0..(u - i))
                .map(|k| counts.weight(k) * (1.0 - exceed.at(i + k - 1)))
                .sum()
        })
        .collect();
    let means = a.solve_many(op, &[rhs])?.remove(0);
    Ok(ReturnMeans {
        m1_minus: 1.0 / counts.lambda + means[0] / (1.0 - exceed.q_u),
        means,
    })
}

/// All taboo quantities at level `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabooSolution {
    pub u: usize,
    pub counts: ArrivalCounts,
    pub exceedance: Exceedance,
    pub reach: ReachMeans,
    /// `None` for `u = 1`.
    pub returns: Option<ReturnMeans>,
}

impl TabooSolution {
    pub fn q_u(&self) -> f64 {
        self.exceedance.q_u
    }

    pub fn m_hat1_plus(&self, clock: Clock) -> f64 {
        self.reach.m_hat1_plus(clock)
    }

    pub fn m1_minus(&self) -> Option<f64> {
        self.returns.as_ref().map(|r| r.m1_minus)
    }

    /// Embedded minus continuous `m̂₁⁺`: the mean residual service at the
    /// hitting epoch.
    pub fn clock_gap(&self) -> f64 {
        self.reach.m_hat1_plus_embedded - self.reach.m_hat1_plus_continuous
    }

    /// Checks `Σ_{k≤K} d_k + D_K = 1`.
    pub fn normalization_error(&self) -> f64 {
        let c = &self.counts;
        (c.d.iter().sum::<f64>() + c.tail(c.truncation()) - 1.0).abs()
    }
}

/// Solves every taboo system at level `u`.
pub fn solve_taboo(model: &MG1Model, u: usize) -> Result<TabooSolution> {
    check_u("solve_taboo", u)?;
    let counts = arrivals_per_service(model, default_truncation(model, u), 1e-12)?;
    let exceedance = solve_exceedance(&counts, u)?;
    let reach = solve_reach_means(&counts, &exceedance)?;
    let returns = if u >= 2 {
        Some(solve_return_means(&counts, &exceedance)?)
    } else {
        None
    };
    Ok(TabooSolution {
        u,
        counts,
        exceedance,
        reach,
        returns,
    })
}

/// First two moments of the cycle (idle + busy period):
/// `m₁ = 1/((1−ρ)λ)`, `m₂ = 2/(λ²(1−ρ)) + b₂/(1−ρ)³`.
pub fn cycle_moments(model: &MG1Model) -> (f64, f64) {
    let l = model.lambda;
    let rho = model.rho();
    let b2 = model.service.moment(2);
    (
        1.0 / ((1.0 - rho) * l),
        2.0 / (l * l * (1.0 - rho)) + b2 / (1.0 - rho).powi(3),
    )
}

/// Light-tail constants of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightTailParams {
    /// Root of `M(β) = 1 + β/λ`.
    pub beta: f64,
    /// `γ = ln(1 + β/λ)`, the decay rate of `q(u)` per level.
    pub gamma_rate: f64,
    /// Solution of `M'(v) = 1/λ`.
    pub v_lambda: f64,
    /// Busy-period tail decay rate `λ + v_λ − λ M(v_λ)`.
    pub alpha: f64,
}

/// Finds an upper bracket `hi` in `(lo, s0)` with `f(hi) > 0`.
fn upper_bracket<F: Fn(f64) -> Result<f64>>(
    op: &'static str,
    f: F,
    lo: f64,
    s0: f64,
) -> Result<f64> {
    if s0.is_finite() {
        for k in 1..=60 {
            let hi = s0 - (s0 - lo) * 0.5f64.powi(k);
            if !(hi < s0) {
                break;
            }
            if f(hi)? > 0.0 {
                return Ok(hi);
            }
        }
    } else {
        let mut hi = lo.max(1e-3) * 2.0;
        for _ in 0..200 {
            let v = f(hi)?;
            if v > 0.0 {
                return Ok(hi);
            }
            hi *= 2.0;
        }
    }
    Err(Error::NoRoot {
        op,
        detail: "the transform stays below the target up to the abscissa of convergence".into(),
    })
}

/// Solves `M'(v) = 1/λ` on `(0, s₀)` and returns `(v_λ, α)`.
pub fn busy_decay(model: &MG1Model) -> Result<(f64, f64)> {
    let op = "busy_decay";
    let g = &model.service;
    let target = 1.0 / model.lambda;
    let f = |v: f64| -> Result<f64> { Ok(g.mgf_derivative(v, 1)? - target) };
    let hi = upper_bracket(op, f, 0.0, g.s0())?;
    let fdf = |v: f64| match (g.mgf_derivative(v, 1), g.mgf_derivative(v, 2)) {
        (Ok(m1), Ok(m2)) => (m1 - target, m2),
        _ => (f64::INFINITY, f64::NAN),
    };
    let v = bracketed_newton(op, fdf, 0.0, hi, 1e-15 * target)?;
    let alpha = model.lambda + v - model.lambda * g.mgf(v)?;
    if !(alpha > 0.0) {
        return Err(Error::NoRoot {
            op,
            detail: format!("decay rate alpha = {alpha:e} is not positive"),
        });
    }
    Ok((v, alpha))
}

/// Solves `M(β) = 1 + β/λ` for `β > 0`; returns `(β, ln(1 + β/λ))`.
pub fn cramer_root(model: &MG1Model) -> Result<(f64, f64)> {
    let op = "cramer_root";
    let g = &model.service;
    let l = model.lambda;
    // f(s) = M(s) − 1 − s/λ is convex with f(0) = 0 and its minimum at v_λ
    let (v, _) = busy_decay(model).map_err(|e| match e {
        Error::NoRoot { detail, .. } => Error::NoRoot { op, detail },
        other => other,
    })?;
    let f = |s: f64| -> Result<f64> { Ok(g.mgf(s)? - 1.0 - s / l) };
    let hi = upper_bracket(op, f, v, g.s0())?;
    let fdf = |s: f64| match (g.mgf(s), g.mgf_derivative(s, 1)) {
        (Ok(m), Ok(dm)) => (m - 1.0 - s / l, dm - 1.0 / l),
        _ => (f64::INFINITY, f64::NAN),
    };
    let beta = bracketed_newton(op, fdf, v, hi, 1e-14)?;
    Ok((beta, (beta / l).ln_1p()))
}

pub fn light_tail_params(model: &MG1Model) -> Result<LightTailParams> {
    let (v_lambda, alpha) = busy_decay(model)?;
    let (beta, gamma_rate) = cramer_root(model)?;
    Ok(LightTailParams {
        beta,
        gamma_rate,
        v_lambda,
        alpha,
    })
}

/// Large-`u` upper estimates of `m̂₁⁺` with the vanishing factor dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightTailBound {
    /// `1/λ + u / (α e q(u)^{1/u})`
    pub from_q: f64,
    /// `1/λ + u e^{γ−1} / α`
    pub from_gamma: f64,
    pub asymptotic: bool,
}

pub fn mhat_light_tail_bound(model: &MG1Model, u: usize, q_u: f64) -> Result<LightTailBound> {
    let op = "mhat_light_tail_bound";
    check_u(op, u)?;
    if !(q_u > 0.0 && q_u <= 1.0) {
        return Err(Error::domain(op, format!("q(u) = {q_u} is not in (0, 1]")));
    }
    let p = light_tail_params(model)?;
    let uf = u as f64;
    let inv_lambda = 1.0 / model.lambda;
    Ok(LightTailBound {
        from_q: inv_lambda + uf / (p.alpha * std::f64::consts::E * q_u.powf(1.0 / uf)),
        from_gamma: inv_lambda + uf * (p.gamma_rate - 1.0).exp() / p.alpha,
        asymptotic: true,
    })
}

/// Finite-`q` and large-`u` bounds for the queue at level `u`, one block
/// per `x` in `xs` (each in `(0, 1)`).
///
/// Split statistics come from the solved taboo systems (exact and envelope
/// modes) or from simulated cycles (Monte Carlo mode). Refuses levels with
/// `q(u) >= 1/2`.
pub fn statement41_report(
    model: &MG1Model,
    u: usize,
    xs: &[f64],
    opts: &StatementOptions,
) -> Result<StatementReport> {
    let op = "statement41_report";
    check_u(op, u)?;
    let taboo = solve_taboo(model, u)?;
    let q = taboo.q_u();
    if !(q < 0.5) {
        return Err(Error::domain(
            op,
            format!("q(u) = {q} is not below 1/2; raise the level"),
        ));
    }
    let m1_minus = taboo
        .m1_minus()
        .ok_or_else(|| Error::domain(op, "u = 1: every cycle reaches the level"))?;
    let exact = ExactSplit {
        q,
        m1_minus,
        m_hat_continuous: taboo.m_hat1_plus(Clock::Continuous),
        m_hat_embedded: taboo.m_hat1_plus(Clock::Embedded),
        source: Provenance::Solved,
    };
    build_report(op, model, u, xs, opts, exact)
}
