//! Desk-scale brute-force solvers used as independent ground truth:
//! a branch-and-prune root finder for bounded polynomial systems, a price
//! simplex grid search for market equilibria, a tatonnement heuristic, and
//! support enumeration for 2-strategy 3-player games.
//!
//! These oracles are tolerance-based and incomplete by design: they verify
//! every point they return, and they never certify nonexistence.

mod interval;
mod nash_support;

pub use nash_support::{nash_support_enumeration, NashSolution};

use interval::Interval;

use thiserror::Error;

use crate::market::{excess_demand, Agent, MarketError, MarketInstance};
use crate::poly::{Monomial, Polynomial, PolynomialSystem};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("search cap exceeded after {processed} boxes")]
    CapExceeded { processed: usize },
    #[error("tatonnement did not converge within the iteration budget")]
    NotConverged,
    #[error("support enumeration implemented for 2 strategies per player, got {0}")]
    UnsupportedStrategyCount(usize),
    #[error("step size and iteration budget must be positive")]
    BadConfig,
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Multi-resolution search configuration. The per-dimension cell width at
/// full depth is `(U_j - L_j) / (resolution * 2^refine_depth)`.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub resolution: u32,
    pub refine_depth: u32,
    /// Acceptance tolerance on the max absolute residual.
    pub epsilon: Rational,
    /// Cap on processed boxes / grid points.
    pub max_boxes: usize,
    pub max_results: usize,
    /// Newton-polish candidate points before the exact residual check.
    pub polish: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            resolution: 8,
            refine_depth: 12,
            epsilon: Rational::ratio(1, 10_000),
            max_boxes: 4_000_000,
            max_results: 512,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSolution {
    pub point: Vec<Rational>,
    /// Exact max |f_i| at the point.
    pub residual: Rational,
}

// --- compiled f64 form of a polynomial system -----------------------------

struct TermF64 {
    coef: f64,
    coef_iv: Interval,
    powers: Vec<(usize, u32)>,
}

struct PolyF64 {
    terms: Vec<TermF64>,
}

impl PolyF64 {
    fn compile(p: &Polynomial) -> Self {
        PolyF64 {
            terms: p
                .monomials()
                .iter()
                .map(|m| TermF64 {
                    coef: m.coefficient.to_f64(),
                    coef_iv: Interval::from_rational(&m.coefficient),
                    powers: m.exponents.iter().map(|(&v, &e)| (v, e)).collect(),
                })
                .collect(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let mut acc = t.coef;
            for &(v, e) in &t.powers {
                acc *= x[v].powi(e as i32);
            }
            total += acc;
        }
        total
    }

    fn eval_interval(&self, lo: &[f64], hi: &[f64]) -> Interval {
        let mut total = Interval::point(0.0);
        for t in &self.terms {
            let mut acc = t.coef_iv;
            for &(v, e) in &t.powers {
                acc = acc.mul(Interval::new(lo[v], hi[v]).pow(e));
            }
            total = total.add(acc);
        }
        total
    }
}

fn partial(p: &Polynomial, var: usize) -> Polynomial {
    let terms = p
        .monomials()
        .iter()
        .filter_map(|m| {
            let e = *m.exponents.get(&var)?;
            let mut exps: Vec<(usize, u32)> = m
                .exponents
                .iter()
                .map(|(&v, &k)| if v == var { (v, k - 1) } else { (v, k) })
                .collect();
            exps.retain(|&(_, k)| k > 0);
            Some(Monomial::new(
                &m.coefficient * &Rational::from_int(i64::from(e)),
                &exps,
            ))
        })
        .collect();
    Polynomial::new(terms)
}

struct Box_ {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Newton iteration (normal equations when the system is not square) from
/// `x0`; returns the polished point, or `x0` when the iteration fails to
/// make progress or leaves the domain.
fn newton_polish(
    polys: &[PolyF64],
    jacobian: &[Vec<PolyF64>],
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Vec<f64> {
    let m = polys.len();
    let n = x0.len();
    let mut x = x0.to_vec();
    let residual_norm = |x: &[f64]| -> f64 {
        polys
            .iter()
            .map(|p| p.eval(x).abs())
            .fold(0.0f64, f64::max)
    };
    let mut best = x.clone();
    let mut best_norm = residual_norm(&x);
    for _ in 0..16 {
        if best_norm < 1e-15 {
            break;
        }
        let f: Vec<f64> = polys.iter().map(|p| p.eval(&x)).collect();
        let jac: Vec<Vec<f64>> = jacobian
            .iter()
            .map(|row| row.iter().map(|p| p.eval(&x)).collect())
            .collect();
        // assemble (square) linear system a * delta = rhs
        let (mut a, mut rhs) = if m == n {
            (jac.clone(), f.iter().map(|v| -v).collect::<Vec<f64>>())
        } else {
            // normal equations J^T J delta = -J^T f
            let mut a = vec![vec![0.0; n]; n];
            let mut rhs = vec![0.0; n];
            for i in 0..m {
                for j in 0..n {
                    rhs[j] -= jac[i][j] * f[i];
                    for k in 0..n {
                        a[j][k] += jac[i][j] * jac[i][k];
                    }
                }
            }
            (a, rhs)
        };
        if !gauss_solve(&mut a, &mut rhs) {
            break;
        }
        let mut next = x.clone();
        for j in 0..n {
            next[j] += rhs[j];
            // stay within one box width of the domain
            let margin = (hi[j] - lo[j]).max(1e-12);
            if next[j] < lo[j] - margin || next[j] > hi[j] + margin {
                return best;
            }
        }
        let norm = residual_norm(&next);
        x = next;
        if norm < best_norm {
            best_norm = norm;
            best = x.clone();
        } else if norm > best_norm * 4.0 {
            break;
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; false when singular.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> bool {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return false;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / a[col][col];
        if !b[col].is_finite() {
            return false;
        }
    }
    true
}

fn max_residual(sys: &PolynomialSystem, point: &[Rational]) -> Rational {
    sys.polynomials
        .iter()
        .map(|p| p.eval(point).abs())
        .reduce(Rational::max)
        .unwrap_or_else(Rational::zero)
}

/// Branch-and-prune root search over the bounded box of the system:
/// subdivide, discard boxes whose interval image excludes zero for some
/// polynomial, and at full depth accept (optionally Newton-polished) cell
/// centers whose exact max residual is at most `epsilon`. Solutions on a
/// continuum come back as one representative per surviving cell.
pub fn solve_poly_grid(
    sys: &PolynomialSystem,
    cfg: &SearchConfig,
) -> Result<Vec<GridSolution>, OracleError> {
    let n = sys.n_vars;
    let polys: Vec<PolyF64> = sys.polynomials.iter().map(PolyF64::compile).collect();
    let jacobian: Vec<Vec<PolyF64>> = sys
        .polynomials
        .iter()
        .map(|p| (0..n).map(|v| PolyF64::compile(&partial(p, v))).collect())
        .collect();

    let lo0: Vec<f64> = sys.bounds.iter().map(|(l, _)| l.to_f64()).collect();
    let hi0: Vec<f64> = sys.bounds.iter().map(|(_, u)| u.to_f64()).collect();
    let scale = f64::from(cfg.resolution.max(2)) * (2f64).powi(cfg.refine_depth as i32);
    let target: Vec<f64> = (0..n).map(|j| (hi0[j] - lo0[j]) / scale).collect();

    let mut queue = vec![Box_ { lo: lo0, hi: hi0 }];
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let mut processed = 0usize;

    while let Some(b) = queue.pop() {
        processed += 1;
        if processed > cfg.max_boxes {
            return Err(OracleError::CapExceeded { processed });
        }
        let excluded = polys
            .iter()
            .any(|p| !p.eval_interval(&b.lo, &b.hi).contains_zero());
        if excluded {
            continue;
        }
        // widest dimension relative to its target width
        let mut split_dim = None;
        let mut worst = 1.0f64;
        for j in 0..n {
            let w = b.hi[j] - b.lo[j];
            if w > target[j] && w > 0.0 {
                let ratio = if target[j] > 0.0 { w / target[j] } else { 2.0 };
                if ratio > worst {
                    worst = ratio;
                    split_dim = Some(j);
                }
            }
        }
        match split_dim {
            None => candidates.push((0..n).map(|j| (b.lo[j] + b.hi[j]) / 2.0).collect()),
            Some(j) => {
                let mid = b.lo[j] + (b.hi[j] - b.lo[j]) / 2.0;
                let mut left = Box_ {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                };
                left.hi[j] = mid;
                let mut right = b;
                right.lo[j] = mid;
                queue.push(left);
                queue.push(right);
            }
        }
    }

    let mut solutions: Vec<GridSolution> = Vec::new();
    for center in candidates {
        let point_f64 = if cfg.polish {
            let b_lo: Vec<f64> = (0..n).map(|j| center[j] - target[j]).collect();
            let b_hi: Vec<f64> = (0..n).map(|j| center[j] + target[j]).collect();
            newton_polish(&polys, &jacobian, &center, &b_lo, &b_hi)
        } else {
            center
        };
        // clamp into the domain and make exact
        let point: Vec<Rational> = (0..n)
            .map(|j| {
                let x = point_f64[j];
                let r = Rational::from_f64_exact(x).unwrap_or_else(Rational::zero);
                r.max(sys.bounds[j].0.clone()).min(sys.bounds[j].1.clone())
            })
            .collect();
        let residual = max_residual(sys, &point);
        if residual <= cfg.epsilon {
            solutions.push(GridSolution { point, residual });
        }
    }

    // dedupe: points closer than a quarter target cell in every coordinate
    solutions.sort_by(|a, b| a.point.cmp(&b.point));
    let mut unique: Vec<GridSolution> = Vec::new();
    'outer: for sol in solutions {
        for kept in &unique {
            let close = (0..n).all(|j| {
                let d = (&sol.point[j] - &kept.point[j]).abs().to_f64();
                d <= target[j] / 4.0 + 1e-12
            });
            if close {
                continue 'outer;
            }
        }
        unique.push(sol);
        if unique.len() >= cfg.max_results {
            break;
        }
    }
    Ok(unique)
}

// --------------------------------------------------------------------------
// Market grid search
// --------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketGridPoint {
    pub prices: Vec<Rational>,
    /// Max absolute clipped excess demand (surplus on zero-priced goods not
    /// penalized).
    pub score: Rational,
}

/// Clipped excess-demand score at exact rational prices; `None` when some
/// agent has unbounded demand there.
fn market_score(market: &MarketInstance, prices: &[Rational]) -> Option<Rational> {
    match excess_demand(market, prices) {
        Ok(z) => Some(
            z.iter()
                .enumerate()
                .map(|(j, zj)| {
                    if prices[j].is_zero() {
                        zj.clone().max(Rational::zero())
                    } else {
                        zj.abs()
                    }
                })
                .reduce(Rational::max)
                .unwrap_or_else(Rational::zero),
        ),
        Err(MarketError::UnboundedDemand(_)) => None,
        Err(_) => None,
    }
}

fn compositions(
    total: u32,
    ranges: &[(u32, u32)],
    prefix: &mut Vec<u32>,
    out: &mut dyn FnMut(&[u32]) -> bool,
) -> bool {
    if prefix.len() == ranges.len() - 1 {
        let used: u32 = prefix.iter().sum();
        let last = total.checked_sub(used);
        if let Some(last) = last {
            let (lo, hi) = ranges[prefix.len()];
            if last >= lo && last <= hi {
                prefix.push(last);
                let keep_going = out(prefix);
                prefix.pop();
                if !keep_going {
                    return false;
                }
            }
        }
        return true;
    }
    let used: u32 = prefix.iter().sum();
    let (lo, hi) = ranges[prefix.len()];
    for k in lo..=hi {
        if used + k > total {
            break;
        }
        prefix.push(k);
        let keep_going = compositions(total, ranges, prefix, out);
        prefix.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

/// Multi-resolution grid search over the price simplex minimizing the
/// clipped excess-demand score. Starts from a full simplex grid at
/// `resolution` subdivisions, then refines around the best points, doubling
/// the resolution `refine_depth` times. Returns the points with score at
/// most `epsilon`, best first.
pub fn solve_market_grid(
    market: &MarketInstance,
    cfg: &SearchConfig,
) -> Result<Vec<MarketGridPoint>, OracleError> {
    use std::collections::BTreeSet;
    let g = market.good_count();
    let keep = 32usize;
    let mut processed = 0usize;
    let mut results: Vec<MarketGridPoint> = Vec::new();

    let mut resolution = cfg.resolution.max(2);
    let mut frontier: Vec<Vec<u32>> = Vec::new();
    for level in 0..=cfg.refine_depth {
        let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
        let mut scored: Vec<(Rational, Vec<u32>)> = Vec::new();
        let mut overflow = false;
        {
            let mut visit = |k: &[u32]| -> bool {
                if !seen.insert(k.to_vec()) {
                    return true;
                }
                processed += 1;
                if processed > cfg.max_boxes {
                    overflow = true;
                    return false;
                }
                let denom = Rational::from_int(i64::from(resolution));
                let prices: Vec<Rational> = k
                    .iter()
                    .map(|&ki| Rational::from_int(i64::from(ki)) / denom.clone())
                    .collect();
                if let Some(score) = market_score(market, &prices) {
                    scored.push((score, k.to_vec()));
                }
                true
            };
            if level == 0 {
                let ranges = vec![(0u32, resolution); g];
                compositions(resolution, &ranges, &mut Vec::new(), &mut visit);
            } else {
                for point in &frontier {
                    let ranges: Vec<(u32, u32)> = point
                        .iter()
                        .map(|&ki| {
                            let center = ki * 2;
                            (center.saturating_sub(3), (center + 3).min(resolution))
                        })
                        .collect();
                    if !compositions(resolution, &ranges, &mut Vec::new(), &mut visit) {
                        break;
                    }
                }
            }
        }
        if overflow {
            return Err(OracleError::CapExceeded { processed });
        }
        scored.sort();
        for (score, k) in &scored {
            if score <= &cfg.epsilon && results.len() < cfg.max_results {
                let denom = Rational::from_int(i64::from(resolution));
                results.push(MarketGridPoint {
                    prices: k
                        .iter()
                        .map(|&ki| Rational::from_int(i64::from(ki)) / denom.clone())
                        .collect(),
                    score: score.clone(),
                });
            }
        }
        frontier = scored.into_iter().take(keep).map(|(_, k)| k).collect();
        if frontier.is_empty() {
            break;
        }
        if level < cfg.refine_depth {
            resolution *= 2;
        }
    }

    results.sort_by(|a, b| a.score.cmp(&b.score).then(a.prices.cmp(&b.prices)));
    results.dedup_by(|a, b| a.prices == b.prices);
    Ok(results)
}

// --------------------------------------------------------------------------
// Tatonnement
// --------------------------------------------------------------------------

fn demand_beta_f64(agent: &Agent, prices: &[f64]) -> Option<f64> {
    let mut income = 0.0;
    for (&g, w) in &agent.endowment {
        income += w.to_f64() * prices[g];
    }
    let mut cost = 0.0;
    for (&g, a) in &agent.leontief {
        cost += a.to_f64() * prices[g];
    }
    if cost <= 1e-12 {
        if income <= 1e-12 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some(income / cost)
    }
}

fn excess_demand_f64(market: &MarketInstance, prices: &[f64]) -> Option<Vec<f64>> {
    let mut z = vec![0.0; market.good_count()];
    for agent in &market.agents {
        let beta = demand_beta_f64(agent, prices)?;
        for (&g, a) in &agent.leontief {
            z[g] += beta * a.to_f64();
        }
        for (&g, w) in &agent.endowment {
            z[g] -= w.to_f64();
        }
    }
    Some(z)
}

/// Price-adjustment heuristic: `p <- max(0, p + step * Z(p))`, renormalized
/// to the simplex each round, restarted with perturbed prices when demand
/// becomes unbounded. Returns prices whose exact clipped excess-demand
/// score is at most `eps`; failure to converge says nothing about
/// existence.
pub fn tatonnement(
    market: &MarketInstance,
    step: f64,
    max_iters: usize,
    eps: &Rational,
) -> Result<Vec<Rational>, OracleError> {
    if step <= 0.0 || max_iters == 0 {
        return Err(OracleError::BadConfig);
    }
    let g = market.good_count();
    let mut p = vec![1.0 / g as f64; g];
    let mut restarts = 0u32;
    let eps_f = eps.to_f64();
    for _ in 0..max_iters {
        match excess_demand_f64(market, &p) {
            None => {
                restarts += 1;
                if restarts > 16 {
                    return Err(OracleError::NotConverged);
                }
                let bump = 1e-3 * f64::from(restarts);
                for v in p.iter_mut() {
                    if *v < bump {
                        *v += bump;
                    }
                }
                let total: f64 = p.iter().sum();
                for v in p.iter_mut() {
                    *v /= total;
                }
            }
            Some(z) => {
                let norm = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if norm <= eps_f * 0.5 || norm == 0.0 {
                    // exact confirmation at the rationalized point
                    let prices: Vec<Rational> = p
                        .iter()
                        .map(|&x| Rational::from_f64_exact(x).unwrap_or_else(Rational::zero))
                        .collect();
                    if let Some(score) = market_score(market, &prices) {
                        if &score <= eps {
                            return Ok(prices);
                        }
                    }
                }
                for j in 0..g {
                    p[j] = (p[j] + step * z[j]).max(0.0);
                }
                let total: f64 = p.iter().sum();
                if total <= 0.0 {
                    return Err(OracleError::NotConverged);
                }
                for v in p.iter_mut() {
                    *v /= total;
                }
            }
        }
    }
    Err(OracleError::NotConverged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_system;

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn eq_gadget_with_numeraire() -> MarketInstance {
        // the equality gadget plus the captive numeraire agent, so the
        // search space is the full simplex over (a, b, r)
        MarketInstance {
            goods: vec!["Ga".into(), "Gb".into(), "Gr".into()],
            agents: vec![
                Agent::new(
                    vec![(1, r("1")), (2, r("1"))],
                    vec![(0, r("1")), (2, r("1"))],
                ),
                Agent::new(
                    vec![(0, r("1")), (2, r("1"))],
                    vec![(1, r("1")), (2, r("1"))],
                ),
            ],
        }
    }

    #[test]
    fn grid_finds_sqrt_two() {
        let sys = parse_system(
            r#"{"vars":1,"bounds":[["0","2"]],"polys":[[{"c":"1","e":{"1":2}},{"c":"-2"}]]}"#,
        )
        .unwrap();
        let cfg = SearchConfig {
            epsilon: r("1/10000"),
            ..Default::default()
        };
        let sols = solve_poly_grid(&sys, &cfg).unwrap();
        assert_eq!(sols.len(), 1);
        let x = sols[0].point[0].to_f64();
        assert!((x - 1.41421356).abs() < 1e-4, "found {x}");
    }

    #[test]
    fn grid_reports_continuum_representatives() {
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","1"],["0","1"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let cfg = SearchConfig {
            resolution: 8,
            refine_depth: 2,
            epsilon: r("1/1000000"),
            polish: false,
            ..Default::default()
        };
        let sols = solve_poly_grid(&sys, &cfg).unwrap();
        assert!(sols.len() >= 16, "got {}", sols.len());
        for s in &sols {
            assert_eq!(s.point[0], s.point[1]);
        }
    }

    #[test]
    fn grid_infeasible_system_returns_empty() {
        let sys = parse_system(
            r#"{"vars":1,"bounds":[["0","1"]],"polys":[[{"c":"1","e":{"1":1}},{"c":"1"}]]}"#,
        )
        .unwrap();
        let sols = solve_poly_grid(&sys, &SearchConfig::default()).unwrap();
        assert!(sols.is_empty());
    }

    #[test]
    fn grid_cap_exceeded() {
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","1"],["0","1"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let cfg = SearchConfig {
            max_boxes: 10,
            ..Default::default()
        };
        assert!(matches!(
            solve_poly_grid(&sys, &cfg),
            Err(OracleError::CapExceeded { .. })
        ));
    }

    #[test]
    fn market_grid_recovers_equal_prices() {
        let market = eq_gadget_with_numeraire();
        let cfg = SearchConfig {
            resolution: 8,
            refine_depth: 4,
            epsilon: r("1/1000"),
            ..Default::default()
        };
        let points = solve_market_grid(&market, &cfg).unwrap();
        assert!(!points.is_empty());
        for point in &points {
            let diff = (&point.prices[0] - &point.prices[1]).abs();
            assert!(diff <= r("1/100"), "p_a != p_b at {:?}", point.prices);
        }
    }

    #[test]
    fn market_grid_self_sufficient_agent_accepts_everything() {
        let market = MarketInstance {
            goods: vec!["G1".into(), "G2".into()],
            agents: vec![
                Agent::new(vec![(0, r("1"))], vec![(0, r("1"))]),
                Agent::new(vec![(1, r("1"))], vec![(1, r("1"))]),
            ],
        };
        let cfg = SearchConfig {
            resolution: 4,
            refine_depth: 0,
            epsilon: r("0"),
            ..Default::default()
        };
        let points = solve_market_grid(&market, &cfg).unwrap();
        // every grid point on the simplex clears exactly
        assert_eq!(points.len(), 5);
    }

    #[test]
    fn market_grid_unbounded_regions_are_skipped() {
        // the only agent desires a good with zero total supply: demand is
        // unbounded wherever her income is positive, zero elsewhere
        let market = MarketInstance {
            goods: vec!["G1".into(), "G2".into()],
            agents: vec![Agent::new(vec![(0, r("1"))], vec![(1, r("1"))])],
        };
        let cfg = SearchConfig {
            resolution: 4,
            refine_depth: 1,
            epsilon: r("0"),
            ..Default::default()
        };
        let points = solve_market_grid(&market, &cfg).unwrap();
        // inconclusive: nothing clears (the p1=0 corner has excess supply
        // of nothing but demand for G2 is zero there; supply of G2 is zero
        // so score 0 at p=(0,1)? no: p1=0 means zero income, so z=(−1, 0)
        // clipped to 0 on the zero-priced good and 0 on G2) — the corner
        // (0,1) clears vacuously
        for p in &points {
            assert!(p.prices[0].is_zero());
        }
    }

    #[test]
    fn tatonnement_eq_gadget_converges() {
        let market = eq_gadget_with_numeraire();
        let prices = tatonnement(&market, 0.2, 5000, &r("1/1000")).unwrap();
        let diff = (&prices[0] - &prices[1]).abs();
        assert!(diff <= r("1/100"), "prices {prices:?}");
    }

    #[test]
    fn tatonnement_immediate_at_equilibrium() {
        // self-sufficient agent: uniform start is already market clearing
        let market = MarketInstance {
            goods: vec!["G1".into()],
            agents: vec![Agent::new(vec![(0, r("1"))], vec![(0, r("1"))])],
        };
        let prices = tatonnement(&market, 0.5, 5, &r("1/1000000")).unwrap();
        assert_eq!(prices, vec![r("1")]);
    }

    #[test]
    fn tatonnement_restarts_on_unbounded_demand() {
        // two agents each endowed with the other's good; a zero price on a
        // desired good triggers the perturb-and-restart path only if hit;
        // from uniform it simply converges
        let market = MarketInstance {
            goods: vec!["G1".into(), "G2".into()],
            agents: vec![
                Agent::new(vec![(0, r("1"))], vec![(1, r("1"))]),
                Agent::new(vec![(1, r("1"))], vec![(0, r("1"))]),
            ],
        };
        let prices = tatonnement(&market, 0.25, 2000, &r("1/10000")).unwrap();
        let diff = (&prices[0] - &prices[1]).abs();
        assert!(diff <= r("1/100"));
    }
}
