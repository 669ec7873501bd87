//! Support enumeration for 3-player games with two strategies per player.
//!
//! With two strategies, a profile is determined by `x_p`, the probability
//! that player p plays strategy 0, and the indifference condition of
//! player p is the vanishing of
//! `diff_p(x_q, x_r) = a + b x_q + c x_r + d x_q x_r`
//! over the other two players' variables. For each of the 27 support
//! profiles the solver fixes pure variables, propagates one-unknown linear
//! equations, falls back to an exact quadratic elimination for the fully
//! coupled all-mixed case (bisecting irrational roots), and samples a
//! coarse exact grid for degenerate (continuum) supports. Every candidate
//! is filtered through the best-response checker, so the output is sound;
//! on degenerate games it returns representatives rather than the full
//! solution set.

use num_bigint::BigInt;

use crate::nash::{verify_ne, Game3, Profile};
use crate::rational::Rational;

use super::OracleError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NashSolution {
    pub profile: Profile,
    /// True when the probabilities were derived by exact rational algebra;
    /// false for bisected (irrational) roots and sampled representatives.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Support {
    Pure0,
    Pure1,
    Mixed,
}

const SUPPORTS: [Support; 3] = [Support::Pure0, Support::Pure1, Support::Mixed];

/// `diff_p = a + b x_q + c x_r + d x_q x_r` with `(q, r)` the other two
/// players in ascending order.
struct Diff {
    a: Rational,
    b: Rational,
    c: Rational,
    d: Rational,
    q: usize,
    r: usize,
}

fn others(p: usize) -> (usize, usize) {
    match p {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn diff_coefficients(game: &Game3, p: usize) -> Diff {
    let (q, r) = others(p);
    let at = |sp: usize, sq: usize, sr: usize| {
        let mut idx = [0usize; 3];
        idx[p] = sp;
        idx[q] = sq;
        idx[r] = sr;
        game.payoff(p, idx).clone()
    };
    let b00 = at(0, 0, 0) - at(1, 0, 0);
    let b01 = at(0, 0, 1) - at(1, 0, 1);
    let b10 = at(0, 1, 0) - at(1, 1, 0);
    let b11 = at(0, 1, 1) - at(1, 1, 1);
    Diff {
        a: b11.clone(),
        b: &b01 - &b11,
        c: &b10 - &b11,
        d: &b00 - &b01 - &b10 + &b11,
        q,
        r,
    }
}

impl Diff {
    fn eval(&self, x: &[Rational; 3]) -> Rational {
        &self.a
            + &(&self.b * &x[self.q])
            + &(&self.c * &x[self.r])
            + &(&self.d * &x[self.q] * &x[self.r])
    }

    /// With one of (q, r) known, the equation is linear `A + B * x_unknown`.
    fn linear_in(&self, unknown: usize, known_var: usize, known: &Rational) -> (Rational, Rational) {
        debug_assert!(unknown == self.q || unknown == self.r);
        debug_assert!(known_var == self.q || known_var == self.r);
        let (coef_unknown, coef_known) = if unknown == self.q {
            (&self.b, &self.c)
        } else {
            (&self.c, &self.b)
        };
        let a = &self.a + &(coef_known * known);
        let b = coef_unknown + &(&self.d * known);
        (a, b)
    }
}

fn integer_sqrt_exact(n: &BigInt) -> Option<BigInt> {
    if n.sign() == num_bigint::Sign::Minus {
        return None;
    }
    let root = n.sqrt();
    (&root * &root == *n).then_some(root)
}

fn rational_sqrt_exact(r: &Rational) -> Option<Rational> {
    let num = integer_sqrt_exact(&r.numer())?;
    let den = integer_sqrt_exact(&r.denom())?;
    Some(Rational::new(num, den).expect("positive denominator"))
}

/// Roots of `A x^2 + B x + C` in [0,1]; `(root, exact)` pairs. Irrational
/// roots are bisected to 2^-48. Returns None when the polynomial is
/// identically zero (continuum).
fn quadratic_roots_unit(
    a: &Rational,
    b: &Rational,
    c: &Rational,
) -> Option<Vec<(Rational, bool)>> {
    let zero = Rational::zero();
    let one = Rational::one();
    if a.is_zero() && b.is_zero() {
        if c.is_zero() {
            return None;
        }
        return Some(vec![]);
    }
    if a.is_zero() {
        let root = -&(c / b);
        return Some(if root >= zero && root <= one {
            vec![(root, true)]
        } else {
            vec![]
        });
    }
    let four = Rational::from_int(4);
    let two = Rational::from_int(2);
    let disc = b * b - &(&four * &(a * c));
    if disc.is_negative() {
        return Some(vec![]);
    }
    if let Some(sq) = rational_sqrt_exact(&disc) {
        let mut roots = Vec::new();
        for sign in [1i64, -1] {
            let root = &(-b + &(&Rational::from_int(sign) * &sq)) / &(&two * a);
            if root >= zero && root <= one && !roots.contains(&(root.clone(), true)) {
                roots.push((root, true));
            }
        }
        return Some(roots);
    }
    // irrational roots: locate sign changes on a fine grid and bisect
    let eval = |x: &Rational| a * x * x + &(b * x) + c;
    let steps = 256i64;
    let mut roots = Vec::new();
    let mut prev_x = zero.clone();
    let mut prev_v = eval(&prev_x);
    for t in 1..=steps {
        let x = Rational::ratio(t, steps);
        let v = eval(&x);
        if v.is_zero() {
            roots.push((x.clone(), true));
        } else if prev_v.is_negative() != v.is_negative() && !prev_v.is_zero() {
            let mut lo = prev_x.clone();
            let mut hi = x.clone();
            let mut lo_v = prev_v.clone();
            for _ in 0..48 {
                let mid = &(&lo + &hi) / &two;
                let mv = eval(&mid);
                if mv.is_zero() {
                    lo = mid.clone();
                    hi = mid;
                    break;
                }
                if mv.is_negative() == lo_v.is_negative() {
                    lo = mid;
                    lo_v = mv;
                } else {
                    hi = mid;
                }
            }
            roots.push((&(&lo + &hi) / &two, false));
        }
        prev_x = x;
        prev_v = v;
    }
    Some(roots)
}

struct Candidate {
    x: [Rational; 3],
    exact: bool,
}

/// Propagates pure assignments and indifference equations that are
/// effectively linear in a single variable, either because the other
/// variable's value is known or because its coefficients vanish
/// structurally. Returns None if the support is infeasible, otherwise the
/// set of still unresolved mixed players.
fn propagate(
    diffs: &[Diff; 3],
    supports: &[Support; 3],
    x: &mut [Option<Rational>; 3],
    tol: &Rational,
) -> Option<Vec<usize>> {
    let mut pending: Vec<usize> = (0..3)
        .filter(|&p| supports[p] == Support::Mixed)
        .collect();
    loop {
        let mut progressed = false;
        let mut still = Vec::new();
        for &p in &pending {
            let d = &diffs[p];
            match (x[d.q].clone(), x[d.r].clone()) {
                (Some(xq), Some(xr)) => {
                    let mut full = [Rational::zero(), Rational::zero(), Rational::zero()];
                    full[d.q] = xq;
                    full[d.r] = xr;
                    if d.eval(&full).abs() > *tol {
                        return None;
                    }
                    progressed = true;
                }
                (Some(xq), None) => {
                    let (a, b) = d.linear_in(d.r, d.q, &xq);
                    if b.is_zero() {
                        if a.abs() > *tol {
                            return None;
                        }
                        still.push(p); // x_r unconstrained by this equation
                    } else {
                        x[d.r] = Some(-&(&a / &b));
                        progressed = true;
                    }
                }
                (None, Some(xr)) => {
                    let (a, b) = d.linear_in(d.q, d.r, &xr);
                    if b.is_zero() {
                        if a.abs() > *tol {
                            return None;
                        }
                        still.push(p);
                    } else {
                        x[d.q] = Some(-&(&a / &b));
                        progressed = true;
                    }
                }
                (None, None) => {
                    // equations decoupled from one of the two variables are
                    // linear in the other: a + b x_q or a + c x_r
                    if d.c.is_zero() && d.d.is_zero() {
                        if d.b.is_zero() {
                            if d.a.abs() > *tol {
                                return None;
                            }
                            still.push(p); // trivially satisfied
                        } else {
                            x[d.q] = Some(-&(&d.a / &d.b));
                            progressed = true;
                        }
                    } else if d.b.is_zero() && d.d.is_zero() {
                        if d.c.is_zero() {
                            if d.a.abs() > *tol {
                                return None;
                            }
                            still.push(p);
                        } else {
                            x[d.r] = Some(-&(&d.a / &d.c));
                            progressed = true;
                        }
                    } else {
                        still.push(p);
                    }
                }
            }
        }
        pending = still;
        if pending.is_empty() || !progressed {
            return Some(pending);
        }
    }
}

/// Fully coupled all-mixed case: eliminate down to a quadratic in x_1
/// (player index 1), using player 0's equation for x_2 and player 2's
/// equation for x_0.
fn all_mixed_candidates(diffs: &[Diff; 3]) -> Vec<Candidate> {
    // diff_0(x1, x2) = 0  =>  x2 = -(a0 + b0 x1) / (c0 + d0 x1)
    // diff_2(x0, x1) = 0  =>  x0 = -(a2 + b2 x0 ...) careful: diff_2 has
    // q=0, r=1: a2 + b2 x0 + c2 x1 + d2 x0 x1 = 0
    //   =>  x0 = -(a2 + c2 x1) / (b2 + d2 x1)
    // substitute into diff_1(x0, x2) = a1 + b1 x0 + c1 x2 + d1 x0 x2 = 0
    // and clear the two denominators Q = b2 + d2 x1, S = c0 + d0 x1:
    //   a1 Q S + b1 P S + c1 R Q + d1 P R = 0
    // with P = -(a2 + c2 x1), R = -(a0 + b0 x1). Quadratic in x1.
    let d0 = &diffs[0];
    let d1 = &diffs[1];
    let d2 = &diffs[2];
    // linear polynomials k + m * x1 represented as (k, m)
    let p = (-&d2.a, -&d2.c);
    let q = (d2.b.clone(), d2.d.clone());
    let r = (-&d0.a, -&d0.b);
    let s = (d0.c.clone(), d0.d.clone());
    let mul = |u: &(Rational, Rational), v: &(Rational, Rational)| -> (Rational, Rational, Rational) {
        (&u.0 * &v.0, &u.0 * &v.1 + &(&u.1 * &v.0), &u.1 * &v.1)
    };
    let scale = |w: &Rational, t: (Rational, Rational, Rational)| {
        (w * &t.0, w * &t.1, w * &t.2)
    };
    let add = |u: (Rational, Rational, Rational), v: (Rational, Rational, Rational)| {
        (&u.0 + &v.0, &u.1 + &v.1, &u.2 + &v.2)
    };
    let total = add(
        add(scale(&d1.a, mul(&q, &s)), scale(&d1.b, mul(&p, &s))),
        add(scale(&d1.c, mul(&r, &q)), scale(&d1.d, mul(&p, &r))),
    );
    let (c_coef, b_coef, a_coef) = total;
    let Some(roots) = quadratic_roots_unit(&a_coef, &b_coef, &c_coef) else {
        return Vec::new(); // identically zero: degenerate, handled by sampling
    };
    let mut out = Vec::new();
    for (x1, exact) in roots {
        let q_val = &q.0 + &(&q.1 * &x1);
        let s_val = &s.0 + &(&s.1 * &x1);
        if q_val.is_zero() || s_val.is_zero() {
            continue;
        }
        let x0 = &(&p.0 + &(&p.1 * &x1)) / &q_val;
        let x2 = &(&r.0 + &(&r.1 * &x1)) / &s_val;
        out.push(Candidate {
            x: [x0, x1, x2],
            exact,
        });
    }
    out
}

fn profile_from(x: &[Rational; 3]) -> Profile {
    [0, 1, 2].map(|p| vec![x[p].clone(), Rational::one() - &x[p]])
}

/// All Nash equilibria of a 2-strategy game found by support enumeration.
/// Sound (every returned profile passes the best-response check) and
/// complete for games without degenerate (continuum) equilibrium
/// components; for those it returns grid representatives.
pub fn nash_support_enumeration(game: &Game3) -> Result<Vec<NashSolution>, OracleError> {
    if game.n_s != 2 {
        return Err(OracleError::UnsupportedStrategyCount(game.n_s));
    }
    let diffs = [
        diff_coefficients(game, 0),
        diff_coefficients(game, 1),
        diff_coefficients(game, 2),
    ];
    let zero = Rational::zero();
    let one = Rational::one();
    let exact_tol = Rational::zero();
    let approx_tol = Rational::ratio(1, 1_000_000_000);

    let mut solutions: Vec<NashSolution> = Vec::new();
    let mut push_candidate = |cand: Candidate, supports: &[Support; 3]| {
        let tol = if cand.exact { &exact_tol } else { &approx_tol };
        // support consistency
        for p in 0..3 {
            let xp = &cand.x[p];
            let fits = match supports[p] {
                Support::Pure0 => (xp - &one).abs() <= *tol,
                Support::Pure1 => xp.abs() <= *tol,
                Support::Mixed => xp > tol && xp < &(&one - tol),
            };
            if !fits {
                return;
            }
            // pure strategies must be best responses
            let diff = diffs[p].eval(&cand.x);
            let ok = match supports[p] {
                Support::Pure0 => diff >= -tol,
                Support::Pure1 => diff <= *tol,
                Support::Mixed => diff.abs() <= *tol,
            };
            if !ok {
                return;
            }
        }
        let profile = profile_from(&cand.x);
        let check_eps = if cand.exact {
            Rational::zero()
        } else {
            approx_tol.clone()
        };
        if verify_ne(game, &profile, &check_eps) != Ok(true) {
            return;
        }
        // dedupe within 1e-9 in every coordinate
        for known in &solutions {
            let close = (0..3).all(|p| {
                (&known.profile[p][0] - &profile[p][0]).abs() <= approx_tol
            });
            if close {
                return;
            }
        }
        solutions.push(NashSolution {
            profile,
            exact: cand.exact,
        });
    };

    for s0 in SUPPORTS {
        for s1 in SUPPORTS {
            for s2 in SUPPORTS {
                let supports = [s0, s1, s2];
                let mut x: [Option<Rational>; 3] = [None, None, None];
                for p in 0..3 {
                    match supports[p] {
                        Support::Pure0 => x[p] = Some(one.clone()),
                        Support::Pure1 => x[p] = Some(zero.clone()),
                        Support::Mixed => {}
                    }
                }
                let Some(unresolved) = propagate(&diffs, &supports, &mut x, &exact_tol) else {
                    continue;
                };
                if unresolved.is_empty() {
                    if let [Some(x0), Some(x1), Some(x2)] = &x {
                        push_candidate(
                            Candidate {
                                x: [x0.clone(), x1.clone(), x2.clone()],
                                exact: true,
                            },
                            &supports,
                        );
                    }
                    continue;
                }
                if unresolved.len() == 3 && x.iter().all(Option::is_none) {
                    for cand in all_mixed_candidates(&diffs) {
                        push_candidate(cand, &supports);
                    }
                    // fall through to sampling in case the elimination was
                    // degenerate (identically zero quadratic)
                }
                // degenerate/continuum supports: coarse exact grid over the
                // free variables, filtered by the final verification
                let free: Vec<usize> = (0..3).filter(|&p| x[p].is_none()).collect();
                let grid = [
                    Rational::ratio(1, 4),
                    Rational::ratio(1, 2),
                    Rational::ratio(3, 4),
                ];
                let mut stack = vec![x.clone()];
                for &p in &free {
                    let mut next = Vec::new();
                    for partial in &stack {
                        for g in &grid {
                            let mut filled = partial.clone();
                            filled[p] = Some(g.clone());
                            next.push(filled);
                        }
                    }
                    stack = next;
                }
                for filled in stack {
                    // re-propagate with the sampled values fixed
                    let mut y = filled.clone();
                    if propagate(&diffs, &supports, &mut y, &exact_tol).is_none() {
                        continue;
                    }
                    if let [Some(x0), Some(x1), Some(x2)] = &y {
                        push_candidate(
                            Candidate {
                                x: [x0.clone(), x1.clone(), x2.clone()],
                                exact: true,
                            },
                            &supports,
                        );
                    }
                }
            }
        }
    }

    solutions.sort_by(|a, b| {
        let ka: Vec<&Rational> = a.profile.iter().map(|z| &z[0]).collect();
        let kb: Vec<&Rational> = b.profile.iter().map(|z| &z[0]).collect();
        ka.cmp(&kb)
    });
    Ok(solutions)
}
