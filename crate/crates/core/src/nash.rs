//! 3-player finite games encoded as bounded polynomial systems whose
//! solutions are exactly the Nash equilibria, plus a direct best-response
//! checker.
//!
//! Variable layout of the encoded system (all bounded in [0,1], except that
//! the decision variant caps the strategy variables at 1/2):
//! `z_{p,s}` for p in 0..3, s in 0..n_s (strategy probabilities), then
//! `beta_{p,s}` (payoff slacks), then `delta_p` (best payoffs).
//! Equations: three simplex sums, `pi_p(s, z_-p) + beta_ps - delta_p = 0`
//! for every (p, s), and the complementarities `z_ps * beta_ps = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Monomial, PolyError, Polynomial, PolynomialSystem};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NashError {
    #[error("tensor {tensor} has {found} entries, expected {expected}")]
    TensorSize {
        tensor: usize,
        expected: usize,
        found: usize,
    },
    #[error("strategy count must be at least 1")]
    NoStrategies,
    #[error("profile for player {player} has {found} entries, expected {expected}")]
    ProfileShape {
        player: usize,
        expected: usize,
        found: usize,
    },
    #[error("profile for player {player} is not on the simplex within tolerance")]
    OffSimplex { player: usize },
    #[error("payoffs must lie in [0,1]; call normalize_payoffs first")]
    NotNormalized,
    #[error("{0}")]
    BadDocument(String),
}

/// A 3-player game with `n_s` strategies per player. `payoff[p]` is the
/// flattened tensor of player p's payoffs, indexed s1-major:
/// `index = (s1 * n_s + s2) * n_s + s3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game3 {
    pub n_s: usize,
    pub payoffs: [Vec<Rational>; 3],
}

/// A mixed-strategy profile: `z[p][s]` is the probability that player p
/// plays strategy s.
pub type Profile = [Vec<Rational>; 3];

impl Game3 {
    pub fn new(n_s: usize, payoffs: [Vec<Rational>; 3]) -> Result<Self, NashError> {
        if n_s == 0 {
            return Err(NashError::NoStrategies);
        }
        let expected = n_s * n_s * n_s;
        for (t, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != expected {
                return Err(NashError::TensorSize {
                    tensor: t + 1,
                    expected,
                    found: tensor.len(),
                });
            }
        }
        Ok(Game3 { n_s, payoffs })
    }

    pub fn payoff(&self, player: usize, s: [usize; 3]) -> &Rational {
        &self.payoffs[player][(s[0] * self.n_s + s[1]) * self.n_s + s[2]]
    }

    fn is_normalized(&self) -> bool {
        let zero = Rational::zero();
        let one = Rational::one();
        self.payoffs
            .iter()
            .flatten()
            .all(|v| v >= &zero && v <= &one)
    }

    /// Expected payoff of `player` from pure strategy `s` against the other
    /// players' mixed strategies.
    pub fn pure_payoff(&self, player: usize, s: usize, profile: &Profile) -> Rational {
        let n = self.n_s;
        let mut total = Rational::zero();
        let mut idx = [0usize; 3];
        idx[player] = s;
        let others: [usize; 2] = match player {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        for t in 0..n {
            for u in 0..n {
                idx[others[0]] = t;
                idx[others[1]] = u;
                let w = &profile[others[0]][t] * &profile[others[1]][u];
                total += &(self.payoff(player, idx) * &w);
            }
        }
        total
    }

    /// Best payoff `delta_p = max_s pi_p(s, z_-p)`.
    pub fn best_payoff(&self, player: usize, profile: &Profile) -> Rational {
        (0..self.n_s)
            .map(|s| self.pure_payoff(player, s, profile))
            .reduce(Rational::max)
            .expect("n_s >= 1")
    }
}

/// Per-player affine rescaling `(x - min) / (max - min)` onto [0,1]; a
/// constant tensor maps to all zeros. Positive-affine maps preserve the
/// set of Nash equilibria.
pub fn normalize_payoffs(game: &Game3) -> Game3 {
    let payoffs = [0, 1, 2].map(|p| {
        let tensor = &game.payoffs[p];
        let min = tensor.iter().cloned().reduce(Rational::min).expect("nonempty");
        let max = tensor.iter().cloned().reduce(Rational::max).expect("nonempty");
        let range = &max - &min;
        tensor
            .iter()
            .map(|v| {
                if range.is_zero() {
                    Rational::zero()
                } else {
                    &(v - &min) / &range
                }
            })
            .collect()
    });
    Game3 {
        n_s: game.n_s,
        payoffs,
    }
}

/// Variable indices of the encoded system.
#[derive(Debug, Clone, Copy)]
pub struct NeLayout {
    pub n_s: usize,
}

impl NeLayout {
    pub fn z(&self, player: usize, s: usize) -> usize {
        player * self.n_s + s
    }

    pub fn beta(&self, player: usize, s: usize) -> usize {
        3 * self.n_s + player * self.n_s + s
    }

    pub fn delta(&self, player: usize) -> usize {
        6 * self.n_s + player
    }

    pub fn var_count(&self) -> usize {
        6 * self.n_s + 3
    }
}

fn encode(game: &Game3, z_upper: Rational) -> Result<PolynomialSystem, NashError> {
    if !game.is_normalized() {
        return Err(NashError::NotNormalized);
    }
    let n = game.n_s;
    let layout = NeLayout { n_s: n };
    let one = Rational::one();
    let mut polynomials = Vec::new();

    // simplex: sum_s z_ps - 1 = 0
    for p in 0..3 {
        let mut terms: Vec<Monomial> = (0..n)
            .map(|s| Monomial::new(one.clone(), &[(layout.z(p, s), 1)]))
            .collect();
        terms.push(Monomial::constant(-&one));
        polynomials.push(Polynomial::new(terms));
    }

    // payoff slack: pi_p(s, z_-p) + beta_ps - delta_p = 0
    for p in 0..3 {
        let others: [usize; 2] = match p {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        for s in 0..n {
            let mut terms = Vec::new();
            let mut idx = [0usize; 3];
            idx[p] = s;
            for t in 0..n {
                for u in 0..n {
                    idx[others[0]] = t;
                    idx[others[1]] = u;
                    let coef = game.payoff(p, idx).clone();
                    if !coef.is_zero() {
                        terms.push(Monomial::new(
                            coef,
                            &[(layout.z(others[0], t), 1), (layout.z(others[1], u), 1)],
                        ));
                    }
                }
            }
            terms.push(Monomial::new(one.clone(), &[(layout.beta(p, s), 1)]));
            terms.push(Monomial::new(-&one, &[(layout.delta(p), 1)]));
            polynomials.push(Polynomial::new(terms));
        }
    }

    // complementarity: z_ps * beta_ps = 0
    for p in 0..3 {
        for s in 0..n {
            polynomials.push(Polynomial::new(vec![Monomial::new(
                one.clone(),
                &[(layout.z(p, s), 1), (layout.beta(p, s), 1)],
            )]));
        }
    }

    let mut bounds = vec![(Rational::zero(), one.clone()); layout.var_count()];
    for p in 0..3 {
        for s in 0..n {
            bounds[layout.z(p, s)] = (Rational::zero(), z_upper.clone());
        }
    }
    PolynomialSystem::new(layout.var_count(), polynomials, bounds)
        .map_err(|e: PolyError| NashError::BadDocument(e.to_string()))
}

/// Encodes the Nash-equilibrium conditions of a normalized game as a
/// polynomial system: solutions projected onto the z variables are exactly
/// the equilibria.
pub fn encode_ne(game: &Game3) -> Result<PolynomialSystem, NashError> {
    encode(game, Rational::one())
}

/// Same system with the strategy variables capped at 1/2: solvable iff the
/// game has an equilibrium with every probability at most 1/2.
pub fn encode_decision_ne(game: &Game3) -> Result<PolynomialSystem, NashError> {
    encode(game, Rational::ratio(1, 2))
}

/// Best-response check: every strategy payoff is at most `delta_p + eps`,
/// and every strategy played with probability above `eps` earns within
/// `eps` of `delta_p`. The profile must sit on the product of simplices
/// within `eps` per coordinate sum.
pub fn verify_ne(game: &Game3, profile: &Profile, eps: &Rational) -> Result<bool, NashError> {
    for (p, z) in profile.iter().enumerate() {
        if z.len() != game.n_s {
            return Err(NashError::ProfileShape {
                player: p,
                expected: game.n_s,
                found: z.len(),
            });
        }
        let sum = z.iter().fold(Rational::zero(), |acc, v| acc + v);
        if (&sum - &Rational::one()).abs() > *eps || z.iter().any(|v| &-v > eps) {
            return Err(NashError::OffSimplex { player: p });
        }
    }
    for p in 0..3 {
        let delta = game.best_payoff(p, profile);
        for s in 0..game.n_s {
            let payoff = game.pure_payoff(p, s, profile);
            // payoff <= delta holds by construction of delta
            if &profile[p][s] > eps && &(&delta - &payoff) > eps {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// JSON interchange
//
// {"schema":"game3/v1","ns":2,"A1":["num/den",…],"A2":[…],"A3":[…]}
// with tensors flattened s1-major.
// ---------------------------------------------------------------------------

pub const GAME_SCHEMA: &str = "game3/v1";

#[derive(Serialize, Deserialize)]
struct GameDoc {
    #[serde(default)]
    schema: Option<String>,
    ns: usize,
    #[serde(rename = "A1")]
    a1: Vec<String>,
    #[serde(rename = "A2")]
    a2: Vec<String>,
    #[serde(rename = "A3")]
    a3: Vec<String>,
}

pub fn game_to_json(game: &Game3) -> serde_json::Value {
    let strs = |v: &[Rational]| v.iter().map(Rational::to_string).collect();
    let doc = GameDoc {
        schema: Some(GAME_SCHEMA.to_string()),
        ns: game.n_s,
        a1: strs(&game.payoffs[0]),
        a2: strs(&game.payoffs[1]),
        a3: strs(&game.payoffs[2]),
    };
    serde_json::to_value(doc).expect("game serialization")
}

pub fn game_from_json(value: &serde_json::Value) -> Result<Game3, NashError> {
    let doc: GameDoc = serde_json::from_value(value.clone())
        .map_err(|e| NashError::BadDocument(e.to_string()))?;
    let parse_all = |vals: &[String]| -> Result<Vec<Rational>, NashError> {
        vals.iter()
            .map(|s| Rational::parse(s).map_err(|e| NashError::BadDocument(e.to_string())))
            .collect()
    };
    Game3::new(
        doc.ns,
        [parse_all(&doc.a1)?, parse_all(&doc.a2)?, parse_all(&doc.a3)?],
    )
}
