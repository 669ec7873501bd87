//! Leontief exchange markets: the data model, optimal-bundle demand, and
//! exact or tolerance-based equilibrium verification.
//!
//! An agent with endowment `W_i` and Leontief coefficients `A_i` spends
//! `sum_j A_ij p_j` per unit of utility, so at prices `p` her optimal
//! bundle is `x_ij = beta_i A_ij` with
//! `beta_i = (sum_j W_ij p_j) / (sum_j A_ij p_j)`.
//! A certificate therefore stores only prices and the per-agent utility
//! levels `beta_i`; allocations are implied.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::SizeReport;
use crate::rational::Rational;

pub type GoodId = usize;
pub type AgentId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("agent {0} has unbounded demand (zero-cost bundle, positive income)")]
    UnboundedDemand(AgentId),
    #[error("numeraire good has price zero")]
    ZeroNumeraire,
    #[error("prices must be non-negative and not all zero")]
    BadPrices,
    #[error("certificate dimensions do not match the market")]
    DimensionMismatch,
    #[error("agent {agent} must own some good and desire some good")]
    DegenerateAgent { agent: AgentId },
    #[error("{0}")]
    BadDocument(String),
}

/// Sparse non-negative vector over goods.
pub type Bundle = BTreeMap<GoodId, Rational>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    /// Endowment amounts W_ij, zeros omitted.
    pub endowment: Bundle,
    /// Leontief proportions A_ij, zeros omitted (zero means "not desired").
    pub leontief: Bundle,
}

impl Agent {
    pub fn new(endowment: Vec<(GoodId, Rational)>, leontief: Vec<(GoodId, Rational)>) -> Self {
        let fold = |pairs: Vec<(GoodId, Rational)>| {
            let mut map = Bundle::new();
            for (g, amount) in pairs {
                if !amount.is_zero() {
                    let slot = map.entry(g).or_insert_with(Rational::zero);
                    *slot += &amount;
                }
            }
            map
        };
        Agent {
            endowment: fold(endowment),
            leontief: fold(leontief),
        }
    }

    pub fn income(&self, prices: &[Rational]) -> Rational {
        self.endowment
            .iter()
            .fold(Rational::zero(), |acc, (&g, w)| acc + w * &prices[g])
    }

    /// Money needed per unit of utility.
    pub fn unit_cost(&self, prices: &[Rational]) -> Rational {
        self.leontief
            .iter()
            .fold(Rational::zero(), |acc, (&g, a)| acc + a * &prices[g])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketInstance {
    pub goods: Vec<String>,
    pub agents: Vec<Agent>,
}

impl MarketInstance {
    pub fn good_count(&self) -> usize {
        self.goods.len()
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.goods.is_empty() {
            return Err(MarketError::BadDocument("market needs at least one good".into()));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if agent.endowment.is_empty() || agent.leontief.is_empty() {
                return Err(MarketError::DegenerateAgent { agent: i });
            }
            for &g in agent.endowment.keys().chain(agent.leontief.keys()) {
                if g >= self.goods.len() {
                    return Err(MarketError::BadDocument(format!(
                        "agent {i} references good {g} out of range"
                    )));
                }
            }
            for v in agent.endowment.values().chain(agent.leontief.values()) {
                if v.is_negative() {
                    return Err(MarketError::BadDocument(format!(
                        "agent {i} has a negative endowment or utility entry"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total endowment of one good across all agents.
    pub fn supply(&self, good: GoodId) -> Rational {
        self.agents.iter().fold(Rational::zero(), |acc, a| {
            match a.endowment.get(&good) {
                Some(w) => acc + w,
                None => acc,
            }
        })
    }

    /// Total endowment vector, one pass over the sparse agent data.
    pub fn total_supply(&self) -> Vec<Rational> {
        let mut supply = vec![Rational::zero(); self.good_count()];
        for agent in &self.agents {
            for (&g, w) in &agent.endowment {
                supply[g] += w;
            }
        }
        supply
    }

    /// Sparse-encoding bit size: per agent, every non-zero entry costs the
    /// bits of its good id plus the bits of its value; plus one unit per
    /// good and per agent. This is the measure the compile-size bound is
    /// stated against.
    pub fn market_size(&self) -> SizeReport {
        let id_bits = |g: GoodId| u64::from(usize::BITS - g.max(1).leading_zeros());
        let mut total = self.goods.len() as u64 + self.agents.len() as u64;
        let mut u_max = Rational::zero();
        let mut max_entries = 0usize;
        for agent in &self.agents {
            max_entries = max_entries.max(agent.endowment.len() + agent.leontief.len());
            for (&g, v) in agent.endowment.iter().chain(agent.leontief.iter()) {
                total += id_bits(g) + v.size_bits();
                u_max = u_max.max(v.abs());
            }
        }
        SizeReport {
            var_count: self.goods.len(),
            relation_or_poly_count: self.agents.len(),
            total_bit_size: total,
            max_degree: 0,
            monomial_count_max: max_entries,
            u_max,
        }
    }
}

/// Prices plus per-agent utility levels; allocations are `beta_i * A_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumCertificate {
    pub prices: Vec<Rational>,
    pub betas: Vec<Rational>,
    pub numeraire: Option<GoodId>,
}

/// Result of the per-agent demand computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Demand {
    /// beta and the implied optimal bundle.
    Bounded { beta: Rational, bundle: Bundle },
    /// Zero-cost desired bundle but positive income: no optimal bundle
    /// exists, so these prices admit no equilibrium.
    Unbounded,
}

/// Optimal Leontief bundle at `prices`. Zero cost with zero income yields
/// beta = 0 by convention.
pub fn leontief_demand(agent: &Agent, prices: &[Rational]) -> Result<Demand, MarketError> {
    if prices.iter().any(Rational::is_negative) || prices.iter().all(Rational::is_zero) {
        return Err(MarketError::BadPrices);
    }
    let income = agent.income(prices);
    let cost = agent.unit_cost(prices);
    let beta = if cost.is_zero() {
        if income.is_zero() {
            Rational::zero()
        } else {
            return Ok(Demand::Unbounded);
        }
    } else {
        income / cost
    };
    let bundle = agent
        .leontief
        .iter()
        .map(|(&g, a)| (g, &beta * a))
        .collect();
    Ok(Demand::Bounded { beta, bundle })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyMode {
    Exact,
    Tolerance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// beta_i differs from the demand beta at these prices.
    SubOptimalBeta { agent: AgentId, delta: Rational },
    /// beta_i * cost_i != income_i.
    Budget { agent: AgentId, residual: Rational },
    /// Demand != supply on a positively priced good, or demand > supply on
    /// a zero-priced good.
    Clearing { good: GoodId, residual: Rational },
    UnboundedDemand { agent: AgentId },
    NegativeEntry { what: String, index: usize },
    AllZeroPrices,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub budget_residuals: Vec<Rational>,
    pub optimal: Vec<bool>,
    /// supply - demand per good.
    pub clearing_residuals: Vec<Rational>,
    pub violations: Vec<Violation>,
}

/// Checks a certificate: (a) every beta matches the Leontief demand beta,
/// (b) budgets are exhausted, (c) every good clears, where a zero-priced
/// good may be in surplus but never in deficit. Exact mode compares
/// rationals for equality; tolerance mode allows |residual| <= eps.
pub fn verify_equilibrium(
    market: &MarketInstance,
    cert: &EquilibriumCertificate,
    mode: VerifyMode,
    eps: &Rational,
) -> Result<VerifyReport, MarketError> {
    if cert.prices.len() != market.good_count() || cert.betas.len() != market.agents.len() {
        return Err(MarketError::DimensionMismatch);
    }
    let within = |value: &Rational| -> bool {
        match mode {
            VerifyMode::Exact => value.is_zero(),
            VerifyMode::Tolerance => &value.abs() <= eps,
        }
    };
    let positive_price = |p: &Rational| -> bool {
        match mode {
            VerifyMode::Exact => p.is_positive(),
            VerifyMode::Tolerance => p > eps,
        }
    };

    let mut violations = Vec::new();
    for (j, p) in cert.prices.iter().enumerate() {
        if p.is_negative() {
            violations.push(Violation::NegativeEntry {
                what: "price".into(),
                index: j,
            });
        }
    }
    for (i, b) in cert.betas.iter().enumerate() {
        if b.is_negative() {
            violations.push(Violation::NegativeEntry {
                what: "beta".into(),
                index: i,
            });
        }
    }
    if cert.prices.iter().all(Rational::is_zero) {
        violations.push(Violation::AllZeroPrices);
    }
    if !violations.is_empty() {
        return Ok(VerifyReport {
            ok: false,
            budget_residuals: vec![],
            optimal: vec![],
            clearing_residuals: vec![],
            violations,
        });
    }

    let mut budget_residuals = Vec::with_capacity(market.agents.len());
    let mut optimal = Vec::with_capacity(market.agents.len());
    let mut demand = vec![Rational::zero(); market.good_count()];
    for (i, agent) in market.agents.iter().enumerate() {
        let income = agent.income(&cert.prices);
        let cost = agent.unit_cost(&cert.prices);
        let budget = &cert.betas[i] * &cost - &income;
        budget_residuals.push(budget.clone());
        if cost.is_zero() && income.is_positive() {
            optimal.push(false);
            violations.push(Violation::UnboundedDemand { agent: i });
            continue;
        }
        let beta = if cost.is_zero() {
            Rational::zero()
        } else {
            income / cost
        };
        let delta = &cert.betas[i] - &beta;
        let good = within(&delta);
        optimal.push(good);
        if !good {
            violations.push(Violation::SubOptimalBeta { agent: i, delta });
        }
        if !within(&budget) {
            violations.push(Violation::Budget {
                agent: i,
                residual: budget,
            });
        }
        for (&g, a) in &agent.leontief {
            demand[g] += &(&cert.betas[i] * a);
        }
    }

    let supply = market.total_supply();
    let mut clearing_residuals = Vec::with_capacity(market.good_count());
    for j in 0..market.good_count() {
        let residual = &supply[j] - &demand[j];
        if positive_price(&cert.prices[j]) {
            if !within(&residual) {
                violations.push(Violation::Clearing {
                    good: j,
                    residual: residual.clone(),
                });
            }
        } else {
            // zero-priced goods may be in surplus, never in deficit
            let deficit = match mode {
                VerifyMode::Exact => residual.is_negative(),
                VerifyMode::Tolerance => residual < -eps,
            };
            if deficit {
                violations.push(Violation::Clearing {
                    good: j,
                    residual: residual.clone(),
                });
            }
        }
        clearing_residuals.push(residual);
    }

    Ok(VerifyReport {
        ok: violations.is_empty(),
        budget_residuals,
        optimal,
        clearing_residuals,
        violations,
    })
}

/// Aggregate excess demand `Z_j = demand_j - supply_j` at prices `p`.
pub fn excess_demand(
    market: &MarketInstance,
    prices: &[Rational],
) -> Result<Vec<Rational>, MarketError> {
    if prices.len() != market.good_count() {
        return Err(MarketError::DimensionMismatch);
    }
    let mut demand = vec![Rational::zero(); market.good_count()];
    for (i, agent) in market.agents.iter().enumerate() {
        match leontief_demand(agent, prices)? {
            Demand::Unbounded => return Err(MarketError::UnboundedDemand(i)),
            Demand::Bounded { bundle, .. } => {
                for (g, x) in bundle {
                    demand[g] += &x;
                }
            }
        }
    }
    let supply = market.total_supply();
    Ok((0..market.good_count())
        .map(|j| &demand[j] - &supply[j])
        .collect())
}

/// Rescales prices so the numeraire good has price 1; betas are scale
/// invariant and stay unchanged.
pub fn normalize(
    cert: &EquilibriumCertificate,
    numeraire: GoodId,
) -> Result<EquilibriumCertificate, MarketError> {
    let ps = cert
        .prices
        .get(numeraire)
        .ok_or(MarketError::DimensionMismatch)?;
    if ps.is_zero() {
        return Err(MarketError::ZeroNumeraire);
    }
    Ok(EquilibriumCertificate {
        prices: cert.prices.iter().map(|p| p / ps).collect(),
        betas: cert.betas.clone(),
        numeraire: Some(numeraire),
    })
}

// ---------------------------------------------------------------------------
// JSON interchange
//
// Market: {"schema":"market/v1","g":…,"goods":["G1",…],
//          "agents":[{"W":["num/den",…],"A":[…]},…]}   (dense vectors)
// Certificate: {"schema":"certificate/v1","p":[…],"beta":[…],"numeraire":j?}
// with the numeraire index 1-based.
// ---------------------------------------------------------------------------

pub const MARKET_SCHEMA: &str = "market/v1";
pub const CERTIFICATE_SCHEMA: &str = "certificate/v1";

#[derive(Serialize, Deserialize)]
struct AgentDoc {
    #[serde(rename = "W")]
    w: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MarketDoc {
    #[serde(default)]
    schema: Option<String>,
    g: usize,
    goods: Vec<String>,
    agents: Vec<AgentDoc>,
}

#[derive(Serialize, Deserialize)]
struct CertificateDoc {
    #[serde(default)]
    schema: Option<String>,
    p: Vec<String>,
    beta: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    numeraire: Option<usize>,
}

fn dense(bundle: &Bundle, g: usize) -> Vec<String> {
    (0..g)
        .map(|j| {
            bundle
                .get(&j)
                .cloned()
                .unwrap_or_else(Rational::zero)
                .to_string()
        })
        .collect()
}

pub fn market_to_json(market: &MarketInstance) -> serde_json::Value {
    let g = market.good_count();
    let doc = MarketDoc {
        schema: Some(MARKET_SCHEMA.to_string()),
        g,
        goods: market.goods.clone(),
        agents: market
            .agents
            .iter()
            .map(|agent| AgentDoc {
                w: dense(&agent.endowment, g),
                a: dense(&agent.leontief, g),
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("market serialization")
}

pub fn market_from_json(value: &serde_json::Value) -> Result<MarketInstance, MarketError> {
    let doc: MarketDoc = serde_json::from_value(value.clone())
        .map_err(|e| MarketError::BadDocument(e.to_string()))?;
    if doc.goods.len() != doc.g {
        return Err(MarketError::BadDocument(format!(
            "g={} but {} good labels",
            doc.g,
            doc.goods.len()
        )));
    }
    let sparse = |vals: &[String], what: &str| -> Result<Bundle, MarketError> {
        if vals.len() != doc.g {
            return Err(MarketError::BadDocument(format!(
                "{what} vector has {} entries, expected {}",
                vals.len(),
                doc.g
            )));
        }
        let mut bundle = Bundle::new();
        for (j, s) in vals.iter().enumerate() {
            let v = Rational::parse(s).map_err(|e| MarketError::BadDocument(e.to_string()))?;
            if !v.is_zero() {
                bundle.insert(j, v);
            }
        }
        Ok(bundle)
    };
    let mut agents = Vec::with_capacity(doc.agents.len());
    for a in &doc.agents {
        agents.push(Agent {
            endowment: sparse(&a.w, "W")?,
            leontief: sparse(&a.a, "A")?,
        });
    }
    let market = MarketInstance {
        goods: doc.goods,
        agents,
    };
    market.validate()?;
    Ok(market)
}

pub fn certificate_to_json(cert: &EquilibriumCertificate) -> serde_json::Value {
    let doc = CertificateDoc {
        schema: Some(CERTIFICATE_SCHEMA.to_string()),
        p: cert.prices.iter().map(Rational::to_string).collect(),
        beta: cert.betas.iter().map(Rational::to_string).collect(),
        numeraire: cert.numeraire.map(|j| j + 1),
    };
    serde_json::to_value(doc).expect("certificate serialization")
}

pub fn certificate_from_json(
    value: &serde_json::Value,
) -> Result<EquilibriumCertificate, MarketError> {
    let doc: CertificateDoc = serde_json::from_value(value.clone())
        .map_err(|e| MarketError::BadDocument(e.to_string()))?;
    let parse_all = |vals: &[String]| -> Result<Vec<Rational>, MarketError> {
        vals.iter()
            .map(|s| Rational::parse(s).map_err(|e| MarketError::BadDocument(e.to_string())))
            .collect()
    };
    let numeraire = match doc.numeraire {
        Some(0) => {
            return Err(MarketError::BadDocument(
                "numeraire index is 1-based".into(),
            ))
        }
        Some(j) => Some(j - 1),
        None => None,
    };
    Ok(EquilibriumCertificate {
        prices: parse_all(&doc.p)?,
        betas: parse_all(&doc.beta)?,
        numeraire,
    })
}
