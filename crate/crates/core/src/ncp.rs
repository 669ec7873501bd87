//! The AD-NCP complementarity system for Arrow-Debreu markets with
//! piecewise-linear concave utilities and polyhedral (PLC) production:
//! construction from a market description, candidate checking, export as
//! an existential SMT-LIB (QF_NRA) document, and the exact translation
//! between Leontief equilibrium certificates and NCP candidates.
//!
//! Conventions: prices are normalized to sum to 1 here (the market module
//! uses a numeraire instead; conversion is explicit scaling). Production
//! variables exist only for goods a firm can actually produce or consume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Bundle, EquilibriumCertificate, GoodId, MarketInstance};
use crate::poly::{Monomial, Polynomial};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NcpError {
    #[error("market must have at least one agent and one good")]
    EmptyMarket,
    #[error("firm {firm}: profit shares must sum to 1")]
    BadShares { firm: usize },
    #[error("firm {firm}: produced and raw-material sets must be disjoint")]
    OverlappingSets { firm: usize },
    #[error("{who} must have at least one piece with zero constant")]
    NoZeroConstant { who: String },
    #[error("{who}: negative entry")]
    NegativeEntry { who: String },
    #[error("candidate has {found} values, expected {expected}")]
    CandidateLength { expected: usize, found: usize },
    #[error("agent {agent} has zero spending per utility unit at these prices; no finite multiplier exists")]
    NonPositiveCost { agent: usize },
    #[error("certificate does not match the market dimensions")]
    DimensionMismatch,
    #[error("{0}")]
    BadDocument(String),
}

/// One linear utility piece: `sum_j rates_j * x_ij + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityPiece {
    pub rates: Bundle,
    pub constant: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlcAgent {
    pub endowment: Bundle,
    pub pieces: Vec<UtilityPiece>,
    /// Profit share in each firm, aligned with the market's firm list.
    pub shares: Vec<Rational>,
}

/// One production piece: `sum_{j in outputs} d_j x^s_j <= sum_{j in inputs}
/// c_j x^r_j + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionPiece {
    pub d: Bundle,
    pub c: Bundle,
    pub constant: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlcFirm {
    pub outputs: Vec<GoodId>,
    pub inputs: Vec<GoodId>,
    pub pieces: Vec<ProductionPiece>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlcMarket {
    pub goods: Vec<String>,
    pub agents: Vec<PlcAgent>,
    pub firms: Vec<PlcFirm>,
}

impl PlcMarket {
    pub fn good_count(&self) -> usize {
        self.goods.len()
    }

    pub fn validate(&self) -> Result<(), NcpError> {
        if self.agents.is_empty() || self.goods.is_empty() {
            return Err(NcpError::EmptyMarket);
        }
        for (i, agent) in self.agents.iter().enumerate() {
            let who = format!("agent {i}");
            if agent.pieces.is_empty()
                || agent.pieces.iter().all(|piece| !piece.constant.is_zero())
            {
                return Err(NcpError::NoZeroConstant { who });
            }
            if agent.shares.len() != self.firms.len() {
                return Err(NcpError::BadDocument(format!(
                    "agent {i} has {} shares for {} firms",
                    agent.shares.len(),
                    self.firms.len()
                )));
            }
            let negative = agent.endowment.values().any(Rational::is_negative)
                || agent.shares.iter().any(Rational::is_negative)
                || agent.pieces.iter().any(|piece| {
                    piece.constant.is_negative()
                        || piece.rates.values().any(Rational::is_negative)
                });
            if negative {
                return Err(NcpError::NegativeEntry { who });
            }
        }
        for (f, firm) in self.firms.iter().enumerate() {
            if firm.outputs.iter().any(|j| firm.inputs.contains(j)) {
                return Err(NcpError::OverlappingSets { firm: f });
            }
            if firm.pieces.is_empty()
                || firm.pieces.iter().all(|piece| !piece.constant.is_zero())
            {
                return Err(NcpError::NoZeroConstant {
                    who: format!("firm {f}"),
                });
            }
            let share_sum = self
                .agents
                .iter()
                .fold(Rational::zero(), |acc, a| acc + &a.shares[f]);
            if share_sum != Rational::one() {
                return Err(NcpError::BadShares { firm: f });
            }
        }
        Ok(())
    }
}

/// Variable indexing for one NCP instance. Production variables are
/// allocated sparsely (only inside each firm's produced / raw sets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcpLayout {
    pub goods: usize,
    pub agents: usize,
    pub agent_pieces: Vec<usize>,
    pub firm_pieces: Vec<usize>,
    xs_offsets: Vec<BTreeMap<GoodId, usize>>,
    xr_offsets: Vec<BTreeMap<GoodId, usize>>,
    gamma_base: usize,
    delta_base: usize,
    u_base: usize,
    phi_base: usize,
    lambda_base: usize,
    total: usize,
}

impl NcpLayout {
    fn build(market: &PlcMarket) -> Self {
        let g = market.good_count();
        let a = market.agents.len();
        let mut next = g + a * g;
        let mut xs_offsets = Vec::new();
        let mut xr_offsets = Vec::new();
        for firm in &market.firms {
            let mut xs = BTreeMap::new();
            for &j in &firm.outputs {
                xs.insert(j, next);
                next += 1;
            }
            xs_offsets.push(xs);
            let mut xr = BTreeMap::new();
            for &j in &firm.inputs {
                xr.insert(j, next);
                next += 1;
            }
            xr_offsets.push(xr);
        }
        let lambda_base = next;
        next += a;
        let gamma_base = next;
        let agent_pieces: Vec<usize> = market.agents.iter().map(|x| x.pieces.len()).collect();
        next += agent_pieces.iter().sum::<usize>();
        let delta_base = next;
        let firm_pieces: Vec<usize> = market.firms.iter().map(|f| f.pieces.len()).collect();
        next += firm_pieces.iter().sum::<usize>();
        let u_base = next;
        next += a;
        let phi_base = next;
        next += market.firms.len();
        NcpLayout {
            goods: g,
            agents: a,
            agent_pieces,
            firm_pieces,
            xs_offsets,
            xr_offsets,
            gamma_base,
            delta_base,
            u_base,
            phi_base,
            lambda_base,
            total: next,
        }
    }

    pub fn var_count(&self) -> usize {
        self.total
    }

    pub fn p(&self, j: GoodId) -> usize {
        j
    }

    pub fn x(&self, i: usize, j: GoodId) -> usize {
        self.goods + i * self.goods + j
    }

    pub fn xs(&self, f: usize, j: GoodId) -> Option<usize> {
        self.xs_offsets[f].get(&j).copied()
    }

    pub fn xr(&self, f: usize, j: GoodId) -> Option<usize> {
        self.xr_offsets[f].get(&j).copied()
    }

    pub fn lambda(&self, i: usize) -> usize {
        self.lambda_base + i
    }

    pub fn gamma(&self, i: usize, k: usize) -> usize {
        self.gamma_base + self.agent_pieces[..i].iter().sum::<usize>() + k
    }

    pub fn delta(&self, f: usize, k: usize) -> usize {
        self.delta_base + self.firm_pieces[..f].iter().sum::<usize>() + k
    }

    pub fn u(&self, i: usize) -> usize {
        self.u_base + i
    }

    pub fn phi(&self, f: usize) -> usize {
        self.phi_base + f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowRel {
    /// expr <= 0, with optional complementary variable.
    #[serde(rename = "le")]
    LeZero,
    /// expr == 0.
    #[serde(rename = "eq")]
    EqZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcpRow {
    pub label: String,
    pub rel: RowRel,
    pub expr: Polynomial,
    /// When present, `value(comp_var) * value(expr)` must vanish.
    pub comp_var: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcpInstance {
    pub var_names: Vec<String>,
    pub rows: Vec<NcpRow>,
    pub layout: NcpLayout,
}

fn term(coef: Rational, vars: &[(usize, u32)]) -> Monomial {
    Monomial::new(coef, vars)
}

/// Builds the complementarity system whose solutions are exactly the
/// market equilibria: per-piece production feasibility, output and input
/// pricing, utility-piece pricing, utility levels, budgets, clearing
/// (supply taken as the total endowment), the piece-weight and utility
/// identities, firm profits, and the price normalization `sum p = 1`.
/// All variables are implicitly non-negative.
pub fn build_ncp(market: &PlcMarket) -> Result<NcpInstance, NcpError> {
    market.validate()?;
    let layout = NcpLayout::build(market);
    let g = market.good_count();
    let one = Rational::one();
    let mut rows = Vec::new();

    let mut var_names = vec![String::new(); layout.var_count()];
    for j in 0..g {
        var_names[layout.p(j)] = format!("p_{}", j + 1);
    }
    for i in 0..market.agents.len() {
        for j in 0..g {
            var_names[layout.x(i, j)] = format!("x_{}_{}", i + 1, j + 1);
        }
        var_names[layout.lambda(i)] = format!("lam_{}", i + 1);
        var_names[layout.u(i)] = format!("u_{}", i + 1);
        for k in 0..market.agents[i].pieces.len() {
            var_names[layout.gamma(i, k)] = format!("gam_{}_{}", i + 1, k + 1);
        }
    }
    for (f, firm) in market.firms.iter().enumerate() {
        for &j in &firm.outputs {
            var_names[layout.xs(f, j).unwrap()] = format!("xs_{}_{}", f + 1, j + 1);
        }
        for &j in &firm.inputs {
            var_names[layout.xr(f, j).unwrap()] = format!("xr_{}_{}", f + 1, j + 1);
        }
        for k in 0..firm.pieces.len() {
            var_names[layout.delta(f, k)] = format!("del_{}_{}", f + 1, k + 1);
        }
        var_names[layout.phi(f)] = format!("phi_{}", f + 1);
    }

    // production feasibility per piece, complementary to delta
    for (f, firm) in market.firms.iter().enumerate() {
        for (k, piece) in firm.pieces.iter().enumerate() {
            let mut terms = Vec::new();
            for (&j, d) in &piece.d {
                terms.push(term(d.clone(), &[(layout.xs(f, j).unwrap(), 1)]));
            }
            for (&j, c) in &piece.c {
                terms.push(term(-c, &[(layout.xr(f, j).unwrap(), 1)]));
            }
            terms.push(Monomial::constant(-&piece.constant));
            rows.push(NcpRow {
                label: format!("prod_feas_f{}_k{}", f + 1, k + 1),
                rel: RowRel::LeZero,
                expr: Polynomial::new(terms),
                comp_var: Some(layout.delta(f, k)),
            });
        }
        // output pricing: p_j <= sum_k D^k_fj delta_fk, complementary to xs
        for &j in &firm.outputs {
            let mut terms = vec![term(one.clone(), &[(layout.p(j), 1)])];
            for (k, piece) in firm.pieces.iter().enumerate() {
                if let Some(d) = piece.d.get(&j) {
                    terms.push(term(-d, &[(layout.delta(f, k), 1)]));
                }
            }
            rows.push(NcpRow {
                label: format!("prod_out_f{}_g{}", f + 1, j + 1),
                rel: RowRel::LeZero,
                expr: Polynomial::new(terms),
                comp_var: layout.xs(f, j),
            });
        }
        // input pricing: sum_k C^k_fj delta_fk <= p_j, complementary to xr
        for &j in &firm.inputs {
            let mut terms = vec![term(-&one, &[(layout.p(j), 1)])];
            for (k, piece) in firm.pieces.iter().enumerate() {
                if let Some(c) = piece.c.get(&j) {
                    terms.push(term(c.clone(), &[(layout.delta(f, k), 1)]));
                }
            }
            rows.push(NcpRow {
                label: format!("prod_in_f{}_g{}", f + 1, j + 1),
                rel: RowRel::LeZero,
                expr: Polynomial::new(terms),
                comp_var: layout.xr(f, j),
            });
        }
    }

    for (i, agent) in market.agents.iter().enumerate() {
        // utility-piece pricing: sum_k U^k_ij gamma_ik <= lam_i p_j
        for j in 0..g {
            let mut terms = vec![term(-&one, &[(layout.lambda(i), 1), (layout.p(j), 1)])];
            for (k, piece) in agent.pieces.iter().enumerate() {
                if let Some(u) = piece.rates.get(&j) {
                    terms.push(term(u.clone(), &[(layout.gamma(i, k), 1)]));
                }
            }
            rows.push(NcpRow {
                label: format!("util_price_a{}_g{}", i + 1, j + 1),
                rel: RowRel::LeZero,
                expr: Polynomial::new(terms),
                comp_var: Some(layout.x(i, j)),
            });
        }
        // utility level: u_i <= sum_j U^k_ij x_ij + T^k_i per piece
        for (k, piece) in agent.pieces.iter().enumerate() {
            let mut terms = vec![term(one.clone(), &[(layout.u(i), 1)])];
            for (&j, u) in &piece.rates {
                terms.push(term(-u, &[(layout.x(i, j), 1)]));
            }
            terms.push(Monomial::constant(-&piece.constant));
            rows.push(NcpRow {
                label: format!("util_level_a{}_k{}", i + 1, k + 1),
                rel: RowRel::LeZero,
                expr: Polynomial::new(terms),
                comp_var: Some(layout.gamma(i, k)),
            });
        }
        // budget: sum_j x_ij p_j <= sum_j W_ij p_j + sum_f theta_if phi_f
        let mut budget = Vec::new();
        for j in 0..g {
            budget.push(term(one.clone(), &[(layout.x(i, j), 1), (layout.p(j), 1)]));
        }
        for (&j, w) in &agent.endowment {
            budget.push(term(-w, &[(layout.p(j), 1)]));
        }
        for (f, share) in agent.shares.iter().enumerate() {
            if !share.is_zero() {
                budget.push(term(-share, &[(layout.phi(f), 1)]));
            }
        }
        rows.push(NcpRow {
            label: format!("budget_a{}", i + 1),
            rel: RowRel::LeZero,
            expr: Polynomial::new(budget),
            comp_var: Some(layout.lambda(i)),
        });
        // piece weights sum to one
        let mut gam_sum: Vec<Monomial> = (0..agent.pieces.len())
            .map(|k| term(one.clone(), &[(layout.gamma(i, k), 1)]))
            .collect();
        gam_sum.push(Monomial::constant(-&one));
        rows.push(NcpRow {
            label: format!("gamma_sum_a{}", i + 1),
            rel: RowRel::EqZero,
            expr: Polynomial::new(gam_sum),
            comp_var: None,
        });
        // utility identity: u_i = lam_i * (income) + sum_k gamma_ik T^k_i
        let mut ident = vec![term(one.clone(), &[(layout.u(i), 1)])];
        for (&j, w) in &agent.endowment {
            ident.push(term(-w, &[(layout.lambda(i), 1), (layout.p(j), 1)]));
        }
        for (f, share) in agent.shares.iter().enumerate() {
            if !share.is_zero() {
                ident.push(term(-share, &[(layout.lambda(i), 1), (layout.phi(f), 1)]));
            }
        }
        for (k, piece) in agent.pieces.iter().enumerate() {
            if !piece.constant.is_zero() {
                ident.push(term(-&piece.constant, &[(layout.gamma(i, k), 1)]));
            }
        }
        rows.push(NcpRow {
            label: format!("utility_identity_a{}", i + 1),
            rel: RowRel::EqZero,
            expr: Polynomial::new(ident),
            comp_var: None,
        });
    }

    // market clearing per good: demand + raw use <= endowment + production,
    // complementary to the price
    for j in 0..g {
        let mut terms = Vec::new();
        for i in 0..market.agents.len() {
            terms.push(term(one.clone(), &[(layout.x(i, j), 1)]));
        }
        let mut supply = Rational::zero();
        for agent in &market.agents {
            if let Some(w) = agent.endowment.get(&j) {
                supply += w;
            }
        }
        terms.push(Monomial::constant(-supply));
        for (f, _) in market.firms.iter().enumerate() {
            if let Some(v) = layout.xr(f, j) {
                terms.push(term(one.clone(), &[(v, 1)]));
            }
            if let Some(v) = layout.xs(f, j) {
                terms.push(term(-&one, &[(v, 1)]));
            }
        }
        rows.push(NcpRow {
            label: format!("clearing_g{}", j + 1),
            rel: RowRel::LeZero,
            expr: Polynomial::new(terms),
            comp_var: Some(layout.p(j)),
        });
    }

    // firm profit: phi_f = sum_k delta_fk T^k_f
    for (f, firm) in market.firms.iter().enumerate() {
        let mut terms = vec![term(one.clone(), &[(layout.phi(f), 1)])];
        for (k, piece) in firm.pieces.iter().enumerate() {
            if !piece.constant.is_zero() {
                terms.push(term(-&piece.constant, &[(layout.delta(f, k), 1)]));
            }
        }
        rows.push(NcpRow {
            label: format!("profit_f{}", f + 1),
            rel: RowRel::EqZero,
            expr: Polynomial::new(terms),
            comp_var: None,
        });
    }

    // price normalization: sum_j p_j = 1
    let mut norm: Vec<Monomial> = (0..g)
        .map(|j| term(one.clone(), &[(layout.p(j), 1)]))
        .collect();
    norm.push(Monomial::constant(-&one));
    rows.push(NcpRow {
        label: "price_sum".to_string(),
        rel: RowRel::EqZero,
        expr: Polynomial::new(norm),
        comp_var: None,
    });

    Ok(NcpInstance {
        var_names,
        rows,
        layout,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NcpViolation {
    pub row: String,
    pub value: Rational,
    pub complementarity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NcpReport {
    pub ok: bool,
    pub violations: Vec<NcpViolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Exact,
    Tolerance,
}

/// Evaluates every row at the candidate: inequalities must hold and every
/// complementarity product must vanish (within `eps` in tolerance mode).
/// Negative variable values are violations of the implicit sign rows.
pub fn check_ncp(
    instance: &NcpInstance,
    values: &[Rational],
    mode: CheckMode,
    eps: &Rational,
) -> Result<NcpReport, NcpError> {
    if values.len() != instance.layout.var_count() {
        return Err(NcpError::CandidateLength {
            expected: instance.layout.var_count(),
            found: values.len(),
        });
    }
    let within_le = |value: &Rational| match mode {
        CheckMode::Exact => !value.is_positive(),
        CheckMode::Tolerance => value <= eps,
    };
    let within_eq = |value: &Rational| match mode {
        CheckMode::Exact => value.is_zero(),
        CheckMode::Tolerance => &value.abs() <= eps,
    };
    let mut violations = Vec::new();
    for (idx, v) in values.iter().enumerate() {
        if v.is_negative() && !within_le(&-v) {
            violations.push(NcpViolation {
                row: format!("nonneg_{}", instance.var_names[idx]),
                value: v.clone(),
                complementarity: false,
            });
        }
    }
    for row in &instance.rows {
        let value = row.expr.eval(values);
        let ok = match row.rel {
            RowRel::LeZero => within_le(&value),
            RowRel::EqZero => within_eq(&value),
        };
        if !ok {
            violations.push(NcpViolation {
                row: row.label.clone(),
                value: value.clone(),
                complementarity: false,
            });
        }
        if let Some(cv) = row.comp_var {
            let product = &values[cv] * &value;
            if !within_eq(&product) {
                violations.push(NcpViolation {
                    row: row.label.clone(),
                    value: product,
                    complementarity: true,
                });
            }
        }
    }
    Ok(NcpReport {
        ok: violations.is_empty(),
        violations,
    })
}

// ---------------------------------------------------------------------------
// Leontief bridge
// ---------------------------------------------------------------------------

/// Exact PLC encoding of a Leontief market: one piece per desired good
/// with rate `1/A_ij` on that good alone and zero constant, so the PLC
/// lower envelope realizes `min_j x_ij / A_ij`.
pub fn plc_from_leontief(market: &MarketInstance) -> PlcMarket {
    PlcMarket {
        goods: market.goods.clone(),
        agents: market
            .agents
            .iter()
            .map(|agent| PlcAgent {
                endowment: agent.endowment.clone(),
                pieces: agent
                    .leontief
                    .iter()
                    .map(|(&j, a)| UtilityPiece {
                        rates: [(j, a.recip())].into_iter().collect(),
                        constant: Rational::zero(),
                    })
                    .collect(),
                shares: vec![],
            })
            .collect(),
        firms: vec![],
    }
}

/// Extends a verified Leontief certificate to an NCP candidate for the PLC
/// encoding: prices rescaled to sum 1, allocations `beta_i A_ij`,
/// `lambda_i = 1 / cost_i`, piece weights `gamma = p_j A_ij / cost_i`, and
/// `u_i = beta_i`. Requires every agent to have positive spending per
/// utility unit at the certificate prices.
pub fn extend_certificate(
    market: &MarketInstance,
    instance: &NcpInstance,
    cert: &EquilibriumCertificate,
) -> Result<Vec<Rational>, NcpError> {
    let layout = &instance.layout;
    if cert.prices.len() != market.good_count()
        || cert.betas.len() != market.agents.len()
        || layout.goods != market.good_count()
        || layout.agents != market.agents.len()
    {
        return Err(NcpError::DimensionMismatch);
    }
    let total: Rational = cert
        .prices
        .iter()
        .fold(Rational::zero(), |acc, p| acc + p);
    if !total.is_positive() {
        return Err(NcpError::BadDocument("prices sum to zero".into()));
    }
    let prices: Vec<Rational> = cert.prices.iter().map(|p| p / &total).collect();

    let mut values = vec![Rational::zero(); layout.var_count()];
    for (j, p) in prices.iter().enumerate() {
        values[layout.p(j)] = p.clone();
    }
    for (i, agent) in market.agents.iter().enumerate() {
        let cost = agent.unit_cost(&prices);
        if !cost.is_positive() {
            return Err(NcpError::NonPositiveCost { agent: i });
        }
        let beta = &cert.betas[i];
        for (&j, a) in &agent.leontief {
            values[layout.x(i, j)] = beta * a;
        }
        values[layout.lambda(i)] = cost.recip();
        values[layout.u(i)] = beta.clone();
        // pieces were built in BTreeMap iteration order over desired goods
        for (k, (&j, a)) in agent.leontief.iter().enumerate() {
            values[layout.gamma(i, k)] = &(&prices[j] * a) / &cost;
        }
    }
    Ok(values)
}

/// Reads the market-facing part of an accepted candidate back into a
/// certificate: prices as given (sum-1 normalization) and `beta_i = u_i`.
pub fn project_candidate(
    market: &MarketInstance,
    instance: &NcpInstance,
    values: &[Rational],
) -> Result<EquilibriumCertificate, NcpError> {
    let layout = &instance.layout;
    if values.len() != layout.var_count() || layout.agents != market.agents.len() {
        return Err(NcpError::DimensionMismatch);
    }
    Ok(EquilibriumCertificate {
        prices: (0..layout.goods).map(|j| values[layout.p(j)].clone()).collect(),
        betas: (0..layout.agents)
            .map(|i| values[layout.u(i)].clone())
            .collect(),
        numeraire: None,
    })
}

// ---------------------------------------------------------------------------
// SMT-LIB export
// ---------------------------------------------------------------------------

fn lcm_of_denominators(p: &Polynomial) -> num_bigint::BigInt {
    use num_integer::Integer;
    let mut acc = num_bigint::BigInt::from(1);
    for m in p.monomials() {
        acc = acc.lcm(&m.coefficient.denom());
    }
    acc
}

fn smt_integer(n: &num_bigint::BigInt) -> String {
    if n.sign() == num_bigint::Sign::Minus {
        format!("(- {})", n.magnitude())
    } else {
        n.to_string()
    }
}

/// Renders `p` (after multiplying through by the LCM of its coefficient
/// denominators) as an SMT-LIB term with integer numerals only.
fn smt_polynomial(p: &Polynomial, names: &[String]) -> String {
    let lcm = lcm_of_denominators(p);
    let lcm_r = Rational::new(lcm.clone(), num_bigint::BigInt::from(1)).expect("lcm");
    let mut terms = Vec::new();
    for m in p.monomials() {
        let coef = &m.coefficient * &lcm_r;
        debug_assert!(coef.is_integer());
        let mut factors: Vec<String> = Vec::new();
        for (&v, &e) in &m.exponents {
            for _ in 0..e {
                factors.push(names[v].clone());
            }
        }
        let coef_int = coef.numer();
        let coef_is_one = coef_int == num_bigint::BigInt::from(1);
        let rendered = if factors.is_empty() {
            smt_integer(&coef_int)
        } else if coef_is_one && factors.len() == 1 {
            factors[0].clone()
        } else if coef_is_one {
            format!("(* {})", factors.join(" "))
        } else {
            format!("(* {} {})", smt_integer(&coef_int), factors.join(" "))
        };
        terms.push(rendered);
    }
    match terms.len() {
        0 => "0".to_string(),
        1 => terms.pop().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// Exports the existence question as an SMT-LIB v2 document over QF_NRA:
/// non-negative real constants, one assertion per row (denominators
/// cleared by least common multiples), complementarities as product
/// equations, and a `check-sat` trailer. The export is semantics-blind:
/// it emits well-formed documents even for unsatisfiable instances.
pub fn export_etr(instance: &NcpInstance) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_NRA)\n");
    for name in &instance.var_names {
        out.push_str(&format!("(declare-const {name} Real)\n"));
    }
    for name in &instance.var_names {
        out.push_str(&format!("(assert (>= {name} 0))\n"));
    }
    for row in &instance.rows {
        let body = smt_polynomial(&row.expr, &instance.var_names);
        match row.rel {
            RowRel::LeZero => out.push_str(&format!("(assert (<= {body} 0))\n")),
            RowRel::EqZero => out.push_str(&format!("(assert (= {body} 0))\n")),
        }
        if let Some(cv) = row.comp_var {
            out.push_str(&format!(
                "(assert (= (* {} {body}) 0))\n",
                instance.var_names[cv]
            ));
        }
    }
    out.push_str("(check-sat)\n");
    out
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

pub const PLC_SCHEMA: &str = "plc-market/v1";
pub const NCP_SCHEMA: &str = "ncp/v1";
pub const NCP_CANDIDATE_SCHEMA: &str = "ncp-candidate/v1";

#[derive(Serialize, Deserialize)]
struct PieceDoc {
    #[serde(rename = "U")]
    u: Vec<String>,
    #[serde(rename = "T")]
    t: String,
}

#[derive(Serialize, Deserialize)]
struct PlcAgentDoc {
    #[serde(rename = "W")]
    w: Vec<String>,
    pieces: Vec<PieceDoc>,
    #[serde(default)]
    shares: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FirmPieceDoc {
    #[serde(rename = "D")]
    d: Vec<String>,
    #[serde(rename = "C")]
    c: Vec<String>,
    #[serde(rename = "T")]
    t: String,
}

#[derive(Serialize, Deserialize)]
struct PlcFirmDoc {
    #[serde(rename = "S")]
    s: Vec<usize>,
    #[serde(rename = "R")]
    r: Vec<usize>,
    pieces: Vec<FirmPieceDoc>,
}

#[derive(Serialize, Deserialize)]
struct PlcMarketDoc {
    #[serde(default)]
    schema: Option<String>,
    g: usize,
    goods: Vec<String>,
    agents: Vec<PlcAgentDoc>,
    #[serde(default)]
    firms: Vec<PlcFirmDoc>,
}

fn parse_rational(s: &str) -> Result<Rational, NcpError> {
    Rational::parse(s).map_err(|e| NcpError::BadDocument(e.to_string()))
}

fn dense_to_bundle(vals: &[String], g: usize, what: &str) -> Result<Bundle, NcpError> {
    if vals.len() != g {
        return Err(NcpError::BadDocument(format!(
            "{what} has {} entries, expected {g}",
            vals.len()
        )));
    }
    let mut bundle = Bundle::new();
    for (j, s) in vals.iter().enumerate() {
        let v = parse_rational(s)?;
        if !v.is_zero() {
            bundle.insert(j, v);
        }
    }
    Ok(bundle)
}

fn bundle_to_dense(bundle: &Bundle, g: usize) -> Vec<String> {
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

pub fn plc_market_to_json(market: &PlcMarket) -> serde_json::Value {
    let g = market.good_count();
    let doc = PlcMarketDoc {
        schema: Some(PLC_SCHEMA.to_string()),
        g,
        goods: market.goods.clone(),
        agents: market
            .agents
            .iter()
            .map(|agent| PlcAgentDoc {
                w: bundle_to_dense(&agent.endowment, g),
                pieces: agent
                    .pieces
                    .iter()
                    .map(|piece| PieceDoc {
                        u: bundle_to_dense(&piece.rates, g),
                        t: piece.constant.to_string(),
                    })
                    .collect(),
                shares: agent.shares.iter().map(Rational::to_string).collect(),
            })
            .collect(),
        firms: market
            .firms
            .iter()
            .map(|firm| PlcFirmDoc {
                s: firm.outputs.iter().map(|j| j + 1).collect(),
                r: firm.inputs.iter().map(|j| j + 1).collect(),
                pieces: firm
                    .pieces
                    .iter()
                    .map(|piece| FirmPieceDoc {
                        d: bundle_to_dense(&piece.d, g),
                        c: bundle_to_dense(&piece.c, g),
                        t: piece.constant.to_string(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("plc market serialization")
}

pub fn plc_market_from_json(value: &serde_json::Value) -> Result<PlcMarket, NcpError> {
    let doc: PlcMarketDoc = serde_json::from_value(value.clone())
        .map_err(|e| NcpError::BadDocument(e.to_string()))?;
    if doc.goods.len() != doc.g {
        return Err(NcpError::BadDocument(format!(
            "g={} but {} good labels",
            doc.g,
            doc.goods.len()
        )));
    }
    let conv_good = |id: usize| -> Result<GoodId, NcpError> {
        if id == 0 || id > doc.g {
            return Err(NcpError::BadDocument(format!(
                "good id {id} out of range 1..={}",
                doc.g
            )));
        }
        Ok(id - 1)
    };
    let mut agents = Vec::new();
    for a in &doc.agents {
        let mut pieces = Vec::new();
        for piece in &a.pieces {
            pieces.push(UtilityPiece {
                rates: dense_to_bundle(&piece.u, doc.g, "piece U")?,
                constant: parse_rational(&piece.t)?,
            });
        }
        agents.push(PlcAgent {
            endowment: dense_to_bundle(&a.w, doc.g, "W")?,
            pieces,
            shares: a
                .shares
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_, _>>()?,
        });
    }
    let mut firms = Vec::new();
    for f in &doc.firms {
        let mut pieces = Vec::new();
        for piece in &f.pieces {
            pieces.push(ProductionPiece {
                d: dense_to_bundle(&piece.d, doc.g, "piece D")?,
                c: dense_to_bundle(&piece.c, doc.g, "piece C")?,
                constant: parse_rational(&piece.t)?,
            });
        }
        firms.push(PlcFirm {
            outputs: f.s.iter().map(|&j| conv_good(j)).collect::<Result<_, _>>()?,
            inputs: f.r.iter().map(|&j| conv_good(j)).collect::<Result<_, _>>()?,
            pieces,
        });
    }
    let market = PlcMarket {
        goods: doc.goods,
        agents,
        firms,
    };
    market.validate()?;
    Ok(market)
}

#[derive(Serialize, Deserialize)]
struct NcpMonomialDoc {
    c: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    e: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct NcpRowDoc {
    label: String,
    rel: RowRel,
    expr: Vec<NcpMonomialDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comp: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct NcpInstanceDoc {
    #[serde(default)]
    schema: Option<String>,
    vars: Vec<String>,
    rows: Vec<NcpRowDoc>,
}

/// Serializes only the symbolic system (variables and rows); the layout is
/// reconstructible from the source market, and checking needs only names.
pub fn ncp_instance_to_json(instance: &NcpInstance) -> serde_json::Value {
    let name_of = |v: usize| instance.var_names[v].clone();
    let doc = NcpInstanceDoc {
        schema: Some(NCP_SCHEMA.to_string()),
        vars: instance.var_names.clone(),
        rows: instance
            .rows
            .iter()
            .map(|row| NcpRowDoc {
                label: row.label.clone(),
                rel: row.rel,
                expr: row
                    .expr
                    .monomials()
                    .iter()
                    .map(|m| NcpMonomialDoc {
                        c: m.coefficient.to_string(),
                        e: m
                            .exponents
                            .iter()
                            .map(|(&v, &e)| (name_of(v), e))
                            .collect(),
                    })
                    .collect(),
                comp: row.comp_var.map(name_of),
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("ncp serialization")
}

#[derive(Serialize, Deserialize)]
struct CandidateDoc {
    #[serde(default)]
    schema: Option<String>,
    values: BTreeMap<String, String>,
}

pub fn candidate_to_json(instance: &NcpInstance, values: &[Rational]) -> serde_json::Value {
    let doc = CandidateDoc {
        schema: Some(NCP_CANDIDATE_SCHEMA.to_string()),
        values: instance
            .var_names
            .iter()
            .cloned()
            .zip(values.iter().map(Rational::to_string))
            .collect(),
    };
    serde_json::to_value(doc).expect("candidate serialization")
}

/// Candidate values in instance variable order; absent names default to 0.
pub fn candidate_from_json(
    instance: &NcpInstance,
    value: &serde_json::Value,
) -> Result<Vec<Rational>, NcpError> {
    let doc: CandidateDoc = serde_json::from_value(value.clone())
        .map_err(|e| NcpError::BadDocument(e.to_string()))?;
    for name in doc.values.keys() {
        if !instance.var_names.contains(name) {
            return Err(NcpError::BadDocument(format!("unknown variable `{name}`")));
        }
    }
    instance
        .var_names
        .iter()
        .map(|name| match doc.values.get(name) {
            Some(s) => parse_rational(s),
            None => Ok(Rational::zero()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Agent;

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn single_agent_market() -> PlcMarket {
        // one agent, one good, linear utility U = x
        PlcMarket {
            goods: vec!["G1".into()],
            agents: vec![PlcAgent {
                endowment: [(0, r("1"))].into_iter().collect(),
                pieces: vec![UtilityPiece {
                    rates: [(0, r("1"))].into_iter().collect(),
                    constant: r("0"),
                }],
                shares: vec![],
            }],
            firms: vec![],
        }
    }

    #[test]
    fn build_single_agent_rows() {
        let instance = build_ncp(&single_agent_market()).unwrap();
        let labels: Vec<&str> = instance.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            vec![
                "util_price_a1_g1",
                "util_level_a1_k1",
                "budget_a1",
                "gamma_sum_a1",
                "utility_identity_a1",
                "clearing_g1",
                "price_sum",
            ]
        );
    }

    #[test]
    fn check_single_agent_equilibrium() {
        let instance = build_ncp(&single_agent_market()).unwrap();
        // p=1, x=1, lam=1, gam=1, u=1
        let values = vec![r("1"), r("1"), r("1"), r("1"), r("1")];
        let report = check_ncp(&instance, &values, CheckMode::Exact, &r("0")).unwrap();
        assert!(report.ok, "{:?}", report.violations);

        // oversupplied demand violates clearing
        let bad = vec![r("1"), r("2"), r("1"), r("1"), r("1")];
        let report = check_ncp(&instance, &bad, CheckMode::Exact, &r("0")).unwrap();
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.row == "clearing_g1"));
    }

    #[test]
    fn exchange_market_has_no_production_rows() {
        let instance = build_ncp(&single_agent_market()).unwrap();
        assert!(instance.rows.iter().all(|row| !row.label.starts_with("prod")));
        assert!(instance
            .rows
            .iter()
            .find(|row| row.label == "budget_a1")
            .map(|row| row.expr.monomials().len() == 2)
            .unwrap());
    }

    #[test]
    fn validation_rejects_bad_markets() {
        let mut no_zero = single_agent_market();
        no_zero.agents[0].pieces[0].constant = r("1");
        assert!(matches!(
            build_ncp(&no_zero),
            Err(NcpError::NoZeroConstant { .. })
        ));

        let empty = PlcMarket {
            goods: vec!["G1".into()],
            agents: vec![],
            firms: vec![],
        };
        assert_eq!(build_ncp(&empty).unwrap_err(), NcpError::EmptyMarket);
    }

    /// Leontief-production firm: one output from two inputs in fixed
    /// proportions, encoded as one production piece per input.
    fn leontief_production_market() -> PlcMarket {
        // goods: Out, In1, In2. Agent holds the inputs, wants the output.
        // Firm: 1 unit of Out needs 1 of In1 and 2 of In2.
        PlcMarket {
            goods: vec!["Out".into(), "In1".into(), "In2".into()],
            agents: vec![PlcAgent {
                endowment: [(1, r("1")), (2, r("2"))].into_iter().collect(),
                pieces: vec![UtilityPiece {
                    rates: [(0, r("1"))].into_iter().collect(),
                    constant: r("0"),
                }],
                shares: vec![r("1")],
            }],
            firms: vec![PlcFirm {
                outputs: vec![0],
                inputs: vec![1, 2],
                pieces: vec![
                    ProductionPiece {
                        d: [(0, r("1"))].into_iter().collect(),
                        c: [(1, r("1"))].into_iter().collect(),
                        constant: r("0"),
                    },
                    ProductionPiece {
                        d: [(0, r("1"))].into_iter().collect(),
                        c: [(2, r("1/2"))].into_iter().collect(),
                        constant: r("0"),
                    },
                ],
            }],
        }
    }

    #[test]
    fn leontief_production_hand_equilibrium() {
        let market = leontief_production_market();
        let instance = build_ncp(&market).unwrap();
        let layout = &instance.layout;
        // prices sum to 1: out = 4/7, in1 = 2/7, in2 = 1/7; producing one
        // unit costs 2/7 + 2*(1/7) = 4/7 = its price, so profit is zero
        let mut values = vec![r("0"); layout.var_count()];
        values[layout.p(0)] = r("4/7");
        values[layout.p(1)] = r("2/7");
        values[layout.p(2)] = r("1/7");
        // firm converts all inputs into 1 unit of output
        values[layout.xs(0, 0).unwrap()] = r("1");
        values[layout.xr(0, 1).unwrap()] = r("1");
        values[layout.xr(0, 2).unwrap()] = r("2");
        values[layout.delta(0, 0)] = r("2/7");
        values[layout.delta(0, 1)] = r("2/7");
        // agent income 2/7 + 2/7 = 4/7 buys exactly the unit of output
        values[layout.x(0, 0)] = r("1");
        values[layout.lambda(0)] = r("7/4");
        values[layout.gamma(0, 0)] = r("1");
        values[layout.u(0)] = r("1");
        values[layout.phi(0)] = r("0");
        let report = check_ncp(&instance, &values, CheckMode::Exact, &r("0")).unwrap();
        assert!(report.ok, "{:?}", report.violations);
    }

    #[test]
    fn leontief_bridge_round_trip() {
        // the two-agent equality gadget at its equilibrium
        let market = MarketInstance {
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
        };
        let cert = EquilibriumCertificate {
            prices: vec![r("3"), r("3"), r("1")],
            betas: vec![r("1"), r("1")],
            numeraire: None,
        };
        let plc = plc_from_leontief(&market);
        let instance = build_ncp(&plc).unwrap();
        let values = extend_certificate(&market, &instance, &cert).unwrap();
        let report = check_ncp(&instance, &values, CheckMode::Exact, &r("0")).unwrap();
        assert!(report.ok, "{:?}", report.violations);

        let back = project_candidate(&market, &instance, &values).unwrap();
        let verify = crate::market::verify_equilibrium(
            &market,
            &back,
            crate::market::VerifyMode::Exact,
            &r("0"),
        )
        .unwrap();
        assert!(verify.ok, "{:?}", verify.violations);

        // corrupting a multiplier breaks the candidate
        let mut bad = values.clone();
        let lam0 = instance.layout.lambda(0);
        bad[lam0] = &bad[lam0] + &r("1/100");
        let report = check_ncp(&instance, &bad, CheckMode::Exact, &r("0")).unwrap();
        assert!(!report.ok);
    }

    #[test]
    fn export_is_denominator_free_and_balanced() {
        let market = leontief_production_market();
        let instance = build_ncp(&market).unwrap();
        let doc = export_etr(&instance);
        assert!(doc.starts_with("(set-logic QF_NRA)"));
        assert!(doc.trim_end().ends_with("(check-sat)"));
        assert!(!doc.contains('/'));
        assert!(!doc.contains('.'));
        let depth = doc.chars().fold(0i64, |acc, c| match c {
            '(' => acc + 1,
            ')' => acc - 1,
            _ => acc,
        });
        assert_eq!(depth, 0);
        // one declare and one sign assert per variable
        let declares = doc.matches("(declare-const").count();
        assert_eq!(declares, instance.var_names.len());
    }

    #[test]
    fn export_handles_unsatisfiable_instances() {
        // agent endowed only with a good nobody (including herself) values:
        // the document must still be well-formed
        let market = PlcMarket {
            goods: vec!["G1".into(), "G2".into()],
            agents: vec![PlcAgent {
                endowment: [(1, r("1"))].into_iter().collect(),
                pieces: vec![UtilityPiece {
                    rates: [(0, r("1"))].into_iter().collect(),
                    constant: r("0"),
                }],
                shares: vec![],
            }],
            firms: vec![],
        };
        let instance = build_ncp(&market).unwrap();
        let doc = export_etr(&instance);
        assert!(doc.contains("(check-sat)"));
    }

    #[test]
    fn plc_json_round_trip() {
        let market = leontief_production_market();
        let back = plc_market_from_json(&plc_market_to_json(&market)).unwrap();
        assert_eq!(market, back);
    }

    #[test]
    fn candidate_json_round_trip() {
        let instance = build_ncp(&single_agent_market()).unwrap();
        let values = vec![r("1"), r("1"), r("1"), r("1"), r("1")];
        let doc = candidate_to_json(&instance, &values);
        let back = candidate_from_json(&instance, &doc).unwrap();
        assert_eq!(values, back);
    }
}
