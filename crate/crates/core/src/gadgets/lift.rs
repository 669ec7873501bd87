//! Lifting solutions to full equilibrium certificates, projecting
//! certificates back to solutions, and auditing that every gadget is a
//! closed submarket (zero net flow on every good) at a given certificate.

use thiserror::Error;

use crate::market::{
    leontief_demand, verify_equilibrium, Demand, EquilibriumCertificate, GoodId, MarketError,
    VerifyMode, VerifyReport,
};
use crate::rational::Rational;
use crate::reduce::{self, ReduceError};

use super::{CompiledMarket, GadgetRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("assignment does not solve the relation system (relation {relation} residual {residual})")]
    ResidualNonZero { relation: usize, residual: Rational },
    #[error("variable {var} is negative in the extended assignment")]
    NegativeValue { var: usize },
    #[error("variable {var} exceeds the bound H = {h}")]
    ValueExceedsH { var: usize, h: Rational },
    #[error("certificate failed verification: {0}")]
    InvalidCertificate(String),
    #[error("numeraire price is zero in the certificate")]
    ZeroNumeraire,
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("internal error: {0}")]
    Internal(String),
}

fn assign_formula_prices(record: &GadgetRecord, prices: &mut [Rational]) -> Result<(), LiftError> {
    for (good, formula) in &record.formulas {
        let value = formula.eval(prices);
        if value.is_negative() {
            return Err(LiftError::Internal(format!(
                "negative internal price for good {good} in {}",
                record.label
            )));
        }
        prices[*good] = value;
    }
    for child in &record.children {
        assign_formula_prices(child, prices)?;
    }
    Ok(())
}

/// Lifts a solution of the source system to a full equilibrium certificate
/// with numeraire price 1: relation-variable goods are priced by forward
/// evaluation, gadget-internal goods by their closed-form formulas,
/// exclusive goods at 1, and betas from the Leontief demand at those
/// prices. The result is verified exactly before being returned.
pub fn lift(compiled: &CompiledMarket, z: &[Rational]) -> Result<EquilibriumCertificate, LiftError> {
    let trace = &compiled.trace;
    let rs = &trace.relations;
    let extension = reduce::extend_assignment(rs, z)?;
    let residuals = reduce::eval_relations(rs, &extension)?;
    if let Some(&var) = residuals.negative_vars.first() {
        return Err(LiftError::NegativeValue { var });
    }
    if let Some((relation, residual)) = residuals
        .residuals
        .iter()
        .enumerate()
        .find(|(_, res)| !res.is_zero())
    {
        return Err(LiftError::ResidualNonZero {
            relation,
            residual: residual.clone(),
        });
    }
    for (var, value) in extension.iter().enumerate() {
        if value > &rs.h {
            return Err(LiftError::ValueExceedsH {
                var,
                h: rs.h.clone(),
            });
        }
    }

    let mut prices = vec![Rational::zero(); compiled.market.good_count()];
    prices[..extension.len()].clone_from_slice(&extension);
    for record in &trace.records {
        assign_formula_prices(record, &mut prices)?;
    }

    let mut betas = Vec::with_capacity(compiled.market.agents.len());
    for (i, agent) in compiled.market.agents.iter().enumerate() {
        match leontief_demand(agent, &prices)? {
            Demand::Bounded { beta, .. } => betas.push(beta),
            Demand::Unbounded => {
                return Err(LiftError::Internal(format!(
                    "agent {i} has unbounded demand at lifted prices"
                )))
            }
        }
    }

    let cert = EquilibriumCertificate {
        prices,
        betas,
        numeraire: Some(trace.numeraire_good),
    };
    let report = verify_equilibrium(&compiled.market, &cert, VerifyMode::Exact, &Rational::zero())?;
    if !report.ok {
        return Err(LiftError::Internal(format!(
            "lifted certificate failed exact verification: {:?}",
            report.violations
        )));
    }
    Ok(cert)
}

fn require_verified(
    compiled: &CompiledMarket,
    cert: &EquilibriumCertificate,
    mode: VerifyMode,
    eps: &Rational,
) -> Result<VerifyReport, LiftError> {
    let report = verify_equilibrium(&compiled.market, cert, mode, eps)?;
    if !report.ok {
        return Err(LiftError::InvalidCertificate(format!(
            "{:?}",
            report.violations
        )));
    }
    Ok(report)
}

/// Projects a verified certificate onto a solution of the source system:
/// prices are normalized by the numeraire and the first `n` coordinates
/// returned. In exact mode the projected point must solve the system
/// exactly; in tolerance mode residuals must stay within `eps`.
pub fn project(
    compiled: &CompiledMarket,
    cert: &EquilibriumCertificate,
    mode: VerifyMode,
    eps: &Rational,
) -> Result<Vec<Rational>, LiftError> {
    require_verified(compiled, cert, mode, eps)?;
    let trace = &compiled.trace;
    let ps = &cert.prices[trace.numeraire_good];
    if ps.is_zero() {
        // impossible for a truly verified certificate: the numeraire agent
        // would have unbounded demand
        return Err(LiftError::ZeroNumeraire);
    }
    let z: Vec<Rational> = (0..trace.relations.original_n)
        .map(|j| &cert.prices[j] / ps)
        .collect();
    let report = trace
        .system
        .residual(&z)
        .map_err(|e| LiftError::Internal(e.to_string()))?;
    let ok = match mode {
        VerifyMode::Exact => report.is_solution(),
        VerifyMode::Tolerance => {
            report.residuals.iter().all(|res| &res.abs() <= eps)
                && report.violations.iter().all(|v| &v.amount <= eps)
        }
    };
    if !ok {
        return Err(LiftError::InvalidCertificate(format!(
            "projected point does not solve the system: {report:?}"
        )));
    }
    Ok(z)
}

/// Net flow of one record's own agents on one good:
/// `sum_i (x_ij - W_ij)` with `x_ij = beta_i * A_ij`.
fn record_imbalances(
    record: &GadgetRecord,
    compiled: &CompiledMarket,
    cert: &EquilibriumCertificate,
) -> Vec<(GoodId, Rational)> {
    use std::collections::BTreeMap;
    let mut net: BTreeMap<GoodId, Rational> = BTreeMap::new();
    for &i in &record.agents {
        let agent = &compiled.market.agents[i];
        for (&g, a) in &agent.leontief {
            let take = &cert.betas[i] * a;
            *net.entry(g).or_insert_with(Rational::zero) += &take;
        }
        for (&g, w) in &agent.endowment {
            *net.entry(g).or_insert_with(Rational::zero) -= w;
        }
    }
    net.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub label: String,
    pub relation: Option<usize>,
    /// Goods with non-zero net flow for this record's own agents.
    pub imbalances: Vec<(GoodId, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub ok: bool,
}

/// Checks the closed-submarket property at a verified certificate: for
/// every gadget record (including each nested device relation), the
/// record's own agents have zero net consumption of every good, even
/// goods shared with other gadgets.
pub fn audit_closed(
    compiled: &CompiledMarket,
    cert: &EquilibriumCertificate,
    mode: VerifyMode,
    eps: &Rational,
) -> Result<AuditReport, LiftError> {
    require_verified(compiled, cert, mode, eps)?;
    let mut entries = Vec::new();
    for record in compiled.trace.all_records() {
        let mut imbalances = record_imbalances(record, compiled, cert);
        if mode == VerifyMode::Tolerance {
            imbalances.retain(|(_, v)| &v.abs() > eps);
        }
        entries.push(AuditEntry {
            label: record.label.clone(),
            relation: record.relation,
            imbalances,
        });
    }
    let ok = entries.iter().all(|e| e.imbalances.is_empty());
    Ok(AuditReport { entries, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets::{compile, RecordKind};
    use crate::poly::parse_system;

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn exact() -> (VerifyMode, Rational) {
        (VerifyMode::Exact, Rational::zero())
    }

    #[test]
    fn lift_and_project_identity_system() {
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let z = vec![r("1"), r("1")];
        let cert = lift(&compiled, &z).unwrap();
        assert_eq!(cert.prices[compiled.trace.numeraire_good], r("1"));
        let (mode, eps) = exact();
        let back = project(&compiled, &cert, mode, &eps).unwrap();
        assert_eq!(back, z);

        // scaling the certificate does not change the projection
        let scaled = EquilibriumCertificate {
            prices: cert.prices.iter().map(|p| p * &r("7")).collect(),
            betas: cert.betas.clone(),
            numeraire: cert.numeraire,
        };
        let back2 = project(&compiled, &scaled, mode, &eps).unwrap();
        assert_eq!(back2, z);
    }

    #[test]
    fn lift_rejects_out_of_bounds_point() {
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let err = lift(&compiled, &[r("3"), r("3")]).unwrap_err();
        assert!(matches!(err, LiftError::NegativeValue { .. }), "{err:?}");
    }

    #[test]
    fn lift_rejects_non_solution() {
        let sys = parse_system(
            r#"{"vars":1,"bounds":[["0","2"]],
                "polys":[[{"c":"1","e":{"1":2}},{"c":"-1"}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        assert!(lift(&compiled, &[r("1")]).is_ok());
        let err = lift(&compiled, &[r("1/2")]).unwrap_err();
        assert!(matches!(err, LiftError::ResidualNonZero { .. }), "{err:?}");
    }

    #[test]
    fn qd_internal_prices_match_closed_forms() {
        // z1*z2 - z3 = 0 at z = (1, 2, 2): the product gadget sees
        // p_b = 1, p_c = 2, p_s = 1
        let sys = parse_system(
            r#"{"vars":3,"bounds":[["0","2"],["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1,"2":1}},{"c":"-1","e":{"3":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let cert = lift(&compiled, &[r("1"), r("2"), r("2")]).unwrap();
        let qd = compiled
            .trace
            .records
            .iter()
            .find(|rec| rec.kind == RecordKind::Qd)
            .unwrap();
        let named: Vec<Rational> = qd.goods[..7]
            .iter()
            .map(|&g| cert.prices[g].clone())
            .collect();
        let expect = ["2", "1", "3", "1", "2", "4", "2"].map(r);
        assert_eq!(named, expect);
    }

    #[test]
    fn qd_with_zero_factor_still_lifts() {
        // z1*z2 = 0 at (1, 0): the product value and one input are zero
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1,"2":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let cert = lift(&compiled, &[r("1"), r("0")]).unwrap();
        let (mode, eps) = exact();
        let audit = audit_closed(&compiled, &cert, mode, &eps).unwrap();
        assert!(audit.ok);
    }

    #[test]
    fn project_rejects_corrupted_certificate() {
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let mut cert = lift(&compiled, &[r("1"), r("1")]).unwrap();
        cert.betas[1] = &cert.betas[1] + &r("1/1000");
        let (mode, eps) = exact();
        let err = project(&compiled, &cert, mode, &eps).unwrap_err();
        assert!(matches!(err, LiftError::InvalidCertificate(_)), "{err:?}");
    }

    #[test]
    fn audit_balances_lifted_certificates() {
        let sys = parse_system(
            r#"{"vars":3,"bounds":[["0","2"],["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1,"2":1}},{"c":"-1","e":{"3":1}}]]}"#,
        )
        .unwrap();
        let compiled = compile(&sys).unwrap();
        let cert = lift(&compiled, &[r("1/2"), r("1/2"), r("1/4")]).unwrap();
        let (mode, eps) = exact();
        let audit = audit_closed(&compiled, &cert, mode, &eps).unwrap();
        assert!(audit.ok, "imbalanced: {:?}", audit
            .entries
            .iter()
            .filter(|e| !e.imbalances.is_empty())
            .collect::<Vec<_>>());
        // the numeraire record consumes exactly its endowment
        assert!(audit.entries[0].imbalances.is_empty());
    }

    #[test]
    fn qd_free_internals_are_forced_by_clearing() {
        // the combiner/splitter G4 prices are the QD gadget's only
        // internal degrees of freedom not pinned by nested gadgets; at any
        // relation-satisfying prices, clearing still forces them to their
        // closed-form values, and no choice rescues a violated relation
        use crate::gadgets::GadgetBuilder;
        use crate::market::{leontief_demand, Demand};

        let mut b = GadgetBuilder::with_goods(vec![
            "Ga".into(),
            "Gb".into(),
            "Gc".into(),
            "Gs".into(),
        ]);
        let record = b.build_qd(0, 1, 2, 3, &r("8"), "qd".into()).unwrap();
        let market = b.into_market();
        let f_co = record.goods[9];
        let f_sp = record.goods[11];
        let v_co = record.goods[10];
        let v_sp = record.goods[12];

        for (a, bb, c, satisfied) in [
            (r("2"), r("1"), r("2"), true),
            (r("3"), r("1"), r("2"), false),
        ] {
            let canonical_f = &a + &(r("2") * &c);
            // the nested gadgets pin only the pair sum H b + 2 H s
            let pair = &(r("8") * &bb) + &r("16");
            let mut accepted = Vec::new();
            for i in 0..=64 {
                for j in 0..=64 {
                    let base = [a.clone(), bb.clone(), c.clone(), r("1")];
                    let mut prices = vec![Rational::zero(); market.good_count()];
                    prices[..4].clone_from_slice(&base);
                    let mut all = Vec::new();
                    record.walk(&mut all);
                    for node in all {
                        for (good, formula) in &node.formulas {
                            prices[*good] = formula.eval(&prices);
                        }
                    }
                    // override the two free internals (and their partners,
                    // keeping the pinned pair-sums intact)
                    prices[f_co] = r(&format!("{i}/8"));
                    prices[f_sp] = r(&format!("{j}/8"));
                    prices[v_co] = &pair - &prices[f_co];
                    prices[v_sp] = &pair - &prices[f_sp];
                    let betas: Vec<Rational> = market
                        .agents
                        .iter()
                        .map(|agent| match leontief_demand(agent, &prices).unwrap() {
                            Demand::Bounded { beta, .. } => beta,
                            Demand::Unbounded => Rational::zero(),
                        })
                        .collect();
                    let cert = EquilibriumCertificate {
                        prices,
                        betas,
                        numeraire: None,
                    };
                    let report =
                        verify_equilibrium(&market, &cert, VerifyMode::Exact, &Rational::zero())
                            .unwrap();
                    if report.ok {
                        accepted.push((cert.prices[f_co].clone(), cert.prices[f_sp].clone()));
                    }
                }
            }
            if satisfied {
                assert_eq!(
                    accepted,
                    vec![(canonical_f.clone(), canonical_f.clone())],
                    "only the canonical internal prices may verify"
                );
            } else {
                assert!(accepted.is_empty(), "violated relation must never verify");
            }
        }
    }

    #[test]
    fn audit_flags_tampered_record_assignment() {
        // moving an agent between records keeps the market verified but
        // breaks per-record balance
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap();
        let mut compiled = compile(&sys).unwrap();
        let cert = lift(&compiled, &[r("1"), r("1")]).unwrap();
        let moved = compiled.trace.records[1].agents.pop().unwrap();
        compiled.trace.records[2].agents.push(moved);
        let (mode, eps) = exact();
        let audit = audit_closed(&compiled, &cert, mode, &eps).unwrap();
        assert!(!audit.ok);
        assert!(!audit.entries[1].imbalances.is_empty());
        assert!(!audit.entries[2].imbalances.is_empty());
    }
}
