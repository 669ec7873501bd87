//! Compiles a homogenized relation system into a Leontief exchange market
//! built from closed submarkets, one per relation, plus the numeraire
//! agent. Also houses lifting (solution -> equilibrium certificate),
//! projection (certificate -> solution) and the closed-submarket audit.
//!
//! Gadget shapes:
//! - EQ `p_a = p_b`: two agents trading through a fresh exclusive good.
//!   Each agent's utility and the two units of the exclusive good force
//!   both utility levels to 1, which forces the two sides equal.
//! - LIN `sum(left) = sum(right)` (all coefficients >= 0): the two-sided
//!   generalization of the same shape; agent 1 owns the left bundle and
//!   wants the right one, agent 2 symmetrically.
//! - QD `p_a = p_b * p_c / p_s`: a flow loop of two converters, a combiner
//!   and a splitter moving `p_c/p_s` units of value, with the internal
//!   prices pinned by nested EQ/LIN gadgets. The loop's books balance only
//!   when the product relation holds.
//!
//! Every internal good of a gadget has a closed-form price (affine in the
//! relation's input prices and H), recorded in the trace so certificates
//! can be constructed without solving anything.

mod lift;

pub use lift::{audit_closed, lift, project, AuditEntry, AuditReport, LiftError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Agent, AgentId, GoodId, MarketInstance};
use crate::poly::PolynomialSystem;
use crate::rational::Rational;
use crate::reduce::{self, LinTerm, Relation, RelationSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GadgetError {
    #[error("relation system must be homogenized before compilation")]
    NotHomogenized,
    #[error("H must be at least 1, got {0}")]
    BadH(Rational),
    #[error("LIN gadget requires a non-empty term list on each side")]
    EmptySide,
    #[error("{0}")]
    BadDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Numeraire,
    Eq,
    Lin,
    Qd,
}

/// Affine price formula over good prices: `sum(coef * p_good) + constant`.
/// Coefficients may be negative (e.g. `H*p_s - p_c`); at lift time the
/// results are provably non-negative whenever the source values respect
/// their bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceFormula {
    pub terms: Vec<(Rational, GoodId)>,
    pub constant: Rational,
}

impl PriceFormula {
    fn constant_one() -> Self {
        PriceFormula {
            terms: vec![],
            constant: Rational::one(),
        }
    }

    fn affine(terms: Vec<(Rational, GoodId)>) -> Self {
        PriceFormula {
            terms,
            constant: Rational::zero(),
        }
    }

    pub fn eval(&self, prices: &[Rational]) -> Rational {
        let mut acc = self.constant.clone();
        for (coef, good) in &self.terms {
            acc += &(coef * &prices[*good]);
        }
        acc
    }
}

/// Provenance record of one gadget: which agents and goods it created,
/// which goods are exclusive to it, the closed-form prices of its internal
/// goods, and the nested gadgets that pin its internal linear relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetRecord {
    /// Index into the relation system for top-level records, None for the
    /// numeraire record and for nested device relations.
    pub relation: Option<usize>,
    pub kind: RecordKind,
    pub label: String,
    /// Agents created directly by this gadget (children excluded).
    pub agents: Vec<AgentId>,
    /// Non-exclusive internal goods created by this gadget.
    pub goods: Vec<GoodId>,
    pub exclusive_goods: Vec<GoodId>,
    pub formulas: Vec<(GoodId, PriceFormula)>,
    pub children: Vec<GadgetRecord>,
}

impl GadgetRecord {
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a GadgetRecord>) {
        out.push(self);
        for child in &self.children {
            child.walk(out);
        }
    }
}

/// Full provenance of a compiled market. Embeds the source system and the
/// homogenized relation system so that lifting and projection are
/// self-contained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetTrace {
    pub system: PolynomialSystem,
    pub relations: RelationSystem,
    /// Goods `0..relations.n_vars` carry the relation variables.
    pub numeraire_good: GoodId,
    pub numeraire_agent: AgentId,
    pub records: Vec<GadgetRecord>,
}

impl GadgetTrace {
    pub fn all_records(&self) -> Vec<&GadgetRecord> {
        let mut out = Vec::new();
        for record in &self.records {
            record.walk(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledMarket {
    pub market: MarketInstance,
    pub trace: GadgetTrace,
}

/// Incremental market construction: goods and agents appended by the
/// gadget builders below. Useful on its own for building one gadget's
/// standalone market in tests and experiments.
pub struct GadgetBuilder {
    goods: Vec<String>,
    agents: Vec<Agent>,
}

impl GadgetBuilder {
    /// Starts from a set of already-existing goods (the relation-variable
    /// goods the gadgets will reference).
    pub fn with_goods(labels: Vec<String>) -> Self {
        GadgetBuilder {
            goods: labels,
            agents: Vec::new(),
        }
    }

    fn add_good(&mut self, label: String) -> GoodId {
        self.goods.push(label);
        self.goods.len() - 1
    }

    fn add_agent(&mut self, agent: Agent) -> AgentId {
        self.agents.push(agent);
        self.agents.len() - 1
    }

    pub fn into_market(self) -> MarketInstance {
        MarketInstance {
            goods: self.goods,
            agents: self.agents,
        }
    }

    /// EQ gadget enforcing `p_a = p_b`: two agents and one exclusive good.
    pub fn build_eq(&mut self, a: GoodId, b: GoodId, label: String) -> GadgetRecord {
        let r = self.add_good(format!("{label}/r"));
        let one = Rational::one();
        let a1 = self.add_agent(Agent::new(
            vec![(b, one.clone()), (r, one.clone())],
            vec![(a, one.clone()), (r, one.clone())],
        ));
        let a2 = self.add_agent(Agent::new(
            vec![(a, one.clone()), (r, one.clone())],
            vec![(b, one.clone()), (r, one)],
        ));
        GadgetRecord {
            relation: None,
            kind: RecordKind::Eq,
            label,
            agents: vec![a1, a2],
            goods: vec![],
            exclusive_goods: vec![r],
            formulas: vec![(r, PriceFormula::constant_one())],
            children: vec![],
        }
    }

    /// Two-sided LIN gadget enforcing `sum(left) = sum(right)`: agent 1
    /// owns the left bundle and wants the right bundle, agent 2
    /// symmetrically; both also trade one unit of a fresh exclusive good.
    /// Zero-coefficient terms are omitted from agent data.
    pub fn build_lin(
        &mut self,
        left: &[(Rational, GoodId)],
        right: &[(Rational, GoodId)],
        label: String,
    ) -> Result<GadgetRecord, GadgetError> {
        if left.is_empty() || right.is_empty() {
            return Err(GadgetError::EmptySide);
        }
        let r = self.add_good(format!("{label}/r"));
        let one = Rational::one();
        let with_r = |terms: &[(Rational, GoodId)]| -> Vec<(GoodId, Rational)> {
            let mut out: Vec<(GoodId, Rational)> =
                terms.iter().map(|(coef, g)| (*g, coef.clone())).collect();
            out.push((r, one.clone()));
            out
        };
        let a1 = self.add_agent(Agent::new(with_r(left), with_r(right)));
        let a2 = self.add_agent(Agent::new(with_r(right), with_r(left)));
        Ok(GadgetRecord {
            relation: None,
            kind: RecordKind::Lin,
            label,
            agents: vec![a1, a2],
            goods: vec![],
            exclusive_goods: vec![r],
            formulas: vec![(r, PriceFormula::constant_one())],
            children: vec![],
        })
    }
}

fn r_int(n: i64) -> Rational {
    Rational::from_int(n)
}

impl GadgetBuilder {
    /// QD gadget enforcing `p_a = p_b * p_c / p_s`.
    ///
    /// Part 1 wires a value loop of `p_c/p_s` units through seven named
    /// goods: agent A1 sells one unit of G1 (priced p_c) into converter 1,
    /// which re-emits the value as G2 (priced p_s); the combiner merges G2
    /// with the second converter's G7 into G3; the splitter splits G3 back
    /// into G4 (consumed by A1) and G5 (consumed by A2, who finances it by
    /// selling G6 into converter 2). Every internal price is pinned by a
    /// nested EQ/LIN gadget, and clearing of G7 forces
    /// `p_6 = (p_b+p_s) p_c / p_s`, hence `p_a = p_6 - p_c = p_b p_c / p_s`.
    pub fn build_qd(
        &mut self,
        a: GoodId,
        bb: GoodId,
        c: GoodId,
        s: GoodId,
        h: &Rational,
        label: String,
    ) -> Result<GadgetRecord, GadgetError> {
        if h < &Rational::one() {
            return Err(GadgetError::BadH(h.clone()));
        }
        let one = Rational::one();

        let g: Vec<GoodId> = (1..=7)
            .map(|i| self.add_good(format!("{label}/G{i}")))
            .collect();
        let (g1, g2, g3, g4, g5, g6, g7) = (g[0], g[1], g[2], g[3], g[4], g[5], g[6]);
        let t1 = self.add_good(format!("{label}/conv1/G3"));
        let t2 = self.add_good(format!("{label}/conv2/G3"));
        let f_co = self.add_good(format!("{label}/comb/G4"));
        let v_co = self.add_good(format!("{label}/comb/G5"));
        let f_sp = self.add_good(format!("{label}/spl/G4"));
        let v_sp = self.add_good(format!("{label}/spl/G5"));

        let mut agents = Vec::new();
        // own agents: A1 sells G1, buys G4; A2 sells G6, buys G5
        agents.push(self.add_agent(Agent::new(
            vec![(g1, one.clone())],
            vec![(g4, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(g6, one.clone())],
            vec![(g5, one.clone())],
        )));
        // converter 1, Conv(p_s): input G1, output G2, internal T1
        agents.push(self.add_agent(Agent::new(
            vec![(g2, h.clone())],
            vec![(g1, one.clone()), (t1, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(t1, one.clone())],
            vec![(g2, one.clone())],
        )));
        // converter 2, Conv(p_b + p_s): input G6, output G7, internal T2
        agents.push(self.add_agent(Agent::new(
            vec![(g7, h.clone())],
            vec![(g6, one.clone()), (t2, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(t2, one.clone())],
            vec![(g7, one.clone())],
        )));
        // combiner: inputs G2 and G7, output G3, internals F/V
        agents.push(self.add_agent(Agent::new(
            vec![(f_co, one.clone())],
            vec![(g2, one.clone()), (g7, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(g3, h.clone())],
            vec![(f_co, one.clone()), (v_co, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(v_co, one.clone())],
            vec![(g3, one.clone())],
        )));
        // splitter: input G3, outputs G5 (p_b+p_s side) and G4 (p_s side)
        agents.push(self.add_agent(Agent::new(
            vec![(f_sp, one.clone())],
            vec![(g3, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(g5, h.clone()), (g4, h.clone())],
            vec![(f_sp, one.clone()), (v_sp, one.clone())],
        )));
        agents.push(self.add_agent(Agent::new(
            vec![(v_sp, one.clone())],
            vec![(g5, one.clone()), (g4, one.clone())],
        )));

    // internal prices in closed form (affine in p_a, p_b, p_c, p_s and H)
    let two = r_int(2);
    let h2 = h * &two;
    let formulas = vec![
        (g1, PriceFormula::affine(vec![(one.clone(), c)])),
        (g2, PriceFormula::affine(vec![(one.clone(), s)])),
        (
            g3,
            PriceFormula::affine(vec![(one.clone(), bb), (two.clone(), s)]),
        ),
        (g4, PriceFormula::affine(vec![(one.clone(), s)])),
        (
            g5,
            PriceFormula::affine(vec![(one.clone(), bb), (one.clone(), s)]),
        ),
        (
            g6,
            PriceFormula::affine(vec![(one.clone(), a), (one.clone(), c)]),
        ),
        (
            g7,
            PriceFormula::affine(vec![(one.clone(), bb), (one.clone(), s)]),
        ),
        // T1 = H p_s - p_c
        (
            t1,
            PriceFormula::affine(vec![(h.clone(), s), (-&one, c)]),
        ),
        // T2 = H p_b + H p_s - p_a - p_c
        (
            t2,
            PriceFormula::affine(vec![
                (h.clone(), bb),
                (h.clone(), s),
                (-&one, a),
                (-&one, c),
            ]),
        ),
        // combiner/splitter G4 = p_a + 2 p_c, G5 = H p_b + 2H p_s - G4
        (
            f_co,
            PriceFormula::affine(vec![(one.clone(), a), (two.clone(), c)]),
        ),
        (
            v_co,
            PriceFormula::affine(vec![
                (h.clone(), bb),
                (h2.clone(), s),
                (-&one, a),
                (-&two, c),
            ]),
        ),
        (
            f_sp,
            PriceFormula::affine(vec![(one.clone(), a), (two.clone(), c)]),
        ),
        (
            v_sp,
            PriceFormula::affine(vec![
                (h.clone(), bb),
                (h2.clone(), s),
                (-&one, a),
                (-&two, c),
            ]),
        ),
    ];

    // Part 2: nested closed submarkets pinning the linear price relations.
    // Single-variable equalities become EQ gadgets, sums become LIN.
    let unit = |good: GoodId| vec![(one.clone(), good)];
    let b_plus_s = vec![(one.clone(), bb), (one.clone(), s)];
    let hb_plus_2hs = vec![(h.clone(), bb), (h2.clone(), s)];
    enum Part2 {
        Eq(GoodId, GoodId),
        Lin(Vec<(Rational, GoodId)>, Vec<(Rational, GoodId)>),
    }
    let part2 = vec![
        Part2::Eq(g1, c),
        Part2::Eq(g2, s),
        Part2::Eq(g4, s),
        Part2::Lin(unit(g5), b_plus_s.clone()),
        Part2::Lin(unit(g7), b_plus_s.clone()),
        Part2::Lin(
            vec![(one.clone(), a), (one.clone(), c)],
            unit(g6),
        ),
        // converter 1: output price = q and T + input = H q
        Part2::Eq(g2, s),
        Part2::Lin(
            vec![(one.clone(), t1), (one.clone(), g1)],
            vec![(h.clone(), s)],
        ),
        // converter 2
        Part2::Lin(unit(g7), b_plus_s.clone()),
        Part2::Lin(
            vec![(one.clone(), t2), (one.clone(), g6)],
            vec![(h.clone(), bb), (h.clone(), s)],
        ),
        // combiner: G3 = p_b + 2 p_s and G5 + G4 = H p_b + 2H p_s
        Part2::Lin(
            unit(g3),
            vec![(one.clone(), bb), (two.clone(), s)],
        ),
        Part2::Lin(
            vec![(one.clone(), v_co), (one.clone(), f_co)],
            hb_plus_2hs.clone(),
        ),
        // splitter: outputs pinned plus its internal pair
        Part2::Lin(unit(g5), b_plus_s),
        Part2::Eq(g4, s),
        Part2::Lin(
            vec![(one.clone(), v_sp), (one.clone(), f_sp)],
            hb_plus_2hs,
        ),
    ];
    let mut children = Vec::new();
    for (idx, p2) in part2.into_iter().enumerate() {
        let child_label = format!("{label}/part2/{}", idx + 1);
        children.push(match p2 {
            Part2::Eq(x, y) => self.build_eq(x, y, child_label),
            Part2::Lin(left, right) => self.build_lin(&left, &right, child_label)?,
        });
    }

        Ok(GadgetRecord {
            relation: None,
            kind: RecordKind::Qd,
            label,
            agents,
            goods: vec![g1, g2, g3, g4, g5, g6, g7, t1, t2, f_co, v_co, f_sp, v_sp],
            exclusive_goods: vec![],
            formulas,
            children,
        })
    }
}

fn lin_sides(rel: &Relation) -> (&[LinTerm], &[LinTerm]) {
    match rel {
        Relation::Lin { left, right, .. } => (left, right),
        _ => unreachable!("caller matched LIN"),
    }
}

/// Compiles a homogenized relation system into a market: goods `G1..GN`
/// for the relation variables, the numeraire good `Gs` with its captive
/// agent, and one closed submarket per relation. The source polynomial
/// system is embedded in the trace so lifting and projection need no other
/// inputs.
pub fn compile_with(
    system: &PolynomialSystem,
    relations: &RelationSystem,
) -> Result<CompiledMarket, GadgetError> {
    let Some(s_var) = relations.numeraire else {
        return Err(GadgetError::NotHomogenized);
    };
    if relations.h < Rational::one() {
        return Err(GadgetError::BadH(relations.h.clone()));
    }
    let mut b = GadgetBuilder::with_goods(Vec::new());
    for v in 0..relations.n_vars {
        b.add_good(format!("G{}", v + 1));
    }
    let s_good = b.add_good("Gs".to_string());
    debug_assert_eq!(s_good, s_var);

    // the numeraire agent: owns one unit of Gs and wants only Gs
    let one = Rational::one();
    let numeraire_agent = b.add_agent(Agent::new(
        vec![(s_good, one.clone())],
        vec![(s_good, one)],
    ));
    let mut records = vec![GadgetRecord {
        relation: None,
        kind: RecordKind::Numeraire,
        label: "numeraire".to_string(),
        agents: vec![numeraire_agent],
        goods: vec![s_good],
        exclusive_goods: vec![],
        formulas: vec![],
        children: vec![],
    }];

    for (k, rel) in relations.relations.iter().enumerate() {
        let label = format!("rel{}", k + 1);
        let mut record = match rel {
            Relation::Eq { a, b: bb } => b.build_eq(*a, *bb, label),
            Relation::Lin { .. } => {
                let (left, right) = lin_sides(rel);
                b.build_lin(left, right, label)?
            }
            Relation::Qd { a, b: bb, c } => {
                b.build_qd(*a, *bb, *c, s_good, &relations.h, label)?
            }
        };
        record.relation = Some(k);
        records.push(record);
    }

    let market = b.into_market();
    debug_assert!(market.validate().is_ok());
    Ok(CompiledMarket {
        market,
        trace: GadgetTrace {
            system: system.clone(),
            relations: relations.clone(),
            numeraire_good: s_good,
            numeraire_agent,
            records,
        },
    })
}

/// Full pipeline: decompose, homogenize, compile.
pub fn compile(system: &PolynomialSystem) -> Result<CompiledMarket, GadgetError> {
    let relations = reduce::reduce_system(system);
    compile_with(system, &relations)
}

/// Checks that every exclusive good is touched only by the endowments and
/// utilities of its own record's agents. Returns human-readable problems;
/// empty means the exclusivity invariant holds.
pub fn check_exclusivity(compiled: &CompiledMarket) -> Vec<String> {
    let mut problems = Vec::new();
    for record in compiled.trace.all_records() {
        for &good in &record.exclusive_goods {
            for (i, agent) in compiled.market.agents.iter().enumerate() {
                let touches =
                    agent.endowment.contains_key(&good) || agent.leontief.contains_key(&good);
                if touches && !record.agents.contains(&i) {
                    problems.push(format!(
                        "good {} ({}) is exclusive to {} but touched by agent {}",
                        good, compiled.market.goods[good], record.label, i
                    ));
                }
            }
        }
    }
    problems
}

// ---------------------------------------------------------------------------
// JSON interchange for the trace
// ---------------------------------------------------------------------------

pub const TRACE_SCHEMA: &str = "trace/v1";

#[derive(Serialize, Deserialize)]
struct FormulaDoc {
    good: usize,
    terms: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    relation: Option<usize>,
    kind: RecordKind,
    label: String,
    agents: Vec<usize>,
    goods: Vec<usize>,
    exclusive: Vec<usize>,
    formulas: Vec<FormulaDoc>,
    children: Vec<RecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct TraceDoc {
    #[serde(default)]
    schema: Option<String>,
    system: serde_json::Value,
    relations: serde_json::Value,
    numeraire_good: usize,
    numeraire_agent: usize,
    records: Vec<RecordDoc>,
}

fn record_to_doc(record: &GadgetRecord) -> RecordDoc {
    RecordDoc {
        relation: record.relation.map(|k| k + 1),
        kind: record.kind,
        label: record.label.clone(),
        agents: record.agents.iter().map(|a| a + 1).collect(),
        goods: record.goods.iter().map(|g| g + 1).collect(),
        exclusive: record.exclusive_goods.iter().map(|g| g + 1).collect(),
        formulas: record
            .formulas
            .iter()
            .map(|(good, f)| FormulaDoc {
                good: good + 1,
                terms: f
                    .terms
                    .iter()
                    .map(|(coef, g)| (coef.to_string(), g + 1))
                    .collect(),
                constant: (!f.constant.is_zero()).then(|| f.constant.to_string()),
            })
            .collect(),
        children: record.children.iter().map(record_to_doc).collect(),
    }
}

fn record_from_doc(doc: &RecordDoc) -> Result<GadgetRecord, GadgetError> {
    let bad = |m: String| GadgetError::BadDocument(m);
    let conv = |id: usize, what: &str| -> Result<usize, GadgetError> {
        id.checked_sub(1)
            .ok_or_else(|| bad(format!("{what} ids are 1-based")))
    };
    let mut formulas = Vec::with_capacity(doc.formulas.len());
    for f in &doc.formulas {
        let mut terms = Vec::with_capacity(f.terms.len());
        for (coef, g) in &f.terms {
            terms.push((
                Rational::parse(coef).map_err(|e| bad(e.to_string()))?,
                conv(*g, "good")?,
            ));
        }
        let constant = match &f.constant {
            Some(s) => Rational::parse(s).map_err(|e| bad(e.to_string()))?,
            None => Rational::zero(),
        };
        formulas.push((conv(f.good, "good")?, PriceFormula { terms, constant }));
    }
    let mut children = Vec::with_capacity(doc.children.len());
    for child in &doc.children {
        children.push(record_from_doc(child)?);
    }
    Ok(GadgetRecord {
        relation: match doc.relation {
            Some(k) => Some(conv(k, "relation")?),
            None => None,
        },
        kind: doc.kind,
        label: doc.label.clone(),
        agents: doc
            .agents
            .iter()
            .map(|&a| conv(a, "agent"))
            .collect::<Result<_, _>>()?,
        goods: doc
            .goods
            .iter()
            .map(|&g| conv(g, "good"))
            .collect::<Result<_, _>>()?,
        exclusive_goods: doc
            .exclusive
            .iter()
            .map(|&g| conv(g, "good"))
            .collect::<Result<_, _>>()?,
        formulas,
        children,
    })
}

pub fn trace_to_json(trace: &GadgetTrace) -> serde_json::Value {
    let doc = TraceDoc {
        schema: Some(TRACE_SCHEMA.to_string()),
        system: trace.system.to_json(),
        relations: reduce::relation_system_to_json(&trace.relations),
        numeraire_good: trace.numeraire_good + 1,
        numeraire_agent: trace.numeraire_agent + 1,
        records: trace.records.iter().map(record_to_doc).collect(),
    };
    serde_json::to_value(doc).expect("trace serialization")
}

pub fn trace_from_json(value: &serde_json::Value) -> Result<GadgetTrace, GadgetError> {
    let doc: TraceDoc = serde_json::from_value(value.clone())
        .map_err(|e| GadgetError::BadDocument(e.to_string()))?;
    let system = crate::poly::parse_system(
        &serde_json::to_string(&doc.system).expect("embedded system"),
    )
    .map_err(|e| GadgetError::BadDocument(format!("embedded system: {e}")))?;
    let relations = reduce::relation_system_from_json(&doc.relations)
        .map_err(|e| GadgetError::BadDocument(format!("embedded relations: {e}")))?;
    let mut records = Vec::with_capacity(doc.records.len());
    for record in &doc.records {
        records.push(record_from_doc(record)?);
    }
    Ok(GadgetTrace {
        system,
        relations,
        numeraire_good: doc
            .numeraire_good
            .checked_sub(1)
            .ok_or_else(|| GadgetError::BadDocument("numeraire_good is 1-based".into()))?,
        numeraire_agent: doc
            .numeraire_agent
            .checked_sub(1)
            .ok_or_else(|| GadgetError::BadDocument("numeraire_agent is 1-based".into()))?,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{verify_equilibrium, EquilibriumCertificate, VerifyMode};
    use crate::poly::parse_system;

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn difference_system() -> PolynomialSystem {
        parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap()
    }

    fn product_system() -> PolynomialSystem {
        // z1 * z2 - z3 = 0 on [0,2]^3
        parse_system(
            r#"{"vars":3,"bounds":[["0","2"],["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1,"2":1}},{"c":"-1","e":{"3":1}}]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn compile_difference_counts() {
        let compiled = compile(&difference_system()).unwrap();
        // agents: numeraire + 2 (EQ) + 2 per bound LIN (4 bounds)
        assert_eq!(compiled.market.agents.len(), 1 + 2 + 8);
        // goods: 6 relation vars + Gs + 5 exclusive goods
        assert_eq!(compiled.market.good_count(), 6 + 1 + 5);
        assert_eq!(compiled.trace.records.len(), 1 + 5);
        assert!(check_exclusivity(&compiled).is_empty());
    }

    #[test]
    fn compile_qd_roster() {
        let compiled = compile(&product_system()).unwrap();
        let qd = compiled
            .trace
            .records
            .iter()
            .find(|record| record.kind == RecordKind::Qd)
            .expect("one QD record");
        assert_eq!(qd.agents.len(), 12);
        // 7 named + 6 device-internal goods
        assert_eq!(qd.goods.len(), 13);
        // 15 nested part-2 gadgets, each with 2 agents and 1 exclusive good
        assert_eq!(qd.children.len(), 15);
        for child in &qd.children {
            assert_eq!(child.agents.len(), 2);
            assert_eq!(child.exclusive_goods.len(), 1);
        }
        assert!(check_exclusivity(&compiled).is_empty());
    }

    #[test]
    fn compile_requires_homogenized_input() {
        let sys = difference_system();
        let raw = reduce::decompose(&sys);
        assert_eq!(
            compile_with(&sys, &raw).unwrap_err(),
            GadgetError::NotHomogenized
        );
    }

    #[test]
    fn eq_gadget_admits_equal_prices() {
        let mut b = GadgetBuilder::with_goods(vec!["Ga".into(), "Gb".into()]);
        let record = b.build_eq(0, 1, "eq".into());
        let market = b.into_market();
        let cert = EquilibriumCertificate {
            prices: vec![r("1"), r("1"), r("1")],
            betas: vec![r("1"), r("1")],
            numeraire: None,
        };
        let report =
            verify_equilibrium(&market, &cert, VerifyMode::Exact, &Rational::zero()).unwrap();
        assert!(report.ok, "{:?}", report.violations);
        assert_eq!(record.exclusive_goods.len(), 1);
    }

    #[test]
    fn eq_gadget_rejects_unequal_prices_for_any_completion() {
        let mut b = GadgetBuilder::with_goods(vec!["Ga".into(), "Gb".into()]);
        b.build_eq(0, 1, "eq".into());
        let market = b.into_market();
        // p_a=2, p_b=3: sweep the exclusive-good price; the demand betas are
        // forced, so no beta choice can ever pass
        for k in 0..=64 {
            let pr = r(&format!("{k}/16"));
            let prices = vec![r("2"), r("3"), pr];
            if prices[2].is_zero() {
                // demand for the exclusive good is unbounded at price zero
                continue;
            }
            let beta1 = (&prices[1] + &prices[2]) / (&prices[0] + &prices[2]);
            let beta2 = (&prices[0] + &prices[2]) / (&prices[1] + &prices[2]);
            let cert = EquilibriumCertificate {
                prices,
                betas: vec![beta1, beta2],
                numeraire: None,
            };
            let report =
                verify_equilibrium(&market, &cert, VerifyMode::Exact, &Rational::zero()).unwrap();
            assert!(!report.ok, "unequal prices accepted at pr={k}/16");
        }
    }

    #[test]
    fn lin_gadget_table_instance() {
        // p_a = 2 p_b + 3 p_s over goods (a, b, s)
        let mut b = GadgetBuilder::with_goods(vec!["Ga".into(), "Gb".into(), "Gs".into()]);
        b.build_lin(&[(r("1"), 0)], &[(r("2"), 1), (r("3"), 2)], "lin".into())
            .unwrap();
        let market = b.into_market();
        let cert = EquilibriumCertificate {
            prices: vec![r("5"), r("1"), r("1"), r("1")],
            betas: vec![r("1"), r("1")],
            numeraire: None,
        };
        let report =
            verify_equilibrium(&market, &cert, VerifyMode::Exact, &Rational::zero()).unwrap();
        assert!(report.ok, "{:?}", report.violations);

        // violated relation: p_a = 4
        let bad = EquilibriumCertificate {
            prices: vec![r("4"), r("1"), r("1"), r("1")],
            betas: vec![r("1"), r("1")],
            numeraire: None,
        };
        let report =
            verify_equilibrium(&market, &bad, VerifyMode::Exact, &Rational::zero()).unwrap();
        assert!(!report.ok);
    }

    #[test]
    fn lin_gadget_rejects_empty_side() {
        let mut b = GadgetBuilder::with_goods(vec!["Ga".into()]);
        assert_eq!(
            b.build_lin(&[(r("1"), 0)], &[], "lin".into()).unwrap_err(),
            GadgetError::EmptySide
        );
    }

    #[test]
    fn trace_json_round_trip() {
        let compiled = compile(&product_system()).unwrap();
        let back = trace_from_json(&trace_to_json(&compiled.trace)).unwrap();
        assert_eq!(compiled.trace, back);
    }

    #[test]
    fn compile_is_deterministic() {
        let a = compile(&product_system()).unwrap();
        let b = compile(&product_system()).unwrap();
        assert_eq!(a.market, b.market);
        assert_eq!(a.trace, b.trace);
    }
}
