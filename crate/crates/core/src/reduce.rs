//! Reformulation of a polynomial system into basic relations over
//! non-negative variables, and the scale-invariant form used by the market
//! compiler.
//!
//! `decompose` rewrites every `f_i = 0` using only three relation kinds:
//! equality, non-negative linear combination, and binary product. Bounds
//! become slack equalities `z_j = s^l_j + L_j` and `z_j + s^u_j = U_j`.
//! `homogenize` then folds additive constants into terms on a fresh
//! numeraire variable and reinterprets products as `p_a = p_b*p_c/p_s`, so
//! every relation is invariant under uniform scaling of the assignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{PolynomialSystem, SizeReport, VarId};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReduceError {
    #[error("system is already homogenized")]
    DoubleHomogenization,
    #[error("assignment has {found} values, expected {expected}")]
    AssignmentLength { expected: usize, found: usize },
    #[error("forward evaluation stuck: variable {var} has no defining relation")]
    ExtensionStuck { var: VarId },
    #[error("{0}")]
    BadDocument(String),
}

/// One term of a linear side: non-negative coefficient times a variable.
pub type LinTerm = (Rational, VarId);

/// A basic relation. `Lin` is the generalized two-sided form
/// `sum(left) + left_const = sum(right) + right_const`; after
/// homogenization the constants are zero (folded into numeraire terms).
/// `Qd` means `z_a = z_b * z_c` before homogenization and
/// `p_a = p_b * p_c / p_s` after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    Eq {
        a: VarId,
        b: VarId,
    },
    Lin {
        left: Vec<LinTerm>,
        left_const: Rational,
        right: Vec<LinTerm>,
        right_const: Rational,
    },
    Qd {
        a: VarId,
        b: VarId,
        c: VarId,
    },
}

impl Relation {
    /// Defining LIN for a fresh variable: `var = terms + constant`.
    fn defining_lin(var: VarId, terms: Vec<LinTerm>, constant: Rational) -> Self {
        Relation::Lin {
            left: vec![(Rational::one(), var)],
            left_const: Rational::zero(),
            right: terms,
            right_const: constant,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Relation::Eq { .. } => "EQ",
            Relation::Lin { .. } => "LIN",
            Relation::Qd { .. } => "QD",
        }
    }
}

/// Ordered list of relations over variables `0..n_vars`, with the original
/// system variables first, then auxiliaries, then the bound slacks
/// `s^l_j, s^u_j`. The numeraire variable (index `n_vars`, not counted in
/// `n_vars`) exists iff the system has been homogenized. `h` is the a
/// priori bound on any non-negative solution with numeraire 1; it is
/// computed from the source system at decomposition time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSystem {
    pub n_vars: usize,
    pub original_n: usize,
    pub relations: Vec<Relation>,
    pub numeraire: Option<VarId>,
    pub h: Rational,
}

impl RelationSystem {
    pub fn is_homogenized(&self) -> bool {
        self.numeraire.is_some()
    }

    /// Total assignment length expected by `eval_relations` and produced by
    /// `extend_assignment`.
    pub fn assignment_len(&self) -> usize {
        self.n_vars + usize::from(self.numeraire.is_some())
    }
}

/// `H = M_max * U_max^d + 1` where `d` is the maximum degree, `M_max` the
/// maximum monomial count over the polynomials, and `U_max` the maximum of
/// the upper bounds and coefficient magnitudes.
pub fn compute_h(sys: &PolynomialSystem) -> Rational {
    let size = sys.system_size();
    let m_max = Rational::from_int(size.monomial_count_max as i64);
    m_max * size.u_max.pow(size.max_degree) + Rational::one()
}

fn as_simple_difference(p: &crate::poly::Polynomial) -> Option<(VarId, VarId)> {
    let ms = p.monomials();
    if ms.len() != 2 || ms.iter().any(|m| m.degree() != 1) {
        return None;
    }
    let one = Rational::one();
    let var_of = |i: usize| *ms[i].exponents.keys().next().unwrap();
    if ms[0].coefficient == one && ms[1].coefficient == -&one {
        Some((var_of(0), var_of(1)))
    } else if ms[1].coefficient == one && ms[0].coefficient == -&one {
        Some((var_of(1), var_of(0)))
    } else {
        None
    }
}

/// Rewrites `F` as `R(F)`: per-monomial left-to-right product chains for
/// degree >= 2 monomials, one collecting LIN per sign side (negative
/// monomials moved to the right-hand side), an EQ joining the sides, and
/// two slack relations per bound. A polynomial that is literally
/// `z_a - z_b` folds to a single EQ. Auxiliary ids are allocated in
/// traversal order, so identical inputs produce identical systems.
pub fn decompose(sys: &PolynomialSystem) -> RelationSystem {
    let n = sys.n_vars;
    let mut relations = Vec::new();
    let mut next_var = n;
    let mut alloc = || {
        let v = next_var;
        next_var += 1;
        v
    };

    for p in &sys.polynomials {
        if let Some((a, b)) = as_simple_difference(p) {
            relations.push(Relation::Eq { a, b });
            continue;
        }
        let mut pos_terms: Vec<LinTerm> = Vec::new();
        let mut pos_const = Rational::zero();
        let mut neg_terms: Vec<LinTerm> = Vec::new();
        let mut neg_const = Rational::zero();
        for mono in p.monomials() {
            let magnitude = mono.coefficient.abs();
            let (terms, constant) = if mono.coefficient.is_negative() {
                (&mut neg_terms, &mut neg_const)
            } else {
                (&mut pos_terms, &mut pos_const)
            };
            match mono.degree() {
                0 => *constant += &magnitude,
                1 => {
                    let var = *mono.exponents.keys().next().unwrap();
                    terms.push((magnitude, var));
                }
                _ => {
                    // product chain over ascending variable ids, exponents
                    // expanded: z1^2*z2 becomes t1 = z1*z1, t2 = t1*z2
                    let mut factors = Vec::new();
                    for (&v, &e) in &mono.exponents {
                        factors.extend(std::iter::repeat(v).take(e as usize));
                    }
                    let mut acc = factors[0];
                    for &f in &factors[1..] {
                        let t = alloc();
                        relations.push(Relation::Qd { a: t, b: acc, c: f });
                        acc = t;
                    }
                    terms.push((magnitude, acc));
                }
            }
        }
        let e = alloc();
        relations.push(Relation::defining_lin(e, pos_terms, pos_const));
        let f = alloc();
        relations.push(Relation::defining_lin(f, neg_terms, neg_const));
        relations.push(Relation::Eq { a: e, b: f });
    }

    for (j, (lo, hi)) in sys.bounds.iter().enumerate() {
        let sl = alloc();
        let su = alloc();
        // z_j = s^l_j + L_j
        relations.push(Relation::Lin {
            left: vec![(Rational::one(), j)],
            left_const: Rational::zero(),
            right: vec![(Rational::one(), sl)],
            right_const: lo.clone(),
        });
        // z_j + s^u_j = U_j
        relations.push(Relation::Lin {
            left: vec![(Rational::one(), j), (Rational::one(), su)],
            left_const: Rational::zero(),
            right: vec![],
            right_const: hi.clone(),
        });
    }

    RelationSystem {
        n_vars: next_var,
        original_n: n,
        relations,
        numeraire: None,
        h: compute_h(sys),
    }
}

/// Folds every additive constant `D` into a `D * p_s` term on a fresh
/// numeraire variable and assigns the numeraire id. A LIN side that would
/// otherwise be empty keeps a `0 * p_s` term so both sides stay non-empty.
pub fn homogenize(rs: &RelationSystem) -> Result<RelationSystem, ReduceError> {
    if rs.is_homogenized() {
        return Err(ReduceError::DoubleHomogenization);
    }
    let s = rs.n_vars;
    let fold = |terms: &[LinTerm], constant: &Rational| -> Vec<LinTerm> {
        let mut out = terms.to_vec();
        if !constant.is_zero() || out.is_empty() {
            out.push((constant.clone(), s));
        }
        out
    };
    let relations = rs
        .relations
        .iter()
        .map(|rel| match rel {
            Relation::Eq { a, b } => Relation::Eq { a: *a, b: *b },
            Relation::Qd { a, b, c } => Relation::Qd {
                a: *a,
                b: *b,
                c: *c,
            },
            Relation::Lin {
                left,
                left_const,
                right,
                right_const,
            } => Relation::Lin {
                left: fold(left, left_const),
                left_const: Rational::zero(),
                right: fold(right, right_const),
                right_const: Rational::zero(),
            },
        })
        .collect();
    Ok(RelationSystem {
        n_vars: rs.n_vars,
        original_n: rs.original_n,
        relations,
        numeraire: Some(s),
        h: rs.h.clone(),
    })
}

/// Decompose and homogenize in one step.
pub fn reduce_system(sys: &PolynomialSystem) -> RelationSystem {
    homogenize(&decompose(sys)).expect("fresh decomposition is not homogenized")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationResiduals {
    pub residuals: Vec<Rational>,
    /// Variables with negative assigned values (a violation, not an error).
    pub negative_vars: Vec<VarId>,
}

impl RelationResiduals {
    pub fn satisfied(&self) -> bool {
        self.negative_vars.is_empty() && self.residuals.iter().all(Rational::is_zero)
    }
}

fn side_value(terms: &[LinTerm], constant: &Rational, p: &[Rational]) -> Rational {
    let mut acc = constant.clone();
    for (coef, var) in terms {
        acc += &(coef * &p[*var]);
    }
    acc
}

/// Per-relation residuals at assignment `p` (length `assignment_len`):
/// EQ gives `p_a - p_b`, LIN gives `left - right`, QD gives
/// `p_a * p_s - p_b * p_c` (denominator cleared) when homogenized and
/// `z_a - z_b * z_c` otherwise.
pub fn eval_relations(
    rs: &RelationSystem,
    p: &[Rational],
) -> Result<RelationResiduals, ReduceError> {
    let expected = rs.assignment_len();
    if p.len() != expected {
        return Err(ReduceError::AssignmentLength {
            expected,
            found: p.len(),
        });
    }
    let residuals = rs
        .relations
        .iter()
        .map(|rel| match rel {
            Relation::Eq { a, b } => &p[*a] - &p[*b],
            Relation::Lin {
                left,
                left_const,
                right,
                right_const,
            } => side_value(left, left_const, p) - side_value(right, right_const, p),
            Relation::Qd { a, b, c } => match rs.numeraire {
                Some(s) => &p[*a] * &p[s] - &p[*b] * &p[*c],
                None => &p[*a] - &p[*b] * &p[*c],
            },
        })
        .collect();
    let negative_vars = (0..expected).filter(|&v| p[v].is_negative()).collect();
    Ok(RelationResiduals {
        residuals,
        negative_vars,
    })
}

/// Extends an assignment of the original variables to all relation
/// variables by forward-evaluating defining relations (numeraire fixed to 1
/// when present). Values are not checked for sign or residuals here; run
/// `eval_relations` on the result.
pub fn extend_assignment(
    rs: &RelationSystem,
    z: &[Rational],
) -> Result<Vec<Rational>, ReduceError> {
    if z.len() != rs.original_n {
        return Err(ReduceError::AssignmentLength {
            expected: rs.original_n,
            found: z.len(),
        });
    }
    let len = rs.assignment_len();
    let mut values: Vec<Option<Rational>> = vec![None; len];
    for (j, v) in z.iter().enumerate() {
        values[j] = Some(v.clone());
    }
    if let Some(s) = rs.numeraire {
        values[s] = Some(Rational::one());
    }

    let mut progress = true;
    while progress {
        progress = false;
        for rel in &rs.relations {
            match rel {
                Relation::Eq { a, b } => {
                    if values[*a].is_some() && values[*b].is_none() {
                        values[*b] = values[*a].clone();
                        progress = true;
                    } else if values[*b].is_some() && values[*a].is_none() {
                        values[*a] = values[*b].clone();
                        progress = true;
                    }
                }
                Relation::Qd { a, b, c } => {
                    if values[*a].is_none() {
                        if let (Some(vb), Some(vc)) = (&values[*b], &values[*c]) {
                            // with the numeraire fixed to 1 the homogenized
                            // and plain product rules coincide
                            values[*a] = Some(vb * vc);
                            progress = true;
                        }
                    }
                }
                Relation::Lin {
                    left,
                    left_const,
                    right,
                    right_const,
                } => {
                    let mut unknown: Option<(Rational, VarId)> = None;
                    let mut known = left_const - right_const;
                    let mut degenerate = false;
                    for (is_left, terms) in [(true, left), (false, right)] {
                        for (coef, var) in terms {
                            let signed = if is_left { coef.clone() } else { -coef };
                            match &values[*var] {
                                Some(v) => known += &(&signed * v),
                                None => {
                                    if unknown.is_some() || signed.is_zero() {
                                        degenerate = true;
                                    } else {
                                        unknown = Some((signed, *var));
                                    }
                                }
                            }
                        }
                    }
                    if degenerate {
                        continue;
                    }
                    if let Some((coef, var)) = unknown {
                        // known + coef * value = 0
                        values[var] = Some(-(known / coef));
                        progress = true;
                    }
                }
            }
        }
    }

    values
        .into_iter()
        .enumerate()
        .map(|(var, v)| v.ok_or(ReduceError::ExtensionStuck { var }))
        .collect()
}

/// Size of the relation system: variable count (numeraire included when
/// present) plus relation count plus the bit size of every LIN coefficient
/// and non-zero constant. The report's `max_degree` is 2 when any product
/// relation is present, `monomial_count_max` is the largest term count in
/// a single relation, and `u_max` the largest coefficient magnitude.
pub fn relation_size(rs: &RelationSystem) -> SizeReport {
    let vars = rs.assignment_len() as u64;
    let k = rs.relations.len() as u64;
    let mut coef_bits = 0u64;
    let mut max_terms = 0usize;
    let mut u_max = Rational::zero();
    let mut any_qd = false;
    for rel in &rs.relations {
        match rel {
            Relation::Eq { .. } => max_terms = max_terms.max(2),
            Relation::Qd { .. } => {
                any_qd = true;
                max_terms = max_terms.max(3);
            }
            Relation::Lin {
                left,
                left_const,
                right,
                right_const,
            } => {
                let mut terms = left.len() + right.len();
                for c in [left_const, right_const] {
                    if !c.is_zero() {
                        terms += 1;
                        coef_bits += c.size_bits();
                        u_max = u_max.max(c.abs());
                    }
                }
                for (coef, _) in left.iter().chain(right.iter()) {
                    coef_bits += coef.size_bits();
                    u_max = u_max.max(coef.abs());
                }
                max_terms = max_terms.max(terms);
            }
        }
    }
    SizeReport {
        var_count: rs.assignment_len(),
        relation_or_poly_count: rs.relations.len(),
        total_bit_size: vars + k + coef_bits,
        max_degree: if any_qd {
            2
        } else if rs.relations.is_empty() {
            0
        } else {
            1
        },
        monomial_count_max: max_terms,
        u_max,
    }
}

// ---------------------------------------------------------------------------
// JSON interchange
//
// {"schema":"relation-system/v1", "N":…, "original_n":…, "numeraire":id|null,
//  "H":"num/den",
//  "relations":[{"kind":"EQ","a":…,"b":…}
//              |{"kind":"LIN","left":[["coef",id],…],"right":[…],
//                "lconst":"…"?, "rconst":"…"?}
//              |{"kind":"QD","a":…,"b":…,"c":…}]}
//
// Ids are 1-based; the numeraire id is N+1. Constants appear only in
// non-homogenized systems.
// ---------------------------------------------------------------------------

pub const RELATION_SCHEMA: &str = "relation-system/v1";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum RelationDoc {
    #[serde(rename = "EQ")]
    Eq { a: usize, b: usize },
    #[serde(rename = "LIN")]
    Lin {
        left: Vec<(String, usize)>,
        right: Vec<(String, usize)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lconst: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rconst: Option<String>,
    },
    #[serde(rename = "QD")]
    Qd { a: usize, b: usize, c: usize },
}

#[derive(Serialize, Deserialize)]
struct RelationSystemDoc {
    #[serde(default)]
    schema: Option<String>,
    #[serde(rename = "N")]
    n: usize,
    original_n: usize,
    numeraire: Option<usize>,
    #[serde(rename = "H")]
    h: String,
    relations: Vec<RelationDoc>,
}

pub fn relation_system_to_json(rs: &RelationSystem) -> serde_json::Value {
    let relations = rs
        .relations
        .iter()
        .map(|rel| match rel {
            Relation::Eq { a, b } => RelationDoc::Eq { a: a + 1, b: b + 1 },
            Relation::Qd { a, b, c } => RelationDoc::Qd {
                a: a + 1,
                b: b + 1,
                c: c + 1,
            },
            Relation::Lin {
                left,
                left_const,
                right,
                right_const,
            } => RelationDoc::Lin {
                left: left
                    .iter()
                    .map(|(coef, v)| (coef.to_string(), v + 1))
                    .collect(),
                right: right
                    .iter()
                    .map(|(coef, v)| (coef.to_string(), v + 1))
                    .collect(),
                lconst: (!left_const.is_zero()).then(|| left_const.to_string()),
                rconst: (!right_const.is_zero()).then(|| right_const.to_string()),
            },
        })
        .collect();
    let doc = RelationSystemDoc {
        schema: Some(RELATION_SCHEMA.to_string()),
        n: rs.n_vars,
        original_n: rs.original_n,
        numeraire: rs.numeraire.map(|s| s + 1),
        h: rs.h.to_string(),
        relations,
    };
    serde_json::to_value(doc).expect("relation system serialization")
}

pub fn relation_system_from_json(value: &serde_json::Value) -> Result<RelationSystem, ReduceError> {
    let doc: RelationSystemDoc = serde_json::from_value(value.clone())
        .map_err(|e| ReduceError::BadDocument(e.to_string()))?;
    let parse_r =
        |s: &str| Rational::parse(s).map_err(|e| ReduceError::BadDocument(e.to_string()));
    let max_id = doc.n + usize::from(doc.numeraire.is_some());
    let conv_id = |id: usize| -> Result<usize, ReduceError> {
        if id == 0 || id > max_id {
            return Err(ReduceError::BadDocument(format!(
                "variable id {id} out of range 1..={max_id}"
            )));
        }
        Ok(id - 1)
    };
    let conv_terms = |terms: &[(String, usize)]| -> Result<Vec<LinTerm>, ReduceError> {
        terms
            .iter()
            .map(|(c, v)| Ok((parse_r(c)?, conv_id(*v)?)))
            .collect()
    };
    if let Some(s) = doc.numeraire {
        if s != doc.n + 1 {
            return Err(ReduceError::BadDocument(format!(
                "numeraire id {s} must be N+1 = {}",
                doc.n + 1
            )));
        }
    }
    let mut relations = Vec::with_capacity(doc.relations.len());
    for rel in &doc.relations {
        relations.push(match rel {
            RelationDoc::Eq { a, b } => Relation::Eq {
                a: conv_id(*a)?,
                b: conv_id(*b)?,
            },
            RelationDoc::Qd { a, b, c } => Relation::Qd {
                a: conv_id(*a)?,
                b: conv_id(*b)?,
                c: conv_id(*c)?,
            },
            RelationDoc::Lin {
                left,
                right,
                lconst,
                rconst,
            } => Relation::Lin {
                left: conv_terms(left)?,
                left_const: lconst
                    .as_deref()
                    .map(parse_r)
                    .transpose()?
                    .unwrap_or_else(Rational::zero),
                right: conv_terms(right)?,
                right_const: rconst
                    .as_deref()
                    .map(parse_r)
                    .transpose()?
                    .unwrap_or_else(Rational::zero),
            },
        });
    }
    Ok(RelationSystem {
        n_vars: doc.n,
        original_n: doc.original_n,
        relations,
        numeraire: doc.numeraire.map(|_| doc.n),
        h: parse_r(&doc.h)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_system, Monomial, Polynomial};

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn running_example() -> PolynomialSystem {
        parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"4","e":{"1":2,"2":1}},{"c":"3","e":{"1":1,"2":1}},
                          {"c":"-1","e":{"1":1}},{"c":"-2"}]]}"#,
        )
        .unwrap()
    }

    fn square_minus_two() -> PolynomialSystem {
        parse_system(
            r#"{"vars":1,"bounds":[["0","2"]],"polys":[[{"c":"1","e":{"1":2}},{"c":"-2"}]]}"#,
        )
        .unwrap()
    }

    fn difference_system() -> PolynomialSystem {
        parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1}},{"c":"-1","e":{"2":1}}]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn compute_h_examples() {
        assert_eq!(compute_h(&square_minus_two()), r("9")); // 2*2^2+1
        assert_eq!(compute_h(&running_example()), r("257")); // 4*4^3+1
    }

    #[test]
    fn decompose_square_minus_two() {
        let rs = decompose(&square_minus_two());
        // vars: z1, t=z1*z1, e, f, sl, su
        assert_eq!(rs.n_vars, 6);
        assert_eq!(rs.original_n, 1);
        assert_eq!(rs.relations.len(), 6);
        assert_eq!(rs.relations[0], Relation::Qd { a: 1, b: 0, c: 0 });
        assert_eq!(
            rs.relations[1],
            Relation::defining_lin(2, vec![(r("1"), 1)], r("0"))
        );
        assert_eq!(rs.relations[2], Relation::defining_lin(3, vec![], r("2")));
        assert_eq!(rs.relations[3], Relation::Eq { a: 2, b: 3 });
    }

    #[test]
    fn decompose_running_example_shape() {
        let rs = decompose(&running_example());
        // aux: t_a2=z1*z1 (2), t_a1=t_a2*z2 (3), t_b1=z1*z2 (4), e (5), f (6),
        // slacks 7..10
        assert_eq!(rs.n_vars, 11);
        let qd_count = rs
            .relations
            .iter()
            .filter(|rel| matches!(rel, Relation::Qd { .. }))
            .count();
        assert_eq!(qd_count, 3);
        assert_eq!(rs.relations[0], Relation::Qd { a: 2, b: 0, c: 0 });
        assert_eq!(rs.relations[1], Relation::Qd { a: 3, b: 2, c: 1 });
        assert_eq!(rs.relations[2], Relation::Qd { a: 4, b: 0, c: 1 });
        assert_eq!(
            rs.relations[3],
            Relation::defining_lin(5, vec![(r("4"), 3), (r("3"), 4)], r("0"))
        );
        assert_eq!(
            rs.relations[4],
            Relation::defining_lin(6, vec![(r("1"), 0)], r("2"))
        );
        assert_eq!(rs.relations[5], Relation::Eq { a: 5, b: 6 });
        // ten relations total: 3 QD + 2 LIN + 1 EQ + 4 bound relations
        assert_eq!(rs.relations.len(), 10);
    }

    #[test]
    fn decompose_constant_folds_simple_difference() {
        let rs = decompose(&difference_system());
        assert_eq!(rs.relations[0], Relation::Eq { a: 0, b: 1 });
        assert_eq!(rs.n_vars, 6); // z1, z2 + four slacks
        assert_eq!(rs.relations.len(), 5);
    }

    #[test]
    fn homogenize_folds_constants_and_marks_numeraire() {
        let rs = reduce_system(&running_example());
        assert_eq!(rs.numeraire, Some(11));
        // z_f1 = z1 + 2 becomes p_f1 = p1 + 2 p_s
        assert_eq!(
            rs.relations[4],
            Relation::Lin {
                left: vec![(r("1"), 6)],
                left_const: r("0"),
                right: vec![(r("1"), 0), (r("2"), 11)],
                right_const: r("0"),
            }
        );
        // EQ untouched
        assert_eq!(rs.relations[5], Relation::Eq { a: 5, b: 6 });
        // double homogenization is rejected
        assert_eq!(homogenize(&rs), Err(ReduceError::DoubleHomogenization));
    }

    #[test]
    fn eval_relations_identity_and_mismatch() {
        let rs = reduce_system(&difference_system());
        // p1=p2=1, slacks all 1, p_s = 1
        let p: Vec<Rational> = vec![r("1"); 7];
        let res = eval_relations(&rs, &p).unwrap();
        assert!(res.satisfied());

        let mut p2 = p.clone();
        p2[1] = r("2");
        let res2 = eval_relations(&rs, &p2).unwrap();
        assert_eq!(res2.residuals[0], r("-1"));
        assert!(!res2.satisfied());
    }

    #[test]
    fn eval_relations_reports_negative_values() {
        let rs = reduce_system(&difference_system());
        let mut p: Vec<Rational> = vec![r("1"); 7];
        p[2] = r("-1");
        let res = eval_relations(&rs, &p).unwrap();
        assert_eq!(res.negative_vars, vec![2]);
        assert!(!res.satisfied());
    }

    #[test]
    fn extension_of_off_solution_shows_eq_residual() {
        let rs = reduce_system(&square_minus_two());
        let p = extend_assignment(&rs, &[r("3/2")]).unwrap();
        assert_eq!(p[1], r("9/4")); // t = z1^2
        assert_eq!(p[2], r("9/4")); // e
        assert_eq!(p[3], r("2")); // f
        let res = eval_relations(&rs, &p).unwrap();
        // the EQ join is relation index 3
        assert_eq!(res.residuals[3], r("1/4"));
    }

    #[test]
    fn extension_solves_running_example() {
        // planted rational root: z = (1, 3/7)
        let sys = running_example();
        let z = [r("1"), r("3/7")];
        assert!(sys.is_solution(&z).unwrap());
        let rs = reduce_system(&sys);
        let p = extend_assignment(&rs, &z).unwrap();
        let res = eval_relations(&rs, &p).unwrap();
        assert!(res.satisfied());
        // boundedness: every value is at most H
        for v in &p {
            assert!(v <= &rs.h);
        }
        // non-solutions extend to a violated system
        let bad = extend_assignment(&rs, &[r("1"), r("1")]).unwrap();
        assert!(!eval_relations(&rs, &bad).unwrap().satisfied());
    }

    #[test]
    fn all_positive_polynomial_gets_zero_side() {
        // z1*z2 = 0 has an empty negative side
        let sys = parse_system(
            r#"{"vars":2,"bounds":[["0","2"],["0","2"]],
                "polys":[[{"c":"1","e":{"1":1,"2":1}}]]}"#,
        )
        .unwrap();
        let rs = reduce_system(&sys);
        // the f-side LIN must still have a (0, p_s) term after homogenization;
        // vars: z1 z2, t=z1*z2, e, f, four slacks -> numeraire id 9
        assert_eq!(rs.numeraire, Some(9));
        let f_rel = &rs.relations[2];
        match f_rel {
            Relation::Lin { right, .. } => assert_eq!(right, &vec![(r("0"), 9)]),
            other => panic!("expected LIN, got {other:?}"),
        }
        let p = extend_assignment(&rs, &[r("1"), r("0")]).unwrap();
        assert!(eval_relations(&rs, &p).unwrap().satisfied());
    }

    #[test]
    fn relation_size_counts() {
        let rs = reduce_system(&difference_system());
        let size = relation_size(&rs);
        assert_eq!(size.var_count, 7);
        assert_eq!(size.relation_or_poly_count, 5);
        assert_eq!(size.max_degree, 1);
        // empty system
        let empty = RelationSystem {
            n_vars: 3,
            original_n: 3,
            relations: vec![],
            numeraire: None,
            h: r("1"),
        };
        assert_eq!(relation_size(&empty).total_bit_size, 3);
    }

    #[test]
    fn decompose_is_deterministic_and_round_trips() {
        let sys = running_example();
        let a = reduce_system(&sys);
        let b = reduce_system(&sys);
        assert_eq!(a, b);
        let back = relation_system_from_json(&relation_system_to_json(&a)).unwrap();
        assert_eq!(a, back);
        // a non-homogenized system keeps its constants through JSON
        let raw = decompose(&sys);
        let back_raw = relation_system_from_json(&relation_system_to_json(&raw)).unwrap();
        assert_eq!(raw, back_raw);
    }

    #[test]
    fn reformulation_size_is_polynomially_bounded() {
        // size[R'(F)] <= c1 * sum_i deg(f_i)^2 size[f_i]
        //             + c2 * sum_j (size(U_j) + size(L_j))
        // with the implementation constants fixed here
        const C1: u64 = 12;
        const C2: u64 = 12;
        for sys in [
            running_example(),
            square_minus_two(),
            difference_system(),
            parse_system(
                r#"{"vars":3,"bounds":[["0","100"],["1/3","7/2"],["0","1000001"]],
                    "polys":[[{"c":"355/113","e":{"1":3}},{"c":"-2","e":{"2":1,"3":2}}],
                             [{"c":"1","e":{"1":1,"2":1,"3":1}},{"c":"-17/19"}]]}"#,
            )
            .unwrap(),
        ] {
            let rs = reduce_system(&sys);
            let measured = relation_size(&rs).total_bit_size;
            let mut poly_part = 0u64;
            for p in &sys.polynomials {
                let d = u64::from(p.degree().max(1));
                let bits: u64 = p
                    .monomials()
                    .iter()
                    .map(|m| m.coefficient.size_bits())
                    .sum();
                poly_part += d * d * bits.max(1);
            }
            let bound_part: u64 = sys
                .bounds
                .iter()
                .map(|(lo, hi)| lo.size_bits() + hi.size_bits())
                .sum();
            let budget = C1 * poly_part + C2 * bound_part;
            assert!(
                measured <= budget,
                "size {measured} exceeds bound {budget} for {sys:?}"
            );
        }
    }

    #[test]
    fn empty_polynomial_decomposes_to_trivial_join() {
        let zero = Polynomial::new(vec![
            Monomial::constant(r("1")),
            Monomial::constant(r("-1")),
        ]);
        assert!(zero.is_empty());
        let sys = PolynomialSystem::new(1, vec![zero], vec![(r("0"), r("1"))]).unwrap();
        let rs = reduce_system(&sys);
        let p = extend_assignment(&rs, &[r("1/2")]).unwrap();
        assert!(eval_relations(&rs, &p).unwrap().satisfied());
    }
}
