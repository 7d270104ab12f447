use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One column of the treatment design. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Intercept,
    Main(usize),
    Interaction(usize, usize),
    Square(usize),
}

impl Term {
    pub fn evaluate(&self, t: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Main(k) => t[k],
            Term::Interaction(k, l) => t[k] * t[l],
            Term::Square(k) => t[k] * t[k],
        }
    }

    /// Treatments the term depends on.
    pub fn treatments(&self) -> Vec<usize> {
        match *self {
            Term::Intercept => vec![],
            Term::Main(k) | Term::Square(k) => vec![k],
            Term::Interaction(k, l) => vec![k, l],
        }
    }

    fn max_index(&self) -> Option<usize> {
        self.treatments().into_iter().max()
    }
}

impl Term {
    /// Label using column names in place of `t1, t2, ...`.
    pub fn label_with(&self, names: &[String]) -> String {
        let name = |k: usize| {
            names
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("t{}", k + 1))
        };
        match *self {
            Term::Intercept => "1".to_string(),
            Term::Main(k) => name(k),
            Term::Interaction(k, l) => format!("{}:{}", name(k), name(l)),
            Term::Square(k) => format!("{}^2", name(k)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Intercept => write!(f, "1"),
            Term::Main(k) => write!(f, "t{}", k + 1),
            Term::Interaction(k, l) => write!(f, "t{}:t{}", k + 1, l + 1),
            Term::Square(k) => write!(f, "t{}^2", k + 1),
        }
    }
}

/// Effect function linear in its parameters: `s(t; theta) = theta' phi(t)`.
///
/// The gradient of `s` in `theta` is `phi(t)` itself and its second derivative
/// vanishes, which is what lets the sandwich bread reduce to a weighted Gram
/// matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearEffectModel {
    terms: Vec<Term>,
    p: usize,
}

impl LinearEffectModel {
    pub fn new(terms: Vec<Term>, p: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidModel("model needs at least one term".into()));
        }
        if p == 0 {
            return Err(Error::InvalidModel(
                "model needs at least one treatment".into(),
            ));
        }
        let mut terms = terms;
        for t in terms.iter_mut() {
            if let Term::Interaction(k, l) = *t {
                if k == l {
                    *t = Term::Square(k);
                } else if k > l {
                    *t = Term::Interaction(l, k);
                }
            }
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) {
                return Err(Error::InvalidModel(format!("duplicate term {t}")));
            }
            if let Some(k) = t.max_index() {
                if k >= p {
                    return Err(Error::InvalidModel(format!(
                        "term {t} references treatment {} but only {p} exist",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { terms, p })
    }

    /// `1 + t1 + ... + tp`.
    pub fn main_effects(p: usize) -> Result<Self> {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::Main));
        Self::new(terms, p)
    }

    /// Main effects plus every pairwise interaction.
    pub fn with_interactions(p: usize) -> Result<Self> {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::Main));
        for k in 0..p {
            for l in k + 1..p {
                terms.push(Term::Interaction(k, l));
            }
        }
        Self::new(terms, p)
    }

    /// Parses the `1 + t1 + t2 + t1:t2` grammar. Treatments are `tK`
    /// (one-based) or, when `names` is given, the treatment column names.
    /// `a:b` is a product and `a^2` a square.
    pub fn parse(spec: &str, p: usize, names: Option<&[String]>) -> Result<Self> {
        let lookup = |tok: &str| -> Result<usize> {
            let tok = tok.trim();
            if let Some(names) = names {
                if let Some(k) = names.iter().position(|n| n == tok) {
                    return Ok(k);
                }
            }
            tok.strip_prefix('t')
                .and_then(|rest| rest.parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .map(|k| k - 1)
                .ok_or_else(|| Error::InvalidModel(format!("unknown treatment `{tok}`")))
        };
        let mut terms = Vec::new();
        for raw in spec.split('+') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(Error::InvalidModel(format!("empty term in `{spec}`")));
            }
            let term = if raw == "1" {
                Term::Intercept
            } else if let Some((a, b)) = raw.split_once(':') {
                Term::Interaction(lookup(a)?, lookup(b)?)
            } else if let Some(base) = raw.strip_suffix("^2") {
                Term::Square(lookup(base)?)
            } else {
                Term::Main(lookup(raw)?)
            };
            terms.push(term);
        }
        Self::new(terms, p)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::to_string).collect()
    }

    /// Model formula using column names, e.g. `1 + duration + frequency`.
    pub fn formula_with(&self, names: &[String]) -> String {
        let labels: Vec<String> = self.terms.iter().map(|t| t.label_with(names)).collect();
        labels.join(" + ")
    }

    pub fn has_interactions(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t, Term::Interaction(..)))
    }

    pub fn features(&self, t: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|term| term.evaluate(t)),
        )
    }

    /// Design matrix `Phi` with one row `phi(T_i)` per unit.
    pub fn design(&self, treatments: &DMatrix<f64>) -> DMatrix<f64> {
        let mut row = vec![0.0; treatments.ncols()];
        DMatrix::from_fn(treatments.nrows(), self.terms.len(), |i, j| {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = treatments[(i, k)];
            }
            self.terms[j].evaluate(&row)
        })
    }
}

impl fmt::Display for LinearEffectModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels().join(" + "))
    }
}

impl FromStr for LinearEffectModel {
    type Err = Error;

    /// Infers `p` from the largest referenced `tK`.
    fn from_str(s: &str) -> Result<Self> {
        let p = s
            .split(['+', ':', '^'])
            .filter_map(|tok| tok.trim().strip_prefix('t')?.parse::<usize>().ok())
            .max()
            .unwrap_or(1);
        Self::parse(s, p, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_round_trip() {
        let m: LinearEffectModel = "1 + t1 + t2 + t1:t2".parse().unwrap();
        assert_eq!(m.p(), 2);
        assert_eq!(
            m.terms(),
            &[
                Term::Intercept,
                Term::Main(0),
                Term::Main(1),
                Term::Interaction(0, 1)
            ]
        );
        assert_eq!(m.to_string(), "1 + t1 + t2 + t1:t2");
        let sq: LinearEffectModel = "1 + t2^2".parse().unwrap();
        assert_eq!(sq.terms(), &[Term::Intercept, Term::Square(1)]);
        // t2:t2 is the same column as t2^2
        assert!("1 + t2^2 + t2:t2".parse::<LinearEffectModel>().is_err());
    }

    #[test]
    fn duplicate_terms_rejected() {
        assert!(LinearEffectModel::parse("1 + t1 + t1", 2, None).is_err());
        assert!(LinearEffectModel::parse("t1:t2 + t2:t1", 2, None).is_err());
    }

    #[test]
    fn out_of_range_index_rejected() {
        assert!(LinearEffectModel::parse("1 + t3", 2, None).is_err());
        assert!(LinearEffectModel::parse("1 + t0", 2, None).is_err());
        assert!(LinearEffectModel::parse("1 + + t1", 2, None).is_err());
    }

    #[test]
    fn names_resolve() {
        let names = vec!["duration".to_string(), "frequency".to_string()];
        let m = LinearEffectModel::parse(
            "1 + duration + frequency + duration:frequency",
            2,
            Some(&names),
        )
        .unwrap();
        assert_eq!(m.labels(), vec!["1", "t1", "t2", "t1:t2"]);
    }

    #[test]
    fn design_rows() {
        let m = LinearEffectModel::with_interactions(2).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, -1.0, 0.5]);
        let phi = m.design(&t);
        assert_eq!(
            phi.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0, 6.0]
        );
        assert_eq!(
            phi.row(1).iter().copied().collect::<Vec<_>>(),
            vec![1.0, -1.0, 0.5, -0.5]
        );
    }
}
