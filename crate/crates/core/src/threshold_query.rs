//! Threshold-optimization queries such as
//! `maximum recall @ precision >= 0.9`.
//!
//! Grammar: `direction metric '@' metric comparator number`, whitespace
//! allowed between tokens, keywords case-sensitive. Evaluation picks, among
//! table rows satisfying the constraint, the row with the best target
//! metric; ties go to the greater threshold.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model_store::{ThresholdRow, ThresholdTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Precision,
    Recall,
    Fpr,
    Accuracy,
    F1,
    FilterRate,
    MatchRate,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Precision,
        Metric::Recall,
        Metric::Fpr,
        Metric::Accuracy,
        Metric::F1,
        Metric::FilterRate,
        Metric::MatchRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Fpr => "fpr",
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::FilterRate => "filter_rate",
            Metric::MatchRate => "match_rate",
        }
    }

    pub fn of(self, row: &ThresholdRow) -> f64 {
        match self {
            Metric::Precision => row.precision,
            Metric::Recall => row.recall,
            Metric::Fpr => row.fpr,
            Metric::Accuracy => row.accuracy,
            Metric::F1 => row.f1,
            Metric::FilterRate => row.filter_rate,
            Metric::MatchRate => row.match_rate,
        }
    }
}

impl FromStr for Metric {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, QueryError> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| QueryError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Ge,
    Le,
    Gt,
    Lt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
        }
    }

    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Ge => value >= bound,
            Comparator::Le => value <= bound,
            Comparator::Gt => value > bound,
            Comparator::Lt => value < bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdQuery {
    pub direction: Direction,
    pub target: Metric,
    pub constraint: Metric,
    pub comparator: Comparator,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("syntax error at position {position}: expected {}, found {found}", .expected.join(" or "))]
    SyntaxError { position: usize, expected: Vec<&'static str>, found: String },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("bound {0} is outside [0, 1]")]
    BoundOutOfRange(f64),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn found(&self) -> String {
        match self.src[self.pos..].chars().next() {
            Some(c) => format!("{c:?}"),
            None => "end of input".to_string(),
        }
    }

    fn error(&self, expected: Vec<&'static str>) -> QueryError {
        QueryError::SyntaxError { position: self.pos, expected, found: self.found() }
    }

    /// `[A-Za-z_][A-Za-z0-9_]*`
    fn ident(&mut self, expected: Vec<&'static str>) -> Result<(usize, &'a str), QueryError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .char_indices()
            .find(|&(i, c)| !(c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit())))
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 {
            return Err(self.error(expected));
        }
        self.pos += len;
        Ok((start, &rest[..len]))
    }

    fn symbol(&mut self, options: &[&'static str]) -> Result<&'static str, QueryError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        // Longest match first so ">=" wins over ">".
        let mut sorted = options.to_vec();
        sorted.sort_by_key(|s| std::cmp::Reverse(s.len()));
        for sym in sorted {
            if rest.starts_with(sym) {
                self.pos += sym.len();
                return Ok(sym);
            }
        }
        Err(self.error(options.to_vec()))
    }

    fn number(&mut self) -> Result<f64, QueryError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let text = &rest[..len];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && !text.is_empty() => {
                self.pos += len;
                Ok(v)
            }
            _ => Err(self.error(vec!["a number"])),
        }
    }
}

impl ThresholdQuery {
    pub fn parse(src: &str) -> Result<Self, QueryError> {
        let mut lx = Lexer { src, pos: 0 };
        let (start, word) = lx.ident(vec!["maximum", "minimum"])?;
        let direction = match word {
            "maximum" => Direction::Maximum,
            "minimum" => Direction::Minimum,
            other => {
                return Err(QueryError::SyntaxError {
                    position: start,
                    expected: vec!["maximum", "minimum"],
                    found: format!("{other:?}"),
                })
            }
        };
        let target: Metric = lx.ident(vec!["a metric name"])?.1.parse()?;
        lx.symbol(&["@"])?;
        let constraint: Metric = lx.ident(vec!["a metric name"])?.1.parse()?;
        let comparator = match lx.symbol(&[">=", "<=", ">", "<"])? {
            ">=" => Comparator::Ge,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            _ => Comparator::Lt,
        };
        let bound = lx.number()?;
        lx.skip_ws();
        if lx.pos != src.len() {
            return Err(lx.error(vec!["end of input"]));
        }
        if !(0.0..=1.0).contains(&bound) {
            return Err(QueryError::BoundOutOfRange(bound));
        }
        Ok(Self { direction, target, constraint, comparator, bound })
    }

    /// The optimal row, or `None` when no row satisfies the constraint.
    pub fn optimize<'t>(&self, table: &'t ThresholdTable) -> Option<&'t ThresholdRow> {
        let mut best: Option<&ThresholdRow> = None;
        for row in &table.rows {
            if !self.comparator.holds(self.constraint.of(row), self.bound) {
                continue;
            }
            let value = self.target.of(row);
            // Rows ascend by threshold, so accepting ties keeps the greatest.
            let better = match best {
                None => true,
                Some(b) => match self.direction {
                    Direction::Maximum => value >= self.target.of(b),
                    Direction::Minimum => value <= self.target.of(b),
                },
            };
            if better {
                best = Some(row);
            }
        }
        best
    }
}

impl FromStr for ThresholdQuery {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, QueryError> {
        ThresholdQuery::parse(s)
    }
}

impl fmt::Display for ThresholdQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let direction = match self.direction {
            Direction::Maximum => "maximum",
            Direction::Minimum => "minimum",
        };
        write!(
            f,
            "{direction} {} @ {} {} {}",
            self.target.name(),
            self.constraint.name(),
            self.comparator.symbol(),
            self.bound
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_queries() {
        let q = ThresholdQuery::parse("maximum recall @ precision >= 0.9").unwrap();
        assert_eq!(
            q,
            ThresholdQuery {
                direction: Direction::Maximum,
                target: Metric::Recall,
                constraint: Metric::Precision,
                comparator: Comparator::Ge,
                bound: 0.9
            }
        );
        let q = ThresholdQuery::parse("maximum filter_rate @ recall >= 0.75").unwrap();
        assert_eq!((q.target, q.constraint, q.bound), (Metric::FilterRate, Metric::Recall, 0.75));
    }

    #[test]
    fn whitespace_is_free_form() {
        let a = ThresholdQuery::parse("  minimum fpr@recall>0.5 ").unwrap();
        let b = ThresholdQuery::parse("minimum\tfpr @  recall >  0.5").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "minimum fpr @ recall > 0.5");
    }

    #[test]
    fn errors() {
        assert_eq!(
            ThresholdQuery::parse("maximum zeal @ recall >= 0.5").unwrap_err(),
            QueryError::UnknownMetric("zeal".into())
        );
        assert_eq!(ThresholdQuery::parse("maximum recall @ precision >= 1.5").unwrap_err(), QueryError::BoundOutOfRange(1.5));
        match ThresholdQuery::parse("Maximum recall @ precision >= 0.9").unwrap_err() {
            QueryError::SyntaxError { position, .. } => assert_eq!(position, 0),
            other => panic!("{other:?}"),
        }
        match ThresholdQuery::parse("maximum recall precision >= 0.9").unwrap_err() {
            QueryError::SyntaxError { position, expected, .. } => {
                assert_eq!(position, 15);
                assert_eq!(expected, vec!["@"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ThresholdQuery::parse("maximum recall @ precision == 0.9"), Err(QueryError::SyntaxError { .. })));
        assert!(matches!(ThresholdQuery::parse("maximum recall @ precision >= 0.9 x"), Err(QueryError::SyntaxError { .. })));
        assert!(matches!(ThresholdQuery::parse("maximum recall @ precision >="), Err(QueryError::SyntaxError { .. })));
    }

    fn four() -> ThresholdTable {
        ThresholdTable::from_scores(&[(0.1, false), (0.4, false), (0.6, true), (0.9, true)])
    }

    #[test]
    fn four_item_table() {
        let table = four();
        let row = ThresholdQuery::parse("maximum filter_rate @ recall >= 1.0").unwrap().optimize(&table).unwrap();
        assert_eq!(row.threshold, 0.6);
        assert_eq!((row.recall, row.precision, row.filter_rate), (1.0, 1.0, 0.5));

        let row = ThresholdQuery::parse("minimum fpr @ recall >= 0.0").unwrap().optimize(&table).unwrap();
        assert_eq!(row.threshold, 1.0);
    }

    #[test]
    fn unsatisfiable_is_none() {
        let table = ThresholdTable::from_scores(&[(0.3, true), (0.7, false)]);
        assert!(ThresholdQuery::parse("maximum recall @ precision >= 1.0").unwrap().optimize(&table).is_none());
    }
}
