//! Topological priors: boolean rules deciding which stored observations link
//! to a newly inserted one, and a small expression language for them.
//!
//! ```text
//! or(temporal(1), temporal(2), identity(pointer_value, faceup_value))
//! and(spatial(0.5), latent(cosine, 0.1))
//! empty
//! ```

use std::fmt;
use std::str::FromStr;

use super::MemoryState;
use crate::error::{Error, Result};
use crate::memory::Metadata;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentMetric {
    L2,
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Never links anything; the graph memory reduces to an MLP.
    Empty,
    /// Links `o_j` to `o_t` when `t - j == k`.
    Temporal(usize),
    /// Links observations whose positions are within `k` meters.
    Spatial(f32),
    /// Links observations whose latent codes are closer than the threshold.
    LatentSim { metric: LatentMetric, threshold: f32 },
    /// Links when field `a` of the stored observation equals field `b` of the
    /// new one. Absent values never match.
    Identity { a: String, b: String },
    Or(Vec<PriorSpec>),
    And(Vec<PriorSpec>),
}

fn missing(what: &str) -> Error {
    Error::Config(format!("prior needs observation metadata `{}`", what))
}

fn field(meta: &Metadata, name: &str) -> Result<Option<i64>> {
    meta.fields.get(name).copied().ok_or_else(|| missing(name))
}

fn l2(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::dim("prior", format!("vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f32>().sqrt())
}

fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::dim("prior", format!("vectors of length {} and {}", a.len(), b.len())));
    }
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - dot / (na * nb))
}

impl PriorSpec {
    /// Evaluates the indicator for stored vertex `j` (metadata `old`) against
    /// a new vertex at index `t` (metadata `new`).
    pub fn indicator(&self, j: usize, old: &Metadata, t: usize, new: &Metadata) -> Result<bool> {
        Ok(match self {
            PriorSpec::Empty => false,
            PriorSpec::Temporal(k) => t.checked_sub(j) == Some(*k),
            PriorSpec::Spatial(k) => {
                let p = old.position.as_deref().ok_or_else(|| missing("position"))?;
                let q = new.position.as_deref().ok_or_else(|| missing("position"))?;
                l2(p, q)? <= *k
            }
            PriorSpec::LatentSim { metric, threshold } => {
                let p = old.latent.as_deref().ok_or_else(|| missing("latent"))?;
                let q = new.latent.as_deref().ok_or_else(|| missing("latent"))?;
                let d = match metric {
                    LatentMetric::L2 => l2(p, q)?,
                    LatentMetric::Cosine => cosine_distance(p, q)?,
                };
                d < *threshold
            }
            PriorSpec::Identity { a, b } => match (field(old, a)?, field(new, b)?) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
            // Children are all evaluated so a missing-metadata error is never
            // masked by short-circuiting.
            PriorSpec::Or(children) => {
                let mut any = false;
                for c in children {
                    any |= c.indicator(j, old, t, new)?;
                }
                any
            }
            PriorSpec::And(children) => {
                let mut all = true;
                for c in children {
                    all &= c.indicator(j, old, t, new)?;
                }
                all
            }
        })
    }

    /// Largest temporal offset when the prior is a pure disjunction of
    /// temporal leaves; lets insertion skip vertices that cannot link.
    pub(crate) fn temporal_horizon(&self) -> Option<usize> {
        match self {
            PriorSpec::Empty => Some(0),
            PriorSpec::Temporal(k) => Some(*k),
            PriorSpec::Or(children) => children
                .iter()
                .map(PriorSpec::temporal_horizon)
                .try_fold(0, |acc, h| h.map(|h| acc.max(h))),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Temporal(0) => Err(Error::Config("temporal offset must be positive".into())),
            PriorSpec::Spatial(k) if !(k.is_finite() && *k >= 0.0) => {
                Err(Error::Config(format!("spatial radius must be a non-negative number, got {}", k)))
            }
            PriorSpec::LatentSim { threshold, .. } if !threshold.is_finite() => {
                Err(Error::Config("latent threshold must be finite".into()))
            }
            PriorSpec::Or(c) | PriorSpec::And(c) => {
                if c.is_empty() {
                    return Err(Error::Config("logical prior needs at least one child".into()));
                }
                c.iter().try_for_each(PriorSpec::validate)
            }
            _ => Ok(()),
        }
    }
}

/// Adjacency indicator between stored vertex `j` and the observation about
/// to be inserted at index `t`.
pub fn eval_prior(
    spec: &PriorSpec,
    j: usize,
    t: usize,
    state: &MemoryState,
    new: &Metadata,
) -> Result<bool> {
    if j >= t {
        return Err(Error::Contract(format!("prior evaluated with j={} >= t={}", j, t)));
    }
    let old = state.metadata(j).ok_or(Error::Index {
        op: "eval_prior",
        index: j,
        extent: state.len(),
    })?;
    spec.indicator(j, old, t, new)
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Empty => write!(f, "empty"),
            PriorSpec::Temporal(k) => write!(f, "temporal({})", k),
            PriorSpec::Spatial(k) => write!(f, "spatial({:?})", k),
            PriorSpec::LatentSim { metric, threshold } => {
                let m = match metric {
                    LatentMetric::L2 => "l2",
                    LatentMetric::Cosine => "cosine",
                };
                write!(f, "latent({}, {:?})", m, threshold)
            }
            PriorSpec::Identity { a, b } => write!(f, "identity({}, {})", a, b),
            PriorSpec::Or(c) | PriorSpec::And(c) => {
                let name = if matches!(self, PriorSpec::Or(_)) { "or" } else { "and" };
                write!(f, "{}(", name)?;
                for (i, child) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", child)?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let before = &self.src[..self.pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(format!("expected `{}`, found `{}`", ch, c)),
            None => self.error(format!("expected `{}`, found end of input", ch)),
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return self.error("expected a name");
        }
        self.pos += len;
        Ok(&self.src[start..start + len])
    }

    fn number(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        if len == 0 {
            return self.error("expected a number");
        }
        self.pos += len;
        Ok(&self.src[start..start + len])
    }

    fn float(&mut self) -> Result<f32> {
        let at = self.pos;
        let text = self.number()?;
        match text.parse::<f32>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = at;
                self.skip_ws();
                self.error(format!("invalid number `{}`", text))
            }
        }
    }

    fn expr(&mut self) -> Result<PriorSpec> {
        let at = {
            self.skip_ws();
            self.pos
        };
        let name = self.word()?;
        let spec = match name {
            "empty" => {
                if self.peek() == Some('(') {
                    self.expect('(')?;
                    self.expect(')')?;
                }
                PriorSpec::Empty
            }
            "temporal" => {
                self.expect('(')?;
                let arg_at = {
                    self.skip_ws();
                    self.pos
                };
                let text = self.number()?;
                let k = match text.parse::<usize>() {
                    Ok(k) if k > 0 => k,
                    _ => {
                        self.pos = arg_at;
                        return self.error(format!("temporal offset must be a positive integer, got `{}`", text));
                    }
                };
                self.expect(')')?;
                PriorSpec::Temporal(k)
            }
            "spatial" => {
                self.expect('(')?;
                let arg_at = {
                    self.skip_ws();
                    self.pos
                };
                let k = self.float()?;
                if k < 0.0 {
                    self.pos = arg_at;
                    return self.error("spatial radius must be non-negative");
                }
                self.expect(')')?;
                PriorSpec::Spatial(k)
            }
            "latent" => {
                self.expect('(')?;
                let metric_at = {
                    self.skip_ws();
                    self.pos
                };
                let metric = match self.word()? {
                    "l2" => LatentMetric::L2,
                    "cosine" => LatentMetric::Cosine,
                    other => {
                        self.pos = metric_at;
                        return self.error(format!("unknown latent metric `{}` (expected l2 or cosine)", other));
                    }
                };
                self.expect(',')?;
                let threshold = self.float()?;
                self.expect(')')?;
                PriorSpec::LatentSim { metric, threshold }
            }
            "identity" => {
                self.expect('(')?;
                let a = self.word()?.to_string();
                self.expect(',')?;
                let b = self.word()?.to_string();
                self.expect(')')?;
                PriorSpec::Identity { a, b }
            }
            "or" | "and" => {
                self.expect('(')?;
                let mut children = vec![self.expr()?];
                while self.peek() == Some(',') {
                    self.expect(',')?;
                    children.push(self.expr()?);
                }
                self.expect(')')?;
                if name == "or" {
                    PriorSpec::Or(children)
                } else {
                    PriorSpec::And(children)
                }
            }
            other => {
                self.pos = at;
                return self.error(format!("unknown prior `{}`", other));
            }
        };
        Ok(spec)
    }
}

/// Parses a prior expression. Error positions are 1-based within `text`.
pub fn parse_prior(text: &str) -> Result<PriorSpec> {
    let mut p = Parser { src: text, pos: 0 };
    let spec = p.expr()?;
    if let Some(c) = p.peek() {
        return p.error(format!("unexpected trailing `{}`", c));
    }
    Ok(spec)
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_prior(s)
    }
}
