//! Model file loader.
//!
//! ```text
//! [model]      name = "m2", n = 2, m = 1          # name defaults to the file stem
//! [drift]      b = ["-x1 - x2", "x1 - x2"]
//! [diffusion]  sigma1 = ["-x2", "x1"]             # one key per noise column
//! [barrier]    h = "1 - x1^2 - x2^2"
//! [alpha]      kind = "linear", c = 1.0           # optional; "cubic" or "custom" (expr = "...")
//! [domain]     box_min = [-1.5, -1.5], box_max = [1.5, 1.5]   # optional
//!              superlevel = "2 - x1^2 - x2^2"     # optional, D = {g >= 0} within the box
//! ```
//!
//! Defaults: alpha is linear with `c = 1`; the domain is the box `[-2, 2]^n`.

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::Spanned;

use crate::alpha::AlphaSpec;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::model::{BarrierSpec, SdeModel};
use crate::region::{BoxRegion, Region};

pub const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 2.0;

type SpannedList = Spanned<Vec<Spanned<String>>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    model: Spanned<RawModel>,
    drift: Spanned<RawDrift>,
    diffusion: Option<Spanned<BTreeMap<String, SpannedList>>>,
    barrier: Spanned<RawBarrier>,
    alpha: Option<Spanned<RawAlpha>>,
    domain: Option<Spanned<RawDomain>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    n: Spanned<i64>,
    m: Spanned<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    b: Spanned<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBarrier {
    h: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlpha {
    kind: Spanned<String>,
    c: Option<f64>,
    expr: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    box_min: Option<Spanned<Vec<f64>>>,
    box_max: Option<Spanned<Vec<f64>>>,
    superlevel: Option<Spanned<String>>,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn line(&self, offset: usize) -> usize {
        self.0.as_bytes()[..offset.min(self.0.len())].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::ModelFile { line: self.line(offset), message: message.into() })
    }

    fn expr(&self, s: &Spanned<String>, dim: usize) -> Result<Expr> {
        parse(s.get_ref(), dim).map_err(|e| Error::ModelFile {
            line: self.line(s.span().start),
            message: format!("in `{}`: {e}", s.get_ref()),
        })
    }
}

/// Parses a model file. `default_name` (usually the file stem) is used when
/// `[model]` has no `name`.
pub fn load_model(text: &str, default_name: &str) -> Result<(SdeModel, BarrierSpec)> {
    let lines = Lines(text);
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::ModelFile {
        line: e.span().map_or(1, |s| lines.line(s.start)),
        message: e.message().to_string(),
    })?;

    let model_span = raw.model.span().start;
    let model = raw.model.into_inner();
    let n = *model.n.get_ref();
    let m = *model.m.get_ref();
    if n < 1 {
        return lines.err(model.n.span().start, format!("n must be at least 1, got {n}"));
    }
    if m < 1 {
        return lines.err(model.m.span().start, format!("m must be at least 1, got {m}"));
    }
    let (n, m) = (n as usize, m as usize);

    let drift_list = raw.drift.into_inner().b;
    if drift_list.get_ref().len() != n {
        return lines.err(
            drift_list.span().start,
            format!("dimension mismatch: n = {n} but [drift] b has {} entries", drift_list.get_ref().len()),
        );
    }
    let drift = drift_list.get_ref().iter().map(|s| lines.expr(s, n)).collect::<Result<Vec<_>>>()?;

    let mut columns = Vec::with_capacity(m);
    let (diff_span, mut diff_map) = match raw.diffusion {
        Some(d) => (d.span().start, d.into_inner()),
        None => return lines.err(model_span, "missing [diffusion] section"),
    };
    for k in 1..=m {
        let key = format!("sigma{k}");
        let Some(col) = diff_map.remove(&key) else {
            return lines.err(diff_span, format!("dimension mismatch: m = {m} but `{key}` is missing"));
        };
        if col.get_ref().len() != n {
            return lines.err(
                col.span().start,
                format!("dimension mismatch: n = {n} but `{key}` has {} entries", col.get_ref().len()),
            );
        }
        columns.push(col.get_ref().iter().map(|s| lines.expr(s, n)).collect::<Result<Vec<_>>>()?);
    }
    if let Some(extra) = diff_map.keys().next() {
        return lines.err(diff_span, format!("dimension mismatch: unexpected key `{extra}` for m = {m}"));
    }

    let h = lines.expr(&raw.barrier.get_ref().h, n)?;

    let alpha = match raw.alpha {
        None => AlphaSpec::default(),
        Some(a) => {
            let start = a.span().start;
            let a = a.into_inner();
            let c = a.c.unwrap_or(1.0);
            match a.kind.get_ref().as_str() {
                "linear" => AlphaSpec::Linear { c },
                "cubic" => AlphaSpec::Cubic { c },
                "custom" => match &a.expr {
                    Some(e) => AlphaSpec::Custom { expr: lines.expr(e, 1)? },
                    None => return lines.err(start, "custom alpha needs `expr`"),
                },
                other => return lines.err(a.kind.span().start, format!("unknown alpha kind `{other}`")),
            }
        }
    };

    let domain = match raw.domain {
        None => Region::Box(BoxRegion::symmetric(n, DEFAULT_DOMAIN_HALF_WIDTH)?),
        Some(d) => {
            let start = d.span().start;
            let d = d.into_inner();
            let bounds = match (&d.box_min, &d.box_max) {
                (Some(lo), Some(hi)) => {
                    if lo.get_ref().len() != n || hi.get_ref().len() != n {
                        return lines.err(lo.span().start, format!("dimension mismatch: domain box must have {n} entries"));
                    }
                    BoxRegion::new(lo.get_ref().clone(), hi.get_ref().clone())
                        .or_else(|e| lines.err(lo.span().start, e.to_string()))?
                }
                (None, None) => BoxRegion::symmetric(n, DEFAULT_DOMAIN_HALF_WIDTH)?,
                _ => return lines.err(start, "box_min and box_max must be given together"),
            };
            match &d.superlevel {
                Some(g) => Region::Superlevel { g: lines.expr(g, n)?, bounds },
                None => Region::Box(bounds),
            }
        }
    };

    let name = model.name.unwrap_or_else(|| default_name.to_string());
    let sde = SdeModel::new(name, drift, columns).or_else(|e| lines.err(model_span, e.to_string()))?;
    Ok((sde, BarrierSpec { h, alpha, domain }))
}
