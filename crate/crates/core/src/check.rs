//! Sampled decision procedures for the barrier conditions.
//!
//! * SZBF: `Lh(x) >= -alpha(h(x))` and `grad h . sigma_k = 0` on `D`.
//! * ZBF of the diffusion-free part: `grad h . b >= -alpha(h)` on `D`.
//! * Lemma 1 hypotheses: the second-order diffusion term and every coupling vanish.
//!
//! Results are "certified on samples" at best; a grid cannot certify a continuum.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::ClassKeFn;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::generator::{Generator, LocalTerms};
use crate::model::SdeModel;
use crate::point::Point;
use crate::region::Region;
use crate::sampling::SamplingPlan;
use crate::scalar::{norm, Scalar};

pub const DEFAULT_TOL_FACTOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Every channel and the channel sum must vanish.
    PerChannel,
    /// Only the channel sum must vanish.
    SumOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub coupling_mode: CouplingMode,
    /// Relative factor `f` in `tol_i = f (1 + |Lh| + |alpha(h)|)` and
    /// `tol_ii = f (1 + |grad h| |sigma_k|)`.
    pub tol_factor: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { coupling_mode: CouplingMode::PerChannel, tol_factor: DEFAULT_TOL_FACTOR }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Szbf,
    ZbfDriftOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    #[serde(rename = "SZBF-certified-on-samples")]
    CertifiedOnSamples,
    #[serde(rename = "refuted")]
    Refuted,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl fmt::Display for Conclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conclusion::CertifiedOnSamples => "SZBF-certified-on-samples",
            Conclusion::Refuted => "refuted",
            Conclusion::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "condition", content = "channel")]
pub enum Violated {
    /// Generator (or drift-only) inequality.
    GeneratorInequality,
    /// Coupling of the given one-based channel.
    CouplingChannel(usize),
    CouplingSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness<T = f64> {
    pub point: Point<T>,
    pub violated: Violated,
    /// Margin for the inequality, coupling value otherwise.
    pub value: T,
    pub tolerance: T,
}

/// Per-point values, kept for CSV export and cross-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord<T = f64> {
    pub point: Point<T>,
    pub h: T,
    /// `Lh + alpha(h)` (SZBF) or `grad h . b + alpha(h)` (drift only).
    pub margin: T,
    pub tol_i: T,
    pub couplings: Vec<T>,
    pub coupling_sum: T,
    pub tol_ii: Vec<T>,
    pub tol_sum: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVerdict<T = f64> {
    pub holds: bool,
    pub min_margin: T,
    pub min_margin_point: Point<T>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingVerdict<T = f64> {
    pub mode: CouplingMode,
    pub holds: bool,
    pub max_abs_per_channel: Vec<T>,
    pub max_abs_sum: T,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEcho {
    pub rel_factor: f64,
    pub tol_i: String,
    pub tol_ii: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport<T = f64> {
    pub check: CheckKind,
    pub conclusion: Conclusion,
    pub points_checked: usize,
    /// Sampled points with `h >= 0`.
    pub points_in_c: usize,
    pub condition_i: MarginVerdict<T>,
    /// Absent for the drift-only check.
    pub condition_ii: Option<CouplingVerdict<T>>,
    /// Largest violation magnitude (`-margin` or `|coupling|`); zero when certified.
    pub worst_violation: T,
    pub witness: Option<Witness<T>>,
    pub tolerances: ToleranceEcho,
    pub alpha: ClassKeFn,
    pub plan: SamplingPlan,
    #[serde(skip)]
    pub records: Vec<PointRecord<T>>,
}

impl<T: Scalar> VerificationReport<T> {
    pub fn is_certified(&self) -> bool {
        self.conclusion == Conclusion::CertifiedOnSamples
    }

    pub fn is_refuted(&self) -> bool {
        self.conclusion == Conclusion::Refuted
    }
}

fn record_point<T: Scalar>(
    terms: &LocalTerms<T>,
    point: &Point<T>,
    alpha: &ClassKeFn,
    kind: CheckKind,
    tol_factor: T,
) -> Result<PointRecord<T>> {
    let a = alpha.eval(terms.h).map_err(|e| Error::eval_at(point, e))?;
    let rate = match kind {
        CheckKind::Szbf => terms.generator(),
        CheckKind::ZbfDriftOnly => terms.first_order,
    };
    let one = T::one();
    let tol_i = tol_factor * (one + rate.abs() + a.abs());
    let (couplings, tol_ii, coupling_sum, tol_sum) = match kind {
        CheckKind::ZbfDriftOnly => (Vec::new(), Vec::new(), T::zero(), T::zero()),
        CheckKind::Szbf => {
            let g = norm(&terms.grad);
            let scales: Vec<T> = terms.diffusion.iter().map(|s| g * norm(s)).collect();
            let tol_ii: Vec<T> = scales.iter().map(|&s| tol_factor * (one + s)).collect();
            let tol_sum = tol_factor * (one + scales.iter().copied().sum::<T>());
            let sum = terms.couplings.iter().copied().sum::<T>();
            (terms.couplings.clone(), tol_ii, sum, tol_sum)
        }
    };
    Ok(PointRecord {
        point: point.clone(),
        h: terms.h,
        margin: rate + a,
        tol_i,
        couplings,
        coupling_sum,
        tol_ii,
        tol_sum,
    })
}

fn evaluate_records<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    alpha: &ClassKeFn,
    domain: &Region,
    plan: &SamplingPlan,
    kind: CheckKind,
    tol_factor: f64,
) -> Result<Vec<PointRecord<T>>> {
    if model.dim() != domain.dim() {
        return Err(Error::Precondition(format!(
            "domain dimension {} differs from model dimension {}",
            domain.dim(),
            model.dim()
        )));
    }
    let generator = Generator::new(model, h)?;
    let points: Vec<Point<T>> = plan.points(domain, h)?;
    let tol = T::lit(tol_factor);
    points
        .par_iter()
        .map(|p| record_point(&generator.local_terms(p)?, p, alpha, kind, tol))
        .collect()
}

/// Reduces per-point records into a report. `records` must be non-empty.
pub fn summarize<T: Scalar>(
    records: Vec<PointRecord<T>>,
    kind: CheckKind,
    alpha: &ClassKeFn,
    plan: &SamplingPlan,
    options: &CheckOptions,
) -> VerificationReport<T> {
    assert!(!records.is_empty(), "summarize needs at least one record");
    let m = records[0].couplings.len();
    let mut min_margin = (records[0].margin, 0usize);
    let mut margin_violations = 0;
    let mut coupling_violations = 0;
    let mut max_channel = vec![T::zero(); m];
    let mut max_sum = T::zero();
    let mut worst: Option<(T, Witness<T>)> = None;
    let mut consider = |magnitude: T, w: Witness<T>| {
        if worst.as_ref().is_none_or(|(best, _)| magnitude > *best) {
            worst = Some((magnitude, w));
        }
    };
    for (idx, r) in records.iter().enumerate() {
        if r.margin < min_margin.0 {
            min_margin = (r.margin, idx);
        }
        if r.margin < -r.tol_i {
            margin_violations += 1;
            consider(
                -r.margin,
                Witness {
                    point: r.point.clone(),
                    violated: Violated::GeneratorInequality,
                    value: r.margin,
                    tolerance: r.tol_i,
                },
            );
        }
        if kind == CheckKind::Szbf {
            let mut violated_here = false;
            for (k, max_k) in max_channel.iter_mut().enumerate() {
                *max_k = max_k.max(r.couplings[k].abs());
                if options.coupling_mode == CouplingMode::PerChannel && r.couplings[k].abs() > r.tol_ii[k] {
                    violated_here = true;
                    consider(
                        r.couplings[k].abs(),
                        Witness {
                            point: r.point.clone(),
                            violated: Violated::CouplingChannel(k + 1),
                            value: r.couplings[k],
                            tolerance: r.tol_ii[k],
                        },
                    );
                }
            }
            max_sum = max_sum.max(r.coupling_sum.abs());
            if r.coupling_sum.abs() > r.tol_sum {
                violated_here = true;
                consider(
                    r.coupling_sum.abs(),
                    Witness {
                        point: r.point.clone(),
                        violated: Violated::CouplingSum,
                        value: r.coupling_sum,
                        tolerance: r.tol_sum,
                    },
                );
            }
            if violated_here {
                coupling_violations += 1;
            }
        }
    }
    let points_in_c = records.iter().filter(|r| r.h >= T::zero()).count();
    let condition_ii = (kind == CheckKind::Szbf).then_some(CouplingVerdict {
        mode: options.coupling_mode,
        holds: coupling_violations == 0,
        max_abs_per_channel: max_channel,
        max_abs_sum: max_sum,
        violations: coupling_violations,
    });
    let conclusion = if worst.is_some() {
        Conclusion::Refuted
    } else if points_in_c == 0 {
        Conclusion::Inconclusive
    } else {
        Conclusion::CertifiedOnSamples
    };
    let (worst_violation, witness) = match worst {
        Some((v, w)) => (v, Some(w)),
        None => (T::zero(), None),
    };
    let tol_ii = match options.coupling_mode {
        CouplingMode::PerChannel => "f*(1+|grad h|*|sigma_k|) per channel; f*(1+sum_k |grad h|*|sigma_k|) for the sum",
        CouplingMode::SumOnly => "f*(1+sum_k |grad h|*|sigma_k|) for the channel sum only",
    };
    VerificationReport {
        check: kind,
        conclusion,
        points_checked: records.len(),
        points_in_c,
        condition_i: MarginVerdict {
            holds: margin_violations == 0,
            min_margin: min_margin.0,
            min_margin_point: records[min_margin.1].point.clone(),
            violations: margin_violations,
        },
        condition_ii,
        worst_violation,
        witness,
        tolerances: ToleranceEcho {
            rel_factor: options.tol_factor,
            tol_i: match kind {
                CheckKind::Szbf => "f*(1+|Lh|+|alpha(h)|)".into(),
                CheckKind::ZbfDriftOnly => "f*(1+|grad h . b|+|alpha(h)|)".into(),
            },
            tol_ii: tol_ii.into(),
        },
        alpha: alpha.clone(),
        plan: plan.clone(),
        records,
    }
}

/// Checks `Lh >= -alpha(h)` and vanishing diffusion coupling at every plan point.
pub fn check_szbf<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    alpha: &ClassKeFn,
    domain: &Region,
    plan: &SamplingPlan,
    options: &CheckOptions,
) -> Result<VerificationReport<T>> {
    let records = evaluate_records(model, h, alpha, domain, plan, CheckKind::Szbf, options.tol_factor)?;
    Ok(summarize(records, CheckKind::Szbf, alpha, plan, options))
}

/// Checks the deterministic condition `grad h . b >= -alpha(h)`, ignoring diffusion.
pub fn check_zbf_drift_only<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    alpha: &ClassKeFn,
    domain: &Region,
    plan: &SamplingPlan,
    options: &CheckOptions,
) -> Result<VerificationReport<T>> {
    let records =
        evaluate_records(model, h, alpha, domain, plan, CheckKind::ZbfDriftOnly, options.tol_factor)?;
    Ok(summarize(records, CheckKind::ZbfDriftOnly, alpha, plan, options))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTermVerdict<T = f64> {
    pub holds: bool,
    pub max_abs: T,
    pub witness: Option<Point<T>>,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma1Conclusion {
    /// Both hypotheses hold and the drift-only ZBF check certifies, so `h` is a SZBF.
    SzbfByLemma,
    /// Hypotheses hold but the diffusion-free part is not certified.
    DriftNotCertified,
    /// A hypothesis fails; the lemma says nothing (it is sufficient, not necessary).
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report<T = f64> {
    /// Second-order diffusion term `1/2 sum sigma sigma H` vanishes.
    pub condition_i: ZeroTermVerdict<T>,
    /// Every coupling `grad h . sigma_k` vanishes.
    pub condition_ii: ZeroTermVerdict<T>,
    pub hypotheses_hold: bool,
    pub conclusion: Lemma1Conclusion,
    pub drift_only: VerificationReport<T>,
    pub szbf: VerificationReport<T>,
    /// When the lemma asserts SZBF: whether `check_szbf` agrees.
    pub cross_validated: Option<bool>,
    /// Largest `|margin_szbf - margin_drift|` over the shared sample set.
    pub max_margin_gap: T,
    pub points_checked: usize,
}

/// Evaluates both Lemma 1 hypotheses and runs the drift-only and SZBF checks on
/// the same points so their conclusions can be compared.
pub fn check_lemma1<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    alpha: &ClassKeFn,
    domain: &Region,
    plan: &SamplingPlan,
    options: &CheckOptions,
) -> Result<Lemma1Report<T>> {
    let generator = Generator::new(model, h)?;
    let points: Vec<Point<T>> = plan.points(domain, h)?;
    let tol = T::lit(options.tol_factor);
    let terms: Vec<LocalTerms<T>> =
        points.par_iter().map(|p| generator.local_terms(p)).collect::<Result<_>>()?;

    let mut cond_i = ZeroTermVerdict { holds: true, max_abs: T::zero(), witness: None, violations: 0 };
    let mut cond_ii = cond_i.clone();
    let (mut worst_i, mut worst_ii) = (T::zero(), T::zero());
    let one = T::one();
    for (p, t) in points.iter().zip(&terms) {
        let so = t.second_order.abs();
        cond_i.max_abs = cond_i.max_abs.max(so);
        if so > tol * (one + t.second_order_scale) {
            cond_i.violations += 1;
            if so >= worst_i {
                worst_i = so;
                cond_i.witness = Some(p.clone());
            }
        }
        let g = norm(&t.grad);
        let mut worst_here = None;
        for (c, s) in t.couplings.iter().zip(&t.diffusion) {
            let c = c.abs();
            cond_ii.max_abs = cond_ii.max_abs.max(c);
            if c > tol * (one + g * norm(s)) {
                worst_here = Some(worst_here.map_or(c, |w: T| w.max(c)));
            }
        }
        if let Some(c) = worst_here {
            cond_ii.violations += 1;
            if c >= worst_ii {
                worst_ii = c;
                cond_ii.witness = Some(p.clone());
            }
        }
    }
    cond_i.holds = cond_i.violations == 0;
    cond_ii.holds = cond_ii.violations == 0;

    let build = |kind| -> Result<Vec<PointRecord<T>>> {
        points.iter().zip(&terms).map(|(p, t)| record_point(t, p, alpha, kind, tol)).collect()
    };
    let drift_records = build(CheckKind::ZbfDriftOnly)?;
    let szbf_records = build(CheckKind::Szbf)?;
    let max_margin_gap = drift_records
        .iter()
        .zip(&szbf_records)
        .map(|(a, b)| (a.margin - b.margin).abs())
        .fold(T::zero(), T::max);
    let drift_only = summarize(drift_records, CheckKind::ZbfDriftOnly, alpha, plan, options);
    let szbf = summarize(szbf_records, CheckKind::Szbf, alpha, plan, options);

    let hypotheses_hold = cond_i.holds && cond_ii.holds;
    let conclusion = match (hypotheses_hold, drift_only.is_certified()) {
        (false, _) => Lemma1Conclusion::NotApplicable,
        (true, true) => Lemma1Conclusion::SzbfByLemma,
        (true, false) => Lemma1Conclusion::DriftNotCertified,
    };
    let cross_validated = (conclusion == Lemma1Conclusion::SzbfByLemma).then(|| szbf.is_certified());
    Ok(Lemma1Report {
        condition_i: cond_i,
        condition_ii: cond_ii,
        hypotheses_hold,
        conclusion,
        drift_only,
        szbf,
        cross_validated,
        max_margin_gap,
        points_checked: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;
    use crate::region::BoxRegion;

    fn disk_h() -> Expr {
        parse("1 - x1^2 - x2^2", 2).unwrap()
    }

    fn square(half: f64) -> Region {
        Region::Box(BoxRegion::symmetric(2, half).unwrap())
    }

    #[test]
    fn ou_fails_coupling_condition() {
        let ou = SdeModel::from_strs("ou", &["-x1"], &[&["0.5"]]).unwrap();
        let h = parse("1 - x1^2", 1).unwrap();
        let d = Region::Box(BoxRegion::symmetric(1, 1.5).unwrap());
        let r: VerificationReport = check_szbf(&ou, &h, &ClassKeFn::linear(1.0), &d, &SamplingPlan::grid(31), &CheckOptions::default())
            .unwrap();
        assert!(r.is_refuted());
        let w = r.witness.unwrap();
        assert!(matches!(w.violated, Violated::CouplingChannel(1) | Violated::CouplingSum));
        // coupling = -2x * 0.5 = -x
        assert!((w.value + w.point[0]).abs() < 1e-12);
    }

    #[test]
    fn sum_only_mode_accepts_cancelling_channels() {
        // sigma_1 = (1, 0), sigma_2 = (-1, 0): channels couple, the sum does not
        let m = SdeModel::from_strs("cancel", &["0", "0"], &[&["1", "0"], &["-1", "0"]]).unwrap();
        let h = parse("1 - x1", 2).unwrap();
        let alpha = ClassKeFn::linear(1.0);
        let plan = SamplingPlan::grid(5);
        let d = square(0.5);
        let per: VerificationReport = check_szbf(&m, &h, &alpha, &d, &plan, &CheckOptions::default()).unwrap();
        assert!(per.is_refuted());
        let sum_only = CheckOptions { coupling_mode: CouplingMode::SumOnly, ..Default::default() };
        let lit: VerificationReport = check_szbf(&m, &h, &alpha, &d, &plan, &sum_only).unwrap();
        assert!(lit.is_certified(), "{:?}", lit.witness);
    }

    #[test]
    fn drift_only_depends_on_domain() {
        let still = SdeModel::from_strs("still", &["0", "0"], &[&["0", "0"]]).unwrap();
        let alpha = ClassKeFn::linear(1.0);
        let r: VerificationReport = check_zbf_drift_only(
            &still,
            &disk_h(),
            &alpha,
            &square(1.2),
            &SamplingPlan::grid(3),
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(r.is_refuted());
        let w = r.witness.unwrap();
        // margin = h, most negative at the corners: 1 - 2 * 1.44
        assert!((w.value + 1.88).abs() < 1e-12);
        let inside_c = Region::Superlevel { g: disk_h(), bounds: BoxRegion::symmetric(2, 1.2).unwrap() };
        let r: VerificationReport = check_zbf_drift_only(
            &still,
            &disk_h(),
            &alpha,
            &inside_c,
            &SamplingPlan::grid(41),
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(r.is_certified());
    }

    #[test]
    fn inconclusive_when_no_sample_in_c() {
        let m = SdeModel::from_strs("m", &["0"], &[&["0"]]).unwrap();
        let h = parse("-1 - x1^2", 1).unwrap();
        let alpha = ClassKeFn::linear(1.0);
        let d = Region::Box(BoxRegion::symmetric(1, 1.0).unwrap());
        // margin = alpha(h) < 0 everywhere
        let r: VerificationReport = check_zbf_drift_only(&m, &h, &alpha, &d, &SamplingPlan::grid(5), &CheckOptions::default()).unwrap();
        assert!(r.is_refuted());
        let m = SdeModel::from_strs("m", &["-x1"], &[&["0"]]).unwrap();
        let h = parse("-1 - x1^2", 1).unwrap();
        // grad h . b = 2 x^2 dominates alpha(h) on [2, 3], but C misses D
        let alpha = ClassKeFn::linear(1e-3);
        let d = Region::Box(BoxRegion::new(vec![2.0], vec![3.0]).unwrap());
        let r: VerificationReport = check_zbf_drift_only(&m, &h, &alpha, &d, &SamplingPlan::grid(5), &CheckOptions::default()).unwrap();
        assert_eq!(r.conclusion, Conclusion::Inconclusive);
    }

    #[test]
    fn domain_errors_abort_with_point() {
        let m = SdeModel::from_strs("m", &["log(x1)"], &[&["0"]]).unwrap();
        let h = parse("x1", 1).unwrap();
        let d = Region::Box(BoxRegion::symmetric(1, 1.0).unwrap());
        let err = check_szbf::<f64>(&m, &h, &ClassKeFn::linear(1.0), &d, &SamplingPlan::grid(3), &CheckOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::EvalAt { ref point, .. } if point == &vec![-1.0]), "{err}");
    }
}
