//! The theory-check harness: per-lemma invariant monitors, capture-set and
//! concentration statistics of the Gaussian initialization, power-iteration
//! operator-norm estimation, and trajectory judges for the loss-dependent
//! schedule.
//!
//! Asymptotic `o(1)` slack in the concentration statement is replaced by
//! fixed desk-scale tolerance bands (see [`Lemma9Bands`]); those bands are
//! calibration constants of this harness, not claims carried by the theory.

use crate::activation::ActivationKind;
use crate::data::{dot, ClusterSpec, Dataset};
use crate::io::fmt_f64;
use crate::model::{grad, hvp, loss, ModelError, ParamMatrix};
use crate::rng::seeded_rng;
use crate::schedule::{q1_tilde, q2_tilde, ScheduleError};
use crate::trainer::{IterationRecord, TrainConfig};
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Hidden units that capture each example by the margin `h + 4 alpha0`,
/// split by whether their fixed output sign matches the label (`plus`) or
/// opposes it (`minus`). Indices are 0-based unit indices into `[0, 2p)`.
#[derive(Debug, Clone)]
pub struct CaptureSets {
    pub plus: Vec<Vec<usize>>,
    pub minus: Vec<Vec<usize>>,
}

/// `I_{+s}` and `I_{-s}`: units with `v_i . x_s >= h + 4 alpha0`, divided by
/// output sign relative to the label.
pub fn capture_sets(
    v0: &ParamMatrix,
    data: &Dataset,
    h: f64,
    alpha0: f64,
) -> Result<CaptureSets, VerifyError> {
    if data.dim() != v0.dim() {
        return Err(VerifyError::Model(ModelError::Shape { expected: v0.dim(), got: data.dim() }));
    }
    let threshold = h + 4.0 * alpha0;
    let mut plus = Vec::with_capacity(data.len());
    let mut minus = Vec::with_capacity(data.len());
    for s in 0..data.len() {
        let x = data.feature(s);
        let y = data.label(s);
        let mut ip = Vec::new();
        let mut im = Vec::new();
        for i in 0..v0.rows() {
            if dot(v0.row(i), x) >= threshold {
                if v0.output_sign(i) == y {
                    ip.push(i);
                } else {
                    im.push(i);
                }
            }
        }
        plus.push(ip);
        minus.push(im);
    }
    Ok(CaptureSets { plus, minus })
}

/// Desk-scale tolerance bands for the concentration checks.
#[derive(Debug, Clone)]
pub struct Lemma9Bands {
    /// Capture-set sizes must land in `[lo, hi] * p`.
    pub size_lo: f64,
    pub size_hi: f64,
    /// Initial gradient weights must land in `[g0_lo, g0_hi]`.
    pub g0_lo: f64,
    pub g0_hi: f64,
    /// Additive slack `tol * p` for the count and sum comparisons.
    pub additive_tol: f64,
}

impl Default for Lemma9Bands {
    fn default() -> Self {
        Lemma9Bands { size_lo: 0.45, size_hi: 0.55, g0_lo: 0.4, g0_hi: 0.6, additive_tol: 0.05 }
    }
}

/// One named concentration check with its verdict and worst witness.
#[derive(Debug, Clone)]
pub struct PartVerdict {
    pub name: &'static str,
    pub passed: bool,
    pub worst_value: f64,
    pub threshold: f64,
    pub witness: String,
}

/// Empirical concentration statistics of one random initialization, checked
/// against the desk-scale bands.
#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub capture_plus_sizes: Vec<usize>,
    pub capture_minus_sizes: Vec<usize>,
    pub g0: Vec<f64>,
    /// Per-sample `sum_{I+} v.x - sum_{I-} v.x`.
    pub capture_sum_gap: Vec<f64>,
    /// Per cluster, units capturing every sample of the cluster, for the
    /// matching and opposing output sign.
    pub all_capture_plus: [usize; 4],
    pub all_capture_minus: [usize; 4],
    /// Largest cross-label co-capture count over ordered pairs.
    pub worst_co_capture: usize,
    /// Largest middle-band count over samples.
    pub worst_middle_band: usize,
    pub v1_norm: f64,
    pub v1_bracket: (f64, f64),
    /// Gaussian-tail prediction of the capture fraction at these scales
    /// (diagnostic only; the bands above are what is asserted).
    pub predicted_capture_fraction: f64,
    /// True when `sigma = 0` left every capture set empty and the
    /// concentration checks do not apply.
    pub inapplicable: bool,
    pub parts: Vec<PartVerdict>,
}

impl ConcentrationReport {
    pub fn all_passed(&self) -> bool {
        self.parts.iter().all(|p| p.passed)
    }
}

fn normal_upper_tail(z: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 erfc approximation, enough for diagnostics
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erfc = poly * (-x * x).exp();
    if z >= 0.0 {
        0.5 * erfc
    } else {
        1.0 - 0.5 * erfc
    }
}

/// Check every part of the initialization-concentration statement on one
/// draw: capture sums, capture sizes, initial gradient weights, per-cluster
/// all-capture counts, cross-label co-capture counts, middle-band counts, and
/// the norm bracket for the post-first-step weights.
pub fn concentration_report(
    v0: &ParamMatrix,
    v1: &ParamMatrix,
    data: &Dataset,
    config: &TrainConfig,
    spec: &ClusterSpec,
    bands: &Lemma9Bands,
) -> Result<ConcentrationReport, VerifyError> {
    let clusters = data
        .cluster_of()
        .ok_or_else(|| VerifyError::InvalidInput("concentration checks need cluster tags".into()))?;
    let n = data.len();
    let p = config.p as f64;
    let h = config.h;
    let alpha0 = config.alpha0;
    let sigma = config.sigma;
    let caps = capture_sets(v0, data, h, alpha0)?;

    let mut parts = Vec::new();

    // preactivations, reused by several parts
    let pre: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..v0.rows()).map(|i| dot(v0.row(i), data.feature(s))).collect())
        .collect();

    let capture_plus_sizes: Vec<usize> = caps.plus.iter().map(Vec::len).collect();
    let capture_minus_sizes: Vec<usize> = caps.minus.iter().map(Vec::len).collect();
    let inapplicable = sigma == 0.0
        && capture_plus_sizes.iter().all(|&c| c == 0)
        && capture_minus_sizes.iter().all(|&c| c == 0);

    // part 1 surrogate: sum_{I+} v.x >= sum_{I-} v.x - 2 - tol*p
    let mut capture_sum_gap = Vec::with_capacity(n);
    {
        let mut worst = f64::INFINITY;
        let mut who = 0;
        for s in 0..n {
            let sp: f64 = caps.plus[s].iter().map(|&i| pre[s][i]).sum();
            let sm: f64 = caps.minus[s].iter().map(|&i| pre[s][i]).sum();
            let gap = sp - sm;
            if gap < worst {
                worst = gap;
                who = s;
            }
            capture_sum_gap.push(gap);
        }
        let threshold = -2.0 - bands.additive_tol * p;
        parts.push(PartVerdict {
            name: "capture-sum-gap",
            passed: worst >= threshold,
            worst_value: worst,
            threshold,
            witness: format!("sample {who}"),
        });
    }

    // part 2: capture-set sizes inside [size_lo, size_hi] * p
    {
        let mut worst_dev = 0.0f64;
        let mut worst_size = 0.0f64;
        let mut who = String::new();
        let mut ok = true;
        for s in 0..n {
            for (tag, size) in [("+", capture_plus_sizes[s]), ("-", capture_minus_sizes[s])] {
                let frac = size as f64 / p;
                let dev = (frac - 0.5).abs();
                if dev > worst_dev {
                    worst_dev = dev;
                    worst_size = frac;
                    who = format!("sample {s} (I{tag})");
                }
                if frac < bands.size_lo || frac > bands.size_hi {
                    ok = false;
                }
            }
        }
        parts.push(PartVerdict {
            name: "capture-set-sizes",
            passed: ok,
            worst_value: worst_size,
            threshold: bands.size_lo,
            witness: who,
        });
    }

    // part 3: g0 in [g0_lo, g0_hi]
    let rep0 = loss(v0, data, config.kind)?;
    {
        let mut worst = 0.5f64;
        let mut who = 0;
        let mut ok = true;
        for (s, &g) in rep0.g.iter().enumerate() {
            if (g - 0.5).abs() > (worst - 0.5).abs() {
                worst = g;
                who = s;
            }
            if g < bands.g0_lo || g > bands.g0_hi {
                ok = false;
            }
        }
        parts.push(PartVerdict {
            name: "initial-gradient-weights",
            passed: ok,
            worst_value: worst,
            threshold: bands.g0_lo,
            witness: format!("sample {who}"),
        });
    }

    // part 4: per-cluster all-capture counts >= ((1 - sqrt r)/2 - tol) p
    let mut all_capture_plus = [0usize; 4];
    let mut all_capture_minus = [0usize; 4];
    {
        let threshold = ((1.0 - spec.radius.sqrt()) / 2.0 - bands.additive_tol) * p;
        let mut worst = f64::INFINITY;
        let mut who = String::new();
        for k in 1..=4usize {
            let members: Vec<usize> = (0..n).filter(|&s| clusters[s] == k).collect();
            if members.is_empty() {
                continue;
            }
            for (tag, sets, slot) in [
                ("+", &caps.plus, &mut all_capture_plus),
                ("-", &caps.minus, &mut all_capture_minus),
            ] {
                let count = (0..v0.rows())
                    .filter(|i| members.iter().all(|&s| sets[s].binary_search(i).is_ok()))
                    .count();
                slot[k - 1] = count;
                if (count as f64) < worst {
                    worst = count as f64;
                    who = format!("cluster {k} (I{tag})");
                }
            }
        }
        parts.push(PartVerdict {
            name: "per-cluster-all-capture",
            passed: worst >= threshold,
            worst_value: worst,
            threshold,
            witness: who,
        });
    }

    // part 5: cross-label co-capture <= (1/3 + delta/4 + r + tol) p
    let mut worst_co_capture = 0usize;
    {
        let threshold = (1.0 / 3.0 + spec.separation / 4.0 + spec.radius + bands.additive_tol) * p;
        let mut who = (0usize, 0usize);
        for s in 0..n {
            for q in 0..n {
                if data.label(s) == data.label(q) {
                    continue;
                }
                for sets in [&caps.plus, &caps.minus] {
                    let count = sets[s].iter().filter(|&&i| pre[q][i] >= 0.0).count();
                    if count > worst_co_capture {
                        worst_co_capture = count;
                        who = (s, q);
                    }
                }
            }
        }
        parts.push(PartVerdict {
            name: "cross-label-co-capture",
            passed: (worst_co_capture as f64) <= threshold,
            worst_value: worst_co_capture as f64,
            threshold,
            witness: format!("pair ({},{})", who.0, who.1),
        });
    }

    // part 6: middle-band counts against (sqrt2/(sigma sqrt pi))(h + 5 a0 (2 + delta + r)) p
    let mut worst_middle_band = 0usize;
    {
        let lo = -alpha0 * (0.5 + 2.0 * (spec.separation + spec.radius));
        let hi = h + 4.0 * alpha0;
        let mut who = 0usize;
        for s in 0..n {
            let y = data.label(s);
            let count = (0..v0.rows())
                .filter(|&i| v0.output_sign(i) != y && pre[s][i] >= lo && pre[s][i] <= hi)
                .count();
            if count > worst_middle_band {
                worst_middle_band = count;
                who = s;
            }
        }
        let threshold = if sigma > 0.0 {
            (std::f64::consts::SQRT_2 / (sigma * std::f64::consts::PI.sqrt()))
                * (h + 5.0 * alpha0 * (2.0 + spec.separation + spec.radius))
                * p
        } else {
            f64::INFINITY
        };
        parts.push(PartVerdict {
            name: "middle-band-count",
            passed: (worst_middle_band as f64) <= threshold,
            worst_value: worst_middle_band as f64,
            threshold,
            witness: format!("sample {who}"),
        });
    }

    // part 7: ||V1|| inside [(3/5) sqrt(d/p^beta), 3 sqrt(d/p^beta)], with d
    // the pre-lifting input dimension of the cluster spec
    let v1_norm = v1.norm();
    let scale = ((spec.dim() as f64) / p.powf(config.beta)).sqrt();
    let v1_bracket = (0.6 * scale, 3.0 * scale);
    parts.push(PartVerdict {
        name: "first-step-norm-bracket",
        passed: v1_norm >= v1_bracket.0 && v1_norm <= v1_bracket.1,
        worst_value: v1_norm,
        threshold: v1_bracket.0,
        witness: "||V(1)||".into(),
    });

    let predicted_capture_fraction = if sigma > 0.0 {
        normal_upper_tail((h + 4.0 * alpha0) / sigma)
    } else {
        0.0
    };

    Ok(ConcentrationReport {
        capture_plus_sizes,
        capture_minus_sizes,
        g0: rep0.g,
        capture_sum_gap,
        all_capture_plus,
        all_capture_minus,
        worst_co_capture,
        worst_middle_band,
        v1_norm,
        v1_bracket,
        predicted_capture_fraction,
        inapplicable,
        parts,
    })
}

/// Power-iteration outcome: a lower-bound estimate of the operator norm and
/// the relative change of the estimate on the last iteration.
#[derive(Debug, Clone, Copy)]
pub struct OpNormEstimate {
    pub estimate: f64,
    pub convergence: f64,
    pub iters: usize,
}

/// Estimate the operator norm of the weak Hessian by power iteration on the
/// Hessian-vector product from a seeded random start. The Rayleigh-quotient
/// magnitude of any unit vector never exceeds the true operator norm, so the
/// estimate is a valid lower bound regardless of convergence.
pub fn op_norm_estimate(
    v: &ParamMatrix,
    data: &Dataset,
    kind: ActivationKind,
    iters: usize,
    seed: u64,
) -> Result<OpNormEstimate, VerifyError> {
    if iters == 0 {
        return Err(VerifyError::InvalidInput("power iteration needs iters > 0".into()));
    }
    let mut rng = seeded_rng(seed);
    let len = v.as_slice().len();
    let mut w = {
        let data: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        ParamMatrix::from_flat(v.half_width(), v.dim(), data).map_err(VerifyError::Model)?
    };
    let mut estimate = 0.0f64;
    let mut convergence = f64::INFINITY;
    let mut used = 0;
    for k in 0..iters {
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        w.scale(1.0 / nw);
        let hw = hvp(v, data, &w, kind)?;
        let rayleigh = hw.inner(&w).abs();
        convergence = if estimate > 0.0 {
            (rayleigh - estimate).abs() / estimate.max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        estimate = rayleigh;
        used = k + 1;
        if hw.norm() == 0.0 {
            break;
        }
        w = hw;
    }
    Ok(OpNormEstimate { estimate, convergence, iters: used })
}

/// The gradient-norm ceiling `||grad|| <= sqrt(2p) min{L, 1}`; returns the
/// measured norm, the bound, and the verdict at `1e-12` absolute slack.
pub fn lemma4_check(
    v: &ParamMatrix,
    data: &Dataset,
    kind: ActivationKind,
) -> Result<(f64, f64, bool), VerifyError> {
    let rep = loss(v, data, kind)?;
    let g = grad(v, data, kind)?;
    let bound = (2.0 * v.half_width() as f64).sqrt() * rep.total.min(1.0);
    Ok((g.norm(), bound, g.norm() <= bound + 1e-12))
}

/// Per-example ordering `g_s(1 - g_s) <= g_s <= L_s`; returns the worst
/// violation margin (nonpositive when everything holds).
pub fn lemma12_check(v: &ParamMatrix, data: &Dataset, kind: ActivationKind) -> Result<f64, VerifyError> {
    let rep = loss(v, data, kind)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for s in 0..data.len() {
        let g = rep.g[s];
        let l = rep.per_example[s];
        worst = worst.max(g - l).max(g * (1.0 - g) - g);
    }
    Ok(worst)
}

/// Verdicts for one schedule-analysis run.
#[derive(Debug, Clone)]
pub struct Theorem1Verdict {
    pub preconditions_met: bool,
    pub precondition_detail: String,
    pub i1_ok: bool,
    pub i2_ok: bool,
    pub i3_ok: bool,
    /// First record index where any part failed.
    pub first_violation: Option<usize>,
    pub final_loss: f64,
    pub final_envelope: f64,
}

/// Judge a schedule-policy run: verify the small-loss precondition
/// `L1 <= 1/n^(1+C1)` and the admissibility of `Q1`, `Q2`, then check the
/// loss envelope (I1), the step-size product bound (I2) and the ratio
/// monotonicity (I3) at every record. `records[0]` is the reference iterate.
#[allow(clippy::too_many_arguments)]
pub fn judge_theorem1(
    records: &[IterationRecord],
    q1: f64,
    q2: f64,
    l1: f64,
    v1_norm: f64,
    p: usize,
    n: usize,
    c1: f64,
) -> Result<Theorem1Verdict, VerifyError> {
    if records.is_empty() {
        return Err(VerifyError::InvalidInput("no records to judge".into()));
    }
    let loss_threshold = (n as f64).powf(-(1.0 + c1));
    let mut detail = String::new();
    let mut pre_ok = true;
    if !(l1 <= loss_threshold) {
        pre_ok = false;
        let _ = write!(detail, "L1 = {l1:e} exceeds 1/n^(1+C1) = {loss_threshold:e}; ");
    }
    match q1_tilde(l1, v1_norm, p) {
        Ok(cap) => {
            if q1 > cap * (1.0 + 1e-12) {
                pre_ok = false;
                let _ = write!(detail, "Q1 = {q1:e} exceeds admissible {cap:e}; ");
            }
        }
        Err(e) => {
            pre_ok = false;
            let _ = write!(detail, "Q1 cap undefined: {e}; ");
        }
    }
    match q2_tilde(q1, l1, v1_norm) {
        Ok(cap) => {
            if q2 > cap * (1.0 + 1e-12) {
                pre_ok = false;
                let _ = write!(detail, "Q2 = {q2:e} exceeds admissible {cap:e}; ");
            }
        }
        Err(e) => {
            pre_ok = false;
            let _ = write!(detail, "Q2 cap undefined: {e}; ");
        }
    }
    if detail.is_empty() {
        detail = "ok".into();
    }

    let p30 = 1.0 / (30.0 * p as f64);
    let ratio_ref = records[0].ratio;
    let mut i1_ok = true;
    let mut i2_ok = true;
    let mut i3_ok = true;
    let mut first_violation = None;
    let mut final_envelope = l1;
    for (j, r) in records.iter().enumerate() {
        let envelope = l1 / (q2 * j as f64 + 1.0);
        final_envelope = envelope;
        let ok1 = r.loss <= envelope * (1.0 + 1e-12);
        let ok2 = !r.step_size.is_finite() || r.step_size * r.loss <= p30 * (1.0 + 1e-12);
        let ok3 = r.ratio >= ratio_ref * (1.0 - 1e-12);
        if !(ok1 && ok2 && ok3) && first_violation.is_none() {
            first_violation = Some(j);
        }
        i1_ok &= ok1;
        i2_ok &= ok2;
        i3_ok &= ok3;
    }
    Ok(Theorem1Verdict {
        preconditions_met: pre_ok,
        precondition_detail: detail,
        i1_ok,
        i2_ok,
        i3_ok,
        first_violation,
        final_loss: records.last().unwrap().loss,
        final_envelope,
    })
}

/// Alignment monitor: the cosine between the negative gradient and the
/// weights, the gradient-norm floor `5 L ln(1/L) / (6 ||V||)`, and whether
/// the measured norm clears it. `None` alignment means the weights or the
/// gradient vanish.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentReport {
    pub alignment: Option<f64>,
    pub lemma6_rhs: f64,
    pub grad_norm: f64,
    pub lower_bound_holds: bool,
}

pub fn alignment_monitor(
    v: &ParamMatrix,
    data: &Dataset,
    kind: ActivationKind,
) -> Result<AlignmentReport, VerifyError> {
    let rep = loss(v, data, kind)?;
    if rep.total >= 1.0 {
        return Err(VerifyError::Schedule(ScheduleError::LossOutOfRange(rep.total)));
    }
    let g = grad(v, data, kind)?;
    let gn = g.norm();
    let vn = v.norm();
    let alignment =
        if gn == 0.0 || vn == 0.0 { None } else { Some(-g.inner(v) / (gn * vn)) };
    let rhs = if vn == 0.0 {
        f64::INFINITY
    } else {
        5.0 * rep.total * (1.0 / rep.total).ln() / (6.0 * vn)
    };
    // Cauchy-Schwarz sanity: the norm always dominates the projected descent
    if let Some(a) = alignment {
        debug_assert!(gn + 1e-12 >= a.abs() * gn);
    }
    Ok(AlignmentReport { alignment, lemma6_rhs: rhs, grad_norm: gn, lower_bound_holds: gn >= rhs })
}

/// One row of the verdict-report CSV.
#[derive(Debug, Clone)]
pub struct VerdictRow {
    pub check: String,
    pub scope: String,
    pub passed: bool,
    pub worst_value: f64,
    pub threshold: f64,
    pub witness: String,
}

/// Render rows as `check,scope,passed,worst_value,threshold,witness`.
pub fn verdicts_to_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from("check,scope,passed,worst_value,threshold,witness\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.check,
            r.scope,
            u8::from(r.passed),
            fmt_f64(r.worst_value),
            fmt_f64(r.threshold),
            r.witness
        );
    }
    out
}
