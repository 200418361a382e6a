//! Synthetic data: the four-cluster spherical distribution behind the
//! one-step analysis, the XOR and "shoulders" Gaussian mixtures used by the
//! simulation section, the bias-lifting reduction, and validators for every
//! assumption the convergence results consume.

use crate::io::{fmt_f64, write_atomic};
use crate::rng::seeded_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cluster spec violates assumption `{assumption}`: {detail}")]
    SpecValidation { assumption: String, detail: String },
    #[error("csv parse error at line {line}: {detail}")]
    CsvParse { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A finite training set: flat row-major features, +/-1 labels, optional
/// cluster tags (indices 1..=4), and a flag recording whether the features
/// have already been through the bias-lifting map.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    cluster_of: Option<Vec<usize>>,
    lifted: bool,
}

impl Dataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        cluster_of: Option<Vec<usize>>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::InvalidInput("dimension must be positive".into()));
        }
        if labels.is_empty() {
            return Err(DataError::InvalidInput("empty dataset".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(DataError::InvalidInput(format!(
                "feature buffer has {} entries, expected {}",
                features.len(),
                dim * labels.len()
            )));
        }
        if let Some(y) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
            return Err(DataError::InvalidInput(format!("label {y} is not +/-1")));
        }
        if let Some(c) = &cluster_of {
            if c.len() != labels.len() {
                return Err(DataError::InvalidInput("cluster tags length mismatch".into()));
            }
            if let Some(k) = c.iter().find(|k| !(1..=4).contains(*k)) {
                return Err(DataError::InvalidInput(format!("cluster index {k} outside 1..=4")));
            }
        }
        Ok(Dataset { dim, features, labels, cluster_of, lifted: false })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature(&self, s: usize) -> &[f64] {
        &self.features[s * self.dim..(s + 1) * self.dim]
    }

    pub fn label(&self, s: usize) -> f64 {
        self.labels[s]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn cluster_of(&self) -> Option<&[usize]> {
        self.cluster_of.as_deref()
    }

    /// Whether this dataset is the image of `lift_dataset`.
    pub fn is_lifted(&self) -> bool {
        self.lifted
    }

    /// Worst deviation of any feature norm from 1.
    pub fn worst_norm_deviation(&self) -> f64 {
        (0..self.len())
            .map(|s| (norm(self.feature(s)) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Append a constant coordinate to every feature; used by the trainer's
    /// explicit-bias mode, where the bias is the weight on this coordinate.
    pub fn with_appended_constant(&self, value: f64) -> Dataset {
        let n = self.len();
        let mut features = Vec::with_capacity(n * (self.dim + 1));
        for s in 0..n {
            features.extend_from_slice(self.feature(s));
            features.push(value);
        }
        Dataset {
            dim: self.dim + 1,
            features,
            labels: self.labels.clone(),
            cluster_of: self.cluster_of.clone(),
            lifted: self.lifted,
        }
    }

    /// Rescale every feature by `c` (the equivalence checker uses this with
    /// `c = 1/sqrt(2)` after appending the constant coordinate).
    pub fn scaled(&self, c: f64) -> Dataset {
        let mut out = self.clone();
        for x in &mut out.features {
            *x *= c;
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform random direction on the unit sphere.
pub(crate) fn random_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// The four-cluster assumption bundle: unit centers `mu_k` (clusters 1 and 2
/// labelled +1, clusters 3 and 4 labelled -1), radius `r`, cross-label center
/// separation `delta`, balance slack `epsilon`, and total sample count `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub centers: [Vec<f64>; 4],
    pub radius: f64,
    pub separation: f64,
    pub balance: f64,
    pub n: usize,
}

impl ClusterSpec {
    /// Label shared by every sample of cluster `k` (1-based).
    pub fn label_of(k: usize) -> f64 {
        if k <= 2 {
            1.0
        } else {
            -1.0
        }
    }

    /// Orthonormal-basis centers in dimension `d >= 4`; every pairwise inner
    /// product is zero, so any `delta >= 0` separation holds.
    pub fn orthonormal(d: usize, radius: f64, separation: f64, balance: f64, n: usize) -> Result<Self, DataError> {
        if d < 4 {
            return Err(DataError::InvalidInput(format!(
                "orthonormal centers need d >= 4, got {d}"
            )));
        }
        let mut centers: [Vec<f64>; 4] = Default::default();
        for (k, c) in centers.iter_mut().enumerate() {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            *c = v;
        }
        Ok(ClusterSpec { centers, radius, separation, balance, n })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Check the spec's own consistency: unit centers, cross-label
    /// separation, balance feasibility, radius range.
    pub fn validate(&self) -> Result<(), DataError> {
        for (k, c) in self.centers.iter().enumerate() {
            if c.len() != self.dim() {
                return Err(DataError::SpecValidation {
                    assumption: "center-dimensions".into(),
                    detail: format!("center {} has dimension {}", k + 1, c.len()),
                });
            }
            let nn = norm(c);
            if (nn - 1.0).abs() > 1e-12 {
                return Err(DataError::SpecValidation {
                    assumption: "unit-center-norm".into(),
                    detail: format!("||mu_{}|| = {nn}", k + 1),
                });
            }
        }
        for k in 1..=4usize {
            for l in 1..=4usize {
                if ClusterSpec::label_of(k) != ClusterSpec::label_of(l) {
                    let ip = dot(&self.centers[k - 1], &self.centers[l - 1]);
                    if ip > self.separation + 1e-12 {
                        return Err(DataError::SpecValidation {
                            assumption: "center-separation".into(),
                            detail: format!(
                                "mu_{k} . mu_{l} = {ip} exceeds delta = {}",
                                self.separation
                            ),
                        });
                    }
                }
            }
        }
        if self.balance < 0.0 {
            return Err(DataError::SpecValidation {
                assumption: "cluster-balance".into(),
                detail: format!("epsilon = {} is negative", self.balance),
            });
        }
        if !(self.radius >= 0.0 && self.radius < 1.0) {
            return Err(DataError::SpecValidation {
                assumption: "cluster-radius".into(),
                detail: format!("radius {} outside [0, 1)", self.radius),
            });
        }
        if self.n == 0 {
            return Err(DataError::SpecValidation {
                assumption: "sample-count".into(),
                detail: "n = 0".into(),
            });
        }
        let sizes = cluster_sizes(self.n);
        let lo = (0.25 - self.balance) * self.n as f64;
        let hi = (0.25 + self.balance) * self.n as f64;
        for (k, &nk) in sizes.iter().enumerate() {
            if (nk as f64) < lo - 1e-12 || (nk as f64) > hi + 1e-12 {
                return Err(DataError::SpecValidation {
                    assumption: "cluster-balance".into(),
                    detail: format!(
                        "cluster {} would hold {nk} of {} samples, outside [{lo}, {hi}]",
                        k + 1,
                        self.n
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Deterministic largest-remainder split of `n` samples over 4 clusters.
fn cluster_sizes(n: usize) -> [usize; 4] {
    let base = n / 4;
    let rem = n % 4;
    let mut sizes = [base; 4];
    for s in sizes.iter_mut().take(rem) {
        *s += 1;
    }
    sizes
}

/// Gaussian-mixture description for the simulation-section data.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    /// (mean, label) pairs; at least one component per label.
    pub components: Vec<(Vec<f64>, f64)>,
    /// Isotropic covariance multiplier (covariance = scale * I).
    pub covariance_scale: f64,
    pub n: usize,
}

impl MixtureSpec {
    /// XOR mixture: positive means at (s, -s) and (-s, s), negative means at
    /// (s, s) and (-s, -s) with s = sqrt(1/2); covariance I/100.
    pub fn xor(n: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        MixtureSpec {
            components: vec![
                (vec![s, -s], 1.0),
                (vec![-s, s], 1.0),
                (vec![s, s], -1.0),
                (vec![-s, -s], -1.0),
            ],
            covariance_scale: 0.01,
            n,
        }
    }

    /// "Shoulders" mixture: positive means move to (1,0) and (0,1), crowding
    /// the negative center at (s, s); negative means as in the XOR mixture.
    pub fn shoulders(n: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        MixtureSpec {
            components: vec![
                (vec![1.0, 0.0], 1.0),
                (vec![0.0, 1.0], 1.0),
                (vec![s, s], -1.0),
                (vec![-s, -s], -1.0),
            ],
            covariance_scale: 0.01,
            n,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |(m, _)| m.len())
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.n == 0 {
            return Err(DataError::InvalidInput("mixture sample count must be positive".into()));
        }
        if !(self.covariance_scale >= 0.0) {
            return Err(DataError::InvalidInput(format!(
                "covariance scale {} must be nonnegative",
                self.covariance_scale
            )));
        }
        for lbl in [1.0, -1.0] {
            if !self.components.iter().any(|(_, y)| *y == lbl) {
                return Err(DataError::InvalidInput(format!("no mixture component with label {lbl}")));
            }
        }
        let d = self.dim();
        if d == 0 || self.components.iter().any(|(m, _)| m.len() != d) {
            return Err(DataError::InvalidInput("mixture component dimensions disagree".into()));
        }
        Ok(())
    }
}

/// Sample the clustered spherical distribution: each point is its cluster
/// center pushed along a uniform tangent direction by a radius drawn uniformly
/// from the tangent ball of radius `r`, then renormalized, rejecting the rare
/// draw that lands farther than `r` from the center.
pub fn generate_clusters(spec: &ClusterSpec, seed: u64) -> Result<Dataset, DataError> {
    spec.validate()?;
    let d = spec.dim();
    if spec.radius > 0.0 && d < 2 {
        return Err(DataError::SpecValidation {
            assumption: "cluster-radius".into(),
            detail: "positive radius needs dimension >= 2".into(),
        });
    }
    let sizes = cluster_sizes(spec.n);
    let mut rng = seeded_rng(seed);
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    let mut clusters = Vec::with_capacity(spec.n);
    for k in 1..=4usize {
        let mu = &spec.centers[k - 1];
        for _ in 0..sizes[k - 1] {
            let x = if spec.radius == 0.0 {
                mu.clone()
            } else {
                sample_near_center(mu, spec.radius, &mut rng)
            };
            features.extend_from_slice(&x);
            labels.push(ClusterSpec::label_of(k));
            clusters.push(k);
        }
    }
    Dataset::new(d, features, labels, Some(clusters))
}

fn sample_near_center<R: Rng>(mu: &[f64], r: f64, rng: &mut R) -> Vec<f64> {
    let d = mu.len();
    loop {
        // tangent direction
        let mut t: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let proj = dot(&t, mu);
        for (ti, mi) in t.iter_mut().zip(mu) {
            *ti -= proj * mi;
        }
        let tn = norm(&t);
        if tn < 1e-12 {
            continue;
        }
        // uniform radius in the (d-1)-dimensional tangent ball
        let u: f64 = rng.gen::<f64>();
        let rho = r * u.powf(1.0 / (d as f64 - 1.0));
        let mut x: Vec<f64> = mu.iter().zip(&t).map(|(m, ti)| m + rho * ti / tn).collect();
        let xn = norm(&x);
        for xi in &mut x {
            *xi /= xn;
        }
        let dist2: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2.sqrt() <= r {
            return x;
        }
    }
}

/// Sample a labelled Gaussian mixture. Labels are split evenly (+1 gets the
/// odd one out), the component within a label is chosen uniformly, and the
/// draw is `mean + sqrt(scale) * z`. With `normalize` the point is projected
/// to the unit sphere.
pub fn generate_mixture(spec: &MixtureSpec, seed: u64, normalize: bool) -> Result<Dataset, DataError> {
    spec.validate()?;
    let d = spec.dim();
    let std = spec.covariance_scale.sqrt();
    let mut rng = seeded_rng(seed);
    let n_pos = spec.n - spec.n / 2;
    let pos: Vec<usize> = (0..spec.components.len()).filter(|&i| spec.components[i].1 == 1.0).collect();
    let neg: Vec<usize> = (0..spec.components.len()).filter(|&i| spec.components[i].1 == -1.0).collect();
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    for s in 0..spec.n {
        let (label, comps) = if s < n_pos { (1.0, &pos) } else { (-1.0, &neg) };
        let c = comps[rng.gen_range(0..comps.len())];
        let mean = &spec.components[c].0;
        let mut x: Vec<f64> = mean
            .iter()
            .map(|m| m + std * StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        if normalize {
            let nn = norm(&x);
            if nn > 0.0 {
                for xi in &mut x {
                    *xi /= nn;
                }
            }
        }
        features.extend_from_slice(&x);
        labels.push(label);
    }
    Dataset::new(d, features, labels, None)
}

/// The bias-elimination map on inputs: `x -> (x/sqrt(2), 1/sqrt(2))`.
///
/// Requires unit-norm inputs; the image is unit-norm and every pairwise inner
/// product becomes `(x_s . x_q + 1)/2 >= 0`.
pub fn lift_dataset(d: &Dataset) -> Result<Dataset, DataError> {
    let worst = d.worst_norm_deviation();
    if worst > 1e-9 {
        return Err(DataError::InvalidInput(format!(
            "lift requires unit-norm features; worst deviation {worst:.3e}"
        )));
    }
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let n = d.len();
    let mut features = Vec::with_capacity(n * (d.dim() + 1));
    for s in 0..n {
        for &x in d.feature(s) {
            features.push(x * inv);
        }
        features.push(inv);
    }
    let mut out = Dataset::new(d.dim() + 1, features, d.labels.clone(), d.cluster_of.clone())?;
    out.lifted = true;
    Ok(out)
}

pub(crate) fn lift_vector(x: &[f64]) -> Vec<f64> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<f64> = x.iter().map(|v| v * inv).collect();
    out.push(inv);
    out
}

/// The matching rescaling of the initialization scale and step sizes:
/// `sigma -> sqrt(2) sigma` and `alpha_t -> 2 alpha_t`, which makes the
/// lifted no-bias trajectory reproduce the with-bias trajectory exactly.
pub fn lift_init_and_steps(sigma: f64, step_sizes: &[f64]) -> Result<(f64, Vec<f64>), DataError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(DataError::InvalidInput(format!("sigma {sigma} must be positive")));
    }
    Ok((std::f64::consts::SQRT_2 * sigma, step_sizes.iter().map(|a| 2.0 * a).collect()))
}

/// One assumption check: name, verdict, worst observed value against its
/// threshold, and a witness locating the worst case.
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub worst_value: f64,
    pub threshold: f64,
    pub witness: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("check,passed,worst_value,threshold,witness\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.name,
                u8::from(c.passed),
                fmt_f64(c.worst_value),
                fmt_f64(c.threshold),
                c.witness
            );
        }
        out
    }
}

/// Check every data assumption the theorems consume, against the dataset's
/// lifting state: unit norms, per-cluster radius, center norms, cross-label
/// center separation, cluster balance, and the pairwise inner-product bounds
/// in their post-lifting form.
pub fn validate_assumptions(d: &Dataset, spec: &ClusterSpec) -> Result<ValidationReport, DataError> {
    let clusters = d
        .cluster_of()
        .ok_or_else(|| DataError::InvalidInput("dataset has no cluster tags".into()))?;
    let mut checks = Vec::new();
    let slack = 1e-12;

    // feature norms
    {
        let mut worst = 0.0f64;
        let mut who = 0usize;
        for s in 0..d.len() {
            let dev = (norm(d.feature(s)) - 1.0).abs();
            if dev > worst {
                worst = dev;
                who = s;
            }
        }
        checks.push(AssumptionCheck {
            name: "unit-feature-norm".into(),
            passed: worst <= slack,
            worst_value: worst,
            threshold: slack,
            witness: format!("sample {who}"),
        });
    }

    // center norms (always stated pre-lifting)
    {
        let mut worst = 0.0f64;
        let mut who = 1usize;
        for (k, c) in spec.centers.iter().enumerate() {
            let dev = (norm(c) - 1.0).abs();
            if dev > worst {
                worst = dev;
                who = k + 1;
            }
        }
        checks.push(AssumptionCheck {
            name: "unit-center-norm".into(),
            passed: worst <= slack,
            worst_value: worst,
            threshold: slack,
            witness: format!("cluster {who}"),
        });
    }

    // per-cluster radius, in the dataset's lifting state
    {
        let centers: Vec<Vec<f64>> = if d.is_lifted() {
            spec.centers.iter().map(|c| lift_vector(c)).collect()
        } else {
            spec.centers.to_vec()
        };
        let r_eff = if d.is_lifted() {
            spec.radius * std::f64::consts::FRAC_1_SQRT_2
        } else {
            spec.radius
        };
        let mut worst = f64::NEG_INFINITY;
        let mut who = 0usize;
        for s in 0..d.len() {
            let mu = &centers[clusters[s] - 1];
            let dist: f64 = d
                .feature(s)
                .iter()
                .zip(mu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > worst {
                worst = dist;
                who = s;
            }
        }
        checks.push(AssumptionCheck {
            name: "cluster-radius".into(),
            passed: worst <= r_eff + slack,
            worst_value: worst,
            threshold: r_eff,
            witness: format!("sample {who}"),
        });
    }

    // cross-label center separation, in the matching form
    {
        let mut worst = f64::NEG_INFINITY;
        let mut who = (1usize, 3usize);
        let thresh = if d.is_lifted() {
            (1.0 + spec.separation) / 2.0
        } else {
            spec.separation
        };
        for k in 1..=4usize {
            for l in 1..=4usize {
                if ClusterSpec::label_of(k) != ClusterSpec::label_of(l) {
                    let mut ip = dot(&spec.centers[k - 1], &spec.centers[l - 1]);
                    if d.is_lifted() {
                        ip = (ip + 1.0) / 2.0;
                    }
                    if ip > worst {
                        worst = ip;
                        who = (k, l);
                    }
                }
            }
        }
        checks.push(AssumptionCheck {
            name: "center-separation".into(),
            passed: worst <= thresh + slack,
            worst_value: worst,
            threshold: thresh,
            witness: format!("clusters ({},{})", who.0, who.1),
        });
    }

    // balance
    {
        let mut counts = [0usize; 4];
        for &k in clusters {
            counts[k - 1] += 1;
        }
        let n = d.len() as f64;
        let lo = (0.25 - spec.balance) * n;
        let hi = (0.25 + spec.balance) * n;
        let mut worst_dev = 0.0f64;
        let mut who = 1usize;
        let mut ok = true;
        for (k, &c) in counts.iter().enumerate() {
            let c = c as f64;
            let dev = (c / n - 0.25).abs();
            if dev > worst_dev {
                worst_dev = dev;
                who = k + 1;
            }
            if c < lo - slack || c > hi + slack {
                ok = false;
            }
        }
        checks.push(AssumptionCheck {
            name: "cluster-balance".into(),
            passed: ok,
            worst_value: worst_dev,
            threshold: spec.balance,
            witness: format!("cluster {who}"),
        });
    }

    // pairwise inner-product bounds (post-lifting form)
    {
        let n = d.len();
        let lifted_ip = |s: usize, q: usize| -> f64 {
            let ip = dot(d.feature(s), d.feature(q));
            if d.is_lifted() {
                ip
            } else {
                (ip + 1.0) / 2.0
            }
        };
        let cross_bound = (1.0 + spec.separation) / 2.0 + 2.0 * spec.radius;
        let same_bound = 1.0 - 2.0 * spec.radius;
        let mut worst_cross = f64::NEG_INFINITY;
        let mut cross_witness = (0usize, 0usize);
        let mut worst_same = f64::INFINITY;
        let mut same_witness = (0usize, 0usize);
        for s in 0..n {
            for q in (s + 1)..n {
                let ip = lifted_ip(s, q);
                if d.label(s) != d.label(q) {
                    if ip > worst_cross {
                        worst_cross = ip;
                        cross_witness = (s, q);
                    }
                } else if clusters[s] == clusters[q] && ip < worst_same {
                    worst_same = ip;
                    same_witness = (s, q);
                }
            }
        }
        if worst_cross.is_finite() {
            checks.push(AssumptionCheck {
                name: "pairwise-cross-label-bound".into(),
                passed: worst_cross <= cross_bound + slack,
                worst_value: worst_cross,
                threshold: cross_bound,
                witness: format!("pair ({},{})", cross_witness.0, cross_witness.1),
            });
        }
        if worst_same.is_finite() {
            checks.push(AssumptionCheck {
                name: "pairwise-same-cluster-bound".into(),
                passed: worst_same >= same_bound - slack,
                worst_value: worst_same,
                threshold: same_bound,
                witness: format!("pair ({},{})", same_witness.0, same_witness.1),
            });
        }
    }

    Ok(ValidationReport { checks })
}

/// Serialize to the dataset CSV format: header `x1,...,xD,label[,cluster]`,
/// one row per sample, labels written literally as `1` or `-1`, features with
/// 17 significant digits so the file round-trips bit-exactly.
pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    for j in 1..=d.dim() {
        let _ = write!(out, "x{j},");
    }
    out.push_str("label");
    if d.cluster_of().is_some() {
        out.push_str(",cluster");
    }
    out.push('\n');
    for s in 0..d.len() {
        for x in d.feature(s) {
            let _ = write!(out, "{},", fmt_f64(*x));
        }
        let _ = write!(out, "{}", if d.label(s) > 0.0 { "1" } else { "-1" });
        if let Some(c) = d.cluster_of() {
            let _ = write!(out, ",{}", c[s]);
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, d: &Dataset) -> Result<(), DataError> {
    write_atomic(path, &dataset_to_csv(d))?;
    Ok(())
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::CsvParse { line: 1, detail: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    let has_cluster = cols.last() == Some(&"cluster");
    let label_idx = if has_cluster { cols.len() - 2 } else { cols.len() - 1 };
    if cols.get(label_idx) != Some(&"label") || label_idx == 0 {
        return Err(DataError::CsvParse {
            line: 1,
            detail: format!("expected header `x1,...,xD,label[,cluster]`, got `{header}`"),
        });
    }
    let dim = label_idx;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut clusters = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(DataError::CsvParse {
                line: idx + 1,
                detail: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        for f in &fields[..dim] {
            features.push(f.parse::<f64>().map_err(|e| DataError::CsvParse {
                line: idx + 1,
                detail: format!("bad float `{f}`: {e}"),
            })?);
        }
        labels.push(match fields[dim] {
            "1" => 1.0,
            "-1" => -1.0,
            other => {
                return Err(DataError::CsvParse {
                    line: idx + 1,
                    detail: format!("label must be 1 or -1, got `{other}`"),
                })
            }
        });
        if has_cluster {
            clusters.push(fields[dim + 1].parse::<usize>().map_err(|e| DataError::CsvParse {
                line: idx + 1,
                detail: format!("bad cluster `{}`: {e}", fields[dim + 1]),
            })?);
        }
    }
    Dataset::new(dim, features, labels, has_cluster.then_some(clusters))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    dataset_from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xor_centers(n: usize) -> ClusterSpec {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ClusterSpec {
            centers: [vec![s, -s], vec![-s, s], vec![s, s], vec![-s, -s]],
            radius: 0.05,
            separation: 0.0,
            balance: 0.05,
            n,
        }
    }

    #[test]
    fn zero_radius_reproduces_centers() {
        let mut spec = xor_centers(8);
        spec.radius = 0.0;
        let d = generate_clusters(&spec, 3).unwrap();
        for s in 0..d.len() {
            let k = d.cluster_of().unwrap()[s];
            assert_eq!(d.feature(s), &spec.centers[k - 1][..]);
        }
        assert!(validate_assumptions(&d, &spec).unwrap().all_passed());
    }

    #[test]
    fn generated_clusters_pass_validation_pre_and_post_lift() {
        let spec = ClusterSpec::orthonormal(10, 0.05, 0.05, 0.05, 128).unwrap();
        let d = generate_clusters(&spec, 11).unwrap();
        let rep = validate_assumptions(&d, &spec).unwrap();
        assert!(rep.all_passed(), "{}", rep.render());
        let lifted = lift_dataset(&d).unwrap();
        let rep = validate_assumptions(&lifted, &spec).unwrap();
        assert!(rep.all_passed(), "{}", rep.render());
    }

    #[test]
    fn lemma13_bounds_hold_after_lifting() {
        let spec = xor_centers(64);
        let d = generate_clusters(&spec, 5).unwrap();
        let l = lift_dataset(&d).unwrap();
        let cross = (1.0 + spec.separation) / 2.0 + 2.0 * spec.radius;
        let same = 1.0 - 2.0 * spec.radius;
        for s in 0..l.len() {
            for q in 0..l.len() {
                let ip = dot(l.feature(s), l.feature(q));
                assert!(ip >= -1e-12, "lifted inner products are nonnegative");
                if l.label(s) != l.label(q) {
                    assert!(ip <= cross + 1e-12, "pair ({s},{q}) ip={ip}");
                } else if l.cluster_of().unwrap()[s] == l.cluster_of().unwrap()[q] {
                    assert!(ip >= same - 1e-12, "pair ({s},{q}) ip={ip}");
                }
            }
        }
    }

    #[test]
    fn violation_is_reported_with_witness() {
        let mut spec = xor_centers(16);
        spec.radius = 0.05;
        let d = generate_clusters(&spec, 9).unwrap();
        // move one sample away from its center by r + 0.1 along the sphere
        let mut features: Vec<f64> = (0..d.len()).flat_map(|s| d.feature(s).to_vec()).collect();
        let k = d.cluster_of().unwrap()[7];
        let mu = &spec.centers[k - 1];
        // rotate sample 7 away from mu
        let theta: f64 = 2.0 * ((spec.radius + 0.1) / 2.0).asin();
        let (c, s) = (theta.cos(), theta.sin());
        let x = [mu[0] * c - mu[1] * s, mu[0] * s + mu[1] * c];
        features[7 * 2] = x[0];
        features[7 * 2 + 1] = x[1];
        let tampered = Dataset::new(
            2,
            features,
            d.labels().to_vec(),
            Some(d.cluster_of().unwrap().to_vec()),
        )
        .unwrap();
        let rep = validate_assumptions(&tampered, &spec).unwrap();
        let radius = rep.checks.iter().find(|c| c.name == "cluster-radius").unwrap();
        assert!(!radius.passed);
        assert_eq!(radius.witness, "sample 7");
        assert!(radius.worst_value > spec.radius + 0.09);
    }

    #[test]
    fn xor_center_separation_passes_any_nonnegative_delta() {
        let spec = xor_centers(8);
        // direct inner products of the preset centers
        for k in 1..=4usize {
            for l in 1..=4usize {
                if ClusterSpec::label_of(k) != ClusterSpec::label_of(l) {
                    let ip = dot(&spec.centers[k - 1], &spec.centers[l - 1]);
                    assert!(ip.abs() < 1e-15);
                }
            }
        }
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn infeasible_balance_is_named() {
        let mut spec = xor_centers(6); // 6 samples cannot be split into exact quarters
        spec.balance = 0.0;
        let err = generate_clusters(&spec, 1).unwrap_err();
        match err {
            DataError::SpecValidation { assumption, .. } => {
                assert_eq!(assumption, "cluster-balance")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn mixture_presets_match_their_centers() {
        let d = generate_mixture(&MixtureSpec::xor(128), 1, false).unwrap();
        assert_eq!(d.len(), 128);
        let spec = MixtureSpec::xor(128);
        // assign each sample to its nearest component; per-component means
        // land close to the preset centers
        let mut sums = vec![vec![0.0; 2]; 4];
        let mut counts = vec![0usize; 4];
        for s in 0..d.len() {
            let x = d.feature(s);
            let (best, _) = spec
                .components
                .iter()
                .enumerate()
                .map(|(i, (m, _))| (i, (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert_eq!(d.label(s), spec.components[best].1, "sample near wrong-label center");
            sums[best][0] += x[0];
            sums[best][1] += x[1];
            counts[best] += 1;
        }
        for (i, (m, _)) in spec.components.iter().enumerate() {
            assert!(counts[i] > 0);
            let mean = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
            assert!((mean[0] - m[0]).abs() < 0.05 && (mean[1] - m[1]).abs() < 0.05);
        }
    }

    #[test]
    fn degenerate_covariance_reproduces_means() {
        let mut spec = MixtureSpec::shoulders(16);
        spec.covariance_scale = 0.0;
        let d = generate_mixture(&spec, 2, false).unwrap();
        for s in 0..d.len() {
            let x = d.feature(s);
            assert!(spec
                .components
                .iter()
                .any(|(m, y)| *y == d.label(s) && m[0] == x[0] && m[1] == x[1]));
        }
        // shoulders positive means are (1,0) and (0,1)
        assert_eq!(spec.components[0].0, vec![1.0, 0.0]);
        assert_eq!(spec.components[1].0, vec![0.0, 1.0]);
    }

    #[test]
    fn mixture_errors() {
        let mut spec = MixtureSpec::xor(0);
        assert!(generate_mixture(&spec, 1, false).is_err());
        spec.n = 4;
        spec.components.retain(|(_, y)| *y == 1.0);
        assert!(generate_mixture(&spec, 1, false).is_err());
    }

    #[test]
    fn lift_example_values() {
        let d = Dataset::new(2, vec![0.6, 0.8], vec![1.0], None).unwrap();
        let l = lift_dataset(&d).unwrap();
        let x = l.feature(0);
        assert!((x[0] - 0.424_264_068_711_928_5).abs() < 1e-15);
        assert!((x[1] - 0.565_685_424_949_238_0).abs() < 1e-15);
        assert!((x[2] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((norm(x) - 1.0).abs() < 1e-15);
        assert!(l.is_lifted());
    }

    #[test]
    fn lift_inner_product_endpoints() {
        // antipodal pair maps to inner product 0, identical pair stays 1
        let d = Dataset::new(2, vec![1.0, 0.0, -1.0, 0.0], vec![1.0, -1.0], None).unwrap();
        let l = lift_dataset(&d).unwrap();
        assert!(dot(l.feature(0), l.feature(1)).abs() < 1e-15);
        assert!((dot(l.feature(0), l.feature(0)) - 1.0).abs() < 1e-15);
        // non-unit input is rejected
        let bad = Dataset::new(2, vec![0.5, 0.0], vec![1.0], None).unwrap();
        assert!(lift_dataset(&bad).is_err());
    }

    #[test]
    fn lift_scalings() {
        let (sigma, steps) = lift_init_and_steps(0.1, &[0.5, 0.25]).unwrap();
        assert!((sigma - 0.141_421_356_237_309_5).abs() < 1e-16);
        assert_eq!(steps, vec![1.0, 0.5]);
        assert!((sigma * sigma - 2.0 * 0.1 * 0.1).abs() <= 4.0 * f64::EPSILON);
        let (_, empty) = lift_init_and_steps(0.1, &[]).unwrap();
        assert!(empty.is_empty());
        assert!(lift_init_and_steps(0.0, &[]).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let spec = xor_centers(12);
        let d = generate_clusters(&spec, 4).unwrap();
        let text = dataset_to_csv(&d);
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(d.dim(), back.dim());
        assert_eq!(d.labels(), back.labels());
        assert_eq!(d.cluster_of(), back.cluster_of());
        for s in 0..d.len() {
            for (a, b) in d.feature(s).iter().zip(back.feature(s)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let err = dataset_from_csv("x1,label\n0.5,2\n").unwrap_err();
        match err {
            DataError::CsvParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    proptest! {
        /// lifting preserves unit norms and makes inner products nonnegative
        #[test]
        fn prop_lift_norms_and_ips(seed in 0u64..1000) {
            let spec = xor_centers(8);
            let d = generate_clusters(&spec, seed).unwrap();
            let l = lift_dataset(&d).unwrap();
            prop_assert!(l.worst_norm_deviation() <= 1e-15);
            for s in 0..l.len() {
                for q in 0..l.len() {
                    prop_assert!(dot(l.feature(s), l.feature(q)) >= -1e-12);
                }
            }
        }

        /// same seed, same bytes
        #[test]
        fn prop_generation_deterministic(seed in 0u64..500) {
            let spec = xor_centers(16);
            let a = generate_clusters(&spec, seed).unwrap();
            let b = generate_clusters(&spec, seed).unwrap();
            prop_assert_eq!(dataset_to_csv(&a), dataset_to_csv(&b));
            let ma = generate_mixture(&MixtureSpec::xor(16), seed, false).unwrap();
            let mb = generate_mixture(&MixtureSpec::xor(16), seed, false).unwrap();
            prop_assert_eq!(dataset_to_csv(&ma), dataset_to_csv(&mb));
        }
    }
}
