//! Ready-made experiment setups shared by the command-line front end and the
//! acceptance suite: the two 2-d mixture reproductions, the clustered-data
//! width-scaling setup, and the curated small-loss run for the
//! loss-dependent-schedule analysis.

use crate::activation::ActivationKind;
use crate::data::{
    generate_clusters, generate_mixture, lift_dataset, ClusterSpec, DataError, Dataset,
    MixtureSpec,
};
use crate::model::{forward, loss, ParamMatrix};
use crate::rng::{derive_seed, seeded_rng};
use crate::schedule::{q1_tilde, q2_tilde, ScheduleState, StepPolicy, Strictness};
use crate::trainer::{TrainConfig, TrainerError};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PresetError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Schedule(#[from] crate::schedule::ScheduleError),
    #[error("could not construct a small-loss instance: {0}")]
    Construction(String),
}

/// Which 2-d mixture a simulation run draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureKind {
    Xor,
    Shoulders,
}

/// One simulation-section run: fresh mixture data and a fresh network per
/// seed, `p = 100` hidden units per class on raw (unnormalized) 2-d draws
/// with explicit biases, 100 gradient-descent iterations by default.
pub fn simulation_run(
    mixture: MixtureKind,
    kind: ActivationKind,
    iters: usize,
    seed: u64,
) -> Result<(TrainConfig, Dataset), PresetError> {
    let data_seed = derive_seed(seed, 0);
    let init_seed = derive_seed(seed, 1);
    let spec = match mixture {
        MixtureKind::Xor => MixtureSpec::xor(128),
        MixtureKind::Shoulders => MixtureSpec::shoulders(128),
    };
    let data = generate_mixture(&spec, data_seed, false)?;
    let config = TrainConfig::simulation_defaults(100, 2, kind, iters, init_seed)?;
    Ok((config, data))
}

/// Clustered-data setup behind the width-scaling experiments: orthonormal
/// centers in dimension `d`, radius/separation/balance all `0.05` by
/// default, data lifted into dimension `d + 1`, width-derived defaults for
/// the initialization scale, first step, and bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_setup(
    p: usize,
    beta: f64,
    d: usize,
    n: usize,
    r: f64,
    delta: f64,
    epsilon: f64,
    iters: usize,
    seed: u64,
) -> Result<(TrainConfig, Dataset, ClusterSpec), PresetError> {
    let data_seed = derive_seed(seed, 0);
    let init_seed = derive_seed(seed, 1);
    let spec = ClusterSpec::orthonormal(d, r, delta, epsilon, n)?;
    let data = lift_dataset(&generate_clusters(&spec, data_seed)?)?;
    let mut config = TrainConfig::theorem2_defaults(p, data.dim(), beta, iters, init_seed)?;
    config.seed = init_seed;
    Ok((config, data, spec))
}

/// A curated run for the schedule analysis: data, a pre-scaled iterate whose
/// loss is below `target_loss`, and the matching admissible `Q1`, `Q2`.
#[derive(Debug, Clone)]
pub struct Theorem1Setup {
    pub config: TrainConfig,
    pub data: Dataset,
    pub v1: ParamMatrix,
    pub l1: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Build the curated small-loss instance: `n` lifted unit-norm examples,
/// labels matching the network's own sign, weights scaled up until the loss
/// drops below `target_loss`, and the schedule constants set to their
/// admissible caps.
pub fn theorem1_setup(
    p: usize,
    n: usize,
    target_loss: f64,
    iters: usize,
    seed: u64,
) -> Result<Theorem1Setup, PresetError> {
    let h = 1.0 / p as f64;
    let kind = ActivationKind::huberized(h).map_err(|e| PresetError::Construction(e.to_string()))?;
    'attempt: for attempt in 0..64u64 {
        let mut rng = seeded_rng(derive_seed(seed, attempt));
        // n random unit vectors in R^3, lifted to R^4
        let d_raw = 3;
        let mut features = Vec::with_capacity(n * d_raw);
        for _ in 0..n {
            features.extend(crate::data::random_unit_vector(d_raw, &mut rng));
        }
        let raw = Dataset::new(d_raw, features, vec![1.0; n], None)?;
        let lifted = lift_dataset(&raw)?;
        let dim = lifted.dim();

        let mut v = {
            let data: Vec<f64> =
                (0..2 * p * dim).map(|_| StandardNormal.sample::<f64, _>(&mut rng)).collect();
            match ParamMatrix::from_flat(p, dim, data) {
                Ok(v) => v,
                Err(e) => return Err(PresetError::Construction(e.to_string())),
            }
        };
        // scale into the asymptotic sign regime, then label by the network
        v.scale(128.0);
        let mut labels = Vec::with_capacity(n);
        for s in 0..n {
            let f = forward(&v, lifted.feature(s), kind)
                .map_err(|e| PresetError::Construction(e.to_string()))?;
            if f.abs() < 1e-6 {
                continue 'attempt;
            }
            labels.push(if f > 0.0 { 1.0 } else { -1.0 });
        }
        let data = Dataset::new(
            dim,
            (0..n).flat_map(|s| lifted.feature(s).to_vec()).collect(),
            labels,
            None,
        )?;
        // pre-scale until the loss is below target
        let mut ok = false;
        for _ in 0..4000 {
            let l = loss(&v, &data, kind).map_err(|e| PresetError::Construction(e.to_string()))?;
            if l.total <= target_loss {
                ok = true;
                break;
            }
            v.scale(1.25);
        }
        if !ok {
            continue 'attempt;
        }
        let l1 = loss(&v, &data, kind)
            .map_err(|e| PresetError::Construction(e.to_string()))?
            .total;
        let v1_norm = v.norm();
        let q1 = q1_tilde(l1, v1_norm, p)?;
        let q2 = q2_tilde(q1, l1, v1_norm)?;
        let config = TrainConfig {
            p,
            d: dim,
            beta: 0.25,
            sigma: 1.0,
            alpha0: 1.0,
            h,
            kind,
            schedule: ScheduleState::new(q1, q2, 1.0, StepPolicy::Theorem1, Strictness::Strict)?,
            iters,
            seed,
            with_bias: false,
        };
        return Ok(Theorem1Setup { config, data, v1: v, l1, q1, q2 });
    }
    Err(PresetError::Construction(format!(
        "no sign-stable instance found for p={p}, n={n} after 64 attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::train_from;
    use crate::verify::judge_theorem1;

    #[test]
    fn simulation_presets_build() {
        let (cfg, data) = simulation_run(
            MixtureKind::Xor,
            ActivationKind::huberized(0.01).unwrap(),
            5,
            1,
        )
        .unwrap();
        assert_eq!(cfg.p, 100);
        assert!(cfg.with_bias);
        assert_eq!(data.len(), 128);
        assert_eq!(data.dim(), 2);
        // width-scale readings of the deviations
        assert!((cfg.sigma - 400f64.powf(-0.625)).abs() < 1e-15);
        assert!((cfg.alpha0 - 400f64.powf(-0.75)).abs() < 1e-15);
        assert!((cfg.h - 0.01).abs() < 1e-18);
    }

    #[test]
    fn theorem2_setup_builds_lifted_data() {
        let (cfg, data, spec) = theorem2_setup(64, 0.25, 10, 32, 0.05, 0.05, 0.05, 1, 9).unwrap();
        assert_eq!(data.dim(), 11);
        assert!(data.is_lifted());
        assert_eq!(spec.dim(), 10);
        assert_eq!(cfg.d, 11);
        assert!((cfg.sigma - 64f64.powf(-0.625)).abs() < 1e-15);
    }

    #[test]
    fn curated_run_passes_the_judge() {
        let setup = theorem1_setup(8, 4, 1e-6, 60, 3).unwrap();
        assert!(setup.l1 <= 1e-6);
        let run = train_from(setup.v1.clone(), &setup.config, &setup.data).unwrap();
        let verdict = judge_theorem1(
            &run.records,
            setup.q1,
            setup.q2,
            setup.l1,
            setup.v1.norm(),
            8,
            setup.data.len(),
            2.0,
        )
        .unwrap();
        assert!(verdict.preconditions_met, "{}", verdict.precondition_detail);
        assert!(verdict.i1_ok && verdict.i2_ok && verdict.i3_ok, "{verdict:?}");
        assert_eq!(verdict.first_violation, None);
    }
}
