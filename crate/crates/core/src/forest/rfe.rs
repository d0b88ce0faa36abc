//! Recursive feature elimination driven by forest importances.

use serde::{Deserialize, Serialize};

use super::{evaluate, train_forest, Hyperparams, Samples};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;

/// Share of training groups held out to score each elimination step.
pub const RFE_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub active: Vec<bool>,
    pub importances: Vec<f64>,
    pub validation_accuracy: f64,
    /// Feature dropped after this step, if any.
    pub eliminated: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Mask of the best-scoring step (the earliest one on ties).
    pub mask: Vec<bool>,
    pub steps: Vec<RfeStep>,
}

fn holdout(group: u64, seed: u64) -> bool {
    let mut z = group ^ seed.rotate_left(29) ^ 0x5851_f42d_4c95_7f2d;
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^= z >> 33;
    ((z >> 11) as f64 / (1u64 << 53) as f64) < RFE_HOLDOUT_FRACTION
}

/// Repeatedly trains on the active features, scores the model on a seeded
/// holdout of whole groups, and drops the least important feature (lowest
/// index on ties) until `target_k` features remain.
pub fn recursive_feature_elimination(
    samples: &Samples,
    hp: &Hyperparams,
    target_k: usize,
    seed: u64,
    par: Parallelism,
) -> Result<RfeResult> {
    let f = samples.n_features();
    if target_k < 1 || target_k > f {
        return Err(Error::InvalidArgument(format!("target_k {target_k} outside 1..={f}")));
    }
    let (val_idx, fit_idx): (Vec<usize>, Vec<usize>) = (0..samples.len()).partition(|&i| holdout(samples.groups[i], seed));
    if val_idx.is_empty() || fit_idx.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "RFE holdout leaves {} fitting and {} validation rows",
            fit_idx.len(),
            val_idx.len()
        )));
    }
    let fit = samples.subset(&fit_idx);
    let val = samples.subset(&val_idx);

    let mut active = vec![true; f];
    let mut steps: Vec<RfeStep> = Vec::with_capacity(f - target_k + 1);
    loop {
        let model = train_forest(&fit, Some(&active), hp, seed, par)?;
        let validation_accuracy = evaluate(&model, &val)?.accuracy;
        let n_active = active.iter().filter(|a| **a).count();
        let eliminated = (n_active > target_k).then(|| {
            (0..f)
                .filter(|&j| active[j])
                .fold(None::<usize>, |best, j| match best {
                    Some(b) if model.importances[b] <= model.importances[j] => Some(b),
                    _ => Some(j),
                })
                .expect("at least one active feature")
        });
        steps.push(RfeStep {
            active: active.clone(),
            importances: model.importances,
            validation_accuracy,
            eliminated,
        });
        match eliminated {
            Some(j) => active[j] = false,
            None => break,
        }
    }

    let best = steps
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.validation_accuracy > steps[b].validation_accuracy { i } else { b });
    Ok(RfeResult {
        mask: steps[best].active.clone(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, f: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let row: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
            y.push(if row[0] + 0.5 * row[1] > 0.0 { Label::Nlos } else { Label::Los });
            x.push(row);
        }
        Samples::new((0..f).map(|i| format!("f{i}")).collect(), x, y).unwrap()
    }

    #[test]
    fn step_count_and_identity_mask() {
        let s = data(300, 7, 1);
        let hp = Hyperparams { n_trees: 8, ..Hyperparams::default() };
        let r = recursive_feature_elimination(&s, &hp, 1, 3, Parallelism::Auto).unwrap();
        assert_eq!(r.steps.len(), 7);
        assert_eq!(r.steps.last().unwrap().active.iter().filter(|a| **a).count(), 1);

        let r = recursive_feature_elimination(&s, &hp, 7, 3, Parallelism::Auto).unwrap();
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.mask, vec![true; 7]);
    }

    #[test]
    fn target_out_of_range() {
        let s = data(50, 3, 2);
        let hp = Hyperparams::default();
        assert!(recursive_feature_elimination(&s, &hp, 0, 0, Parallelism::Auto).is_err());
        assert!(recursive_feature_elimination(&s, &hp, 4, 0, Parallelism::Auto).is_err());
    }
}
