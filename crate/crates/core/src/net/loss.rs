use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Loss value and gradient with respect to the scores.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub dscores: Tensor,
}

/// One-vs-all squared hinge (L2-SVM) over `scores: [batch, classes]`.
///
/// With `t_c = +1` for the labelled class and `-1` otherwise, the per-sample
/// loss is `Σ_c max(0, 1 - t_c·s_c)²`, averaged over the batch.
pub fn svm_hinge_loss(scores: &Tensor, labels: &[usize]) -> Result<LossGrad> {
    let (batch, classes) = match scores.shape() {
        [b, c] => (*b, *c),
        s => return Err(Error::dim(format!("scores must be [batch, classes], got {s:?}"))),
    };
    if classes < 2 {
        return Err(Error::Input(format!("hinge loss needs at least 2 classes, got {classes}")));
    }
    if labels.len() != batch {
        return Err(Error::dim(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Input(format!("label {bad} out of range for {classes} classes")));
    }
    if batch == 0 {
        return Ok(LossGrad {
            loss: 0.0,
            dscores: Tensor::zeros(vec![0, classes]),
        });
    }
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch * classes];
    for (b, &label) in labels.iter().enumerate() {
        for c in 0..classes {
            let t = if c == label { 1.0 } else { -1.0 };
            let margin = (1.0 - t * scores.data()[b * classes + c]).max(0.0);
            loss += margin * margin;
            grad[b * classes + c] = -2.0 * t * margin * inv_b;
        }
    }
    Ok(LossGrad {
        loss: loss * inv_b,
        dscores: Tensor::new(vec![batch, classes], grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn satisfied_margins() {
        let s = Tensor::new(vec![2, 3], vec![1.5, -1.0, -2.0, -1.0, -1.0, 1.0]).unwrap();
        let lg = svm_hinge_loss(&s, &[0, 2]).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.dscores.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_scores_cost_one_per_class() {
        for c in [2, 3, 10] {
            let lg = svm_hinge_loss(&Tensor::zeros(vec![4, c]), &[0, 1, 1, 0]).unwrap();
            assert_eq!(lg.loss, c as f64);
        }
    }

    #[test]
    fn gradient_vs_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let labels = [0usize, 2, 1, 2];
        let s: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lg = svm_hinge_loss(&Tensor::new(vec![4, 3], s.clone()).unwrap(), &labels).unwrap();
        let h = 1e-5;
        for i in 0..12 {
            let mut p = s.clone();
            let mut m = s.clone();
            p[i] += h;
            m[i] -= h;
            let lp = svm_hinge_loss(&Tensor::new(vec![4, 3], p).unwrap(), &labels).unwrap().loss;
            let lm = svm_hinge_loss(&Tensor::new(vec![4, 3], m).unwrap(), &labels).unwrap().loss;
            let fd = (lp - lm) / (2.0 * h);
            let g = lg.dscores.data()[i];
            assert!((fd - g).abs() <= 1e-4 * fd.abs().max(1e-6), "{i}: {fd} vs {g}");
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(svm_hinge_loss(&Tensor::zeros(vec![1, 3]), &[3]), Err(Error::Input(_))));
        assert!(svm_hinge_loss(&Tensor::zeros(vec![1, 1]), &[0]).is_err());
    }
}
