use ndarray::{Array1, Array3};

use super::RaganError;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A scalar loss with its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<G> {
    pub value: f64,
    pub grad: G,
}

/// `(MSE + mean absolute error) / 2`, both averaged over every element.
pub fn content_loss(generated: &Array3<f64>, clean: &Array3<f64>) -> Result<LossGrad<Array3<f64>>, RaganError> {
    if generated.dim() != clean.dim() {
        return Err(RaganError::Shape(format!("content loss: {:?} vs {:?}", generated.dim(), clean.dim())));
    }
    if generated.is_empty() {
        return Err(RaganError::Shape("content loss: empty batch".into()));
    }
    let n = generated.len() as f64;
    let diff = generated - clean;
    let mse = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let l1 = diff.iter().map(|d| d.abs()).sum::<f64>() / n;
    let grad = diff.mapv(|d| (2.0 * d + sign(d)) / (2.0 * n));
    Ok(LossGrad { value: 0.5 * (mse + l1), grad })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients of a relativistic loss with respect to both score sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativisticGrad {
    pub value: f64,
    pub d_real: Array1<f64>,
    pub d_fake: Array1<f64>,
}

/// `mean_p softplus(-(p - mean(q))) + mean_q softplus(q - mean(p))`, i.e.
/// `-E[log sigmoid(p - mean q)] - E[log(1 - sigmoid(q - mean p))]`.
/// Returns the value and the gradients with respect to `p` and `q`.
fn relativistic(p: &Array1<f64>, q: &Array1<f64>) -> Result<(f64, Array1<f64>, Array1<f64>), RaganError> {
    if p.is_empty() || q.is_empty() {
        return Err(RaganError::Shape("relativistic loss: empty score list".into()));
    }
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let mean_p = p.mean().expect("nonempty");
    let mean_q = q.mean().expect("nonempty");
    let a = p.mapv(|v| v - mean_q);
    let b = q.mapv(|v| v - mean_p);
    let value = a.iter().map(|&x| softplus(-x)).sum::<f64>() / np + b.iter().map(|&x| softplus(x)).sum::<f64>() / nq;
    // d softplus(-a_i) / d a_i = -sigmoid(-a_i); d softplus(b_j) / d b_j = sigmoid(b_j)
    let sa = a.mapv(|x| logistic(-x));
    let sb = b.mapv(logistic);
    let sum_sa = sa.sum();
    let sum_sb = sb.sum();
    let dp = sa.mapv(|s| -s / np - sum_sb / (nq * np));
    let dq = sb.mapv(|s| s / nq + sum_sa / (np * nq));
    Ok((value, dp, dq))
}

/// Discriminator loss: real scores should exceed the mean fake score and
/// fake scores should fall below the mean real score.
pub fn loss_d_relativistic(real: &Array1<f64>, fake: &Array1<f64>) -> Result<RelativisticGrad, RaganError> {
    let (value, d_real, d_fake) = relativistic(real, fake)?;
    Ok(RelativisticGrad { value, d_real, d_fake })
}

/// Generator adversarial loss: the roles of real and fake are swapped.
pub fn loss_g_adversarial(real: &Array1<f64>, fake: &Array1<f64>) -> Result<RelativisticGrad, RaganError> {
    let (value, d_fake, d_real) = relativistic(fake, real)?;
    Ok(RelativisticGrad { value, d_real, d_fake })
}

/// `L_c + lambda * L_adv`.
pub fn loss_generator_total(content: f64, adversarial: f64, lambda: f64) -> f64 {
    content + lambda * adversarial
}
