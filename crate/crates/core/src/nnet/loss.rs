use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Guards the CCC denominator when both series are constant and equal.
pub const CCC_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Ccc,
    /// `lambda · mse + (1 − lambda) · ccc`
    Hybrid { lambda: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::Hybrid { lambda } = self {
            if !(0.0..=1.0).contains(lambda) {
                return Err(Error::Config(format!("hybrid lambda {lambda} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// True when a batch needs at least two samples.
    pub fn needs_pairs(&self) -> bool {
        match self {
            LossKind::Mse => false,
            LossKind::Ccc => true,
            LossKind::Hybrid { lambda } => *lambda < 1.0,
        }
    }

    pub fn evaluate(&self, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
        match *self {
            LossKind::Mse => mse_loss(pred, target),
            LossKind::Ccc => ccc_loss(pred, target),
            LossKind::Hybrid { lambda } => hybrid_loss(pred, target, lambda),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::Mse => f.write_str("mse"),
            LossKind::Ccc => f.write_str("ccc"),
            LossKind::Hybrid { lambda } => write!(f, "hybrid:{lambda}"),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    /// `mse`, `ccc` or `hybrid:<lambda>`.
    fn from_str(s: &str) -> Result<Self> {
        let loss = match s.split_once(':') {
            None if s == "mse" => LossKind::Mse,
            None if s == "ccc" => LossKind::Ccc,
            Some(("hybrid", l)) => LossKind::Hybrid {
                lambda: l
                    .parse()
                    .map_err(|_| Error::Config(format!("bad hybrid lambda '{l}'")))?,
            },
            _ => return Err(Error::Config(format!("unknown loss '{s}'"))),
        };
        loss.validate()?;
        Ok(loss)
    }
}

fn check(pred: &Matrix, target: &Matrix) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::Contract(format!(
            "prediction batch {}x{} vs target batch {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    Ok(())
}

/// Mean over the batch of the per-sample mean squared error across dimensions.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check(pred, target)?;
    let count = (pred.rows() * pred.cols()) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, &p), &t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let r = p - t;
        loss += r * r;
        *g = 2.0 * r / count;
    }
    Ok((loss / count, grad))
}

/// Mean over dimensions of `1 − CCC_d`, with population moments.
pub fn ccc_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check(pred, target)?;
    let n = pred.rows();
    if n < 2 {
        return Err(Error::InsufficientBatch(n));
    }
    let dims = pred.cols();
    let nf = n as f64;
    let mut grad = Matrix::zeros(n, dims);
    let mut loss = 0.0;
    for d in 0..dims {
        let mx = (0..n).map(|i| pred.get(i, d)).sum::<f64>() / nf;
        let my = (0..n).map(|i| target.get(i, d)).sum::<f64>() / nf;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let dx = pred.get(i, d) - mx;
            let dy = target.get(i, d) - my;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        sxy /= nf;
        sxx /= nf;
        syy /= nf;
        let num = 2.0 * sxy;
        let den = sxx + syy + (mx - my).powi(2) + CCC_EPSILON;
        loss += 1.0 - num / den;
        for i in 0..n {
            let dnum = 2.0 * (target.get(i, d) - my) / nf;
            let dden = 2.0 * (pred.get(i, d) - mx) / nf + 2.0 * (mx - my) / nf;
            let dccc = (dnum * den - num * dden) / (den * den);
            grad.set(i, d, -dccc / dims as f64);
        }
    }
    Ok((loss / dims as f64, grad))
}

/// `lambda · mse + (1 − lambda) · ccc`; the endpoints evaluate only one term.
pub fn hybrid_loss(pred: &Matrix, target: &Matrix, lambda: f64) -> Result<(f64, Matrix)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Contract(format!("hybrid lambda {lambda} outside [0, 1]")));
    }
    if lambda == 1.0 {
        return mse_loss(pred, target);
    }
    if lambda == 0.0 {
        return ccc_loss(pred, target);
    }
    let (lm, gm) = mse_loss(pred, target)?;
    let (lc, gc) = ccc_loss(pred, target)?;
    let mut grad = gm;
    grad.as_mut_slice()
        .iter_mut()
        .zip(gc.as_slice())
        .for_each(|(a, &b)| *a = lambda * *a + (1.0 - lambda) * b);
    Ok((lambda * lm + (1.0 - lambda) * lc, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn random(rng: &mut SplitMix64, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.next_f64()).collect()).unwrap()
    }

    /// Central differences over every entry; block-wise relative error
    /// `‖fd − analytic‖ / max(‖fd‖, ‖analytic‖)`.
    fn fd_check(f: impl Fn(&Matrix) -> f64, pred: &Matrix, grad: &Matrix, h: f64, tol: f64) {
        let (mut diff, mut nfd, mut nan) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..pred.rows() {
            for d in 0..pred.cols() {
                let mut p = pred.clone();
                p.set(i, d, pred.get(i, d) + h);
                let mut m = pred.clone();
                m.set(i, d, pred.get(i, d) - h);
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let an = grad.get(i, d);
                diff += (fd - an).powi(2);
                nfd += fd * fd;
                nan += an * an;
            }
        }
        let rel = diff.sqrt() / nfd.sqrt().max(nan.sqrt());
        assert!(rel < tol, "relative error {rel}");
    }

    #[test]
    fn mse_examples() {
        let t = Matrix::from_vec(2, 19, vec![1.0; 38]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        assert_eq!(mse_loss(&Matrix::zeros(2, 19), &t).unwrap().0, 1.0);
        assert!(mse_loss(&Matrix::zeros(0, 19), &Matrix::zeros(0, 19)).is_err());
    }

    #[test]
    fn mse_gradient() {
        let mut rng = SplitMix64::new(1);
        let (p, t) = (random(&mut rng, 5, 19), random(&mut rng, 5, 19));
        let (_, g) = mse_loss(&p, &t).unwrap();
        fd_check(|x| mse_loss(x, &t).unwrap().0, &p, &g, 1e-3, 1e-8);
    }

    #[test]
    fn ccc_examples() {
        let mut rng = SplitMix64::new(2);
        let t = random(&mut rng, 8, 19);
        assert!(ccc_loss(&t, &t).unwrap().0 <= 1e-6);
        let flat = Matrix::from_vec(8, 19, vec![0.4; 8 * 19]).unwrap();
        assert!((ccc_loss(&flat, &t).unwrap().0 - 1.0).abs() < 1e-12);
        assert!(matches!(
            ccc_loss(&Matrix::zeros(1, 19), &Matrix::zeros(1, 19)),
            Err(Error::InsufficientBatch(1))
        ));
    }

    #[test]
    fn ccc_gradient() {
        let mut rng = SplitMix64::new(3);
        let (p, t) = (random(&mut rng, 8, 19), random(&mut rng, 8, 19));
        let (_, g) = ccc_loss(&p, &t).unwrap();
        fd_check(|x| ccc_loss(x, &t).unwrap().0, &p, &g, 1e-6, 1e-6);
    }

    #[test]
    fn hybrid_endpoints_and_midpoint() {
        let mut rng = SplitMix64::new(4);
        let (p, t) = (random(&mut rng, 6, 19), random(&mut rng, 6, 19));
        assert_eq!(hybrid_loss(&p, &t, 1.0).unwrap(), mse_loss(&p, &t).unwrap());
        assert_eq!(hybrid_loss(&p, &t, 0.0).unwrap(), ccc_loss(&p, &t).unwrap());
        let (lm, _) = mse_loss(&p, &t).unwrap();
        let (lc, _) = ccc_loss(&p, &t).unwrap();
        let (lh, gh) = hybrid_loss(&p, &t, 0.5).unwrap();
        assert!((lh - 0.5 * (lm + lc)).abs() < 1e-15);
        fd_check(|x| hybrid_loss(x, &t, 0.5).unwrap().0, &p, &gh, 1e-6, 1e-6);
        assert!(hybrid_loss(&p, &t, 1.5).is_err());
    }

    #[test]
    fn loss_strings() {
        assert_eq!("hybrid:0.25".parse::<LossKind>().unwrap(), LossKind::Hybrid { lambda: 0.25 });
        assert!("hybrid:2".parse::<LossKind>().is_err());
        assert_eq!(LossKind::Ccc.to_string(), "ccc");
        let json = serde_json::to_string(&LossKind::Hybrid { lambda: 0.5 }).unwrap();
        assert_eq!(json, r#"{"kind":"hybrid","lambda":0.5}"#);
    }

    proptest! {
        #[test]
        fn ccc_loss_is_bounded(seed in any::<u64>(), n in 2usize..10, scale in 0.0f64..100.0) {
            let mut rng = SplitMix64::new(seed);
            let mut p = random(&mut rng, n, 3);
            p.scale(scale - 50.0);
            let t = random(&mut rng, n, 3);
            let (l, _) = ccc_loss(&p, &t).unwrap();
            prop_assert!((0.0..=2.0).contains(&l), "loss {}", l);
        }
    }
}
