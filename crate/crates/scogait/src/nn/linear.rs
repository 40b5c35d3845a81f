//! Per-part affine maps: a separate weight matrix for every horizontal part.

use ndarray::{Array2, Array3, Ix2, Ix3};
use rand::Rng;

use super::{Param, Scalar};

/// `parts` independent linear maps cin -> cout, applied to (B, parts, cin).
pub struct PartLinear<A> {
    pub w: Param<A>,         // (parts, cin, cout)
    pub b: Option<Param<A>>, // (parts, cout)
    pub parts: usize,
    pub cin: usize,
    pub cout: usize,
}

pub enum LinearInit {
    /// U(-1/sqrt(cin), 1/sqrt(cin)) for weights and bias.
    Uniform,
    /// N(0, std) weights; used for the bias-free classifier head.
    Normal(f64),
}

impl<A: Scalar> PartLinear<A> {
    pub fn new(
        name: &str,
        parts: usize,
        cin: usize,
        cout: usize,
        with_bias: bool,
        init: LinearInit,
        rng: &mut impl Rng,
    ) -> Self {
        let w = match init {
            LinearInit::Uniform => {
                let bound = 1.0 / (cin as f64).sqrt();
                Array3::from_shape_fn((parts, cin, cout), |_| {
                    A::cast(rng.random_range(-bound..bound))
                })
            }
            LinearInit::Normal(std) => {
                use rand_distr::Distribution;
                let normal = rand_distr::Normal::new(0.0, std).unwrap();
                Array3::from_shape_fn((parts, cin, cout), |_| A::cast(normal.sample(rng)))
            }
        };
        let b = with_bias.then(|| {
            let bound = 1.0 / (cin as f64).sqrt();
            let b = Array2::from_shape_fn((parts, cout), |_| {
                A::cast(rng.random_range(-bound..bound))
            });
            Param::new(format!("{name}.b"), b.into_dyn(), false)
        });
        PartLinear {
            w: Param::new(format!("{name}.w"), w.into_dyn(), true),
            b,
            parts,
            cin,
            cout,
        }
    }

    pub fn forward(&self, x: &Array3<A>) -> Array3<A> {
        let (batch, parts, cin) = x.dim();
        debug_assert_eq!(parts, self.parts);
        debug_assert_eq!(cin, self.cin);
        let w = self.w.value.view().into_dimensionality::<Ix3>().unwrap();
        let mut y = Array3::<A>::zeros((batch, parts, self.cout));
        for p in 0..parts {
            let xp = x.index_axis(ndarray::Axis(1), p);
            let wp = w.index_axis(ndarray::Axis(0), p);
            let mut yp = xp.dot(&wp);
            if let Some(b) = &self.b {
                let bv = b.value.view().into_dimensionality::<Ix2>().unwrap();
                let bp = bv.index_axis(ndarray::Axis(0), p);
                for mut row in yp.rows_mut() {
                    row += &bp;
                }
            }
            y.index_axis_mut(ndarray::Axis(1), p).assign(&yp);
        }
        y
    }

    /// Accumulates parameter gradients; returns dx.
    pub fn backward(&mut self, x: &Array3<A>, dy: &Array3<A>) -> Array3<A> {
        let (batch, parts, _) = x.dim();
        let w = self.w.value.view().into_dimensionality::<Ix3>().unwrap().to_owned();
        let mut dx = Array3::<A>::zeros((batch, parts, self.cin));
        {
            let mut dw = self.w.grad.view_mut().into_dimensionality::<Ix3>().unwrap();
            for p in 0..parts {
                let xp = x.index_axis(ndarray::Axis(1), p).to_owned();
                let dyp = dy.index_axis(ndarray::Axis(1), p).to_owned();
                let wp = w.index_axis(ndarray::Axis(0), p);
                let (dwp, dxp) = rayon::join(|| xp.t().dot(&dyp), || dyp.dot(&wp.t()));
                dw.index_axis_mut(ndarray::Axis(0), p)
                    .zip_mut_with(&dwp, |g, &d| *g = *g + d);
                dx.index_axis_mut(ndarray::Axis(1), p).assign(&dxp);
                if let Some(b) = &mut self.b {
                    let mut db = b.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                    let dbp = dyp.sum_axis(ndarray::Axis(0));
                    db.index_axis_mut(ndarray::Axis(0), p)
                        .zip_mut_with(&dbp, |g, &d| *g = *g + d);
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parts_use_independent_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lin = PartLinear::<f64>::new("t", 2, 3, 4, true, LinearInit::Uniform, &mut rng);
        let x = Array3::from_shape_fn((1, 2, 3), |(_, _, c)| c as f64);
        let y = lin.forward(&x);
        // Same input vector per part, different outputs.
        assert_ne!(
            y.index_axis(ndarray::Axis(1), 0),
            y.index_axis(ndarray::Axis(1), 1)
        );
    }

    #[test]
    fn linearity_and_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut lin = PartLinear::<f64>::new("t", 2, 3, 4, true, LinearInit::Uniform, &mut rng);
        if let Some(b) = &mut lin.b {
            b.value.fill(0.0);
        }
        let zero = Array3::<f64>::zeros((2, 2, 3));
        assert!(lin.forward(&zero).iter().all(|&v| v == 0.0));

        let x = Array3::from_shape_fn((2, 2, 3), |_| rng.random_range(-1.0..1.0));
        let y1 = lin.forward(&x);
        let y2 = lin.forward(&x.mapv(|v| 2.0 * v));
        let diff = (&y2 - &y1.mapv(|v| 2.0 * v))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut lin = PartLinear::<f64>::new("t", 2, 3, 2, true, LinearInit::Uniform, &mut rng);
        let x = Array3::from_shape_fn((4, 2, 3), |_| rng.random_range(-1.0..1.0));
        let w_loss = Array3::from_shape_fn((4, 2, 2), |_| rng.random_range(-1.0..1.0));

        let dy = w_loss.clone();
        let dx = lin.backward(&x, &dy);
        let loss =
            |lin: &PartLinear<f64>, x: &Array3<f64>| (&lin.forward(x) * &w_loss).sum();

        let h = 1e-6;
        let mut xp = x.clone();
        for idx in [[0usize, 0, 0], [3, 1, 2], [2, 0, 1]] {
            let orig = xp[idx];
            xp[idx] = orig + h;
            let up = loss(&lin, &xp);
            xp[idx] = orig - h;
            let dn = loss(&lin, &xp);
            xp[idx] = orig;
            assert!(((up - dn) / (2.0 * h) - dx[idx]).abs() < 1e-7);
        }
        for idx in [[0usize, 0, 0], [1, 2, 1]] {
            let orig = lin.w.value[idx.as_slice()];
            lin.w.value[idx.as_slice()] = orig + h;
            let up = loss(&lin, &x);
            lin.w.value[idx.as_slice()] = orig - h;
            let dn = loss(&lin, &x);
            lin.w.value[idx.as_slice()] = orig;
            assert!(((up - dn) / (2.0 * h) - lin.w.grad[idx.as_slice()]).abs() < 1e-7);
        }
    }
}
