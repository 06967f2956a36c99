//! Logistic regression and fully connected networks over flat parameter vectors.
//!
//! Parameter layout: layers in order; each layer stores its weight matrix
//! row-major as `out x in`, followed by its `out` biases. Logistic regression has
//! no bias. Every model emits `C - 1` logits; the last class has an implicit
//! logit of zero.

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::rng::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    bias: bool,
    offset: usize,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.n_in * self.n_out + if self.bias { self.n_out } else { 0 }
    }

    fn weights<'a>(&self, params: &'a [f64]) -> DMatrixView<'a, f64> {
        // Column-major `in x out` view of the row-major `out x in` block, i.e. W^T.
        DMatrixView::from_slice(
            &params[self.offset..self.offset + self.n_in * self.n_out],
            self.n_in,
            self.n_out,
        )
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.n_in * self.n_out;
        start..start + self.n_out
    }
}

/// Model architecture with a minimal categorical head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    input_dim: usize,
    num_classes: usize,
    activation: Activation,
    layers: Vec<Layer>,
    is_logreg: bool,
}

impl ModelSpec {
    /// Multinomial logistic regression without bias: `(C-1) x D` weights.
    pub fn logreg(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::build(input_dim, &[], num_classes, Activation::Relu, true)
    }

    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        activation: Activation,
    ) -> Result<Self> {
        Self::build(input_dim, hidden, num_classes, activation, false)
    }

    fn build(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        activation: Activation,
        is_logreg: bool,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes < 2 || hidden.contains(&0) {
            return Err(Error::Config(format!(
                "model needs input_dim >= 1, classes >= 2 and nonempty layers (got {input_dim}, {num_classes}, {hidden:?})"
            )));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(num_classes - 1);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let layer = Layer {
                n_in: w[0],
                n_out: w[1],
                bias: !is_logreg,
                offset,
            };
            offset += layer.n_params();
            layers.push(layer);
        }
        Ok(Self {
            input_dim,
            num_classes,
            activation,
            layers,
            is_logreg,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn output_dim(&self) -> usize {
        self.num_classes - 1
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn is_logreg(&self) -> bool {
        self.is_logreg
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(self.layers.iter().map(|l| l.n_out));
        w
    }

    /// Weights ~ N(0, 2/fan_in) for relu and N(0, 1/fan_in) for tanh, biases zero.
    /// Logistic regression starts at zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        if self.is_logreg {
            return p;
        }
        let gain = match self.activation {
            Activation::Relu => 2.0,
            Activation::Tanh => 1.0,
        };
        for layer in &self.layers {
            let sd = (gain / layer.n_in as f64).sqrt();
            for w in &mut p[layer.offset..layer.offset + layer.n_in * layer.n_out] {
                *w = sd * normal(rng);
            }
        }
        p
    }

    fn check(&self, params: &[f64], inputs: &DMatrix<f64>) -> Result<()> {
        check_len("parameter vector", self.num_params(), params.len())?;
        check_len("input width", self.input_dim, inputs.ncols())
    }

    /// Pre-activations of every layer (the last one holds the logits).
    fn forward(&self, params: &[f64], x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h: Option<DMatrix<f64>> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let input = h.as_ref().unwrap_or(x);
            let mut z = input * layer.weights(params);
            if layer.bias {
                for (o, &b) in params[layer.bias_range()].iter().enumerate() {
                    z.column_mut(o).add_scalar_mut(b);
                }
            }
            if i + 1 < self.layers.len() {
                let act = self.activation;
                h = Some(z.map(|v| act.apply(v)));
            }
            pre.push(z);
        }
        pre
    }

    fn layer_input<'a>(
        &self,
        i: usize,
        x: &'a DMatrix<f64>,
        pre: &[DMatrix<f64>],
    ) -> std::borrow::Cow<'a, DMatrix<f64>> {
        if i == 0 {
            std::borrow::Cow::Borrowed(x)
        } else {
            let act = self.activation;
            std::borrow::Cow::Owned(pre[i - 1].map(|v| act.apply(v)))
        }
    }

    /// Logits, shape `B x (C-1)`.
    pub fn logits(&self, params: &[f64], inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(params, inputs)?;
        Ok(self.forward(params, inputs).pop().expect("at least one layer"))
    }

    /// Class probabilities, shape `B x C`.
    pub fn probs(&self, params: &[f64], inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(softmax_rows(&self.logits(params, inputs)?))
    }

    /// Mean negative log-likelihood over the batch.
    pub fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        let z = self.logits(params, &batch.inputs)?;
        Ok(mean_nll(&z, &batch.labels))
    }

    /// Reverse-mode gradient of [`ModelSpec::loss`].
    pub fn grad(&self, params: &[f64], batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.loss_grad(params, batch)?.1)
    }

    pub fn loss_grad(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        self.check(params, &batch.inputs)?;
        let pre = self.forward(params, &batch.inputs);
        let z = pre.last().expect("at least one layer");
        let loss = mean_nll(z, &batch.labels);
        let b = batch.len() as f64;
        let mut delta = softmax_rows(z).columns(0, self.output_dim()).into_owned();
        for (r, &y) in batch.labels.iter().enumerate() {
            if y < self.output_dim() {
                delta[(r, y)] -= 1.0;
            }
        }
        delta /= b;
        let mut g = vec![0.0; self.num_params()];
        self.backward(params, &batch.inputs, &pre, delta, &mut g, false);
        Ok((loss, g))
    }

    /// Backpropagates output sensitivities `delta` (B x (C-1)).
    /// With `squared`, accumulates per-example squared gradients instead.
    fn backward(
        &self,
        params: &[f64],
        x: &DMatrix<f64>,
        pre: &[DMatrix<f64>],
        mut delta: DMatrix<f64>,
        out: &mut [f64],
        squared: bool,
    ) {
        for i in (0..self.layers.len()).rev() {
            let layer = self.layers[i];
            let h = self.layer_input(i, x, pre);
            let (gw, gb) = if squared {
                let h2 = h.map(|v| v * v);
                let d2 = delta.map(|v| v * v);
                (h2.tr_mul(&d2), d2.row_sum())
            } else {
                (h.tr_mul(&delta), delta.row_sum())
            };
            let w_end = layer.offset + layer.n_in * layer.n_out;
            for (o, v) in out[layer.offset..w_end].iter_mut().zip(gw.as_slice()) {
                *o += v;
            }
            if layer.bias {
                for (o, v) in out[layer.bias_range()].iter_mut().zip(gb.iter()) {
                    *o += v;
                }
            }
            if i > 0 {
                let act = self.activation;
                let mut dh = &delta * layer.weights(params).transpose();
                dh.zip_apply(&pre[i - 1], |d, z| *d *= act.deriv(z));
                delta = dh;
            }
        }
    }

    /// Diagonal of the generalized Gauss-Newton matrix summed over the batch.
    ///
    /// Uses the factorization of the softmax Hessian restricted to the first
    /// `C-1` logits: `H = sum_c p_c (e_c - p)(e_c - p)^T` with `e_{C-1} = 0`,
    /// so each factor is backpropagated once and squared per example.
    pub fn diag_ggn(&self, params: &[f64], batch: &Batch) -> Result<Vec<f64>> {
        self.check(params, &batch.inputs)?;
        let pre = self.forward(params, &batch.inputs);
        let p = softmax_rows(pre.last().expect("at least one layer"));
        let k = self.output_dim();
        let mut out = vec![0.0; self.num_params()];
        for c in 0..self.num_classes {
            let mut delta = DMatrix::zeros(batch.len(), k);
            for r in 0..batch.len() {
                let w = p[(r, c)].sqrt();
                for j in 0..k {
                    let e = if j == c { 1.0 } else { 0.0 };
                    delta[(r, j)] = w * (e - p[(r, j)]);
                }
            }
            self.backward(params, &batch.inputs, &pre, delta, &mut out, true);
        }
        Ok(out)
    }

    /// Forward-mode product: logits and their directional derivative along `tangent`.
    pub fn jvp(
        &self,
        params: &[f64],
        tangent: &[f64],
        inputs: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check(params, inputs)?;
        check_len("tangent", params.len(), tangent.len())?;
        let act = self.activation;
        let mut h = inputs.clone();
        let mut dh = DMatrix::zeros(inputs.nrows(), inputs.ncols());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &h * layer.weights(params);
            let mut dz = &dh * layer.weights(params) + &h * layer.weights(tangent);
            if layer.bias {
                let r = layer.bias_range();
                for o in 0..layer.n_out {
                    z.column_mut(o).add_scalar_mut(params[r.start + o]);
                    dz.column_mut(o).add_scalar_mut(tangent[r.start + o]);
                }
            }
            if i + 1 == self.layers.len() {
                return Ok((z, dz));
            }
            dh = dz.zip_map(&z, |d, v| d * act.deriv(v));
            h = z.map(|v| act.apply(v));
        }
        unreachable!("models have at least one layer")
    }
}

/// Row-wise softmax over `[z, 0]`, returning `B x (K+1)` probabilities.
pub fn softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let (b, k) = z.shape();
    let mut p = DMatrix::zeros(b, k + 1);
    for r in 0..b {
        let m = z.row(r).iter().fold(0.0_f64, |a, &v| a.max(v));
        let mut s = (-m).exp();
        for j in 0..k {
            s += (z[(r, j)] - m).exp();
        }
        for j in 0..k {
            p[(r, j)] = (z[(r, j)] - m).exp() / s;
        }
        p[(r, k)] = (-m).exp() / s;
    }
    p
}

fn mean_nll(z: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let k = z.ncols();
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let m = z.row(r).iter().fold(0.0_f64, |a, &v| a.max(v));
        let mut s = (-m).exp();
        for j in 0..k {
            s += (z[(r, j)] - m).exp();
        }
        let zy = if y < k { z[(r, y)] } else { 0.0 };
        total += m + s.ln() - zy;
    }
    total / labels.len() as f64
}

/// Inputs (rows are examples) with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: DMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Config("batch must contain at least one example".into()));
        }
        check_len("labels", inputs.nrows(), labels.len())?;
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite input".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Domain(format!("label {y} >= {num_classes} classes")));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("ragged input rows".into()));
        }
        let m = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(m, labels, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select_rows(idx.iter()),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Contiguous equal splits; `m` must divide the batch size.
    pub fn split(&self, m: usize) -> Result<Vec<Batch>> {
        if m == 0 || self.len() % m != 0 {
            return Err(Error::Config(format!(
                "m = {m} does not divide batch size {}",
                self.len()
            )));
        }
        let size = self.len() / m;
        Ok((0..m)
            .map(|k| {
                let idx: Vec<usize> = (k * size..(k + 1) * size).collect();
                self.select(&idx)
            })
            .collect())
    }
}

/// What the optimizers need from a model.
pub trait Model {
    fn num_params(&self) -> usize;
    fn loss_grad(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)>;

    /// Mean loss alone; override when cheaper than the gradient.
    fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        Ok(self.loss_grad(params, batch)?.0)
    }
}

impl Model for ModelSpec {
    fn num_params(&self) -> usize {
        ModelSpec::num_params(self)
    }

    fn loss_grad(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        ModelSpec::loss_grad(self, params, batch)
    }

    fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        ModelSpec::loss(self, params, batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn logreg_at_zero_has_log2_loss() {
        let m = ModelSpec::logreg(2, 2).unwrap();
        let b = Batch::from_rows(&[vec![0.3, -1.0], vec![2.0, 1.0]], vec![0, 1], 2).unwrap();
        assert_relative_eq!(m.loss(&[0.0, 0.0], &b).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn logreg_two_point_loss_matches_hand_value() {
        // Class 0 has logit w.x, class 1 the implicit zero: p(y=0|x) = sigmoid(w.x).
        let m = ModelSpec::logreg(2, 2).unwrap();
        let b = Batch::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 0], 2).unwrap();
        let w = [1.0, -1.0];
        let expected = -(0.5) * ((1.0 - sigmoid(1.0)).ln() + sigmoid(-1.0).ln());
        assert_relative_eq!(m.loss(&w, &b).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn confident_mlp_has_near_zero_loss() {
        let m = ModelSpec::mlp(1, &[2], 2, Activation::Relu).unwrap();
        // Output logit for class 0 = 50 regardless of input.
        let mut p = vec![0.0; m.num_params()];
        *p.last_mut().unwrap() = 50.0;
        let b = Batch::from_rows(&[vec![0.7]], vec![0], 2).unwrap();
        assert!(m.loss(&p, &b).unwrap() < 1e-20);
    }

    #[test]
    fn zero_inputs_give_zero_gradient_for_bias_free_model() {
        let m = ModelSpec::logreg(3, 2).unwrap();
        let b = Batch::from_rows(&[vec![0.0; 3], vec![0.0; 3]], vec![0, 1], 2).unwrap();
        assert!(m.grad(&[0.4, -2.0, 1.0], &b).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn symmetric_balanced_data_gives_zero_gradient_at_origin() {
        let m = ModelSpec::logreg(2, 2).unwrap();
        // Each x is paired with -x at the opposite label, and each class is centred,
        // which is what makes the logistic gradient vanish at zero.
        let rows = vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![-1.0, -2.0], vec![1.0, 2.0]];
        let b = Batch::from_rows(&rows, vec![0, 1, 0, 1], 2).unwrap();
        for g in m.grad(&[0.0, 0.0], &b).unwrap() {
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = ModelSpec::logreg(2, 2).unwrap();
        let b = Batch::from_rows(&[vec![1.0, 0.0]], vec![0], 2).unwrap();
        assert!(matches!(m.loss(&[0.0], &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn layout_is_row_major_weights_then_bias() {
        let m = ModelSpec::mlp(2, &[], 3, Activation::Relu).unwrap();
        // W = [[1,2],[3,4]], b = [10, 20]
        let p = [1.0, 2.0, 3.0, 4.0, 10.0, 20.0];
        let x = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let z = m.logits(&p, &x).unwrap();
        assert_eq!(z[(0, 0)], -1.0 + 10.0);
        assert_eq!(z[(0, 1)], -1.0 + 20.0);
    }

    #[test]
    fn jvp_matches_difference_of_logits() {
        let m = ModelSpec::mlp(2, &[4], 3, Activation::Tanh).unwrap();
        let mut rng = crate::rng::seeded(4);
        let p = m.init_params(&mut rng);
        let t = crate::rng::normal_vec(&mut rng, p.len());
        let x = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 1.0, 0.5]);
        let (_, dz) = m.jvp(&p, &t, &x).unwrap();
        let h = 1e-6;
        let plus: Vec<f64> = p.iter().zip(&t).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = p.iter().zip(&t).map(|(a, b)| a - h * b).collect();
        let fd = (m.logits(&plus, &x).unwrap() - m.logits(&minus, &x).unwrap()) / (2.0 * h);
        assert!((fd - dz).amax() < 1e-8);
    }

    #[test]
    fn split_requires_divisibility() {
        let b = Batch::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0], 2).unwrap();
        assert!(b.split(2).is_err());
        let s = b.split(3).unwrap();
        assert_eq!(s[2].labels, vec![0]);
    }
}
