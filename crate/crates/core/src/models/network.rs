//! Dense and recurrent binary classifiers over a flat parameter vector.
//!
//! Parameters live in one `Vec<f64>` laid out block by block in
//! [`Architecture::param_shapes`] order, each block row-major. Gradients use
//! the same layout, so the optimizer and the artifact format never need to
//! know the architecture.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logits are clamped to this magnitude before the sigmoid and the loss.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Architecture {
    /// No parameters; scores are seeded uniform draws.
    Random { input_dim: usize },
    /// Fully connected ReLU layers then a single sigmoid unit. No hidden
    /// layers is logistic regression.
    Dense { input_dim: usize, hidden: Vec<usize> },
    /// One LSTM layer over `steps` timesteps of `step_dim` features; its final
    /// hidden state feeds a dense ReLU head and a sigmoid unit.
    Lstm {
        steps: usize,
        step_dim: usize,
        units: usize,
        hidden: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ParamShape {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug)]
struct DenseLayer {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Clone, Copy, Debug)]
struct LstmLayer {
    wx: usize,
    wh: usize,
    b: usize,
    step_dim: usize,
    units: usize,
    steps: usize,
}

#[derive(Clone, Debug)]
struct Plan {
    lstm: Option<LstmLayer>,
    dense: Vec<DenseLayer>,
    shapes: Vec<ParamShape>,
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::Random { input_dim } | Architecture::Dense { input_dim, .. } => *input_dim,
            Architecture::Lstm { steps, step_dim, .. } => steps * step_dim,
        }
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        self.plan().shapes
    }

    pub fn n_params(&self) -> usize {
        self.param_shapes().iter().map(ParamShape::len).sum()
    }

    fn plan(&self) -> Plan {
        let mut shapes = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, dims: Vec<usize>| {
            let at = offset;
            offset += dims.iter().product::<usize>();
            shapes.push(ParamShape { name, dims });
            at
        };
        let (lstm, head_in, hidden) = match self {
            Architecture::Random { .. } => {
                return Plan {
                    lstm: None,
                    dense: Vec::new(),
                    shapes: Vec::new(),
                }
            }
            Architecture::Dense { input_dim, hidden } => (None, *input_dim, hidden.clone()),
            Architecture::Lstm {
                steps,
                step_dim,
                units,
                hidden,
            } => {
                let wx = push("lstm.input_weight".into(), vec![*step_dim, 4 * units]);
                let wh = push("lstm.recurrent_weight".into(), vec![*units, 4 * units]);
                let b = push("lstm.bias".into(), vec![4 * units]);
                let layer = LstmLayer {
                    wx,
                    wh,
                    b,
                    step_dim: *step_dim,
                    units: *units,
                    steps: *steps,
                };
                (Some(layer), *units, hidden.clone())
            }
        };
        let mut dense = Vec::new();
        let mut fan_in = head_in;
        for (i, &fan_out) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
            let w = push(format!("dense{i}.weight"), vec![fan_in, fan_out]);
            let b = push(format!("dense{i}.bias"), vec![fan_out]);
            dense.push(DenseLayer { w, b, fan_in, fan_out });
            fan_in = fan_out;
        }
        Plan { lstm, dense, shapes }
    }
}

/// Per-sample loss weighting and weight decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub positive_weight: f64,
    pub l2_penalty: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            positive_weight: 1.0,
            l2_penalty: 0.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn clamp_logit(z: f64) -> f64 {
    z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

struct LstmCache {
    inputs: Vec<Array2<f64>>,
    hidden: Vec<Array2<f64>>,
    cell: Vec<Array2<f64>>,
    gates: Vec<Array2<f64>>,
    tanh_cell: Vec<Array2<f64>>,
}

impl Network {
    /// Seeded initialization: He-uniform for ReLU layers, LeCun-uniform for
    /// the output unit, `U(-1/sqrt(units), 1/sqrt(units))` for LSTM weights,
    /// zero biases except a forget-gate bias of one.
    pub fn init(architecture: Architecture, seed: u64) -> Self {
        let plan = architecture.plan();
        let n: usize = plan.shapes.iter().map(ParamShape::len).sum();
        let mut params = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], limit: f64| {
            for p in params {
                *p = rng.gen_range(-limit..limit);
            }
        };
        if let Some(l) = plan.lstm {
            let limit = 1.0 / (l.units as f64).sqrt();
            fill(&mut params[l.wx..l.wx + l.step_dim * 4 * l.units], limit);
            fill(&mut params[l.wh..l.wh + l.units * 4 * l.units], limit);
            params[l.b + l.units..l.b + 2 * l.units].fill(1.0);
        }
        let last = plan.dense.len() - 1;
        for (i, d) in plan.dense.iter().enumerate() {
            let limit = if i == last {
                (3.0 / d.fan_in as f64).sqrt()
            } else {
                (6.0 / d.fan_in as f64).sqrt()
            };
            fill(&mut params[d.w..d.w + d.fan_in * d.fan_out], limit);
        }
        Self { architecture, params }
    }

    pub fn from_params(architecture: Architecture, params: Vec<f64>) -> Result<Self> {
        let expected = architecture.n_params();
        if params.len() != expected {
            return Err(Error::Shape(format!("{} parameters, architecture needs {expected}", params.len())));
        }
        Ok(Self { architecture, params })
    }

    fn matrix(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[offset..offset + rows * cols]).expect("parameter block shape")
    }

    fn vector(&self, offset: usize, len: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[offset..offset + len])
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        let want = self.architecture.input_dim();
        if x.ncols() != want {
            return Err(Error::Shape(format!("input has {} columns, model expects {want}", x.ncols())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input".into()));
        }
        Ok(())
    }

    /// Raw (unclamped) logits.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        if matches!(self.architecture, Architecture::Random { .. }) {
            return Err(Error::InvalidInput("random model has no logits".into()));
        }
        let plan = self.architecture.plan();
        let head_input = match plan.lstm {
            Some(l) => self.lstm_forward(&l, x).hidden.pop().expect("final hidden state"),
            None => x.to_owned(),
        };
        Ok(self.dense_forward(&plan.dense, head_input).1)
    }

    /// Probabilities strictly inside (0, 1).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.iter().map(|z| sigmoid(clamp_logit(*z))).collect())
    }

    /// Mean weighted binary cross-entropy plus `0.5 * l2 * sum(weights^2)`.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[f64], opts: &LossOptions) -> Result<f64> {
        let z = self.logits(x)?;
        let n = y.len() as f64;
        let data: f64 = z
            .iter()
            .zip(y)
            .map(|(z, y)| {
                let zc = clamp_logit(*z);
                sample_weight(*y, opts) * (softplus(zc) - y * zc)
            })
            .sum::<f64>()
            / n;
        Ok(data + 0.5 * opts.l2_penalty * self.weight_sq_norm())
    }

    /// Loss and its gradient with respect to `params`, by backpropagation
    /// (through time for the LSTM layer).
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[f64], opts: &LossOptions) -> Result<(f64, Vec<f64>)> {
        self.check_input(&x)?;
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        let plan = self.architecture.plan();
        if plan.dense.is_empty() {
            return Err(Error::InvalidInput("random model is not trainable".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let n = y.len() as f64;

        let lstm_cache = plan.lstm.map(|l| self.lstm_forward(&l, x));
        let head_input = match &lstm_cache {
            Some(c) => c.hidden.last().expect("final hidden state").clone(),
            None => x.to_owned(),
        };
        let (acts, z) = self.dense_forward(&plan.dense, head_input);

        let mut loss = 0.0;
        let mut dz = Array1::zeros(z.len());
        for (i, (&zi, &yi)) in z.iter().zip(y).enumerate() {
            let zc = clamp_logit(zi);
            let w = sample_weight(yi, opts);
            loss += w * (softplus(zc) - yi * zc);
            if zi.abs() < LOGIT_CLAMP {
                dz[i] = w * (sigmoid(zc) - yi) / n;
            }
        }
        loss /= n;

        let d_head = self.dense_backward(&plan.dense, &acts, dz, &mut grad, plan.lstm.is_some());
        if let (Some(l), Some(cache), Some(d_head)) = (plan.lstm, lstm_cache, d_head) {
            self.lstm_backward(&l, &cache, d_head, &mut grad);
        }

        if opts.l2_penalty > 0.0 {
            loss += 0.5 * opts.l2_penalty * self.weight_sq_norm();
            for range in self.weight_ranges() {
                for j in range {
                    grad[j] += opts.l2_penalty * self.params[j];
                }
            }
        }
        Ok((loss, grad))
    }

    /// Index ranges of weight matrices (biases excluded).
    fn weight_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let plan = self.architecture.plan();
        let mut out = Vec::new();
        if let Some(l) = plan.lstm {
            out.push(l.wx..l.wx + l.step_dim * 4 * l.units);
            out.push(l.wh..l.wh + l.units * 4 * l.units);
        }
        for d in &plan.dense {
            out.push(d.w..d.w + d.fan_in * d.fan_out);
        }
        out
    }

    fn weight_sq_norm(&self) -> f64 {
        self.weight_ranges()
            .into_iter()
            .flat_map(|r| self.params[r].iter())
            .map(|w| w * w)
            .sum()
    }

    /// Returns the input to every layer and the output logits.
    fn dense_forward(&self, layers: &[DenseLayer], input: Array2<f64>) -> (Vec<Array2<f64>>, Array1<f64>) {
        let mut acts = vec![input];
        let last = layers.len() - 1;
        for (i, d) in layers.iter().enumerate() {
            let w = self.matrix(d.w, d.fan_in, d.fan_out);
            let b = self.vector(d.b, d.fan_out);
            let mut z = acts[i].dot(&w);
            z += &b;
            if i == last {
                return (acts, z.column(0).to_owned());
            }
            z.mapv_inplace(|v| v.max(0.0));
            acts.push(z);
        }
        unreachable!("dense stack always ends in the output unit")
    }

    /// Accumulates dense-layer gradients; returns the gradient with respect to
    /// the head input when asked.
    fn dense_backward(
        &self,
        layers: &[DenseLayer],
        acts: &[Array2<f64>],
        dz: Array1<f64>,
        grad: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Array2<f64>> {
        let mut delta = dz.insert_axis(Axis(1));
        for i in (0..layers.len()).rev() {
            let d = layers[i];
            let g_w = acts[i].t().dot(&delta);
            add_into(&mut grad[d.w..d.w + d.fan_in * d.fan_out], g_w.iter());
            let g_b = delta.sum_axis(Axis(0));
            add_into(&mut grad[d.b..d.b + d.fan_out], g_b.iter());
            if i == 0 && !want_input_grad {
                return None;
            }
            let mut d_in = delta.dot(&self.matrix(d.w, d.fan_in, d.fan_out).t());
            if i == 0 {
                return Some(d_in);
            }
            d_in.zip_mut_with(&acts[i], |g, a| {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = d_in;
        }
        None
    }

    fn lstm_forward(&self, l: &LstmLayer, x: ArrayView2<'_, f64>) -> LstmCache {
        let batch = x.nrows();
        let h_units = l.units;
        let wx = self.matrix(l.wx, l.step_dim, 4 * h_units);
        let wh = self.matrix(l.wh, h_units, 4 * h_units);
        let b = self.vector(l.b, 4 * h_units);
        let mut cache = LstmCache {
            inputs: Vec::with_capacity(l.steps),
            hidden: vec![Array2::zeros((batch, h_units))],
            cell: vec![Array2::zeros((batch, h_units))],
            gates: Vec::with_capacity(l.steps),
            tanh_cell: Vec::with_capacity(l.steps),
        };
        for t in 0..l.steps {
            let x_t = x.slice(s![.., t * l.step_dim..(t + 1) * l.step_dim]).to_owned();
            let mut z = x_t.dot(&wx);
            z += &cache.hidden[t].dot(&wh);
            z += &b;
            z.slice_mut(s![.., 0..2 * h_units]).mapv_inplace(sigmoid);
            z.slice_mut(s![.., 2 * h_units..3 * h_units]).mapv_inplace(f64::tanh);
            z.slice_mut(s![.., 3 * h_units..]).mapv_inplace(sigmoid);

            let mut c = Array2::zeros((batch, h_units));
            let mut tc = Array2::zeros((batch, h_units));
            let mut h = Array2::zeros((batch, h_units));
            let c_prev = &cache.cell[t];
            for r in 0..batch {
                let gz = z.row(r);
                for j in 0..h_units {
                    let (ig, fg, gg, og) = (gz[j], gz[h_units + j], gz[2 * h_units + j], gz[3 * h_units + j]);
                    let cv = fg * c_prev[[r, j]] + ig * gg;
                    let tv = cv.tanh();
                    c[[r, j]] = cv;
                    tc[[r, j]] = tv;
                    h[[r, j]] = og * tv;
                }
            }
            cache.inputs.push(x_t);
            cache.gates.push(z);
            cache.cell.push(c);
            cache.tanh_cell.push(tc);
            cache.hidden.push(h);
        }
        cache
    }

    fn lstm_backward(&self, l: &LstmLayer, cache: &LstmCache, d_last: Array2<f64>, grad: &mut [f64]) {
        let h_units = l.units;
        let batch = d_last.nrows();
        let wh = self.matrix(l.wh, h_units, 4 * h_units);
        let mut dh = d_last;
        let mut dc: Array2<f64> = Array2::zeros((batch, h_units));
        let mut g_wx: Array2<f64> = Array2::zeros((l.step_dim, 4 * h_units));
        let mut g_wh: Array2<f64> = Array2::zeros((h_units, 4 * h_units));
        let mut g_b: Array1<f64> = Array1::zeros(4 * h_units);
        for t in (0..l.steps).rev() {
            let gates = &cache.gates[t];
            let tc = &cache.tanh_cell[t];
            let c_prev = &cache.cell[t];
            let mut da = Array2::zeros((batch, 4 * h_units));
            for r in 0..batch {
                let gz = gates.row(r);
                for j in 0..h_units {
                    let (ig, fg, gg, og) = (gz[j], gz[h_units + j], gz[2 * h_units + j], gz[3 * h_units + j]);
                    let tv = tc[[r, j]];
                    let dhv = dh[[r, j]];
                    let dcv = dc[[r, j]] + dhv * og * (1.0 - tv * tv);
                    da[[r, j]] = dcv * gg * ig * (1.0 - ig);
                    da[[r, h_units + j]] = dcv * c_prev[[r, j]] * fg * (1.0 - fg);
                    da[[r, 2 * h_units + j]] = dcv * ig * (1.0 - gg * gg);
                    da[[r, 3 * h_units + j]] = dhv * tv * og * (1.0 - og);
                    dc[[r, j]] = dcv * fg;
                }
            }
            g_wx += &cache.inputs[t].t().dot(&da);
            g_wh += &cache.hidden[t].t().dot(&da);
            g_b += &da.sum_axis(Axis(0));
            if t > 0 {
                dh = da.dot(&wh.t());
            }
        }
        add_into(&mut grad[l.wx..l.wx + l.step_dim * 4 * h_units], g_wx.iter());
        add_into(&mut grad[l.wh..l.wh + h_units * 4 * h_units], g_wh.iter());
        add_into(&mut grad[l.b..l.b + 4 * h_units], g_b.iter());
    }
}

fn sample_weight(y: f64, opts: &LossOptions) -> f64 {
    if y > 0.5 {
        opts.positive_weight
    } else {
        1.0
    }
}

fn add_into<'a>(dst: &mut [f64], src: impl Iterator<Item = &'a f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parameter_counts() {
        let logreg = Architecture::Dense {
            input_dim: 42,
            hidden: vec![],
        };
        assert_eq!(logreg.n_params(), 43);
        let ffnn = Architecture::Dense {
            input_dim: 42,
            hidden: vec![128, 128, 128],
        };
        assert_eq!(ffnn.n_params(), 42 * 128 + 128 + 2 * (128 * 128 + 128) + 129);
        let lstm = Architecture::Lstm {
            steps: 6,
            step_dim: 7,
            units: 128,
            hidden: vec![128, 128, 128],
        };
        assert_eq!(lstm.input_dim(), 42);
        assert_eq!(
            lstm.n_params(),
            7 * 512 + 128 * 512 + 512 + 128 * 128 + 128 + 2 * (128 * 128 + 128) + 129
        );
    }

    #[test]
    fn logistic_regression_forward_is_affine() {
        let arch = Architecture::Dense {
            input_dim: 2,
            hidden: vec![],
        };
        let net = Network::from_params(arch, vec![2.0, -1.0, 0.5]).unwrap();
        let z = net.logits(array![[1.0, 1.0], [0.0, 3.0]].view()).unwrap();
        assert_eq!(z.to_vec(), vec![1.5, -2.5]);
    }

    #[test]
    fn predictions_stay_inside_unit_interval() {
        let arch = Architecture::Dense {
            input_dim: 1,
            hidden: vec![],
        };
        let net = Network::from_params(arch, vec![1e6, 0.0]).unwrap();
        let p = net.predict(array![[1.0], [-1.0]].view()).unwrap();
        assert!(p[0] < 1.0 && p[0] > 0.5);
        assert!(p[1] > 0.0 && p[1] < 0.5);
    }

    #[test]
    fn clamped_logits_have_zero_gradient() {
        let arch = Architecture::Dense {
            input_dim: 1,
            hidden: vec![],
        };
        let net = Network::from_params(arch, vec![100.0, 0.0]).unwrap();
        let (_, g) = net.loss_and_grad(array![[1.0]].view(), &[0.0], &LossOptions::default()).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_and_finiteness_checks() {
        let net = Network::init(
            Architecture::Dense {
                input_dim: 3,
                hidden: vec![4],
            },
            1,
        );
        assert!(matches!(net.predict(array![[1.0, 2.0]].view()), Err(Error::Shape(_))));
        assert!(matches!(
            net.predict(array![[1.0, f64::NAN, 0.0]].view()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn init_is_seeded() {
        let arch = Architecture::Lstm {
            steps: 3,
            step_dim: 2,
            units: 4,
            hidden: vec![5],
        };
        assert_eq!(Network::init(arch.clone(), 9), Network::init(arch.clone(), 9));
        assert_ne!(Network::init(arch.clone(), 9), Network::init(arch, 10));
    }
}
