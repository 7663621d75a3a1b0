use ndarray::{Array2, Axis};

use super::params::LstmParams;
use crate::error::{Error, Result};

/// Activations of one direction, indexed by forward time regardless of the
/// direction the recurrence ran in.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub reverse: bool,
    /// T x 4H post-activation gates (input, forget, candidate, output).
    pub gates: Array2<f64>,
    pub cell: Array2<f64>,
    pub tanh_cell: Array2<f64>,
    pub hidden: Array2<f64>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Time index visited at recurrence step `s`.
fn time_at(step: usize, len: usize, reverse: bool) -> usize {
    if reverse {
        len - 1 - step
    } else {
        step
    }
}

/// Runs one LSTM direction over `x` (T x D). With `reverse` the recurrence
/// starts at the last frame; the cache is still indexed by forward time.
pub fn lstm_forward(params: &LstmParams, x: &Array2<f64>, reverse: bool) -> Result<LstmCache> {
    let len = x.nrows();
    let h = params.hidden();
    if x.ncols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} features, LSTM expects {}",
            x.ncols(),
            params.input_dim()
        )));
    }
    if len == 0 {
        return Err(Error::Shape("empty sequence".into()));
    }
    let mut gates = x.dot(&params.w_x.t());
    gates += &params.b;
    let mut cell = Array2::zeros((len, h));
    let mut tanh_cell = Array2::zeros((len, h));
    let mut hidden = Array2::zeros((len, h));
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let w_h = params.w_h.as_slice().expect("standard layout");

    for step in 0..len {
        let t = time_at(step, len, reverse);
        let mut z = gates.row_mut(t);
        let z = z.as_slice_mut().expect("standard layout");
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += dot(&w_h[r * h..(r + 1) * h], &h_prev);
        }
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let g = z[2 * h + j].tanh();
            let o = sigmoid(z[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            let hj = o * tc;
            if !(c.is_finite() && hj.is_finite()) {
                return Err(Error::NonFinite { timestep: t });
            }
            z[j] = i;
            z[h + j] = f;
            z[2 * h + j] = g;
            z[3 * h + j] = o;
            cell[[t, j]] = c;
            tanh_cell[[t, j]] = tc;
            hidden[[t, j]] = hj;
            c_prev[j] = c;
            h_prev[j] = hj;
        }
    }
    Ok(LstmCache {
        reverse,
        gates,
        cell,
        tanh_cell,
        hidden,
    })
}

/// Backpropagation through time for one direction. `d_hidden` (T x H) is the
/// loss gradient with respect to the emitted hidden states.
pub fn lstm_backward(params: &LstmParams, x: &Array2<f64>, cache: &LstmCache, d_hidden: &Array2<f64>) -> Result<LstmParams> {
    let len = cache.len();
    let h = params.hidden();
    if d_hidden.dim() != (len, h) || x.nrows() != len {
        return Err(Error::Shape(format!(
            "hidden gradient {:?} does not match cache of {} x {}",
            d_hidden.dim(),
            len,
            h
        )));
    }
    let w_h = params.w_h.as_slice().expect("standard layout");
    let mut d_gates = Array2::<f64>::zeros((len, 4 * h));
    let mut h_prev_rows = Array2::<f64>::zeros((len, h));
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];

    for step in (0..len).rev() {
        let t = time_at(step, len, cache.reverse);
        let prev = (step > 0).then(|| time_at(step - 1, len, cache.reverse));
        if let Some(p) = prev {
            h_prev_rows.row_mut(t).assign(&cache.hidden.row(p));
        }
        let gates = cache.gates.row(t);
        let mut dz = d_gates.row_mut(t);
        let dz = dz.as_slice_mut().expect("standard layout");
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = cache.tanh_cell[[t, j]];
            let c_prev = prev.map_or(0.0, |p| cache.cell[[p, j]]);
            let dh = d_hidden[[t, j]] + dh_next[j];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        dh_next.fill(0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr != 0.0 {
                axpy(dzr, &w_h[r * h..(r + 1) * h], &mut dh_next);
            }
        }
    }

    Ok(LstmParams {
        w_x: d_gates.t().dot(x).as_standard_layout().into_owned(),
        w_h: d_gates.t().dot(&h_prev_rows).as_standard_layout().into_owned(),
        b: d_gates.sum_axis(Axis(0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(d: usize, h: usize, seed: u64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(d, h);
        p.w_x.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p.w_h.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p
    }

    fn random_input(t: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((t, d), |_| rng.random_range(-1.0..1.0))
    }

    // Plain scalar loops with nested Vecs, independent of the ndarray path.
    fn scalar_reference(p: &LstmParams, x: &Array2<f64>) -> Vec<Vec<f64>> {
        let (t_len, d) = x.dim();
        let h = p.hidden();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hs = vec![vec![0.0; h]; t_len];
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for t in 0..t_len {
            let mut z = vec![0.0; 4 * h];
            for r in 0..4 * h {
                let mut s = p.b[r];
                for k in 0..d {
                    s += p.w_x[[r, k]] * x[[t, k]];
                }
                for k in 0..h {
                    s += p.w_h[[r, k]] * h_prev[k];
                }
                z[r] = s;
            }
            let mut c_new = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for j in 0..h {
                let i = sig(z[j]);
                let f = sig(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sig(z[3 * h + j]);
                c_new[j] = f * c_prev[j] + i * g;
                h_new[j] = o * c_new[j].tanh();
            }
            hs[t] = h_new.clone();
            h_prev = h_new;
            c_prev = c_new;
        }
        hs
    }

    #[test]
    fn zero_params_give_zero_hidden() {
        let p = LstmParams::zeros(3, 4);
        let cache = lstm_forward(&p, &random_input(6, 3, 1), false).unwrap();
        assert!(cache.hidden.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_directions_agree() {
        let p = random_params(3, 4, 2);
        let x = random_input(1, 3, 3);
        let a = lstm_forward(&p, &x, false).unwrap();
        let b = lstm_forward(&p, &x, true).unwrap();
        assert_eq!(a.hidden, b.hidden);
    }

    #[test]
    fn matches_scalar_reference() {
        let p = random_params(3, 4, 4);
        let x = random_input(5, 3, 5);
        let cache = lstm_forward(&p, &x, false).unwrap();
        let reference = scalar_reference(&p, &x);
        for t in 0..5 {
            for j in 0..4 {
                assert!((cache.hidden[[t, j]] - reference[t][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reverse_equals_forward_on_reversed_input() {
        let p = random_params(3, 4, 6);
        let x = random_input(7, 3, 7);
        let mut rev = x.clone();
        rev.invert_axis(Axis(0));
        let backward = lstm_forward(&p, &x, true).unwrap();
        let forward_on_reversed = lstm_forward(&p, &rev.as_standard_layout().to_owned(), false).unwrap();
        for t in 0..7 {
            assert_eq!(backward.hidden.row(t), forward_on_reversed.hidden.row(6 - t));
        }
    }

    #[test]
    fn non_finite_input_names_timestep() {
        let p = random_params(3, 4, 8);
        let mut x = random_input(5, 3, 9);
        x[[3, 1]] = f64::NAN;
        match lstm_forward(&p, &x, false) {
            Err(Error::NonFinite { timestep }) => assert_eq!(timestep, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_shape_mismatch() {
        let p = random_params(3, 4, 10);
        let x = random_input(5, 3, 11);
        let cache = lstm_forward(&p, &x, false).unwrap();
        assert!(lstm_backward(&p, &x, &cache, &Array2::zeros((4, 4))).is_err());
    }
}
