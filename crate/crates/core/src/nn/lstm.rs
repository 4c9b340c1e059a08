use rand::Rng;

use super::ops::sigmoid;
use super::tensor::{axpy, Param, ParamSet};
use super::{expect_len, NnError};

/// Weights of one LSTM direction. Each gate maps `[x; h_prev]` to `d_h` units.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub d_in: usize,
    pub d_h: usize,
    pub w_i: Param,
    pub w_f: Param,
    pub w_o: Param,
    pub w_g: Param,
    pub b_i: Param,
    pub b_f: Param,
    pub b_o: Param,
    pub b_g: Param,
}

impl LstmCellParams {
    /// Uniform `(-scale, scale)` initialisation with the forget bias set to 1.
    pub fn new(d_in: usize, d_h: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let cols = d_in + d_h;
        let w_i = Param::uniform(d_h, cols, scale, rng);
        let w_f = Param::uniform(d_h, cols, scale, rng);
        let w_o = Param::uniform(d_h, cols, scale, rng);
        let w_g = Param::uniform(d_h, cols, scale, rng);
        let b_i = Param::uniform(d_h, 1, scale, rng);
        let mut b_f = Param::zeros(d_h, 1);
        b_f.value.fill(1.0);
        let b_o = Param::uniform(d_h, 1, scale, rng);
        let b_g = Param::uniform(d_h, 1, scale, rng);
        LstmCellParams {
            d_in,
            d_h,
            w_i,
            w_f,
            w_o,
            w_g,
            b_i,
            b_f,
            b_o,
            b_g,
        }
    }

    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        let cols = d_in + d_h;
        LstmCellParams {
            d_in,
            d_h,
            w_i: Param::zeros(d_h, cols),
            w_f: Param::zeros(d_h, cols),
            w_o: Param::zeros(d_h, cols),
            w_g: Param::zeros(d_h, cols),
            b_i: Param::zeros(d_h, 1),
            b_f: Param::zeros(d_h, 1),
            b_o: Param::zeros(d_h, 1),
            b_g: Param::zeros(d_h, 1),
        }
    }
}

impl ParamSet for LstmCellParams {
    fn params(&self) -> Vec<(String, &Param)> {
        vec![
            ("w_i".into(), &self.w_i),
            ("w_f".into(), &self.w_f),
            ("w_o".into(), &self.w_o),
            ("w_g".into(), &self.w_g),
            ("b_i".into(), &self.b_i),
            ("b_f".into(), &self.b_f),
            ("b_o".into(), &self.b_o),
            ("b_g".into(), &self.b_g),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![
            ("w_i".into(), &mut self.w_i),
            ("w_f".into(), &mut self.w_f),
            ("w_o".into(), &mut self.w_o),
            ("w_g".into(), &mut self.w_g),
            ("b_i".into(), &mut self.b_i),
            ("b_f".into(), &mut self.b_f),
            ("b_o".into(), &mut self.b_o),
            ("b_g".into(), &mut self.b_g),
        ]
    }
}

/// Intermediates of one cell step, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCache {
    xh: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmGradInputs {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

fn gate(w: &Param, b: &Param, xh: &[f64], act: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut z = b.value.data().to_vec();
    w.value.matvec_acc(xh, &mut z);
    z.into_iter().map(act).collect()
}

/// One LSTM step: returns `(h, c, cache)`.
pub fn lstm_cell_forward(
    p: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, LstmCache), NnError> {
    expect_len("lstm input", p.d_in, x.len())?;
    expect_len("lstm h_prev", p.d_h, h_prev.len())?;
    expect_len("lstm c_prev", p.d_h, c_prev.len())?;

    let mut xh = Vec::with_capacity(p.d_in + p.d_h);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h_prev);

    let i = gate(&p.w_i, &p.b_i, &xh, sigmoid);
    let f = gate(&p.w_f, &p.b_f, &xh, sigmoid);
    let o = gate(&p.w_o, &p.b_o, &xh, sigmoid);
    let g = gate(&p.w_g, &p.b_g, &xh, f64::tanh);

    let c: Vec<f64> = (0..p.d_h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();

    let cache = LstmCache {
        xh,
        i,
        f,
        o,
        g,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backpropagates `dh`, `dc` through one step, accumulating weight gradients.
pub fn lstm_cell_backward(
    p: &mut LstmCellParams,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
) -> LstmGradInputs {
    let d_h = p.d_h;
    let mut da_i = vec![0.0; d_h];
    let mut da_f = vec![0.0; d_h];
    let mut da_o = vec![0.0; d_h];
    let mut da_g = vec![0.0; d_h];
    let mut dc_prev = vec![0.0; d_h];
    for k in 0..d_h {
        let (i, f, o, g, t) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
        let dct = dc[k] + dh[k] * o * (1.0 - t * t);
        da_o[k] = dh[k] * t * o * (1.0 - o);
        da_i[k] = dct * g * i * (1.0 - i);
        da_f[k] = dct * cache.c_prev[k] * f * (1.0 - f);
        da_g[k] = dct * i * (1.0 - g * g);
        dc_prev[k] = dct * f;
    }

    let mut dxh = vec![0.0; p.d_in + d_h];
    for (w, b, da) in [
        (&mut p.w_i, &mut p.b_i, &da_i),
        (&mut p.w_f, &mut p.b_f, &da_f),
        (&mut p.w_o, &mut p.b_o, &da_o),
        (&mut p.w_g, &mut p.b_g, &da_g),
    ] {
        w.grad.add_outer(da, &cache.xh);
        axpy(1.0, da, b.grad.data_mut());
        w.value.matvec_t_acc(da, &mut dxh);
    }
    let dh_prev = dxh.split_off(p.d_in);
    LstmGradInputs {
        dx: dxh,
        dh_prev,
        dc_prev,
    }
}

/// Per-direction record of a sequence run.
#[derive(Clone, Debug, PartialEq)]
struct DirectionTrace {
    caches: Vec<Option<LstmCache>>,
    rec_mask: Option<Vec<f64>>,
}

/// Forward/backward hidden states and everything needed to backpropagate them.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmTrace {
    /// `[h_fwd; h_bwd]` per timestep, length `2 d_h` each.
    pub outputs: Vec<Vec<f64>>,
    fwd: DirectionTrace,
    bwd: DirectionTrace,
    mask: Vec<bool>,
}

fn run_direction(
    p: &LstmCellParams,
    xs: &[Vec<f64>],
    mask: &[bool],
    reversed: bool,
    rec_mask: Option<Vec<f64>>,
) -> Result<(Vec<Vec<f64>>, DirectionTrace), NnError> {
    let t_len = xs.len();
    let mut h = vec![0.0; p.d_h];
    let mut c = vec![0.0; p.d_h];
    let mut hs = vec![Vec::new(); t_len];
    let mut caches = vec![None; t_len];
    let order: Box<dyn Iterator<Item = usize>> = if reversed {
        Box::new((0..t_len).rev())
    } else {
        Box::new(0..t_len)
    };
    for t in order {
        if mask[t] {
            let h_in: Vec<f64> = match &rec_mask {
                Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => h.clone(),
            };
            let (h_new, c_new, cache) = lstm_cell_forward(p, &xs[t], &h_in, &c)?;
            h = h_new;
            c = c_new;
            caches[t] = Some(cache);
        }
        // masked steps carry the state through unchanged
        hs[t] = h.clone();
    }
    Ok((hs, DirectionTrace { caches, rec_mask }))
}

fn backprop_direction(
    p: &mut LstmCellParams,
    trace: &DirectionTrace,
    dhs: &[Vec<f64>],
    mask: &[bool],
    reversed: bool,
    dxs: &mut [Vec<f64>],
) {
    let t_len = dhs.len();
    let mut dh_next = vec![0.0; p.d_h];
    let mut dc_next = vec![0.0; p.d_h];
    let order: Box<dyn Iterator<Item = usize>> = if reversed {
        Box::new(0..t_len)
    } else {
        Box::new((0..t_len).rev())
    };
    for t in order {
        let mut dh = dhs[t].clone();
        axpy(1.0, &dh_next, &mut dh);
        if !mask[t] {
            dh_next = dh;
            continue;
        }
        let cache = trace.caches[t].as_ref().expect("unmasked step has a cache");
        let g = lstm_cell_backward(p, cache, &dh, &dc_next);
        axpy(1.0, &g.dx, &mut dxs[t]);
        dh_next = match &trace.rec_mask {
            Some(m) => g.dh_prev.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => g.dh_prev,
        };
        dc_next = g.dc_prev;
    }
}

/// Runs both directions over `xs` and concatenates their states per timestep.
///
/// Steps with `mask[t] == false` leave the recurrent state untouched, so
/// trailing padding does not change the outputs at real positions.
/// `rec_masks` optionally multiplies `h_prev` of the forward and backward
/// direction by a fixed per-sequence dropout mask.
pub fn bilstm_forward(
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
    xs: &[Vec<f64>],
    mask: &[bool],
    rec_masks: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<BiLstmTrace, NnError> {
    expect_len("bilstm mask", xs.len(), mask.len())?;
    expect_len("bilstm hidden size", fwd.d_h, bwd.d_h)?;
    let (rf, rb) = match rec_masks {
        Some((f, b)) => (Some(f), Some(b)),
        None => (None, None),
    };
    let (hf, tf) = run_direction(fwd, xs, mask, false, rf)?;
    let (hb, tb) = run_direction(bwd, xs, mask, true, rb)?;
    let outputs = hf
        .into_iter()
        .zip(hb)
        .map(|(mut f, b)| {
            f.extend_from_slice(&b);
            f
        })
        .collect();
    Ok(BiLstmTrace {
        outputs,
        fwd: tf,
        bwd: tb,
        mask: mask.to_vec(),
    })
}

/// Backpropagates output gradients; returns the gradient for every input.
pub fn bilstm_backward(
    fwd: &mut LstmCellParams,
    bwd: &mut LstmCellParams,
    trace: &BiLstmTrace,
    douts: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let d_h = fwd.d_h;
    let (dhf, dhb): (Vec<Vec<f64>>, Vec<Vec<f64>>) = douts
        .iter()
        .map(|d| (d[..d_h].to_vec(), d[d_h..].to_vec()))
        .unzip();
    let mut dxs = vec![vec![0.0; fwd.d_in]; douts.len()];
    backprop_direction(fwd, &trace.fwd, &dhf, &trace.mask, false, &mut dxs);
    backprop_direction(bwd, &trace.bwd, &dhb, &trace.mask, true, &mut dxs);
    dxs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-s..s)).collect()
    }

    #[test]
    fn zero_cell_gives_zero_state() {
        let p = LstmCellParams::zeros(3, 4);
        let (h, c, _) = lstm_cell_forward(&p, &[0.0; 3], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_gates_carry_memory() {
        let mut p = LstmCellParams::zeros(2, 3);
        p.b_f.value.fill(1e3);
        p.b_i.value.fill(-1e3);
        let c_star = [0.25, -1.5, 3.0];
        let (_, c, _) = lstm_cell_forward(&p, &[0.4, -0.2], &[0.1, 0.2, 0.3], &c_star).unwrap();
        assert_eq!(c, c_star.to_vec());
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmCellParams::new(3, 4, 0.08, &mut rng);
        assert!(p.b_f.value.data().iter().all(|&b| b == 1.0));
        assert!(p.w_i.value.data().iter().all(|&w| w.abs() < 0.08));
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmCellParams::zeros(2, 3);
        assert_eq!(
            lstm_cell_forward(&p, &[0.0; 3], &[0.0; 3], &[0.0; 3]).unwrap_err(),
            NnError::DimensionMismatch {
                op: "lstm input",
                expected: 2,
                got: 3
            }
        );
    }

    /// A scalar loss over one cell step: weighted sum of h and c.
    struct CellProblem {
        p: LstmCellParams,
        x: Vec<f64>,
        h0: Vec<f64>,
        c0: Vec<f64>,
        wh: Vec<f64>,
        wc: Vec<f64>,
    }

    impl CellProblem {
        fn loss(&self) -> f64 {
            let (h, c, _) = lstm_cell_forward(&self.p, &self.x, &self.h0, &self.c0).unwrap();
            h.iter().zip(&self.wh).map(|(a, b)| a * b).sum::<f64>()
                + c.iter().zip(&self.wc).map(|(a, b)| a * b).sum::<f64>()
        }
    }

    #[test]
    fn cell_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (d_in, d_h) = (4, 3);
        let mut prob = CellProblem {
            p: LstmCellParams::new(d_in, d_h, 0.5, &mut rng),
            x: rand_vec(&mut rng, d_in, 1.0),
            h0: rand_vec(&mut rng, d_h, 1.0),
            c0: rand_vec(&mut rng, d_h, 1.0),
            wh: rand_vec(&mut rng, d_h, 1.0),
            wc: rand_vec(&mut rng, d_h, 1.0),
        };
        let (_, _, cache) = lstm_cell_forward(&prob.p, &prob.x, &prob.h0, &prob.c0).unwrap();
        let g = lstm_cell_backward(&mut prob.p, &cache, &prob.wh.clone(), &prob.wc.clone());

        let x = prob.x.clone();
        let (h0, c0, wh, wc) = (prob.h0.clone(), prob.c0.clone(), prob.wh.clone(), prob.wc.clone());
        let loss = |p: &LstmCellParams| {
            let (h, c, _) = lstm_cell_forward(p, &x, &h0, &c0).unwrap();
            h.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>()
                + c.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>()
        };
        let report = grad_check(&mut prob.p, loss, 1e-5, 1e-4, None);
        assert!(report.passed(), "{report}");

        // input-side gradients by direct perturbation
        let eps = 1e-5;
        for k in 0..d_in {
            let hi = prob.clone_with(|pr| pr.x[k] += eps);
            let lo = prob.clone_with(|pr| pr.x[k] -= eps);
            let num = (hi.loss() - lo.loss()) / (2.0 * eps);
            assert!((num - g.dx[k]).abs() < 1e-8, "dx[{k}] {num} vs {}", g.dx[k]);
        }
        for k in 0..d_h {
            let hi = prob.clone_with(|pr| pr.h0[k] += eps);
            let lo = prob.clone_with(|pr| pr.h0[k] -= eps);
            let num = (hi.loss() - lo.loss()) / (2.0 * eps);
            assert!((num - g.dh_prev[k]).abs() < 1e-8);
            let hi = prob.clone_with(|pr| pr.c0[k] += eps);
            let lo = prob.clone_with(|pr| pr.c0[k] -= eps);
            let num = (hi.loss() - lo.loss()) / (2.0 * eps);
            assert!((num - g.dc_prev[k]).abs() < 1e-8);
        }
    }

    impl CellProblem {
        fn clone_with(&self, f: impl FnOnce(&mut CellProblem)) -> CellProblem {
            let mut c = CellProblem {
                p: self.p.clone(),
                x: self.x.clone(),
                h0: self.h0.clone(),
                c0: self.c0.clone(),
                wh: self.wh.clone(),
                wc: self.wc.clone(),
            };
            f(&mut c);
            c
        }
    }

    struct BiProblem {
        fwd: LstmCellParams,
        bwd: LstmCellParams,
    }

    impl ParamSet for BiProblem {
        fn params(&self) -> Vec<(String, &Param)> {
            let mut v: Vec<_> = self.fwd.params().into_iter().map(|(n, p)| (format!("fwd.{n}"), p)).collect();
            v.extend(self.bwd.params().into_iter().map(|(n, p)| (format!("bwd.{n}"), p)));
            v
        }
        fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
            let mut v: Vec<_> = self
                .fwd
                .params_mut()
                .into_iter()
                .map(|(n, p)| (format!("fwd.{n}"), p))
                .collect();
            v.extend(self.bwd.params_mut().into_iter().map(|(n, p)| (format!("bwd.{n}"), p)));
            v
        }
    }

    #[test]
    fn bilstm_backward_matches_finite_differences_with_padding_and_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (d_in, d_h, t_len) = (3, 4, 6);
        let mut prob = BiProblem {
            fwd: LstmCellParams::new(d_in, d_h, 0.5, &mut rng),
            bwd: LstmCellParams::new(d_in, d_h, 0.5, &mut rng),
        };
        let xs: Vec<Vec<f64>> = (0..t_len).map(|_| rand_vec(&mut rng, d_in, 1.0)).collect();
        let mask = vec![true, true, true, true, false, false];
        let weights: Vec<Vec<f64>> = (0..t_len).map(|_| rand_vec(&mut rng, 2 * d_h, 1.0)).collect();
        let rec = (vec![2.0, 0.0, 2.0, 2.0], vec![0.0, 2.0, 2.0, 0.0]);

        let loss_of = |f: &LstmCellParams, b: &LstmCellParams, xs: &[Vec<f64>]| {
            let tr = bilstm_forward(f, b, xs, &mask, Some(rec.clone())).unwrap();
            tr.outputs
                .iter()
                .zip(&weights)
                .take(4)
                .map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
        };

        let trace = bilstm_forward(&prob.fwd, &prob.bwd, &xs, &mask, Some(rec.clone())).unwrap();
        let douts: Vec<Vec<f64>> = weights
            .iter()
            .enumerate()
            .map(|(t, w)| if mask[t] { w.clone() } else { vec![0.0; 2 * d_h] })
            .collect();
        let dxs = bilstm_backward(&mut prob.fwd, &mut prob.bwd, &trace, &douts);

        let report = grad_check(&mut prob, |p| loss_of(&p.fwd, &p.bwd, &xs), 1e-5, 1e-4, None);
        assert!(report.passed(), "{report}");

        let eps = 1e-5;
        for t in 0..t_len {
            for k in 0..d_in {
                let mut hi = xs.clone();
                hi[t][k] += eps;
                let mut lo = xs.clone();
                lo[t][k] -= eps;
                let num = (loss_of(&prob.fwd, &prob.bwd, &hi) - loss_of(&prob.fwd, &prob.bwd, &lo)) / (2.0 * eps);
                assert!((num - dxs[t][k]).abs() < 1e-8, "t={t} k={k}: {num} vs {}", dxs[t][k]);
            }
        }
    }

    #[test]
    fn output_size_is_twice_hidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = LstmCellParams::new(4, 150, 0.08, &mut rng);
        let b = LstmCellParams::new(4, 150, 0.08, &mut rng);
        let xs = vec![vec![0.1; 4]; 3];
        let tr = bilstm_forward(&f, &b, &xs, &[true; 3], None).unwrap();
        assert!(tr.outputs.iter().all(|h| h.len() == 300));
    }

    #[test]
    fn length_one_sequence_is_two_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = LstmCellParams::new(3, 2, 0.5, &mut rng);
        let b = LstmCellParams::new(3, 2, 0.5, &mut rng);
        let x = vec![0.3, -0.7, 0.2];
        let tr = bilstm_forward(&f, &b, std::slice::from_ref(&x), &[true], None).unwrap();
        let (hf, _, _) = lstm_cell_forward(&f, &x, &[0.0; 2], &[0.0; 2]).unwrap();
        let (hb, _, _) = lstm_cell_forward(&b, &x, &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(tr.outputs[0], [hf, hb].concat());
    }

    #[test]
    fn trailing_pads_do_not_change_real_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = LstmCellParams::new(3, 4, 0.5, &mut rng);
        let b = LstmCellParams::new(3, 4, 0.5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 3, 1.0)).collect();
        let plain = bilstm_forward(&f, &b, &xs, &[true; 5], None).unwrap();
        let mut padded_xs = xs.clone();
        padded_xs.extend((0..3).map(|_| rand_vec(&mut rng, 3, 1.0)));
        let mut mask = vec![true; 5];
        mask.extend([false; 3]);
        let padded = bilstm_forward(&f, &b, &padded_xs, &mask, None).unwrap();
        assert_eq!(&padded.outputs[..5], &plain.outputs[..]);
    }
}
