use rand::Rng;

use crate::nn::{dot, expect_len, masked_softmax, NnError, Param, ParamSet};

/// Score function weights: `score_t = w_s · tanh(w_hpa · [h_t; p_t; a])`.
///
/// `w_hpa` is `d_w × (2 d_h + d_p + d_e)` with columns ordered `[h; p; a]`,
/// `w_s` is `1 × d_w`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_hpa: Param,
    pub w_s: Param,
}

impl AttentionParams {
    pub fn new(d_hidden: usize, d_p: usize, d_e: usize, d_w: usize, scale: f64, rng: &mut impl Rng) -> Self {
        AttentionParams {
            w_hpa: Param::uniform(d_w, d_hidden + d_p + d_e, scale, rng),
            w_s: Param::uniform(1, d_w, scale, rng),
        }
    }

    pub fn zeros(d_hidden: usize, d_p: usize, d_e: usize, d_w: usize) -> Self {
        AttentionParams {
            w_hpa: Param::zeros(d_w, d_hidden + d_p + d_e),
            w_s: Param::zeros(1, d_w),
        }
    }

    pub fn d_w(&self) -> usize {
        self.w_s.value.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_hpa.value.cols()
    }
}

impl ParamSet for AttentionParams {
    fn params(&self) -> Vec<(String, &Param)> {
        vec![("w_hpa".into(), &self.w_hpa), ("w_s".into(), &self.w_s)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("w_hpa".into(), &mut self.w_hpa), ("w_s".into(), &mut self.w_s)]
    }
}

/// Per-step `z_t = [h_t; p_t; a]` and `u_t = tanh(w_hpa z_t)` for real steps.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionCache {
    steps: Vec<Option<(Vec<f64>, Vec<f64>)>>,
    d_h2: usize,
    d_p: usize,
}

/// Unnormalised scores. Masked steps score `-inf`.
pub fn attention_scores(
    params: &AttentionParams,
    hs: &[Vec<f64>],
    ps: &[Vec<f64>],
    a: &[f64],
    mask: &[bool],
) -> Result<(Vec<f64>, AttentionCache), NnError> {
    expect_len("attention positions", hs.len(), ps.len())?;
    expect_len("attention mask", hs.len(), mask.len())?;
    let d_h2 = hs.first().map_or(0, Vec::len);
    let d_p = ps.first().map_or(0, Vec::len);
    expect_len("attention input", params.input_dim(), d_h2 + d_p + a.len())?;

    let mut scores = Vec::with_capacity(hs.len());
    let mut steps = Vec::with_capacity(hs.len());
    for t in 0..hs.len() {
        if !mask[t] {
            scores.push(f64::NEG_INFINITY);
            steps.push(None);
            continue;
        }
        expect_len("attention hidden", d_h2, hs[t].len())?;
        expect_len("attention position", d_p, ps[t].len())?;
        let mut z = Vec::with_capacity(params.input_dim());
        z.extend_from_slice(&hs[t]);
        z.extend_from_slice(&ps[t]);
        z.extend_from_slice(a);
        let u: Vec<f64> = params.w_hpa.value.matvec(&z).into_iter().map(f64::tanh).collect();
        scores.push(dot(params.w_s.value.data(), &u));
        steps.push(Some((z, u)));
    }
    Ok((scores, AttentionCache { steps, d_h2, d_p }))
}

/// Masked softmax of the scores.
pub fn attention_weights(scores: &[f64], mask: &[bool]) -> Vec<f64> {
    masked_softmax(scores, mask)
}

/// `c = Σ_t α_t h_t`.
pub fn context_vector(alpha: &[f64], hs: &[Vec<f64>]) -> Vec<f64> {
    let dim = hs.first().map_or(0, Vec::len);
    let mut c = vec![0.0; dim];
    for (&w, h) in alpha.iter().zip(hs) {
        if w != 0.0 {
            for (ci, hi) in c.iter_mut().zip(h) {
                *ci += w * hi;
            }
        }
    }
    c
}

/// Gradients flowing out of the score function.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionGrads {
    pub dhs: Vec<Vec<f64>>,
    pub dps: Vec<Vec<f64>>,
    pub da: Vec<f64>,
}

/// Backpropagates `dscores`, accumulating into `w_hpa` and `w_s`.
pub fn attention_backward(params: &mut AttentionParams, cache: &AttentionCache, dscores: &[f64]) -> AttentionGrads {
    let d_a = params.input_dim() - cache.d_h2 - cache.d_p;
    let t_len = cache.steps.len();
    let mut dhs = vec![vec![0.0; cache.d_h2]; t_len];
    let mut dps = vec![vec![0.0; cache.d_p]; t_len];
    let mut da = vec![0.0; d_a];
    for (t, step) in cache.steps.iter().enumerate() {
        let Some((z, u)) = step else { continue };
        let ds = dscores[t];
        if ds == 0.0 {
            continue;
        }
        let ws = params.w_s.value.data().to_vec();
        params.w_s.grad.add_outer(&[ds], u);
        let dpre: Vec<f64> = ws.iter().zip(u).map(|(w, u)| ds * w * (1.0 - u * u)).collect();
        params.w_hpa.grad.add_outer(&dpre, z);
        let mut dz = vec![0.0; z.len()];
        params.w_hpa.value.matvec_t_acc(&dpre, &mut dz);
        dhs[t].copy_from_slice(&dz[..cache.d_h2]);
        dps[t].copy_from_slice(&dz[cache.d_h2..cache.d_h2 + cache.d_p]);
        for (acc, g) in da.iter_mut().zip(&dz[cache.d_h2 + cache.d_p..]) {
            *acc += g;
        }
    }
    AttentionGrads { dhs, dps, da }
}
