use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{
    attention_backward, attention_scores, attention_weights, context_vector, AttentionCache, AttentionParams,
};
use super::embedding::{aspect_vector, AspectPooling, EmbeddingTable, PositionTable, Vocab, PAD};
use super::ModelError;
use crate::ingest::{DepTree, PolarityLabel, ReviewInstance, Span};
use crate::nn::{
    axpy, bilstm_backward, bilstm_forward, cross_entropy, dot, dropout_mask, grad_check, masked_softmax_backward,
    softmax, BiLstmTrace, GradCheckReport, LstmCellParams, Param, ParamSet,
};
use crate::position::{position_vector, PositionVector};
use crate::Result;

/// Layer sizes of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    /// Word embedding size.
    pub d_e: usize,
    /// Hidden size of each LSTM direction.
    pub d_h: usize,
    /// Position embedding size.
    pub d_p: usize,
    /// Attention projection size.
    pub d_w: usize,
    /// Largest distance with its own position row.
    pub clamp: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_e: 100,
            d_h: 150,
            d_p: 50,
            d_w: 100,
            clamp: crate::position::DEFAULT_CLAMP,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), ModelError> {
        let named = [
            ("d_e", self.d_e),
            ("d_h", self.d_h),
            ("d_p", self.d_p),
            ("d_w", self.d_w),
            ("d_max", self.clamp),
        ];
        match named.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(ModelError::BadDims(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// Every trainable tensor of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct AtpParams {
    pub dims: ModelDims,
    pub word: EmbeddingTable,
    pub pos: PositionTable,
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
    pub attn: AttentionParams,
    /// `4 × 2 d_h`
    pub cls_w: Param,
    /// `4 × 1`
    pub cls_b: Param,
}

impl AtpParams {
    /// Uniform `(-scale, scale)` initialisation; the classifier bias starts at zero.
    pub fn new(vocab: Vocab, dims: ModelDims, scale: f64, rng: &mut impl Rng) -> Result<Self, ModelError> {
        dims.validate()?;
        let word = EmbeddingTable::new(vocab, dims.d_e, scale, rng);
        let pos = PositionTable::new(dims.clamp, dims.d_p, scale, rng);
        let fwd = LstmCellParams::new(dims.d_e, dims.d_h, scale, rng);
        let bwd = LstmCellParams::new(dims.d_e, dims.d_h, scale, rng);
        let attn = AttentionParams::new(2 * dims.d_h, dims.d_p, dims.d_e, dims.d_w, scale, rng);
        let cls_w = Param::uniform(PolarityLabel::COUNT, 2 * dims.d_h, scale, rng);
        Ok(AtpParams {
            dims,
            word,
            pos,
            fwd,
            bwd,
            attn,
            cls_w,
            cls_b: Param::zeros(PolarityLabel::COUNT, 1),
        })
    }

    /// All-zero parameters of the right shapes, used when loading checkpoints.
    pub fn zeros(vocab: Vocab, dims: ModelDims) -> Result<Self, ModelError> {
        dims.validate()?;
        let rows = vocab.len();
        Ok(AtpParams {
            dims,
            word: EmbeddingTable {
                vocab,
                table: Param::zeros(rows, dims.d_e),
            },
            pos: PositionTable {
                clamp: dims.clamp,
                table: Param::zeros(crate::position::table_rows(dims.clamp), dims.d_p),
            },
            fwd: LstmCellParams::zeros(dims.d_e, dims.d_h),
            bwd: LstmCellParams::zeros(dims.d_e, dims.d_h),
            attn: AttentionParams::zeros(2 * dims.d_h, dims.d_p, dims.d_e, dims.d_w),
            cls_w: Param::zeros(PolarityLabel::COUNT, 2 * dims.d_h),
            cls_b: Param::zeros(PolarityLabel::COUNT, 1),
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.word.vocab
    }
}

impl ParamSet for AtpParams {
    fn params(&self) -> Vec<(String, &Param)> {
        let mut out = vec![("word".to_string(), &self.word.table), ("pos".to_string(), &self.pos.table)];
        out.extend(self.fwd.params().into_iter().map(|(n, p)| (format!("fwd.{n}"), p)));
        out.extend(self.bwd.params().into_iter().map(|(n, p)| (format!("bwd.{n}"), p)));
        out.extend(self.attn.params().into_iter().map(|(n, p)| (format!("attn.{n}"), p)));
        out.push(("cls.w".to_string(), &self.cls_w));
        out.push(("cls.b".to_string(), &self.cls_b));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = vec![
            ("word".to_string(), &mut self.word.table),
            ("pos".to_string(), &mut self.pos.table),
        ];
        out.extend(self.fwd.params_mut().into_iter().map(|(n, p)| (format!("fwd.{n}"), p)));
        out.extend(self.bwd.params_mut().into_iter().map(|(n, p)| (format!("bwd.{n}"), p)));
        out.extend(self.attn.params_mut().into_iter().map(|(n, p)| (format!("attn.{n}"), p)));
        out.push(("cls.w".to_string(), &mut self.cls_w));
        out.push(("cls.b".to_string(), &mut self.cls_b));
        out
    }
}

/// One instance as table indices, padded to a fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    /// Word rows; `PAD` beyond the sentence.
    pub words: Vec<usize>,
    /// Position rows; the position PAD row beyond the sentence.
    pub positions: Vec<usize>,
    pub mask: Vec<bool>,
    /// `(word row, weight)` pairs pooled into the aspect vector.
    pub aspect: Vec<(usize, f64)>,
    pub label: PolarityLabel,
    /// Real sentence length.
    pub n: usize,
}

impl EncodedInstance {
    pub fn new(
        vocab: &Vocab,
        inst: &ReviewInstance,
        pv: &PositionVector,
        pooling: AspectPooling,
        pad_to: usize,
    ) -> Result<Self> {
        let n = inst.tree.len();
        if pv.len() != n {
            return Err(ModelError::BadDims(format!(
                "position vector has {} entries for a sentence of {n} tokens",
                pv.len()
            ))
            .into());
        }
        let positions = pv.to_embedding_indices(pad_to)?;
        let mut words: Vec<usize> = inst.tree.forms().map(|f| vocab.lookup(f)).collect();
        words.resize(pad_to, PAD);
        let mut mask = vec![true; n];
        mask.resize(pad_to, false);
        let aspect = pooling
            .weights(inst)
            .into_iter()
            .map(|(i, w)| (words[i - 1], w))
            .collect();
        Ok(EncodedInstance {
            words,
            positions,
            mask,
            aspect,
            label: inst.label,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Dropout rate shared by the LSTM inputs and recurrent connections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutConfig {
    pub rate: f64,
    /// Also drop `h_prev` with one mask per direction and sequence.
    pub recurrent: bool,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        DropoutConfig {
            rate: 0.5,
            recurrent: true,
        }
    }
}

impl DropoutConfig {
    pub fn none() -> Self {
        DropoutConfig {
            rate: 0.0,
            recurrent: false,
        }
    }
}

/// Activations of one forward pass and what backward needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `α_t` per timestep, exactly 0 on padding.
    pub alpha: Vec<f64>,
    pub context: Vec<f64>,
    pub logits: Vec<f64>,
    pub lstm: BiLstmTrace,
    attn: AttentionCache,
    input_masks: Vec<Option<Vec<f64>>>,
    words: Vec<usize>,
    positions: Vec<usize>,
    aspect: Vec<(usize, f64)>,
    mask: Vec<bool>,
}

impl ForwardTrace {
    /// Bi-LSTM outputs `[h_fwd; h_bwd]` per timestep.
    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.lstm.outputs
    }
}

pub fn forward(
    params: &AtpParams,
    enc: &EncodedInstance,
    dropout: &DropoutConfig,
    training: bool,
    rng: &mut impl Rng,
) -> Result<ForwardTrace> {
    let d = params.dims;
    let mut xs = Vec::with_capacity(enc.len());
    let mut input_masks = Vec::with_capacity(enc.len());
    for (&row, &real) in enc.words.iter().zip(&enc.mask) {
        let mut x = params.word.row(row).to_vec();
        // masks are drawn only at real positions so padding never shifts the rng
        let m = if real {
            dropout_mask(d.d_e, dropout.rate, training, rng)?
        } else {
            None
        };
        if let Some(m) = &m {
            x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        xs.push(x);
        input_masks.push(m);
    }
    let rec = if dropout.recurrent {
        match (
            dropout_mask(d.d_h, dropout.rate, training, rng)?,
            dropout_mask(d.d_h, dropout.rate, training, rng)?,
        ) {
            (Some(f), Some(b)) => Some((f, b)),
            _ => None,
        }
    } else {
        None
    };
    let lstm = bilstm_forward(&params.fwd, &params.bwd, &xs, &enc.mask, rec)?;

    let ps: Vec<Vec<f64>> = enc
        .positions
        .iter()
        .map(|&r| params.pos.table.value.row(r).to_vec())
        .collect();
    let a = aspect_vector(&params.word, &enc.aspect)?;
    let (scores, attn) = attention_scores(&params.attn, &lstm.outputs, &ps, &a, &enc.mask)?;
    let alpha = attention_weights(&scores, &enc.mask);
    let context = context_vector(&alpha, &lstm.outputs);

    let mut logits = params.cls_b.value.data().to_vec();
    params.cls_w.value.matvec_acc(&context, &mut logits);

    Ok(ForwardTrace {
        alpha,
        context,
        logits,
        lstm,
        attn,
        input_masks,
        words: enc.words.clone(),
        positions: enc.positions.clone(),
        aspect: enc.aspect.clone(),
        mask: enc.mask.clone(),
    })
}

/// Accumulates `scale · ∂loss/∂θ` into every gradient and returns the unscaled loss.
pub fn backward(params: &mut AtpParams, trace: &ForwardTrace, gold: PolarityLabel, scale: f64) -> f64 {
    let (loss, mut dlogits) = cross_entropy(&trace.logits, gold.code());
    dlogits.iter_mut().for_each(|g| *g *= scale);

    params.cls_w.grad.add_outer(&dlogits, &trace.context);
    axpy(1.0, &dlogits, params.cls_b.grad.data_mut());
    let mut dc = vec![0.0; trace.context.len()];
    params.cls_w.value.matvec_t_acc(&dlogits, &mut dc);

    let hs = &trace.lstm.outputs;
    let dalpha: Vec<f64> = hs.iter().map(|h| dot(&dc, h)).collect();
    let dscores = masked_softmax_backward(&trace.alpha, &dalpha, &trace.mask);
    let g = attention_backward(&mut params.attn, &trace.attn, &dscores);

    let mut dhs = g.dhs;
    for (dh, &a) in dhs.iter_mut().zip(&trace.alpha) {
        if a != 0.0 {
            axpy(a, &dc, dh);
        }
    }
    for (t, dp) in g.dps.iter().enumerate() {
        if trace.mask[t] {
            axpy(1.0, dp, params.pos.table.grad.row_mut(trace.positions[t]));
        }
    }
    for &(row, w) in &trace.aspect {
        axpy(w, &g.da, params.word.table.grad.row_mut(row));
    }

    let dxs = bilstm_backward(&mut params.fwd, &mut params.bwd, &trace.lstm, &dhs);
    for (t, dx) in dxs.iter().enumerate() {
        if !trace.mask[t] {
            continue;
        }
        let row = params.word.table.grad.row_mut(trace.words[t]);
        match &trace.input_masks[t] {
            Some(m) => row.iter_mut().zip(dx).zip(m).for_each(|((r, g), k)| *r += g * k),
            None => axpy(1.0, dx, row),
        }
    }
    params.word.clear_pad_grad();
    loss
}

/// Cross-entropy of the gold label without dropout.
pub fn loss(params: &AtpParams, enc: &EncodedInstance) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tr = forward(params, enc, &DropoutConfig::none(), false, &mut rng)?;
    Ok(cross_entropy(&tr.logits, enc.label.code()).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: PolarityLabel,
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    /// Attention over the real tokens only.
    pub alpha: Vec<f64>,
}

/// Highest-probability class; ties go to the lower class code.
pub fn predict(params: &AtpParams, enc: &EncodedInstance) -> Result<Prediction> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tr = forward(params, enc, &DropoutConfig::none(), false, &mut rng)?;
    let mut best = 0;
    for (k, &l) in tr.logits.iter().enumerate() {
        if l > tr.logits[best] {
            best = k;
        }
    }
    let mut alpha = tr.alpha;
    alpha.truncate(enc.n);
    Ok(Prediction {
        label: PolarityLabel::from_code(best).expect("four logits"),
        probs: softmax(&tr.logits),
        logits: tr.logits,
        alpha,
    })
}

/// Builds a random model and instance of the given sizes and compares every
/// parameter gradient against central differences.
///
/// The sentence has `t_x - 1` real tokens followed by one pad step, so the
/// masking path is exercised too.
pub fn gradcheck_model(dims: ModelDims, t_x: usize, seed: u64, eps: f64, tol: f64) -> Result<GradCheckReport> {
    if t_x < 2 {
        return Err(ModelError::BadDims("gradient check needs t_x >= 2".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = t_x - 1;
    let words = ["good", "bad", "food", "the", "was"];
    let forms: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
    let mut heads = vec![0];
    for k in 1..n {
        heads.push(rng.gen_range(1..=k));
    }
    let tree = DepTree::from_heads(&forms, &heads).expect("random heads form a tree");
    let start = rng.gen_range(1..=n);
    let end = (start + 1).min(n);
    let label = PolarityLabel::from_code(rng.gen_range(0..PolarityLabel::COUNT)).expect("code in range");
    let inst = ReviewInstance::new("gradcheck", tree, Span::new(start, end), label)?;

    let vocab = Vocab::from_words(words[..4].iter().map(|w| w.to_string()), true);
    let mut params = AtpParams::new(vocab, dims, 0.5, &mut rng)?;
    let pv = position_vector(&inst.tree, inst.aspect_span, dims.clamp)?;
    let enc = EncodedInstance::new(params.vocab(), &inst, &pv, AspectPooling::Mean, t_x)?;

    params.zero_grad();
    let tr = forward(&params, &enc, &DropoutConfig::none(), false, &mut rng)?;
    backward(&mut params, &tr, enc.label, 1.0);
    Ok(grad_check(
        &mut params,
        |p| loss(p, &enc).expect("shapes fixed"),
        eps,
        tol,
        None,
    ))
}
