use std::fmt;

use super::tensor::ParamSet;

/// Outcome for one named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_error: f64,
    /// `(entry, analytic, numeric)` for every entry above tolerance.
    pub failures: Vec<(usize, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub eps: f64,
    pub tol: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.failures.is_empty())
    }

    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{:<4} {:<16} entries={:<6} max_err={:.3e}",
                if b.failures.is_empty() { "PASS" } else { "FAIL" },
                b.name,
                b.checked,
                b.max_error
            )?;
            for (k, a, n) in b.failures.iter().take(5) {
                writeln!(f, "       entry {k}: analytic {a:.9e} numeric {n:.9e}")?;
            }
        }
        Ok(())
    }
}

/// Compares the gradients already stored in `params` against central
/// differences of `loss`.
///
/// The error measure is `|analytic - numeric| / max(1, |analytic| + |numeric|)`.
/// `loss` must be deterministic. With `max_per_block = Some(k)` only an
/// evenly strided subset of at most `k` entries per tensor is probed.
pub fn grad_check<P, F>(
    params: &mut P,
    loss: F,
    eps: f64,
    tol: f64,
    max_per_block: Option<usize>,
) -> GradCheckReport
where
    P: ParamSet,
    F: Fn(&P) -> f64,
{
    let layout: Vec<(String, usize)> = params
        .params()
        .into_iter()
        .map(|(n, p)| (n, p.value.data().len()))
        .collect();

    let mut blocks = Vec::with_capacity(layout.len());
    for (b, (name, len)) in layout.into_iter().enumerate() {
        let stride = match max_per_block {
            Some(k) if k > 0 && len > k => len.div_ceil(k),
            _ => 1,
        };
        let mut report = BlockReport {
            name,
            checked: 0,
            max_error: 0.0,
            failures: Vec::new(),
        };
        for k in (0..len).step_by(stride) {
            let (orig, analytic) = {
                let mut ps = params.params_mut();
                let p = &mut ps[b].1;
                (p.value.data()[k], p.grad.data()[k])
            };
            let set = |params: &mut P, v: f64| params.params_mut()[b].1.value.data_mut()[k] = v;

            set(params, orig + eps);
            let up = loss(params);
            set(params, orig - eps);
            let down = loss(params);
            set(params, orig);

            let numeric = (up - down) / (2.0 * eps);
            let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0);
            report.checked += 1;
            report.max_error = report.max_error.max(err);
            if !(err <= tol) {
                report.failures.push((k, analytic, numeric));
            }
        }
        blocks.push(report);
    }
    GradCheckReport { eps, tol, blocks }
}
