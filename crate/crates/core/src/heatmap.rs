//! Static HTML/SVG rendering of attention weights over a sentence.

use std::fmt::Write;

use crate::ingest::{PolarityLabel, Span};

const CELL_H: usize = 34;
const CHAR_W: usize = 9;
const PAD_X: usize = 12;

/// One heatmap row: a sentence, its attention weights and the aspect.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapDoc {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    /// One weight per real token; padding is not included.
    pub alpha: Vec<f64>,
    pub aspect: Span,
    pub predicted: PolarityLabel,
    pub gold: Option<PolarityLabel>,
}

/// Shade in `[0, 1]`: `α / max α`, 0 when every weight is 0.
pub fn shade(alpha: f64, max_alpha: f64) -> f64 {
    if max_alpha > 0.0 {
        (alpha / max_alpha).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Linear ramp from white (`shade = 0`) to `#283c8c` (`shade = 1`).
pub fn cell_color(shade: f64) -> (u8, u8, u8) {
    let lerp = |hi: f64, lo: f64| (hi + (lo - hi) * shade).round() as u8;
    (lerp(255.0, 40.0), lerp(255.0, 60.0), lerp(255.0, 140.0))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

impl HeatmapDoc {
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: Vec<String>,
        alpha: Vec<f64>,
        aspect: Span,
        predicted: PolarityLabel,
        gold: Option<PolarityLabel>,
    ) -> Result<Self, String> {
        if tokens.len() != alpha.len() {
            return Err(format!("{} tokens but {} attention weights", tokens.len(), alpha.len()));
        }
        if !aspect.is_valid_for(tokens.len()) {
            return Err(format!("aspect span {aspect} outside {} tokens", tokens.len()));
        }
        Ok(HeatmapDoc {
            sentence_id: sentence_id.into(),
            tokens,
            alpha,
            aspect,
            predicted,
            gold,
        })
    }

    /// Fill colour of every token cell as `#rrggbb`.
    pub fn colors(&self) -> Vec<String> {
        let max = self.alpha.iter().copied().fold(0.0, f64::max);
        self.alpha
            .iter()
            .map(|&a| {
                let (r, g, b) = cell_color(shade(a, max));
                format!("#{r:02x}{g:02x}{b:02x}")
            })
            .collect()
    }

    /// Inline SVG: one cell per token, aspect cells outlined.
    pub fn render_svg(&self) -> String {
        let widths: Vec<usize> = self
            .tokens
            .iter()
            .map(|t| t.chars().count().max(2) * CHAR_W + PAD_X)
            .collect();
        let total: usize = widths.iter().sum::<usize>() + 2;
        let colors = self.colors();
        let max = self.alpha.iter().copied().fold(0.0, f64::max);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{}" font-family="monospace" font-size="14">"#,
            CELL_H * 2
        );
        let mut x = 1;
        for (i, (tok, w)) in self.tokens.iter().zip(&widths).enumerate() {
            let s = shade(self.alpha[i], max);
            let text_fill = if s > 0.55 { "#ffffff" } else { "#111111" };
            let aspect = self.aspect.contains(i + 1);
            let _ = writeln!(
                svg,
                r##"  <g><title>{} α={:.4}</title><rect x="{x}" y="1" width="{w}" height="{CELL_H}" fill="{}" stroke="{}" stroke-width="{}"/><text x="{}" y="{}" text-anchor="middle" fill="{text_fill}">{}</text><text x="{}" y="{}" text-anchor="middle" font-size="10" fill="#555555">{:.3}</text></g>"##,
                escape(tok),
                self.alpha[i],
                colors[i],
                if aspect { "#d03030" } else { "#cccccc" },
                if aspect { 3 } else { 1 },
                x + w / 2,
                CELL_H / 2 + 6,
                escape(tok),
                x + w / 2,
                CELL_H + 16,
                self.alpha[i],
            );
            x += w;
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Standalone HTML page with the colour mapping documented in its header.
    pub fn render_html(&self) -> String {
        let aspect: Vec<&str> = self.aspect.indices().map(|i| self.tokens[i - 1].as_str()).collect();
        let gold = self.gold.map_or("unknown".to_string(), |g| g.to_string());
        let mut html = String::new();
        html.push_str("<!DOCTYPE html>\n");
        html.push_str(
            "<!--\n  Attention heatmap.\n  Cell colour: shade = alpha / max(alpha) over the sentence,\n  \
             fill = linear ramp from #ffffff (shade 0) to #283c8c (shade 1).\n  \
             Darker cells carry more attention; the mapping is monotone.\n  \
             Aspect tokens have a red outline. Padding is not shown.\n-->\n",
        );
        let _ = write!(
            html,
            "<html><head><meta charset=\"utf-8\"><title>{id} / {asp}</title></head>\n<body>\n\
             <p>sentence <b>{id}</b>, aspect <b>{asp}</b> [{span}], predicted <b>{pred}</b>, gold <b>{gold}</b></p>\n",
            id = escape(&self.sentence_id),
            asp = escape(&aspect.join(" ")),
            span = self.aspect,
            pred = self.predicted,
            gold = gold,
        );
        html.push_str(&self.render_svg());
        html.push_str("</body></html>\n");
        html
    }

    /// File name stem unique per sentence and aspect.
    pub fn file_stem(&self) -> String {
        let id: String = self
            .sentence_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{id}_{}-{}", self.aspect.start, self.aspect.end)
    }
}
