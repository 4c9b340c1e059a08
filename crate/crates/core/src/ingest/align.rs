use super::tree::DepTree;
use super::{IngestError, Span};

/// Character extents `[start, end)` of every token in `sentence_text`.
///
/// Tokens are located left to right. Whitespace before a token is skipped;
/// when the token does not start at the cursor, the next occurrence further
/// right is used. Text is never re-tokenized.
pub fn token_extents(tree: &DepTree, sentence_text: &str) -> Result<Vec<(usize, usize)>, IngestError> {
    let text: Vec<char> = sentence_text.chars().collect();
    let mut cursor = 0;
    let mut extents = Vec::with_capacity(tree.len());
    for tok in tree.tokens() {
        let form: Vec<char> = tok.form.chars().collect();
        if form.is_empty() {
            return Err(IngestError::AlignmentFailure(format!(
                "token {} has an empty form",
                tok.index
            )));
        }
        while cursor < text.len() && text[cursor].is_whitespace() {
            cursor += 1;
        }
        let start = find_from(&text, &form, cursor).ok_or_else(|| {
            IngestError::AlignmentFailure(format!(
                "token {} ({:?}) not found after character {cursor} of {sentence_text:?}",
                tok.index, tok.form
            ))
        })?;
        cursor = start + form.len();
        extents.push((start, cursor));
    }
    Ok(extents)
}

fn find_from(haystack: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.len() > haystack.len() {
        return None;
    }
    (from..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

/// Minimal token span whose character extent covers `[from, to)`.
pub fn align_span(tree: &DepTree, sentence_text: &str, from: usize, to: usize) -> Result<Span, IngestError> {
    if to <= from {
        return Err(IngestError::AlignmentFailure(format!(
            "empty character span [{from}, {to})"
        )));
    }
    let extents = token_extents(tree, sentence_text)?;
    span_from_extents(&extents, from, to)
}

pub(crate) fn span_from_extents(
    extents: &[(usize, usize)],
    from: usize,
    to: usize,
) -> Result<Span, IngestError> {
    let mut hit = extents
        .iter()
        .enumerate()
        .filter(|(_, &(s, e))| s < to && from < e)
        .map(|(i, _)| i + 1);
    let start = hit.next().ok_or_else(|| {
        IngestError::AlignmentFailure(format!("character span [{from}, {to}) covers no token"))
    })?;
    let end = hit.next_back().unwrap_or(start);
    Ok(Span::new(start, end))
}
