use super::tree::{DepTree, Token, TreeDefect};
use super::IngestError;

const FIELDS: usize = 10;
const ID: usize = 0;
const FORM: usize = 1;
const HEAD: usize = 6;
const DEPREL: usize = 7;

/// Parses CoNLL-U text into one [`DepTree`] per sentence block.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped. A
/// `# sent_id = ...` comment is attached to the following tree. Both LF and
/// CRLF line endings are accepted.
pub fn parse_conllu(text: &str) -> Result<Vec<DepTree>, IngestError> {
    let mut trees = Vec::new();
    let mut block: Vec<(usize, Token)> = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut last_line = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if !block.is_empty() {
                trees.push(finish_block(std::mem::take(&mut block), sent_id.take(), last_line)?);
            }
            sent_id = None;
            continue;
        }
        last_line = lineno;

        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != FIELDS {
            return Err(IngestError::MalformedLine {
                line: lineno,
                reason: format!("expected {FIELDS} tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[ID];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id.parse().map_err(|_| IngestError::MalformedLine {
            line: lineno,
            reason: format!("invalid token id {id:?}"),
        })?;
        if index == 0 {
            return Err(IngestError::MalformedLine {
                line: lineno,
                reason: "token id must be at least 1".into(),
            });
        }
        let head: usize = fields[HEAD].parse().map_err(|_| IngestError::MalformedLine {
            line: lineno,
            reason: format!("invalid head {:?}", fields[HEAD]),
        })?;
        block.push((lineno, Token::new(index, fields[FORM], head, fields[DEPREL])));
    }
    if !block.is_empty() {
        trees.push(finish_block(block, sent_id, last_line)?);
    }
    Ok(trees)
}

fn finish_block(
    block: Vec<(usize, Token)>,
    sent_id: Option<String>,
    last_line: usize,
) -> Result<DepTree, IngestError> {
    let n = block.len();
    for (pos, (line, tok)) in block.iter().enumerate() {
        if tok.index != pos + 1 {
            return Err(IngestError::MalformedLine {
                line: *line,
                reason: format!("token id {} out of sequence, expected {}", tok.index, pos + 1),
            });
        }
        if tok.head > n {
            return Err(IngestError::HeadOutOfRange {
                line: *line,
                head: tok.head,
                n,
            });
        }
    }
    let line_of = |index: usize| block.get(index.wrapping_sub(1)).map_or(last_line, |b| b.0);
    let tokens: Vec<Token> = block.iter().map(|(_, t)| t.clone()).collect();
    match DepTree::new(tokens) {
        Ok(tree) => Ok(tree.with_sent_id(sent_id)),
        Err(defect) => {
            let line = match defect {
                TreeDefect::SelfLoop { index } | TreeDefect::Cycle { index } => line_of(index),
                TreeDefect::MultipleRoots { second, .. } => line_of(second),
                _ => last_line,
            };
            Err(IngestError::NonTree {
                line,
                reason: defect.to_string(),
            })
        }
    }
}
