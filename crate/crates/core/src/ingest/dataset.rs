use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::align::{span_from_extents, token_extents};
use super::semeval::{parse_semeval_xml, SemevalDoc};
use super::tree::DepTree;
use super::{parse_conllu, IngestError, PolarityLabel, ReviewInstance, Span};

/// Pairs review sentences with their parses and emits one instance per
/// aspect term.
///
/// Pairing is positional. The CoNLL-U file may hold a parse for every XML
/// sentence or only for the sentences that carry aspect terms. When a parse
/// has a `sent_id` comment it must equal the XML sentence id.
pub fn build_dataset(xml: &str, conllu: &str) -> Result<Vec<ReviewInstance>, IngestError> {
    let doc = parse_semeval_xml(xml)?;
    let trees = parse_conllu(conllu)?;
    build_dataset_from(&doc, trees)
}

pub fn build_dataset_from(doc: &SemevalDoc, trees: Vec<DepTree>) -> Result<Vec<ReviewInstance>, IngestError> {
    let retained = doc.retained_count();
    let pairs: Vec<_> = if trees.len() == doc.total() {
        doc.sentences.iter().zip(trees).collect()
    } else if trees.len() == retained {
        doc.retained().zip(trees).collect()
    } else {
        return Err(IngestError::CountMismatch {
            xml: doc.total(),
            retained,
            conllu: trees.len(),
        });
    };

    let mut out = Vec::new();
    for (position, (sentence, tree)) in pairs.into_iter().enumerate() {
        if let Some(id) = tree.sent_id() {
            if id != sentence.id {
                return Err(IngestError::IdMismatch {
                    position: position + 1,
                    xml: sentence.id.clone(),
                    conllu: id.to_string(),
                });
            }
        }
        if sentence.aspects.is_empty() {
            continue;
        }
        let extents = token_extents(&tree, &sentence.text).map_err(|e| with_id(e, &sentence.id))?;
        for aspect in &sentence.aspects {
            if aspect.to <= aspect.from {
                return Err(IngestError::AlignmentFailure(format!(
                    "sentence {}: empty span for aspect {:?}",
                    sentence.id, aspect.term
                )));
            }
            let span = span_from_extents(&extents, aspect.from, aspect.to)
                .map_err(|e| with_id(e, &sentence.id))?;
            out.push(ReviewInstance {
                sentence_id: sentence.id.clone(),
                tree: tree.clone(),
                aspect_span: span,
                label: aspect.polarity,
                char_span: (aspect.from, aspect.to),
            });
        }
    }
    Ok(out)
}

fn with_id(e: IngestError, id: &str) -> IngestError {
    match e {
        IngestError::AlignmentFailure(msg) => IngestError::AlignmentFailure(format!("sentence {id}: {msg}")),
        other => other,
    }
}

/// Counts reported after ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub sentences_read: usize,
    pub sentences_filtered: usize,
    pub sentences_retained: usize,
    pub instances: usize,
    /// Indexed by [`PolarityLabel::code`].
    pub per_class: [usize; 4],
}

impl DatasetSummary {
    pub fn new(doc: &SemevalDoc, instances: &[ReviewInstance]) -> Self {
        let mut per_class = [0; 4];
        for inst in instances {
            per_class[inst.label.code()] += 1;
        }
        DatasetSummary {
            sentences_read: doc.total(),
            sentences_filtered: doc.total() - doc.retained_count(),
            sentences_retained: doc.retained_count(),
            instances: instances.len(),
            per_class,
        }
    }
}

/// One line of the serialized dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub sentence_id: String,
    pub forms: Vec<String>,
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
    pub aspect_span: [usize; 2],
    pub label: usize,
    pub char_span: [usize; 2],
}

impl From<&ReviewInstance> for InstanceRecord {
    fn from(inst: &ReviewInstance) -> Self {
        InstanceRecord {
            sentence_id: inst.sentence_id.clone(),
            forms: inst.tree.forms().map(str::to_string).collect(),
            heads: inst.tree.heads(),
            deprels: inst.tree.tokens().iter().map(|t| t.deprel.clone()).collect(),
            aspect_span: [inst.aspect_span.start, inst.aspect_span.end],
            label: inst.label.code(),
            char_span: [inst.char_span.0, inst.char_span.1],
        }
    }
}

impl InstanceRecord {
    pub fn into_instance(self, line: usize) -> Result<ReviewInstance, IngestError> {
        let bad = |reason: String| IngestError::BadRecord { line, reason };
        if self.forms.len() != self.heads.len() || self.forms.len() != self.deprels.len() {
            return Err(bad("forms, heads and deprels differ in length".into()));
        }
        let tree = DepTree::from_parts(&self.forms, &self.heads, &self.deprels)
            .map_err(|d| bad(d.to_string()))?;
        let label = PolarityLabel::from_code(self.label)
            .ok_or_else(|| bad(format!("label code {} outside 0..3", self.label)))?;
        let span = Span::new(self.aspect_span[0], self.aspect_span[1]);
        let mut inst = ReviewInstance::new(self.sentence_id, tree, span, label)
            .map_err(|e| bad(e.to_string()))?;
        inst.char_span = (self.char_span[0], self.char_span[1]);
        Ok(inst)
    }
}

/// Writes instances as line-delimited JSON [`InstanceRecord`]s.
pub fn write_dataset<W: Write>(mut w: W, instances: &[ReviewInstance]) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, &InstanceRecord::from(inst))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<ReviewInstance>, crate::Error> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord = serde_json::from_str(&line).map_err(|e| IngestError::BadRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record.into_instance(i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, form: &str, head: usize) -> String {
        format!("{id}\t{form}\t_\t_\t_\t_\t{head}\tdep\t_\t_")
    }

    fn conllu(sentences: &[(&str, &[(&str, usize)])]) -> String {
        let mut s = String::new();
        for (id, toks) in sentences {
            s.push_str(&format!("# sent_id = {id}\n"));
            for (i, (f, h)) in toks.iter().enumerate() {
                s.push_str(&row(i + 1, f, *h));
                s.push('\n');
            }
            s.push('\n');
        }
        s
    }

    const XML: &str = r#"<sentences>
      <sentence id="s1"><text>Great food but the service was dreadful.</text>
        <aspectTerms>
          <aspectTerm term="food" polarity="positive" from="6" to="10"/>
          <aspectTerm term="service" polarity="negative" from="19" to="26"/>
        </aspectTerms></sentence>
      <sentence id="s2"><text>We left.</text></sentence>
      <sentence id="s3"><text>Nice screen resolution.</text>
        <aspectTerms><aspectTerm term="screen resolution" polarity="positive" from="5" to="22"/></aspectTerms>
      </sentence>
    </sentences>"#;

    fn parses(with_s2: bool) -> String {
        let s1: &[(&str, usize)] = &[
            ("Great", 2),
            ("food", 0),
            ("but", 2),
            ("the", 5),
            ("service", 6),
            ("was", 2),
            ("dreadful", 6),
            (".", 2),
        ];
        let s2: &[(&str, usize)] = &[("We", 2), ("left", 0), (".", 2)];
        let s3: &[(&str, usize)] = &[("Nice", 3), ("screen", 3), ("resolution", 0), (".", 3)];
        if with_s2 {
            conllu(&[("s1", s1), ("s2", s2), ("s3", s3)])
        } else {
            conllu(&[("s1", s1), ("s3", s3)])
        }
    }

    #[test]
    fn two_aspects_share_one_tree() {
        let data = build_dataset(XML, &parses(true)).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data[0].tree, data[1].tree);
        assert_eq!(data[0].aspect_span, Span::single(2));
        assert_eq!(data[1].aspect_span, Span::single(5));
        assert_eq!(data[1].label, PolarityLabel::Negative);
        assert_eq!(data[2].aspect_span, Span::new(2, 3));
        assert_eq!(data[2].char_span, (5, 22));
    }

    #[test]
    fn parses_may_cover_only_retained_sentences() {
        let all = build_dataset(XML, &parses(true)).unwrap();
        let retained = build_dataset(XML, &parses(false)).unwrap();
        assert_eq!(all, retained);
    }

    #[test]
    fn empty_inputs() {
        assert!(build_dataset("", "").unwrap().is_empty());
    }

    #[test]
    fn count_mismatch() {
        let one = conllu(&[("s1", &[("x", 0)])]);
        assert_eq!(
            build_dataset(XML, &one).unwrap_err(),
            IngestError::CountMismatch {
                xml: 3,
                retained: 2,
                conllu: 1
            }
        );
    }

    #[test]
    fn sent_id_cross_check() {
        let swapped = parses(true).replace("sent_id = s3", "sent_id = s9");
        assert!(matches!(
            build_dataset(XML, &swapped).unwrap_err(),
            IngestError::IdMismatch { position: 3, .. }
        ));
    }

    #[test]
    fn summary_counts() {
        let doc = parse_semeval_xml(XML).unwrap();
        let data = build_dataset(XML, &parses(true)).unwrap();
        let s = DatasetSummary::new(&doc, &data);
        assert_eq!(s.sentences_read, 3);
        assert_eq!(s.sentences_filtered, 1);
        assert_eq!(s.sentences_retained, 2);
        assert_eq!(s.instances, 3);
        assert_eq!(s.per_class, [2, 1, 0, 0]);
    }

    #[test]
    fn records_round_trip() {
        let data = build_dataset(XML, &parses(true)).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 3);
        let back = read_dataset(buf.as_slice()).unwrap();
        // sent_id comments are not part of the record
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.tree.tokens(), b.tree.tokens());
            assert_eq!(a.aspect_span, b.aspect_span);
            assert_eq!(a.label, b.label);
            assert_eq!(a.char_span, b.char_span);
            assert_eq!(a.sentence_id, b.sentence_id);
        }
    }

    #[test]
    fn bad_record_reports_line() {
        let text = "\n{\"sentence_id\":\"x\",\"forms\":[\"a\"],\"heads\":[1],\"deprels\":[\"d\"],\"aspect_span\":[1,1],\"label\":0,\"char_span\":[0,1]}\n";
        let err = read_dataset(text.as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Ingest(IngestError::BadRecord { line: 2, .. })
        ));
    }
}
