use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{IngestError, PolarityLabel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AspectTerm {
    pub term: String,
    pub polarity: PolarityLabel,
    /// Character (not byte) offsets into the sentence text, `[from, to)`.
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XmlSentence {
    pub id: String,
    pub text: String,
    pub aspects: Vec<AspectTerm>,
}

/// Every `<sentence>` of a review file, in document order.
///
/// Sentences without aspect terms are kept here so that callers can report
/// raw counts; [`SemevalDoc::retained`] applies the aspect filter.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SemevalDoc {
    pub sentences: Vec<XmlSentence>,
}

impl SemevalDoc {
    pub fn total(&self) -> usize {
        self.sentences.len()
    }

    pub fn retained(&self) -> impl Iterator<Item = &XmlSentence> {
        self.sentences.iter().filter(|s| !s.aspects.is_empty())
    }

    pub fn retained_count(&self) -> usize {
        self.retained().count()
    }

    pub fn aspect_count(&self) -> usize {
        self.sentences.iter().map(|s| s.aspects.len()).sum()
    }
}

#[derive(Default)]
struct Partial {
    id: String,
    text: Option<String>,
    aspects: Vec<AspectTerm>,
}

/// Parses a SemEval 2014 task 4 style review file.
pub fn parse_semeval_xml(text: &str) -> Result<SemevalDoc, IngestError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);

    let mut doc = SemevalDoc::default();
    let mut current: Option<Partial> = None;
    let mut in_text = false;
    let mut text_buf = String::new();

    loop {
        let event = reader.read_event().map_err(|e| {
            IngestError::XmlSyntax(format!("at byte {}: {e}", reader.buffer_position()))
        })?;
        match event {
            Event::Start(e) => match e.local_name().as_ref() {
                b"sentence" => {
                    current = Some(Partial {
                        id: attr(&e, "id")?.unwrap_or_default(),
                        ..Partial::default()
                    });
                }
                b"text" if current.is_some() => {
                    in_text = true;
                    text_buf.clear();
                }
                b"aspectTerm" => push_aspect(&mut current, &e)?,
                _ => {}
            },
            Event::Empty(e) => match e.local_name().as_ref() {
                b"aspectTerm" => push_aspect(&mut current, &e)?,
                b"text" => {
                    if let Some(cur) = current.as_mut() {
                        cur.text = Some(String::new());
                    }
                }
                b"sentence" => doc.sentences.push(XmlSentence {
                    id: attr(&e, "id")?.unwrap_or_default(),
                    text: String::new(),
                    aspects: Vec::new(),
                }),
                _ => {}
            },
            Event::Text(t) if in_text => {
                let s = t
                    .unescape()
                    .map_err(|e| IngestError::XmlSyntax(e.to_string()))?;
                text_buf.push_str(&s);
            }
            Event::CData(t) if in_text => {
                text_buf.push_str(&String::from_utf8_lossy(&t.into_inner()));
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"text" if in_text => {
                    in_text = false;
                    if let Some(cur) = current.as_mut() {
                        cur.text = Some(std::mem::take(&mut text_buf));
                    }
                }
                b"sentence" => {
                    if let Some(cur) = current.take() {
                        doc.sentences.push(finish_sentence(cur)?);
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    if current.is_some() {
        return Err(IngestError::XmlSyntax("unterminated <sentence> element".into()));
    }
    Ok(doc)
}

fn finish_sentence(p: Partial) -> Result<XmlSentence, IngestError> {
    let text = p.text.unwrap_or_default();
    let len = text.chars().count();
    for a in &p.aspects {
        if a.from > a.to || a.to > len {
            return Err(IngestError::SpanOutOfBounds {
                sentence_id: p.id.clone(),
                from: a.from,
                to: a.to,
                len,
            });
        }
    }
    Ok(XmlSentence {
        id: p.id,
        text,
        aspects: p.aspects,
    })
}

fn push_aspect(current: &mut Option<Partial>, e: &BytesStart<'_>) -> Result<(), IngestError> {
    let Some(cur) = current.as_mut() else {
        return Err(IngestError::XmlSyntax("<aspectTerm> outside <sentence>".into()));
    };
    let required = |name: &str| -> Result<String, IngestError> {
        attr(e, name)?.ok_or_else(|| {
            IngestError::XmlSyntax(format!("sentence {}: <aspectTerm> lacks {name:?}", cur.id))
        })
    };
    let offset = |name: &str| -> Result<usize, IngestError> {
        let v = required(name)?;
        v.trim().parse().map_err(|_| {
            IngestError::XmlSyntax(format!("sentence {}: bad {name} offset {v:?}", cur.id))
        })
    };
    let term = AspectTerm {
        term: required("term")?,
        polarity: required("polarity")?.parse()?,
        from: offset("from")?,
        to: offset("to")?,
    };
    cur.aspects.push(term);
    Ok(())
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<Option<String>, IngestError> {
    for a in e.attributes() {
        let a = a.map_err(|err| IngestError::XmlSyntax(err.to_string()))?;
        if a.key.local_name().as_ref() == name.as_bytes() {
            let v = a
                .unescape_value()
                .map_err(|err| IngestError::XmlSyntax(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SNIPPET: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
    <sentence id="3121">
        <text>But the staff was so horrible to us.</text>
        <aspectTerms>
            <aspectTerm term="staff" polarity="negative" from="8" to="13"/>
        </aspectTerms>
        <aspectCategories>
            <aspectCategory category="service" polarity="negative"/>
        </aspectCategories>
    </sentence>
    <sentence id="2777">
        <text>To be completely fair, the only redeeming factor was the food.</text>
    </sentence>
    <sentence id="1634">
        <text>The food is uniformly exceptional &amp; the kitchen too.</text>
        <aspectTerms>
            <aspectTerm term="food" polarity="Positive" from="4" to="8"/>
            <aspectTerm term="kitchen" polarity="conflict" from="40" to="47"/>
        </aspectTerms>
    </sentence>
</sentences>"#;

    #[test]
    fn parses_snippet_and_filters() {
        let doc = parse_semeval_xml(SNIPPET).unwrap();
        assert_eq!(doc.total(), 3);
        assert_eq!(doc.retained_count(), 2);
        assert_eq!(doc.aspect_count(), 3);
        let ids: Vec<_> = doc.retained().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["3121", "1634"]);

        let s = &doc.sentences[2];
        assert_eq!(s.text, "The food is uniformly exceptional & the kitchen too.");
        assert_eq!(s.aspects[0].polarity, PolarityLabel::Positive);
        assert_eq!(s.aspects[1].polarity, PolarityLabel::Conflict);
        let kitchen: String = s.text.chars().skip(40).take(7).collect();
        assert_eq!(kitchen, "kitchen");
    }

    #[test]
    fn unknown_polarity() {
        let xml = r#"<sentences><sentence id="1"><text>a b</text><aspectTerms>
            <aspectTerm term="a" polarity="mixed" from="0" to="1"/></aspectTerms></sentence></sentences>"#;
        assert_eq!(
            parse_semeval_xml(xml).unwrap_err(),
            IngestError::UnknownPolarity("mixed".into())
        );
    }

    #[test]
    fn span_out_of_bounds() {
        let xml = r#"<sentences><sentence id="1"><text>a b</text><aspectTerms>
            <aspectTerm term="a" polarity="neutral" from="2" to="9"/></aspectTerms></sentence></sentences>"#;
        assert!(matches!(
            parse_semeval_xml(xml).unwrap_err(),
            IngestError::SpanOutOfBounds { to: 9, len: 3, .. }
        ));
    }

    #[test]
    fn syntax_error() {
        let xml = r#"<sentences><sentence id="1"><text>a b</txt></sentence></sentences>"#;
        assert!(matches!(
            parse_semeval_xml(xml).unwrap_err(),
            IngestError::XmlSyntax(_)
        ));
    }

    #[test]
    fn offsets_count_characters_not_bytes() {
        let xml = r#"<sentences><sentence id="1"><text>café crème</text><aspectTerms>
            <aspectTerm term="crème" polarity="positive" from="5" to="10"/></aspectTerms></sentence></sentences>"#;
        let doc = parse_semeval_xml(xml).unwrap();
        assert_eq!(doc.sentences[0].aspects[0].to, 10);
    }

    #[test]
    fn empty_document() {
        assert_eq!(parse_semeval_xml("").unwrap().total(), 0);
        assert_eq!(parse_semeval_xml("<sentences/>").unwrap().total(), 0);
    }
}
