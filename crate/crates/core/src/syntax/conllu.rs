//! CoNLL-U reader. Only FORM and HEAD are used.

use super::sentence::{validate_heads, Sentence};
use crate::error::{Error, Result};

/// Parses CoNLL-U text into sentences.
///
/// Style labels are read from a `# style = N` comment when present and
/// default to 0. Multiword-token ranges (`1-2`) and empty nodes (`1.1`) are
/// skipped.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut heads: Vec<Option<usize>> = Vec::new();
    let mut style = 0;
    let mut start_line = 1;

    let mut flush = |tokens: &mut Vec<String>,
                     heads: &mut Vec<Option<usize>>,
                     style: &mut usize,
                     start_line: usize|
     -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        validate_heads(heads).map_err(|e| Error::Parse {
            line: start_line,
            msg: e.to_string(),
        })?;
        let s = Sentence::new(std::mem::take(tokens), *style)?
            .with_heads(std::mem::take(heads))?;
        out.push(s);
        *style = 0;
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut heads, &mut style, start_line)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                if k.trim() == "style" {
                    style = v.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad style label `{}`", v.trim()),
                    })?;
                    if style > 1 {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("style label {style} not in {{0, 1}}"),
                        });
                    }
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if tokens.is_empty() {
            start_line = line_no;
        }
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-integer HEAD `{}`", cols[6]),
        })?;
        tokens.push(cols[1].to_lowercase());
        heads.push(head.checked_sub(1));
    }
    flush(&mut tokens, &mut heads, &mut style, start_line)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, form: &str, head: &str) -> String {
        format!("{id}\t{form}\t_\t_\t_\t_\t{head}\t_\t_\t_")
    }

    #[test]
    fn two_token_sentence() {
        let text = format!("{}\n{}\n", row("1", "Roses", "2"), row("2", "bloom", "0"));
        let s = parse_conllu(&text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, vec!["roses", "bloom"]);
        assert_eq!(s[0].dep_heads, Some(vec![Some(1), None]));
    }

    #[test]
    fn empty_file() {
        assert!(parse_conllu("").unwrap().is_empty());
    }

    #[test]
    fn nine_columns() {
        let text = format!("{}\n1\ta\t_\t_\t_\t_\t0\t_\t_\n", row("1", "x", "0"));
        let err = parse_conllu(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn non_integer_head() {
        let err = parse_conllu(&row("1", "x", "root")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn skips_ranges_and_empty_nodes_and_reads_style() {
        let text = [
            "# sent_id = 1".to_string(),
            "# style = 1".to_string(),
            row("1-2", "dont", "_"),
            row("1", "do", "0"),
            row("2", "n't", "1"),
            row("2.1", "x", "_"),
            String::new(),
            row("1", "ok", "0"),
        ]
        .join("\n");
        let s = parse_conllu(&text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tokens, vec!["do", "n't"]);
        assert_eq!(s[0].style, 1);
        assert_eq!(s[1].style, 0);
    }

    #[test]
    fn cyclic_heads_rejected() {
        let text = format!("{}\n{}\n", row("1", "a", "2"), row("2", "b", "1"));
        assert!(parse_conllu(&text).is_err());
    }
}
