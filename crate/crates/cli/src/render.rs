use std::collections::HashMap;
use std::fmt::Write as _;

use semdiff_core::document::{LabeledPair, Side, TokenizedDocument};
use semdiff_core::{Error, Result};

const HEAD: &str = r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>semdiff word scores</title>
<style>
body { font-family: sans-serif; max-width: 60em; margin: 2em auto; }
.pair { border: 1px solid #ccc; border-radius: 4px; padding: 0.5em 1em; margin-bottom: 1em; }
.pair h2 { font-size: 0.85em; font-weight: normal; color: #666; margin: 0.2em 0; }
.side { line-height: 1.9; margin: 0.4em 0; }
.w { padding: 0.1em 0.15em; border-radius: 3px; }
</style>
</head>
<body>
"#;

/// Highlight opacity of a word: 0 for scores ≤ 0, 1 for scores ≥ 1, linear in between.
pub fn heat_alpha(score: f64) -> f64 {
    if score > 0.0 {
        score.min(1.0)
    } else {
        0.0
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn render_side(
    out: &mut String,
    doc: &TokenizedDocument,
    scores: Option<&Vec<f64>>,
    pair_id: &str,
    side: Side,
) -> Result<()> {
    if let Some(s) = scores {
        if s.len() != doc.words.len() {
            return Err(Error::Contract(format!(
                "{pair_id} side {side}: {} word scores for {} words",
                s.len(),
                doc.words.len()
            )));
        }
    }
    let _ = write!(out, "<p class=\"side\" lang=\"{}\">", escape(&doc.language));
    for (w, word) in doc.words.iter().enumerate() {
        if w > 0 {
            out.push(' ');
        }
        let surface = escape(&word.surface);
        match scores {
            Some(s) if !doc.word_is_punctuation(w) => {
                let _ = write!(
                    out,
                    "<span class=\"w\" style=\"background-color: rgba(230, 60, 40, {:.3})\" title=\"{:.4}\">{surface}</span>",
                    heat_alpha(s[w]),
                    s[w]
                );
            }
            _ => {
                let _ = write!(out, "<span class=\"w\">{surface}</span>");
            }
        }
    }
    out.push_str("</p>\n");
    Ok(())
}

/// One block per pair with both sides; every non-punctuation word of a scored
/// side is shaded by [`heat_alpha`] of its score.
pub fn render_html(pairs: &[LabeledPair], scores: &HashMap<(String, Side), Vec<f64>>) -> Result<String> {
    let mut out = String::from(HEAD);
    for pair in pairs {
        let _ = writeln!(out, "<div class=\"pair\">\n<h2>{}</h2>", escape(&pair.pair_id));
        for side in [Side::A, Side::B] {
            let s = scores.get(&(pair.pair_id.clone(), side));
            render_side(&mut out, pair.side(side), s, &pair.pair_id, side)?;
        }
        out.push_str("</div>\n");
    }
    out.push_str("</body>\n</html>\n");
    Ok(out)
}
