use std::fmt::Write;

use super::AttributionReport;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
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

/// Background colour for a score on a diverging scale symmetric about 0:
/// green for positive, red for negative, opacity `|score| / max_abs`.
fn colour(score: f64, max_abs: f64) -> String {
    let a = if max_abs > 0.0 { (score.abs() / max_abs).min(1.0) } else { 0.0 };
    let (r, g, b) = if score >= 0.0 { (26, 150, 65) } else { (215, 25, 28) };
    format!("rgba({r},{g},{b},{a:.3})")
}

/// Self-contained heat-map page, one block per report. Each block is scaled
/// by its own maximum `|score|`.
pub fn render_html(reports: &[AttributionReport], class_names: &[&str]) -> String {
    let name = |c: usize| class_names.get(c).map_or_else(|| c.to_string(), |s| s.to_string());
    let mut out = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Token attributions</title>\n\
         <style>body{font-family:sans-serif;max-width:60em;margin:auto}\
         .tok{padding:1px 2px;border-radius:3px;line-height:1.9}\
         .meta{color:#555;font-size:0.9em}</style></head><body>\n",
    );
    for r in reports {
        let max_abs = r.scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        out.push_str("<section>\n");
        if let Some(id) = &r.record_id {
            let _ = writeln!(out, "<h3>{}</h3>", escape(id));
        }
        let _ = writeln!(
            out,
            "<p class=\"meta\">target {} | predicted {} | F(x) {:.4} | F(baseline) {:.4} | completeness gap {:.2e}</p>",
            escape(&name(r.target_class)),
            escape(&name(r.predicted_class)),
            r.target_logit,
            r.baseline_logit,
            r.completeness_gap
        );
        out.push_str("<p>");
        for (t, s) in r.tokens.iter().zip(&r.scores) {
            let _ = write!(
                out,
                "<span class=\"tok\" style=\"background:{}\" title=\"{:.4}\">{}</span> ",
                colour(*s, max_abs),
                s,
                escape(t)
            );
        }
        out.push_str("</p>\n</section>\n");
    }
    out.push_str("</body></html>\n");
    out
}
