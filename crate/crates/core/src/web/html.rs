//! Visible text, heading sections and links of an HTML page.

use scraper::{ElementRef, Html, Node, Selector};
use url::Url;

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "head"];
const BLOCKS: &[&str] = &[
    "p", "div", "li", "ul", "ol", "tr", "table", "section", "article", "header", "footer", "nav", "main",
    "aside", "br", "h1", "h2", "h3", "h4", "h5", "h6", "dt", "dd", "dl", "blockquote", "pre", "form",
    "figure", "figcaption", "hr",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub heading: Option<String>,
    pub body: String,
}

fn is_heading(name: &str) -> bool {
    matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

/// Collapses runs of spaces inside lines and drops empty lines.
fn tidy(raw: &str) -> String {
    raw.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

struct Walker {
    sections: Vec<Section>,
    heading: Option<String>,
    buf: String,
}

impl Walker {
    fn flush(&mut self) {
        let body = tidy(&self.buf);
        if self.heading.is_some() || !body.is_empty() {
            self.sections.push(Section { heading: self.heading.take(), body });
        }
        self.buf.clear();
    }

    fn walk(&mut self, el: ElementRef) {
        for child in el.children() {
            match child.value() {
                Node::Text(t) => self.buf.extend(t.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c })),
                Node::Element(e) => {
                    let name = e.name();
                    if SKIPPED.contains(&name) {
                        continue;
                    }
                    let Some(child_el) = ElementRef::wrap(child) else { continue };
                    if is_heading(name) {
                        self.flush();
                        let text = child_el.text().collect::<String>();
                        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
                        self.heading = (!text.is_empty()).then_some(text);
                        continue;
                    }
                    let block = BLOCKS.contains(&name);
                    if block {
                        self.buf.push('\n');
                    }
                    self.walk(child_el);
                    if block {
                        self.buf.push('\n');
                    } else if matches!(name, "td" | "th") {
                        self.buf.push(' ');
                    }
                }
                _ => {}
            }
        }
    }
}

/// Page text split at `h1`-`h6`; content before the first heading forms a
/// section without heading.
pub fn page_sections(html: &str) -> Vec<Section> {
    let doc = Html::parse_document(html);
    let mut w = Walker { sections: Vec::new(), heading: None, buf: String::new() };
    w.walk(doc.root_element());
    w.flush();
    w.sections
}

/// All visible text of the page.
pub fn visible_text(html: &str) -> String {
    page_sections(html)
        .into_iter()
        .flat_map(|s| s.heading.into_iter().chain((!s.body.is_empty()).then_some(s.body)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Absolute `http(s)` targets of `a[href]`, fragments removed, in document
/// order without repeats.
pub fn links(html: &str, base: &Url) -> Vec<Url> {
    let doc = Html::parse_document(html);
    let sel = Selector::parse("a[href]").expect("static selector");
    let base = doc
        .select(&Selector::parse("base[href]").expect("static selector"))
        .next()
        .and_then(|b| base.join(b.value().attr("href")?).ok())
        .unwrap_or_else(|| base.clone());
    let mut out: Vec<Url> = Vec::new();
    for a in doc.select(&sel) {
        let Some(href) = a.value().attr("href") else { continue };
        let Ok(mut url) = base.join(href.trim()) else { continue };
        if !matches!(url.scheme(), "http" | "https") {
            continue;
        }
        url.set_fragment(None);
        if !out.contains(&url) {
            out.push(url);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_follow_headings() {
        let html = "<html><head><title>T</title><style>p{}</style></head><body>\
            <p>Welcome  to\n the conference.</p><h2>Important Dates</h2><ul><li>Paper due: May 9</li>\
            <li>Notification: June 1</li></ul><script>var x = 1;</script><h2>Chairs</h2><p>Ada Example</p></body></html>";
        let s = page_sections(html);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], Section { heading: None, body: "Welcome to the conference.".into() });
        assert_eq!(s[1].heading.as_deref(), Some("Important Dates"));
        assert_eq!(s[1].body, "Paper due: May 9\nNotification: June 1");
        assert_eq!(s[2].body, "Ada Example");
        assert!(!visible_text(html).contains("var x"));
    }

    #[test]
    fn links_resolve_and_dedupe() {
        let base = Url::parse("https://conf.example.org/2023/").unwrap();
        let html = r#"<a href="cfp.html#top">a</a><a href="cfp.html">b</a><a href="mailto:x@y">m</a><a href="/">r</a>"#;
        let got: Vec<String> = links(html, &base).into_iter().map(String::from).collect();
        assert_eq!(got, ["https://conf.example.org/2023/cfp.html", "https://conf.example.org/"]);
    }
}
