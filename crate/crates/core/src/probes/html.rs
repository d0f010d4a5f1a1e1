//! Just enough HTML tokenizing to read `<link>` and `<meta>` attributes.

use std::sync::LazyLock;

use regex::Regex;

static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static ATTR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"([A-Za-z_:][-A-Za-z0-9_:.]*)(?:\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'=<>`]+)))?"#).unwrap());

pub(crate) type Attrs = Vec<(String, String)>;

pub(crate) fn strip_comments(text: &str) -> String {
    COMMENT.replace_all(text, "").into_owned()
}

fn decode_entities(value: &str) -> String {
    value
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

/// Attribute lists of every `<name ...>` start tag, in document order.
pub(crate) fn tags(text: &str, name: &str) -> Vec<Attrs> {
    let clean = strip_comments(text);
    let tag = Regex::new(&format!(r"(?i)<{}\b([^>]*)>", regex::escape(name))).unwrap();
    tag.captures_iter(&clean)
        .map(|c| {
            ATTR.captures_iter(&c[1])
                .map(|a| {
                    let value = a.get(2).or(a.get(3)).or(a.get(4)).map_or("", |m| m.as_str());
                    (a[1].to_ascii_lowercase(), decode_entities(value))
                })
                .collect()
        })
        .collect()
}

pub(crate) fn attr<'a>(attrs: &'a Attrs, name: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}
